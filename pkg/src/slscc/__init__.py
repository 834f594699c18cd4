"""Exact solvers for two-stage lot sizing with a joint chance constraint."""

from .bnb import BnbConfig, BnbResult, BnbStatus, branch_and_bound
from .errors import *  # noqa: F401,F403
from .formulations import (
    NodeConstraintSet,
    build_c_subproblem,
    build_de,
    build_nslscc,
    build_s_extended,
    build_s_lp,
    subproblem_costs,
)
from .lp_core import LpResult, Status, check_tu, fix_and_solve, solve_lp
from .lpmodel import LinearModel, export_model, loads_lp
from .model import (
    Instance,
    PlanSolution,
    check_feasible,
    check_ww,
    cumulants,
    evaluate,
    load_instance,
    make_instance,
    random_instance,
    validate_instance,
)
from .oracle import brute_force, brute_force_continuous_check, classic_ww, compare_report
from .subproblem import (
    closed_form,
    closed_form_general,
    delta_profile,
    enumerate_family,
    kappa,
    opt_star_enumeration,
    solve_s_dp,
)

__version__ = "0.1.0"
