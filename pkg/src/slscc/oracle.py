"""Reference solvers used to cross-check the exact methods."""

from __future__ import annotations

import itertools
import math
from typing import Any, Sequence

import numpy as np

from .bnb import BnbConfig, branch_and_bound
from .errors import EmptyJz, Infeasible, InfeasiblePattern, SlsccError, TooLarge
from .formulations import build_de, build_s_extended, build_s_lp, y_name, z_name
from .lp_core import Status, fix_and_solve, solve_lp
from .model import PROB_TOL, Instance, PlanSolution, check_feasible, check_ww, cumulants
from .subproblem import closed_form_general, dp_value, enumerate_family, opt_star_enumeration

MAX_T = 12
MAX_M = 12


def _all_setups(T: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=T)), dtype=np.int64).reshape(-1, T)


def _pattern_costs(inst: Instance, J: list[int], Y: np.ndarray) -> np.ndarray:
    """Cost of the zero-inventory plan for kept set ``J`` under every row of ``Y``.

    Infeasible patterns (demand before the first setup) get ``inf``. This is
    the demand-only closed form evaluated in bulk; it does not go through the
    subproblem transform or the recursion.
    """
    T, p = inst.T, inst.p
    D = cumulants(inst).D
    top = D[J].max(axis=0) if inst.n2 else np.zeros(0)
    need = np.concatenate([np.cumsum(inst.d), inst.d.sum() + top])  # cumulative need up to t
    P = np.concatenate([[0.0], need])  # P[t] = need through period t
    n = Y.shape[0]
    # psi[:, i] = first setup strictly after period i (i = 0..T), T + 1 when none.
    psi = np.full((n, T + 1), T + 1, dtype=np.int64)
    for i in range(T - 1, -1, -1):
        psi[:, i] = np.where(Y[:, i] == 1, i + 1, psi[:, i + 1] if i + 1 <= T else T + 1)
    # psi[:, i] now holds the first setup at or after period i+1, i.e. strictly after i.
    reach = P[psi - 1]  # need through psi(i) - 1
    cost = Y @ inst.beta
    infeasible = reach[:, 0] > 0
    for i in range(1, T + 1):
        produced = Y[:, i - 1] * (reach[:, i] - P[i - 1])
        cost = cost + inst.alpha[i - 1] * produced
        if i <= p:
            cost = cost + inst.h[i - 1] * (reach[:, i] - P[i])
        else:
            level = reach[:, i] - P[p]  # second-stage supply through period i
            for j in J:
                cost = cost + inst.probs[j] * inst.h[i - 1] * (level - D[j, i - p - 1])
    return np.where(infeasible, np.inf, cost)


def brute_force(inst: Instance) -> PlanSolution:
    """Exhaustive search over binary ``(z, y)``; ties keep the lexicographically first."""
    if inst.T > MAX_T or inst.m > MAX_M:
        raise TooLarge(f"brute force is limited to T <= {MAX_T} and m <= {MAX_M}")
    Y = _all_setups(inst.T)
    best_cost, best_zy = math.inf, None
    for z in itertools.product((0, 1), repeat=inst.m):
        if float(inst.probs @ np.array(z)) > inst.epsilon + PROB_TOL:
            continue
        J = [j for j in range(inst.m) if not z[j]]
        if not J:
            continue
        costs = _pattern_costs(inst, J, Y)
        k = int(np.argmin(costs))
        if not np.isfinite(costs[k]):
            continue
        if best_zy is None or costs[k] < best_cost - 1e-12 * (1 + abs(best_cost)):
            best_cost, best_zy = float(costs[k]), (z, Y[k])
    if best_zy is None:
        raise Infeasible("no admissible indicator vector")
    return closed_form_general(inst, best_zy[0], best_zy[1])


def brute_force_continuous_check(inst: Instance, y: Sequence[int], z: Sequence[int]) -> float:
    """Optimal cost of the deterministic equivalent with ``(y, z)`` pinned."""
    fix = {y_name(i + 1): float(v) for i, v in enumerate(y)}
    fix.update({z_name(j): float(v) for j, v in enumerate(z)})
    res = fix_and_solve(build_de(inst), fix)
    if res.status is not Status.OPTIMAL:
        raise Infeasible(f"pinned equivalent is {res.status.value}")
    return res.objective


def classic_ww(dem: Sequence[float], alpha: Sequence[float], beta: Sequence[float],
               h: Sequence[float]) -> tuple[float, list[int]]:
    """Textbook single-item lot sizing, solved backward over the next setup.

    Minimizes production, setup and end-of-period holding cost with all
    demand met from stock. Returns ``(cost, y)``.
    """
    T = len(dem)
    dem = [float(v) for v in dem]
    G = [math.inf] * (T + 2)  # G[k]: best cost from a setup at k onward (1-based)
    nxt = [0] * (T + 2)
    G[T + 1] = 0.0
    for k in range(T, 0, -1):
        for l in range(k + 1, T + 2):  # next setup at l (T + 1 = none)
            batch = sum(dem[k - 1 : l - 1])
            hold = sum(h[i - 1] * sum(dem[i : l - 1]) for i in range(k, l - 1))
            cost = beta[k - 1] + alpha[k - 1] * batch + hold + G[l]
            if cost < G[k]:
                G[k], nxt[k] = cost, l
    best, first = math.inf, None
    for k in range(1, T + 2):
        if sum(dem[: k - 1]) > 0:
            break
        if G[k] < best:
            best, first = G[k], k
    y = [0] * T
    k = first
    while k is not None and k <= T:
        y[k - 1] = 1
        k = nxt[k]
    return best, y


def _gap(a: float | None, b: float | None) -> float:
    if a is None or b is None:
        return 0.0
    return abs(a - b)


def compare_report(inst: Instance, jobs: int = 1, tol: float = 1e-6) -> dict[str, Any]:
    """Run every solver on ``inst`` and report agreement as plain data."""
    report: dict[str, Any] = {
        "instance": {"T": inst.T, "p": inst.p, "m": inst.m, "epsilon": inst.epsilon},
        "assumption_holds": check_ww(inst).holds,
        "skipped": [],
        "feasibility_failures": [],
    }
    bf = brute_force(inst)
    report["brute_force"] = bf.objective
    failures = report["feasibility_failures"]
    failures += [f"brute_force: {v}" for v in check_feasible(inst, bf)]
    gaps = []
    if report["assumption_holds"]:
        enum = opt_star_enumeration(inst)
        report["enumeration"] = enum.objective
        failures += [f"enumeration: {v}" for v in check_feasible(inst, enum)]
        res = branch_and_bound(inst, BnbConfig(delta=0.0, jobs=jobs))
        report["bnb"] = {
            "objective": res.solution.objective,
            "lower_bound": res.lower_bound,
            "upper_bound": res.upper_bound,
            "nodes": res.nodes_expanded,
            "status": res.status.value,
        }
        failures += [f"bnb: {v}" for v in check_feasible(inst, res.solution)]
        gaps += [_gap(enum.objective, bf.objective), _gap(res.solution.objective, bf.objective)]
        per_set = []
        for S in enumerate_family(inst, minimal_only=False):
            dp = dp_value(inst, S)
            lp = solve_lp(build_s_lp(inst, S)).objective
            ext = solve_lp(build_s_extended(inst, S)).objective
            gap = max(_gap(dp, lp), _gap(dp, ext))
            gaps.append(gap)
            per_set.append({"S": list(S), "dp": dp, "lp": lp, "extended": ext, "gap": gap})
        report["per_set"] = per_set
    else:
        report["skipped"] = ["enumeration", "bnb", "per_set"]
    report["max_gap"] = max(gaps, default=0.0)
    report["agree"] = report["max_gap"] <= tol and not failures
    return report
