"""Model builders: deterministic equivalent, the inventory-bound
reformulation, occurred-set subproblems (compact and extended) and the
node subproblem used by branch and bound.

Variable names use 1-based periods and scenarios: ``s[i]``, ``x[i]``,
``sj[j,i]``, ``y[i]``, ``z[j]``, ``u[i,t]``. Variables are declared in the
order s, x, sj (row-major by scenario then period), y, z, u.

Every lower-bound family on end-of-period stock ``s_i`` is also generated for
``i = 0`` with ``s_0 = 0`` (family ``cover``). Those rows force a setup no
later than the first period with positive demand; without them the bound
families leave early demand uncovered.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import EmptyJ1, InfeasibleNode
from .lpmodel import Expr, LinearModel
from .model import (
    PROB_TOL,
    Instance,
    check_ww,
    cumulants,
    delta_profile,
    normalize_set,
    set_mass,
)


# ---------------------------------------------------------------------------
# Names


def s_name(i: int) -> str:
    return f"s[{i}]"


def x_name(i: int) -> str:
    return f"x[{i}]"


def sj_name(j: int, i: int) -> str:
    """Second-stage stock of 0-based scenario ``j`` at 1-based period ``i``."""
    return f"sj[{j + 1},{i}]"


def y_name(i: int) -> str:
    return f"y[{i}]"


def z_name(j: int) -> str:
    return f"z[{j + 1}]"


def u_name(i: int, t: int) -> str:
    return f"u[{i},{t}]"


# ---------------------------------------------------------------------------
# Node constraint sets


@dataclass(frozen=True)
class NodeConstraintSet:
    """Indicator fixings of a search node: ``J1`` kept (z=0), ``J2`` dropped (z=1)."""

    J1: frozenset[int] = frozenset()
    J2: frozenset[int] = frozenset()
    creation_order: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "J1", frozenset(int(j) for j in self.J1))
        object.__setattr__(self, "J2", frozenset(int(j) for j in self.J2))
        if self.J1 & self.J2:
            raise ValueError("a scenario cannot be both kept and dropped")

    def free(self, m: int) -> list[int]:
        return [j for j in range(m) if j not in self.J1 and j not in self.J2]

    def fixed(self) -> int:
        return len(self.J1) + len(self.J2)

    def with_fix(self, j: int, value: int, creation_order: int) -> "NodeConstraintSet":
        if value == 0:
            return NodeConstraintSet(self.J1 | {j}, self.J2, creation_order)
        return NodeConstraintSet(self.J1, self.J2 | {j}, creation_order)


# ---------------------------------------------------------------------------
# Cost transforms


@dataclass(frozen=True, eq=False)
class SubproblemCosts:
    """Objective weights after eliminating production for an occurred set.

    ``h_prime`` has p entries, ``hJS`` is m x (T - p) (rows for scenarios
    outside the set carry plain ``p_j h_i``), ``r`` has T entries.
    """

    S: tuple[int, ...]
    h_prime: np.ndarray
    hJS: np.ndarray
    r: np.ndarray
    constant: float


def subproblem_costs(inst: Instance, S: Iterable[int]) -> SubproblemCosts:
    """Weights for the set ``S`` (which need not meet the service level)."""
    S = normalize_set(S, inst.m)
    T, p = inst.T, inst.p
    alpha = np.append(inst.alpha, 0.0)  # alpha_{T+1} = 0
    mass = set_mass(inst, S)
    h_prime = np.array([alpha[i] + inst.h[i] - alpha[i + 1] for i in range(p)])
    hJS = np.outer(inst.probs, inst.h[p:]) if inst.n2 else np.zeros((inst.m, 0))
    for j in S:
        for c in range(inst.n2):
            i = p + c  # 0-based period index
            hJS[j, c] = inst.probs[j] / mass * (alpha[i] - alpha[i + 1]) + inst.probs[j] * inst.h[i]
    r = np.empty(T)
    r[:p] = inst.alpha[:p] * inst.d
    sel = list(S)
    weighted = inst.probs[sel] @ inst.demands[sel] / mass if inst.n2 else np.zeros(0)
    r[p:] = inst.alpha[p:] * weighted
    prof = delta_profile(inst, S)
    D = cumulants(inst).D
    constant = float(r.sum())
    for j in S:
        constant += float(hJS[j] @ (prof.dS - D[j]))
    return SubproblemCosts(S, h_prime, hJS, r, constant)


# ---------------------------------------------------------------------------
# Row helpers


def _carry(expr: Expr, amount: float, k_from: int, t: int, zs: Iterable[str] = (),
           base: float = 1.0) -> None:
    """expr += amount * (base - sum_{k=k_from..t} y_k - sum zs)."""
    if amount == 0.0:
        return
    expr.add_const(amount * base)
    for k in range(k_from, t + 1):
        expr.add(y_name(k), -amount)
    for zn in zs:
        expr.add(zn, -amount)


def _stock(i: int, p: int, j: int | None = None) -> Expr:
    """End-of-period stock variable as an expression (``s_0 = 0``)."""
    e = Expr()
    if j is not None and i > p:
        e.add(sj_name(j, i), 1.0)
    elif i >= 1:
        e.add(s_name(i), 1.0)
    return e


def _first_stage_rows(model: LinearModel, inst: Instance, dem2: np.ndarray,
                      ks: Iterable[int] = (), z_of: str | None = None,
                      tag: str = "", det_rows: bool = True) -> None:
    """Lower bounds on s_i (i in [0, p]) from carrying demand up to nu.

    ``dem2`` is the second-stage stream carried past p. When ``z_of`` is set
    the second-stage terms are reduced by that indicator.
    """
    p, T = inst.p, inst.T
    for i in range(0, p + 1):
        fam_det = "cover" if i == 0 else "first_stage"
        fam_scen = "cover" if i == 0 else "first_stage_scen" + tag
        head = Expr()
        for t in range(i + 1, p + 1):
            _carry(head, inst.d[t - 1], i + 1, t)
            if det_rows:
                model.add_ge(f"fs{tag}[{i},{t}]", fam_det, _stock(i, p), _copy(head))
        zs = (z_of,) if z_of else ()
        rhs = _copy(head)
        for nu in range(p + 1, T + 1):
            _carry(rhs, dem2[nu - p - 1], i + 1, nu, zs)
            model.add_ge(f"fss{tag}[{i},{nu}]", fam_scen, _stock(i, p), _copy(rhs))


def _copy(e: Expr) -> Expr:
    out = Expr()
    out.coefs.update(e.coefs)
    out.const = e.const
    return out


# ---------------------------------------------------------------------------
# Deterministic equivalent


def big_m(inst: Instance) -> np.ndarray:
    D = cumulants(inst).D
    top = D[:, -1].max() if inst.n2 else 0.0
    M = np.empty(inst.T)
    suffix = cumulants(inst).first_stage_suffix
    M[: inst.p] = suffix + top
    for c in range(inst.n2):
        prev = D[:, c - 1] if c > 0 else np.zeros(inst.m)
        M[inst.p + c] = float((D[:, -1] - prev).max())
    return M


def stock_big_m(inst: Instance) -> np.ndarray:
    D = cumulants(inst).D
    if not inst.n2:
        return np.zeros(inst.m)
    return D[:, -1].max() + D[:, -1]


def _declare_z(model: LinearModel, inst: Instance, fixed: dict[int, int] | None = None) -> None:
    fixed = fixed or {}
    for j in range(inst.m):
        if j in fixed:
            model.add_var(z_name(j), fixed[j], fixed[j], integer=True)
        else:
            ub = 0.0 if inst.probs[j] > inst.epsilon + PROB_TOL else 1.0
            model.add_var(z_name(j), 0.0, ub, integer=True)


def build_de(inst: Instance) -> LinearModel:
    """Linearized deterministic equivalent with big-M setup and stock rows."""
    T, p, m = inst.T, inst.p, inst.m
    D = cumulants(inst).D
    model = LinearModel(name="de")
    for i in range(1, p + 1):
        model.add_var(s_name(i), obj=inst.h[i - 1])
    for i in range(1, T + 1):
        model.add_var(x_name(i), obj=inst.alpha[i - 1])
    for j in range(m):
        for i in range(p + 1, T + 1):
            model.add_var(sj_name(j, i), obj=inst.probs[j] * inst.h[i - 1])
    for i in range(1, T + 1):
        model.add_var(y_name(i), 0.0, 1.0, integer=True, obj=inst.beta[i - 1])
    _declare_z(model, inst)

    for i in range(1, p + 1):
        coefs = {x_name(i): 1.0, s_name(i): -1.0}
        if i > 1:
            coefs[s_name(i - 1)] = 1.0
        model.add_row(f"bal[{i}]", "balance", coefs, "=", inst.d[i - 1])
    for j in range(m):
        for i in range(p + 1, T + 1):
            coefs = {s_name(p): 1.0, z_name(j): D[j, i - p - 1]}
            coefs.update({x_name(t): 1.0 for t in range(p + 1, i + 1)})
            model.add_row(f"dem[{j + 1},{i}]", "demand", coefs, ">=", D[j, i - p - 1])
    model.add_row("chance", "chance", {z_name(j): inst.probs[j] for j in range(m)},
                  "<=", inst.epsilon)
    Mp = stock_big_m(inst)
    for j in range(m):
        for i in range(p + 1, T + 1):
            coefs = {sj_name(j, i): 1.0, s_name(p): -1.0, z_name(j): Mp[j]}
            coefs.update({x_name(t): -1.0 for t in range(p + 1, i + 1)})
            model.add_row(f"stk[{j + 1},{i}]", "stock", coefs, ">=", -D[j, i - p - 1])
    M = big_m(inst)
    for i in range(1, T + 1):
        model.add_row(f"setup[{i}]", "setup", {x_name(i): 1.0, y_name(i): -M[i - 1]}, "<=", 0.0)
    return model


# ---------------------------------------------------------------------------
# Inventory-bound reformulation


def build_nslscc(inst: Instance, link_rows: bool = True) -> LinearModel:
    """Reformulation whose rows bound stock from below by carried demand.

    With ``link_rows`` (the default) scenario stock is also tied to the flow
    ``s_p + sum x - D_ji`` of kept scenarios by a pair of big-M rows. The
    bound families alone let kept-scenario stock drift away from production,
    which makes the model a strict relaxation; ``link_rows=False`` builds
    that literal variant.
    """
    if not check_ww(inst).holds:
        warnings.warn("cost condition fails; the reformulation may not be exact", stacklevel=2)
    T, p, m = inst.T, inst.p, inst.m
    D = cumulants(inst).D
    alpha = inst.alpha
    model = LinearModel(name="nslscc")
    for i in range(1, p + 1):
        coef = alpha[i - 1] + inst.h[i - 1] - (alpha[i] if i < p else 0.0)
        model.add_var(s_name(i), obj=coef)
    for i in range(p + 1, T + 1):
        model.add_var(x_name(i), obj=alpha[i - 1])
    for j in range(m):
        for i in range(p + 1, T + 1):
            model.add_var(sj_name(j, i), obj=inst.probs[j] * inst.h[i - 1])
    for i in range(1, T + 1):
        model.add_var(y_name(i), 0.0, 1.0, integer=True, obj=inst.beta[i - 1])
    _declare_z(model, inst)
    model.objective_constant = float(alpha[:p] @ inst.d)

    # First-stage bounds: deterministic part once, scenario part per tau.
    for i in range(0, p + 1):
        head = Expr()
        for t in range(i + 1, p + 1):
            _carry(head, inst.d[t - 1], i + 1, t)
            model.add_ge(f"fs[{i},{t}]", "cover" if i == 0 else "first_stage",
                         _stock(i, p), _copy(head))
        for tau in range(m):
            rhs = _copy(head)
            for nu in range(p + 1, T + 1):
                _carry(rhs, inst.demands[tau, nu - p - 1], i + 1, nu, (z_name(tau),))
                model.add_ge(f"fss[{i},{tau + 1},{nu}]",
                             "cover" if i == 0 else "first_stage_scen", _stock(i, p), _copy(rhs))

    # Production lower bounds.
    for i in range(p + 1, T + 1):
        for tau in range(m):
            rhs = Expr()
            prev = _stock(i - 1, p, tau)
            for v, c in prev.coefs.items():
                rhs.add(v, -c)
            for nu in range(i, T + 1):
                amount = inst.demands[tau, nu - p - 1]
                if amount:
                    rhs.add(y_name(i), amount)
                    _carry(rhs, amount, i + 1, nu, (z_name(tau),), base=0.0)
                lhs = Expr().add(x_name(i), 1.0)
                model.add_ge(f"prod[{i},{tau + 1},{nu}]", "production", lhs, _copy(rhs))

    # Scenario stock lower bounds.
    for i in range(p + 1, T + 1):
        for tau in range(m):
            for j in range(m):
                zs = (z_name(tau), z_name(j)) if tau != j else (z_name(j), z_name(j))
                base = Expr()
                for t in range(p + 1, i + 1):
                    amount = inst.demands[tau, t - p - 1]
                    _carry(base, amount, 1, 0, zs)
                Dji = D[j, i - p - 1]
                base.add_const(-Dji).add(z_name(j), Dji)
                rhs = base
                for nu in range(i, T + 1):
                    if nu > i:
                        _carry(rhs, inst.demands[tau, nu - p - 1], i + 1, nu, zs)
                    model.add_ge(f"ss[{i},{tau + 1},{j + 1},{nu}]", "scenario_stock",
                                 _stock(i, p, j), _copy(rhs))

    model.add_row("chance", "chance", {z_name(j): inst.probs[j] for j in range(m)},
                  "<=", inst.epsilon)

    if link_rows:
        Mp = stock_big_m(inst)
        for j in range(m):
            for i in range(p + 1, T + 1):
                flow = {sj_name(j, i): 1.0, s_name(p): -1.0}
                flow.update({x_name(t): -1.0 for t in range(p + 1, i + 1)})
                Dji = D[j, i - p - 1]
                model.add_row(f"llo[{j + 1},{i}]", "link_lo", {**flow, z_name(j): Mp[j]},
                              ">=", -Dji)
                model.add_row(f"lhi[{j + 1},{i}]", "link_hi", {**flow, z_name(j): -D[j, -1]},
                              "<=", -Dji)
    return model


# ---------------------------------------------------------------------------
# Occurred-set subproblems


def _declare_reduced(model: LinearModel, inst: Instance, costs: SubproblemCosts,
                     zero_rows: Iterable[int]) -> None:
    T, p = inst.T, inst.p
    zero = set(zero_rows)
    for i in range(1, p + 1):
        model.add_var(s_name(i), obj=costs.h_prime[i - 1])
    for j in range(inst.m):
        for i in range(p + 1, T + 1):
            if j in zero:
                model.add_var(sj_name(j, i), 0.0, 0.0, obj=costs.hJS[j, i - p - 1])
            else:
                model.add_var(sj_name(j, i), obj=costs.hJS[j, i - p - 1])
    for i in range(1, T + 1):
        model.add_var(y_name(i), 0.0, 1.0, integer=True, obj=inst.beta[i - 1])
    model.objective_constant = float(costs.r.sum())


def _set_stock_rows(model: LinearModel, inst: Instance, S: Iterable[int], delta: np.ndarray,
                    zfree: str | None = None, fam: str = "scenario_stock") -> None:
    """s_ji >= sum_{p<t<=i} delta_t + sum_{i<t<=nu} delta_t (1 - Y) - D_ji, nu in [i, T]."""
    T, p = inst.T, inst.p
    D = cumulants(inst).D
    zs = (zfree,) if zfree else ()
    for j in S:
        zj = (z_name(j),) if zfree == "own" else zs
        for i in range(p + 1, T + 1):
            rhs = Expr()
            for t in range(p + 1, i + 1):
                _carry(rhs, delta[t - p - 1], 1, 0, zj)
            Dji = D[j, i - p - 1]
            rhs.add_const(-Dji)
            if zj:
                rhs.add(zj[0], Dji)
            for nu in range(i, T + 1):
                if nu > i:
                    _carry(rhs, delta[nu - p - 1], i + 1, nu, zj)
                model.add_ge(f"{fam}[{j + 1},{i},{nu}]", fam, _stock(i, p, j), _copy(rhs))


def build_s_lp(inst: Instance, S: Iterable[int]) -> LinearModel:
    """Compact subproblem for the occurred set ``S`` (integral relaxation)."""
    S = normalize_set(S, inst.m)
    costs = subproblem_costs(inst, S)
    prof = delta_profile(inst, S)
    model = LinearModel(name="s-lp")
    _declare_reduced(model, inst, costs, [j for j in range(inst.m) if j not in S])
    _first_stage_rows(model, inst, prof.delta)
    _set_stock_rows(model, inst, S, prof.delta)
    return model


def merged_demand(inst: Instance, delta: np.ndarray) -> np.ndarray:
    return np.concatenate([inst.d, delta])


def build_s_extended(inst: Instance, S: Iterable[int]) -> LinearModel:
    """Extended subproblem with carry indicators ``u[i,t]`` (i in [0, T-1])."""
    S = normalize_set(S, inst.m)
    T, p = inst.T, inst.p
    costs = subproblem_costs(inst, S)
    prof = delta_profile(inst, S)
    dem = merged_demand(inst, prof.delta)
    D = cumulants(inst).D
    model = LinearModel(name="s-ext")
    _declare_reduced(model, inst, costs, [j for j in range(inst.m) if j not in S])
    for i in range(0, T):
        for t in range(i + 1, T + 1):
            model.add_var(u_name(i, t))

    for i in range(0, p + 1):
        lhs = _stock(i, p)
        rhs = Expr()
        for t in range(i + 1, T + 1):
            rhs.add(u_name(i, t), dem[t - 1])
        model.add_cmp(f"ext_s[{i}]", "cover" if i == 0 else "ext_first_stage", lhs, "=", rhs)
    for j in S:
        for i in range(p + 1, T + 1):
            rhs = Expr().add_const(float(prof.delta[: i - p].sum()) - D[j, i - p - 1])
            for t in range(i + 1, T + 1):
                rhs.add(u_name(i, t), dem[t - 1])
            model.add_cmp(f"ext_sj[{j + 1},{i}]", "ext_scenario_stock", _stock(i, p, j), "=", rhs)
    for i in range(0, T):
        for t in range(i + 1, T + 1):
            coefs = {u_name(i, t): 1.0}
            coefs.update({y_name(k): 1.0 for k in range(i + 1, t + 1)})
            model.add_row(f"carry[{i},{t}]", "carry", coefs, ">=", 1.0)
    return model


def carry_matrix(T: int, include_cover: bool = True, include_bounds: bool = True) -> np.ndarray:
    """Coefficient block of the carry rows over columns (u..., y...).

    Rows ``u_it + sum_{k=i+1..t} y_k >= 1`` followed (optionally) by the
    ``y_i <= 1`` bound rows. Nonnegativity rows are identity rows and do not
    affect unimodularity, so they are left out.
    """
    pairs = [(i, t) for i in range(0 if include_cover else 1, T) for t in range(i + 1, T + 1)]
    rows = []
    for r, (i, t) in enumerate(pairs):
        row = np.zeros(len(pairs) + T, dtype=int)
        row[r] = 1
        row[len(pairs) + i : len(pairs) + t] = 1
        rows.append(row)
    if include_bounds:
        for i in range(T):
            row = np.zeros(len(pairs) + T, dtype=int)
            row[len(pairs) + i] = 1
            rows.append(row)
    return np.array(rows, dtype=int)


# ---------------------------------------------------------------------------
# Node subproblem


def build_c_subproblem(inst: Instance, C: NodeConstraintSet) -> LinearModel:
    """Node model with ``J1`` kept, ``J2`` dropped and the rest free.

    Production is eliminated through the kept set ``J1``. When ``J1`` alone
    misses the service level its transformed holding weights can be
    negative, so the stock of kept scenarios is then tied to one common,
    nondecreasing supply level (families ``consistency`` and ``monotone``).
    """
    if not C.J1:
        raise EmptyJ1("node subproblem needs at least one kept scenario")
    m = inst.m
    if any(j < 0 or j >= m for j in C.J1 | C.J2):
        raise ValueError("scenario index out of range")
    dropped = set_mass(inst, C.J2)
    if dropped > inst.epsilon + PROB_TOL:
        raise InfeasibleNode(f"dropped probability {dropped:.9g} exceeds epsilon")
    T, p = inst.T, inst.p
    J1 = sorted(C.J1)
    free = C.free(m)
    costs = subproblem_costs(inst, J1)
    prof = delta_profile(inst, J1)
    D = cumulants(inst).D
    model = LinearModel(name="c-sub")
    _declare_reduced(model, inst, costs, sorted(C.J2))
    fixed = {j: 0 for j in C.J1}
    fixed.update({j: 1 for j in C.J2})
    _declare_z(model, inst, fixed)

    _first_stage_rows(model, inst, prof.delta)
    for tau in free:
        _first_stage_rows(model, inst, inst.demands[tau], z_of=z_name(tau),
                          tag=f"~{tau + 1}", det_rows=False)
    _set_stock_rows(model, inst, J1, prof.delta)
    # Kept scenarios against free scenario demand.
    for tau in free:
        for j in J1:
            _pair_rows(model, inst, tau, j, (z_name(tau),), D, own=False,
                       fam="scenario_stock_cross")
    _set_stock_rows(model, inst, free, prof.delta, zfree="own", fam="scenario_stock_free")
    for tau in free:
        for j in free:
            zs = (z_name(tau), z_name(j)) if tau != j else (z_name(j), z_name(j))
            _pair_rows(model, inst, tau, j, zs, D, own=True, fam="scenario_stock_pair")

    rhs = inst.epsilon - dropped
    model.add_cmp("chance", "chance",
                  _lin({z_name(j): inst.probs[j] for j in free}), "<=", Expr().add_const(rhs))

    if set_mass(inst, J1) < 1.0 - inst.epsilon - PROB_TOL:
        j0 = J1[0]
        for i in range(p + 1, T + 1):
            c = i - p - 1
            for j in J1[1:]:
                model.add_row(f"cons[{j + 1},{i}]", "consistency",
                              {sj_name(j, i): 1.0, sj_name(j0, i): -1.0}, "=",
                              D[j0, c] - D[j, c])
            prev = s_name(p) if i == p + 1 else sj_name(j0, i - 1)
            model.add_row(f"mono[{i}]", "monotone", {sj_name(j0, i): 1.0, prev: -1.0}, ">=",
                          -inst.demands[j0, c])
    return model


def _lin(coefs: dict[str, float]) -> Expr:
    e = Expr()
    for v, c in coefs.items():
        e.add(v, c)
    return e


def _pair_rows(model: LinearModel, inst: Instance, tau: int, j: int, zs: tuple[str, ...],
               D: np.ndarray, own: bool, fam: str) -> None:
    """s_ji >= sum_{p<t<=i} d_tau,t (1 - zs) + sum_{i<t<=nu} d_tau,t (1 - Y - zs) - D_ji (1 - z_j)."""
    T, p = inst.T, inst.p
    for i in range(p + 1, T + 1):
        rhs = Expr()
        for t in range(p + 1, i + 1):
            _carry(rhs, inst.demands[tau, t - p - 1], 1, 0, zs)
        Dji = D[j, i - p - 1]
        rhs.add_const(-Dji)
        if own:
            rhs.add(z_name(j), Dji)
        for nu in range(i, T + 1):
            if nu > i:
                _carry(rhs, inst.demands[tau, nu - p - 1], i + 1, nu, zs)
            model.add_ge(f"{fam}[{i},{tau + 1},{j + 1},{nu}]", fam, _stock(i, p, j), _copy(rhs))
