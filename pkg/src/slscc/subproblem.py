"""Occurred-set machinery: admissible families, closed-form plans and the
lot-sizing recursion that solves one occurred-set subproblem exactly."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import AssumptionViolated, EmptyJz, FamilyTooLarge, InfeasiblePattern
from .formulations import subproblem_costs
from .model import (
    PROB_TOL,
    DeltaProfile,
    Instance,
    PlanSolution,
    _frozen,
    check_ww,
    cumulants,
    delta_profile,
    evaluate,
    normalize_set,
    pos_part,
    setup_pattern,
)

__all__ = [
    "DeltaProfile",
    "ScenarioFamily",
    "closed_form",
    "closed_form_general",
    "delta_profile",
    "enumerate_family",
    "kappa",
    "opt_star_enumeration",
    "prop1_forward",
    "solve_s_dp",
]

FAMILY_CAP = 10**6


# ---------------------------------------------------------------------------
# Admissible family


@dataclass(frozen=True)
class ScenarioFamily:
    sets: tuple[tuple[int, ...], ...]
    kappa: int
    minimal_only: bool

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)


def kappa(inst: Instance) -> int:
    """Largest number of cheapest scenarios whose total probability fits in epsilon."""
    total, count = 0.0, 0
    for pr in sorted(inst.probs):
        total += pr
        if total > inst.epsilon + PROB_TOL:
            break
        count += 1
    return count


def family_bound(m: int, k: int) -> int:
    return sum(math.comb(m, i) for i in range(k + 1))


def enumerate_family(inst: Instance, minimal_only: bool = True,
                     cap: int = FAMILY_CAP) -> ScenarioFamily:
    """All kept sets meeting the service level, smallest first.

    Candidates come from the complement side: every drop set of at most
    ``kappa`` scenarios whose mass stays within epsilon. With
    ``minimal_only`` supersets of an earlier member are discarded.
    """
    m = inst.m
    k = kappa(inst)
    if family_bound(m, k) > cap:
        raise FamilyTooLarge(f"up to {family_bound(m, k)} sets exceed the cap of {cap}")
    everyone = frozenset(range(m))
    sets = []
    for size in range(k + 1):
        for drop in itertools.combinations(range(m), size):
            if sum(inst.probs[j] for j in drop) <= inst.epsilon + PROB_TOL:
                sets.append(tuple(sorted(everyone.difference(drop))))
    sets.sort(key=lambda S: (len(S), S))
    if minimal_only:
        kept: list[int] = []
        out = []
        for S in sets:
            mask = sum(1 << j for j in S)
            if not any(prev & mask == prev for prev in kept):
                kept.append(mask)
                out.append(S)
        sets = out
    return ScenarioFamily(tuple(sets), k, minimal_only)


# ---------------------------------------------------------------------------
# Closed forms for an occurred set


def _merged(inst: Instance, prof: DeltaProfile) -> np.ndarray:
    return np.concatenate([inst.d, prof.delta])


def _check_cover(dem: np.ndarray, y) -> None:
    first = next((k for k, v in enumerate(y) if v), len(y))
    if np.any(dem[:first] > 0):
        period = int(np.flatnonzero(dem[:first] > 0)[0]) + 1
        raise InfeasiblePattern(f"positive demand in period {period} precedes the first setup")


def closed_form(inst: Instance, S: Iterable[int], y) -> PlanSolution:
    """Zero-inventory-ordering plan for kept set ``S`` under setups ``y``."""
    S = normalize_set(S, inst.m)
    y = [int(round(v)) for v in y]
    T, p = inst.T, inst.p
    prof = delta_profile(inst, S)
    dem = _merged(inst, prof)
    _check_cover(dem, y)
    pat = setup_pattern(y)
    D = cumulants(inst).D
    s = np.array([dem[i : pat.psi(i) - 1].sum() for i in range(1, p + 1)])
    x = np.zeros(T)
    for i in range(p + 1, T + 1):
        if y[i - 1]:
            x[i - 1] = dem[i - 1 : pat.psi(i) - 1].sum()
    prev = 0.0
    for i in range(1, p + 1):
        x[i - 1] = inst.d[i - 1] + s[i - 1] - prev
        prev = s[i - 1]
    s2 = np.zeros((inst.m, inst.n2))
    for j in S:
        for i in range(p + 1, T + 1):
            s2[j, i - p - 1] = dem[p : pat.psi(i) - 1].sum() - D[j, i - p - 1]
    z = np.ones(inst.m, dtype=int)
    z[list(S)] = 0
    return _plan(inst, y, x, s, s2, z)


def _plan(inst: Instance, y, x, s, s2, z) -> PlanSolution:
    objective = evaluate(inst, y, x, z)
    return PlanSolution(
        y=_frozen(np.asarray(y, dtype=int), int),
        x=_frozen(x),
        s=_frozen(s),
        s2=_frozen(s2),
        z=_frozen(np.asarray(z, dtype=int), int),
        objective=objective,
    )


def _kept(inst: Instance, z) -> list[int]:
    J = [j for j in range(inst.m) if not z[j]]
    if not J:
        raise EmptyJz("every scenario is dropped")
    return J


def direct_form(inst: Instance, z, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bracket-form production and stock for binary ``(y, z)``.

    Returns ``(x, s, s2)``. Carried demand uses setups strictly after the
    period, and second-stage production takes the positive part, since the
    bracket expression goes negative for periods without a setup.
    """
    z = [int(round(v)) for v in z]
    y = [int(round(v)) for v in y]
    _kept(inst, z)
    T, p, m = inst.T, inst.p, inst.m
    d, dd = inst.d, inst.demands
    D = cumulants(inst).D
    Y = np.concatenate([[0], np.cumsum(y)])  # Y[t] = sum_{k<=t} y_k

    def carried(i: int, shift: float) -> float:
        """sum_{t>i} dem_t [1 - sum_{k=i+1..t} y_k - shift]^+, first-stage part + max over tau."""
        head = sum(d[t - 1] * pos_part(1 - (Y[t] - Y[i])) for t in range(i + 1, p + 1))
        tail = max(
            sum(dd[tau, t - p - 1] * pos_part(1 - (Y[t] - Y[i]) - z[tau] - shift)
                for t in range(p + 1, T + 1))
            for tau in range(m)
        )
        return head + tail

    if carried(0, 0) > 0:
        raise InfeasiblePattern("positive demand precedes the first setup")
    s = np.array([carried(i, 0) for i in range(1, p + 1)])
    s2 = np.zeros((m, inst.n2))
    for j in range(m):
        for i in range(p + 1, T + 1):
            best = -math.inf
            for tau in range(m):
                val = sum(dd[tau, t - p - 1] * (1 - z[tau] - z[j]) for t in range(p + 1, i + 1))
                val += sum(dd[tau, t - p - 1] * pos_part(1 - (Y[t] - Y[i]) - z[tau] - z[j])
                           for t in range(i + 1, T + 1))
                best = max(best, val)
            s2[j, i - p - 1] = best - D[j, i - p - 1] * (1 - z[j])
    x = np.zeros(T)
    for i in range(p + 1, T + 1):
        best = -math.inf
        for tau in range(m):
            prev = s[p - 1] if i == p + 1 else s2[tau, i - p - 2]
            val = sum(dd[tau, t - p - 1] * pos_part(y[i - 1] - (Y[t] - Y[i]) - z[tau])
                      for t in range(i, T + 1))
            best = max(best, val - prev)
        x[i - 1] = pos_part(best)
    prev = 0.0
    for i in range(1, p + 1):
        x[i - 1] = d[i - 1] + s[i - 1] - prev
        prev = s[i - 1]
    return x, s, s2


def closed_form_general(inst: Instance, z, y) -> PlanSolution:
    """Optimal continuous plan for fixed binary ``(y, z)``."""
    x, s, s2 = direct_form(inst, z, y)
    return _plan(inst, [int(round(v)) for v in y], x, s, s2, [int(round(v)) for v in z])


def prop1_forward(inst: Instance, z, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Case-wise recursive form, evaluated forward in time; returns ``(x, s, s2)``."""
    z = [int(round(v)) for v in z]
    y = [int(round(v)) for v in y]
    J = _kept(inst, z)
    T, p, m = inst.T, inst.p, inst.m
    d, dd = inst.d, inst.demands
    D = cumulants(inst).D
    pat = setup_pattern(y)
    # Prefix sums of deterministic demand and kept-scenario maxima of D up to period t.
    dsum = np.concatenate([[0.0], np.cumsum(d)])

    def top(t: int) -> float:
        """max over kept tau of demand over periods p+1..t (0 when t <= p)."""
        if t <= p:
            return 0.0
        return max(D[tau, t - p - 1] for tau in J)

    if dsum[min(pat.psi(0), p + 1) - 1] > 0 or (pat.psi(0) > p and top(pat.psi(0) - 1) > 0):
        raise InfeasiblePattern("positive demand precedes the first setup")
    x = np.zeros(T)
    s = np.zeros(p)
    for i in range(1, p + 1):
        nxt = pat.psi(i)
        if nxt <= p:
            s[i - 1] = dsum[nxt - 1] - dsum[i]
        else:
            s[i - 1] = dsum[p] - dsum[i] + top(nxt - 1)
        if y[i - 1]:
            if nxt <= p:
                x[i - 1] = dsum[nxt - 1] - dsum[i - 1]
            else:
                x[i - 1] = dsum[p] - dsum[i - 1] + top(nxt - 1)
    s2 = np.zeros((m, inst.n2))

    def stock(j: int, i: int) -> float:
        return s[p - 1] if i == p else s2[j, i - p - 1]

    for i in range(p + 1, T + 1):
        if y[i - 1]:
            nxt = pat.psi(i)
            x[i - 1] = max(D[tau, nxt - p - 2] - (D[tau, i - p - 2] if i > p + 1 else 0.0)
                           - stock(tau, i - 1) for tau in J) if nxt - 1 >= i else 0.0
            x[i - 1] = max(x[i - 1], 0.0)
        for j in J:
            prior = pat.phi(i)
            if y[i - 1]:
                s2[j, i - p - 1] = x[i - 1] + stock(j, i - 1) - dd[j, i - p - 1]
            elif prior is None or prior <= p:
                s2[j, i - p - 1] = top(pat.psi(i) - 1) - D[j, i - p - 1]
            else:
                s2[j, i - p - 1] = (x[prior - 1] + stock(j, prior - 1)
                                    - dd[j, prior - p - 1 : i - p].sum())
    return x, s, s2


def prop2_direct(inst: Instance, z, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Demand-only form: second-stage production is a difference of kept maxima."""
    z = [int(round(v)) for v in z]
    y = [int(round(v)) for v in y]
    J = _kept(inst, z)
    T, p, m = inst.T, inst.p, inst.m
    D = cumulants(inst).D
    pat = setup_pattern(y)
    dsum = np.concatenate([[0.0], np.cumsum(inst.d)])

    def top(t: int) -> float:
        return 0.0 if t <= p else max(D[tau, t - p - 1] for tau in J)

    if dsum[min(pat.psi(0), p + 1) - 1] > 0 or (pat.psi(0) > p and top(pat.psi(0) - 1) > 0):
        raise InfeasiblePattern("positive demand precedes the first setup")
    x = np.zeros(T)
    s = np.zeros(p)
    for i in range(1, p + 1):
        nxt = pat.psi(i)
        tail = dsum[min(nxt - 1, p)]
        s[i - 1] = tail - dsum[i] + top(nxt - 1)
        if y[i - 1]:
            x[i - 1] = tail - dsum[i - 1] + top(nxt - 1)
    for i in range(p + 1, T + 1):
        if y[i - 1]:
            x[i - 1] = top(pat.psi(i) - 1) - top(i - 1)
    s2 = np.zeros((m, inst.n2))
    for j in J:
        for i in range(p + 1, T + 1):
            s2[j, i - p - 1] = top(pat.psi(i) - 1) - D[j, i - p - 1]
    return x, s, s2


# ---------------------------------------------------------------------------
# Lot-sizing recursion


def dp_inputs(inst: Instance, S: Iterable[int]) -> tuple[np.ndarray, np.ndarray, float]:
    """Merged demand, per-period holding weight and constant for kept set ``S``."""
    S = normalize_set(S, inst.m)
    costs = subproblem_costs(inst, S)
    prof = delta_profile(inst, S)
    dem = _merged(inst, prof)
    weight = np.concatenate([costs.h_prime, costs.hJS[list(S)].sum(axis=0)])
    return dem, weight, costs.constant


def wagner_whitin(dem: np.ndarray, beta: np.ndarray, weight: np.ndarray) -> tuple[float, list[int]]:
    """Uncapacitated lot sizing over regeneration intervals.

    Minimizes ``sum beta_k y_k + sum weight_i I_i`` where ``I_i`` is stock at
    the end of period i. Periods with zero demand may be left uncovered.
    Equal-cost alternatives resolve to fewer setups, then an earlier last
    setup. Returns the value and the 0/1 setup vector.
    """
    T = len(dem)
    # hold[k][l]: cost of producing at k (1-based) for periods k..l
    F = [0.0] + [math.inf] * T
    key = [(0, 0)] + [(0, 0)] * T  # (setups, last setup) for tie breaks
    back: list[int | None] = [None] * (T + 1)  # 0 means "skip period"
    for l in range(1, T + 1):
        best, best_key, best_k = math.inf, (math.inf, math.inf), None
        if dem[l - 1] == 0 and F[l - 1] < math.inf:
            best, best_key, best_k = F[l - 1], key[l - 1], 0
        for k in range(1, l + 1):
            if F[k - 1] == math.inf:
                continue
            carry = 0.0
            for i in range(k, l):
                carry += weight[i - 1] * dem[i : l].sum()
            cost = F[k - 1] + beta[k - 1] + carry
            cand_key = (key[k - 1][0] + 1, k)
            tol = 1e-12 * (1.0 + abs(best)) if best < math.inf else 0.0
            if cost < best - tol or (abs(cost - best) <= tol and cand_key < best_key):
                best, best_key, best_k = cost, cand_key, k
        F[l], key[l], back[l] = best, best_key, best_k
    y = [0] * T
    l = T
    while l > 0:
        k = back[l]
        if k == 0:
            l -= 1
        else:
            y[k - 1] = 1
            l = k - 1
    return F[T], y


def solve_s_dp(inst: Instance, S: Iterable[int]) -> PlanSolution:
    """Exact optimum of the kept-set subproblem via the lot-sizing recursion."""
    if not check_ww(inst).holds:
        raise AssumptionViolated("the stronger Wagner-Whitin condition fails")
    S = normalize_set(S, inst.m)
    dem, weight, _ = dp_inputs(inst, S)
    _, y = wagner_whitin(dem, inst.beta, weight)
    return closed_form(inst, S, y)


def dp_value(inst: Instance, S: Iterable[int]) -> float:
    """Optimal value of the reduced problem, including the constant term."""
    dem, weight, const = dp_inputs(inst, S)
    value, _ = wagner_whitin(dem, inst.beta, weight)
    return value + const


def opt_star_enumeration(inst: Instance, minimal_only: bool = True) -> PlanSolution:
    """Best subproblem optimum over the admissible family (first wins ties)."""
    best = None
    for S in enumerate_family(inst, minimal_only):
        sol = solve_s_dp(inst, S)
        if best is None or sol.objective < best.objective - 1e-12 * (1 + abs(best.objective)):
            best = sol
    return best
