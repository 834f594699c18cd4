"""Branch and bound over the scenario indicators.

Nodes fix some indicators to 0 (kept) or 1 (dropped). Each node is bounded
by a linear relaxation; the relaxed indicator vector is rounded to an
admissible kept set whose subproblem is solved exactly for an upper bound.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import AssumptionViolated, InfeasibleNode, NoFractional, NumericalFailure
from .formulations import (
    NodeConstraintSet,
    build_c_subproblem,
    build_nslscc,
    y_name,
    z_name,
)
from .lp_core import LpResult, Status, fix_and_solve, solve_lp
from .lpmodel import LinearModel
from .model import PROB_TOL, Instance, PlanSolution, check_ww
from .subproblem import closed_form_general, solve_s_dp

__all__ = [
    "BnbConfig",
    "BnbResult",
    "BnbStatus",
    "NodeConstraintSet",
    "ProgressEvent",
    "branch_and_bound",
    "pick_branch_var",
    "round_scenario_set",
    "solve_node_lr",
]

FRAC_TOL = 1e-6
GAP_SLACK = 1e-9


class BnbStatus(str, Enum):
    PROVEN = "Proven"
    TOLERANCE_REACHED = "ToleranceReached"
    NODE_CAP_HIT = "NodeCapHit"


class ProgressEvent(NamedTuple):
    node: int
    lb: float
    ub: float
    action: str


@dataclass(frozen=True)
class BnbConfig:
    delta: float | None = None  # None: 1e-6 * (1 + |UB|)
    node_cap: int = 100_000
    jobs: int = 1
    progress: Callable[[ProgressEvent], None] | None = None

    def __post_init__(self) -> None:
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")


@dataclass(frozen=True)
class BnbResult:
    solution: PlanSolution
    lower_bound: float
    upper_bound: float
    nodes_expanded: int
    status: BnbStatus


@dataclass(frozen=True)
class RoundedSet:
    S: tuple[int, ...]
    zI: np.ndarray


def round_scenario_set(z: Sequence[float], probs: Sequence[float], epsilon: float) -> RoundedSet:
    """Keep the scenarios with the smallest relaxed indicators until the
    kept probability reaches ``1 - epsilon`` (ties by index)."""
    order = sorted(range(len(z)), key=lambda j: (z[j], j))
    target = 1.0 - epsilon - PROB_TOL
    kept, mass = [], 0.0
    for j in order:
        kept.append(j)
        mass += probs[j]
        if mass >= target:
            break
    zI = np.ones(len(z), dtype=int)
    zI[kept] = 0
    return RoundedSet(tuple(sorted(kept)), zI)


def pick_branch_var(z: Sequence[float]) -> int:
    """Index of the smallest strictly fractional entry (first index on ties)."""
    frac = [(v, j) for j, v in enumerate(z) if FRAC_TOL <= v <= 1 - FRAC_TOL]
    if not frac:
        raise NoFractional("no fractional indicator")
    return min(frac)[1]


@dataclass(frozen=True)
class NodeLR:
    result: LpResult
    objective: float
    y: np.ndarray
    z: np.ndarray


def solve_node_lr(inst: Instance, C: NodeConstraintSet,
                  base: LinearModel | None = None) -> NodeLR:
    """Linear relaxation of a node.

    With kept scenarios fixed the node subproblem is used; otherwise the
    reformulation with dropped indicators pinned to 1 (``base`` may pass a
    prebuilt copy of it). Raises :class:`InfeasibleNode` when empty.
    """
    dropped = sum(inst.probs[j] for j in C.J2)
    if dropped > inst.epsilon + PROB_TOL:
        raise InfeasibleNode(f"dropped probability {dropped:.9g} exceeds epsilon")
    if C.J1:
        res = solve_lp(build_c_subproblem(inst, C))
    else:
        model = base if base is not None else build_nslscc(inst)
        res = fix_and_solve(model, {z_name(j): 1.0 for j in sorted(C.J2)})
    if res.status is Status.INFEASIBLE:
        raise InfeasibleNode("relaxation is infeasible")
    if res.status is not Status.OPTIMAL:
        raise NumericalFailure(f"node relaxation returned {res.status.value}")
    y = np.array([res.point[y_name(i)] for i in range(1, inst.T + 1)])
    z = np.array([res.point[z_name(j)] for j in range(inst.m)])
    return NodeLR(res, res.objective, _snap(y), _snap(z))


def _snap(v: np.ndarray) -> np.ndarray:
    out = v.copy()
    out[np.abs(out) < 1e-9] = 0.0
    out[np.abs(out - 1.0) < 1e-9] = 1.0
    return out


def _integral(v: np.ndarray) -> bool:
    return bool(np.all((v < FRAC_TOL) | (v > 1 - FRAC_TOL)))


@dataclass(order=True)
class _Node:
    lb: float
    order: int
    C: NodeConstraintSet = field(compare=False)
    lr: NodeLR = field(compare=False)


def branch_and_bound(inst: Instance, config: BnbConfig | None = None) -> BnbResult:
    """Least-lower-bound branch and bound over the scenario indicators."""
    config = config or BnbConfig()
    if not check_ww(inst).holds:
        raise AssumptionViolated("the stronger Wagner-Whitin condition fails")
    emit = config.progress or (lambda ev: None)
    base = build_nslscc(inst)
    root_set = NodeConstraintSet(creation_order=0)
    root = solve_node_lr(inst, root_set, base)
    emit(ProgressEvent(0, root.objective, math.inf, "root"))

    if _integral(root.y) and _integral(root.z):
        sol = closed_form_general(inst, np.round(root.z), np.round(root.y))
        if abs(sol.objective - root.objective) <= 1e-7 * (1 + abs(sol.objective)):
            emit(ProgressEvent(0, root.objective, sol.objective, "root-integral"))
            emit(ProgressEvent(-1, root.objective, sol.objective, BnbStatus.PROVEN.value))
            return BnbResult(sol, root.objective, sol.objective, 0, BnbStatus.PROVEN)

    counter = 1
    live: list[_Node] = [_Node(root.objective, 0, root_set, root)]
    ub, best = math.inf, None
    expanded = 0
    status = BnbStatus.PROVEN
    ub_cache: dict[tuple[int, ...], PlanSolution] = {}
    pool = ThreadPoolExecutor(config.jobs) if config.jobs > 1 else None

    def gap_closed(lb: float) -> BnbStatus | None:
        if not math.isfinite(ub):
            return None
        if ub - lb <= GAP_SLACK * (1 + abs(ub)):
            return BnbStatus.PROVEN
        tol = config.delta if config.delta is not None else 1e-6 * (1 + abs(ub))
        if ub - lb <= tol:
            return BnbStatus.TOLERANCE_REACHED
        return None

    def child_lr(C: NodeConstraintSet) -> NodeLR | None:
        try:
            return solve_node_lr(inst, C, base)
        except InfeasibleNode:
            return None

    try:
        while live:
            node = heapq.heappop(live)
            done = gap_closed(node.lb)
            if done is not None:
                heapq.heappush(live, node)
                status = done
                break
            if expanded >= config.node_cap:
                heapq.heappush(live, node)
                status = BnbStatus.NODE_CAP_HIT
                break
            expanded += 1
            zC = node.lr.z
            rounded = round_scenario_set(zC, inst.probs, inst.epsilon)
            if rounded.S not in ub_cache:
                ub_cache[rounded.S] = solve_s_dp(inst, rounded.S)
            cand = ub_cache[rounded.S]
            if cand.objective < ub:
                ub, best = cand.objective, cand
                emit(ProgressEvent(node.order, node.lb, ub, "incumbent"))
            done = gap_closed(node.lb)
            if done is not None:
                heapq.heappush(live, node)
                status = done
                break
            free = node.C.free(inst.m)
            try:
                j = pick_branch_var(zC)
            except NoFractional:
                j = min(free, key=lambda k: (zC[k], k)) if free else None
            if j is None:
                emit(ProgressEvent(node.order, node.lb, ub, "leaf"))
                continue
            kids = [node.C.with_fix(j, 0, counter), node.C.with_fix(j, 1, counter + 1)]
            counter += 2
            if pool is not None:
                lrs = list(pool.map(child_lr, kids))
            else:
                lrs = [child_lr(C) for C in kids]
            emit(ProgressEvent(node.order, node.lb, ub, f"branch z[{j + 1}]"))
            for C, lr in zip(kids, lrs):
                if lr is None:
                    emit(ProgressEvent(C.creation_order, math.nan, ub, "infeasible"))
                    continue
                heapq.heappush(live, _Node(max(lr.objective, node.lb), C.creation_order, C, lr))
            kept = [n for n in live if n.lb <= ub]
            for n in live:
                if n.lb > ub:
                    emit(ProgressEvent(n.order, n.lb, ub, "fathom"))
            live = kept
            heapq.heapify(live)
    finally:
        if pool is not None:
            pool.shutdown()

    if best is None:  # node cap of zero: fall back to the root rounding
        best = solve_s_dp(inst, round_scenario_set(root.z, inst.probs, inst.epsilon).S)
        ub = best.objective
    lb = min((n.lb for n in live), default=ub)
    lb = min(lb, ub)
    emit(ProgressEvent(-1, lb, ub, status.value))
    return BnbResult(best, lb, ub, expanded, status)
