"""Instance data, cost-condition checks and plan evaluation.

Periods are numbered 1..T in docstrings and in exported model names, but all
arrays are 0-based: ``alpha[i - 1]`` is the unit cost of period ``i``.
Scenario indices are 0-based everywhere in the Python API.

Second-stage arrays (scenario demands, cumulants, second-stage inventories)
have ``T - p`` columns; column ``c`` holds period ``p + 1 + c``.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import EmptySet, Infeasible, InstanceError

PROB_TOL = 1e-9
FEAS_TOL = 1e-7
WW_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """A two-stage lot-sizing instance with a joint chance constraint."""

    T: int
    p: int
    alpha: np.ndarray
    beta: np.ndarray
    h: np.ndarray
    d: np.ndarray
    probs: np.ndarray
    demands: np.ndarray  # m x (T - p)
    epsilon: float

    @property
    def m(self) -> int:
        return len(self.probs)

    @property
    def n2(self) -> int:
        """Number of second-stage periods."""
        return self.T - self.p

    def to_dict(self) -> dict[str, Any]:
        return {
            "T": self.T,
            "p": self.p,
            "alpha": [float(v) for v in self.alpha],
            "beta": [float(v) for v in self.beta],
            "h": [float(v) for v in self.h],
            "d": [_num(v) for v in self.d],
            "scenarios": [
                {"prob": float(pr), "demands": [_num(v) for v in row]}
                for pr, row in zip(self.probs, self.demands)
            ],
            "epsilon": float(self.epsilon),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _num(v: float) -> float | int:
    v = float(v)
    return int(v) if v.is_integer() else v


def validate_instance(raw: dict[str, Any]) -> Instance:
    """Validate a raw instance record and build an :class:`Instance`.

    Every problem found is collected; :class:`InstanceError` is raised with
    the complete list rather than stopping at the first one.
    """
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise InstanceError(["instance: expected a JSON object"])
    for key in ("T", "p", "alpha", "beta", "h", "d", "scenarios", "epsilon"):
        if key not in raw:
            errors.append(f"{key}: missing field")
    if errors:
        raise InstanceError(errors)

    T, p = raw["T"], raw["p"]
    if not _is_int(T) or T < 1:
        errors.append(f"T: must be a positive integer, got {T!r}")
        raise InstanceError(errors)
    if not _is_int(p) or not 1 <= p <= T:
        errors.append(f"p: must be an integer in [1, {T}], got {p!r}")
        raise InstanceError(errors)

    def vector(name: str, values: Any, length: int) -> list[float]:
        if not isinstance(values, (list, tuple)):
            errors.append(f"{name}: expected an array")
            return [0.0] * length
        if len(values) != length:
            errors.append(f"{name}: expected {length} entries, got {len(values)}")
        out = []
        for idx, v in enumerate(values):
            if not _is_real(v) or not math.isfinite(v):
                errors.append(f"{name}[{idx}]: not a finite number ({v!r})")
                out.append(0.0)
            elif v < 0:
                errors.append(f"{name}[{idx}]: negative value {v}")
                out.append(float(v))
            else:
                out.append(float(v))
        return (out + [0.0] * length)[:length]

    alpha = vector("alpha", raw["alpha"], T)
    beta = vector("beta", raw["beta"], T)
    h = vector("h", raw["h"], T)
    d = vector("d", raw["d"], p)

    scenarios = raw["scenarios"]
    probs: list[float] = []
    demands: list[list[float]] = []
    if not isinstance(scenarios, (list, tuple)) or not scenarios:
        errors.append("scenarios: expected a non-empty array")
    else:
        for j, sc in enumerate(scenarios):
            if not isinstance(sc, dict) or "prob" not in sc or "demands" not in sc:
                errors.append(f"scenarios[{j}]: expected {{prob, demands}}")
                probs.append(0.0)
                demands.append([0.0] * (T - p))
                continue
            pr = sc["prob"]
            if not _is_real(pr) or not math.isfinite(pr) or not 0 < pr <= 1:
                errors.append(f"scenarios[{j}].prob: must lie in (0, 1], got {pr!r}")
                pr = 0.0
            probs.append(float(pr))
            demands.append(vector(f"scenarios[{j}].demands", sc["demands"], T - p))
        total = sum(probs)
        if abs(total - 1.0) > PROB_TOL:
            errors.append(f"scenarios: probabilities sum to {total:.12g}, expected 1")

    eps = raw["epsilon"]
    if not _is_real(eps) or not math.isfinite(eps):
        errors.append(f"epsilon: not a finite number ({eps!r})")
        eps = 0.0
    elif eps < 0:
        errors.append(f"epsilon: must be >= 0, got {eps}")
    elif eps >= 1:
        errors.append(f"epsilon: epsilon must be < 1, got {eps}")

    if errors:
        raise InstanceError(errors)
    return Instance(
        T=int(T),
        p=int(p),
        alpha=_frozen(alpha),
        beta=_frozen(beta),
        h=_frozen(h),
        d=_frozen(d),
        probs=_frozen(probs),
        demands=_frozen(np.array(demands, dtype=float).reshape(len(probs), T - p)),
        epsilon=float(eps),
    )


def _is_int(v: Any) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, (bool, np.bool_))


def _is_real(v: Any) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, (bool, np.bool_))


def load_instance(path: str | Path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return validate_instance(raw)


def make_instance(
    alpha: Sequence[float],
    beta: Sequence[float],
    h: Sequence[float],
    d: Sequence[float],
    scenarios: Sequence[tuple[float, Sequence[float]]],
    epsilon: float,
) -> Instance:
    """Convenience constructor; ``scenarios`` is a list of ``(prob, demands)``."""
    raw = {
        "T": len(alpha),
        "p": len(d),
        "alpha": list(alpha),
        "beta": list(beta),
        "h": list(h),
        "d": list(d),
        "scenarios": [{"prob": pr, "demands": list(dem)} for pr, dem in scenarios],
        "epsilon": epsilon,
    }
    return validate_instance(raw)


# ---------------------------------------------------------------------------
# Cost condition


@dataclass(frozen=True)
class WWReport:
    holds: bool
    violations: list[int]  # 1-based periods i where the condition on (i, i+1) fails
    margins: dict[int, float]  # period -> lhs - rhs


def check_ww(inst: Instance) -> WWReport:
    """Check the stronger Wagner-Whitin condition.

    Stage one needs ``alpha_i + h_i >= alpha_{i+1}`` for ``i`` in ``[1, p]``
    (including the boundary pair ``(p, p+1)``); stage two needs
    ``alpha_i + (1 - eps) h_i >= alpha_{i+1}`` for ``i`` in ``[p+1, T-1]``.
    """
    margins: dict[int, float] = {}
    violations = []
    for i in range(1, inst.T):
        w = 1.0 if i <= inst.p else 1.0 - inst.epsilon
        margin = inst.alpha[i - 1] + w * inst.h[i - 1] - inst.alpha[i]
        margins[i] = float(margin)
        if margin < -WW_TOL:
            violations.append(i)
    return WWReport(holds=not violations, violations=violations, margins=margins)


# ---------------------------------------------------------------------------
# Cumulants and setup patterns


@dataclass(frozen=True, eq=False)
class CumulantTable:
    D: np.ndarray  # m x (T - p); D[j, c] = demand of scenario j over periods p+1..p+1+c
    first_stage_suffix: np.ndarray  # length p; sum of d over periods i..p


def cumulants(inst: Instance) -> CumulantTable:
    D = np.cumsum(inst.demands, axis=1) if inst.n2 else np.zeros((inst.m, 0))
    suffix = np.cumsum(inst.d[::-1])[::-1].copy()
    return CumulantTable(D=_frozen(D), first_stage_suffix=_frozen(suffix))


def pos_part(v: float) -> float:
    return v if v > 0 else 0.0


class SetupPattern:
    """Setup vector with successor/predecessor queries (1-based periods).

    ``psi(i)`` is the first setup strictly after ``i`` (``T + 1`` if none);
    ``phi(i)`` is the last setup strictly before ``i`` (``None`` if none).
    """

    def __init__(self, y: Iterable[int]):
        self.y = tuple(int(round(v)) for v in y)
        if any(v not in (0, 1) for v in self.y):
            raise ValueError("setup pattern must be binary")
        self.T = len(self.y)

    def psi(self, i: int) -> int:
        for j in range(i + 1, self.T + 1):
            if self.y[j - 1]:
                return j
        return self.T + 1

    def phi(self, i: int) -> int | None:
        for j in range(i - 1, 0, -1):
            if self.y[j - 1]:
                return j
        return None


def setup_pattern(y: Iterable[int]) -> SetupPattern:
    return SetupPattern(y)


# ---------------------------------------------------------------------------
# Occurred-scenario profiles


@dataclass(frozen=True, eq=False)
class DeltaProfile:
    """Running maximum of scenario cumulants over a set, and its increments."""

    S: tuple[int, ...]
    dS: np.ndarray
    delta: np.ndarray


def normalize_set(S: Iterable[int], m: int) -> tuple[int, ...]:
    out = tuple(sorted({int(j) for j in S}))
    if not out:
        raise EmptySet("occurred-scenario set is empty")
    if out[0] < 0 or out[-1] >= m:
        raise ValueError(f"scenario index out of range in {out}")
    return out


def delta_profile(inst: Instance, S: Iterable[int]) -> DeltaProfile:
    S = normalize_set(S, inst.m)
    D = cumulants(inst).D
    dS = D[list(S)].max(axis=0) if inst.n2 else np.zeros(0)
    delta = np.diff(dS, prepend=0.0)
    return DeltaProfile(S=S, dS=_frozen(dS), delta=_frozen(delta))


def set_mass(inst: Instance, S: Iterable[int]) -> float:
    return float(sum(inst.probs[j] for j in S))


def in_family(inst: Instance, S: Iterable[int]) -> bool:
    """Whether keeping exactly ``S`` satisfied meets the service level."""
    return set_mass(inst, S) >= 1.0 - inst.epsilon - PROB_TOL


# ---------------------------------------------------------------------------
# Plans


@dataclass(frozen=True, eq=False)
class PlanSolution:
    """A complete production plan.

    ``s`` holds first-stage end-of-period stock for periods 1..p; ``s2`` is the
    m x (T - p) matrix of second-stage scenario stock.
    """

    y: np.ndarray
    x: np.ndarray
    s: np.ndarray
    s2: np.ndarray
    z: np.ndarray
    objective: float

    @property
    def occurred(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.z == 0))

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "y": [int(v) for v in self.y],
            "x": [float(v) for v in self.x],
            "s": [float(v) for v in self.s],
            "s2": [[float(v) for v in row] for row in self.s2],
            "z": [int(v) for v in self.z],
            "S": list(self.occurred),
        }


def _inventories(inst: Instance, x: np.ndarray, z: np.ndarray):
    s = np.cumsum(x[: inst.p] - inst.d)
    s_p = s[-1]
    prod2 = np.cumsum(x[inst.p :]) if inst.n2 else np.zeros(0)
    D = cumulants(inst).D
    phys = s_p + prod2[None, :] - D  # physical stock per scenario
    s2 = np.where(z[:, None] == 0, phys, 0.0)
    return s, phys, s2


def evaluate(inst: Instance, y, x, z) -> float:
    """Cost of the plan ``(y, x, z)`` with inventories implied by flow balance.

    Dropped scenarios (``z_j = 1``) carry no stock and no cost. Raises
    :class:`Infeasible` when the plan breaks a constraint.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_shapes(inst, y, x, z)
    if np.any(x < -FEAS_TOL):
        raise Infeasible("negative production")
    for i in range(inst.T):
        if x[i] > FEAS_TOL and y[i] < 0.5:
            raise Infeasible(f"production in period {i + 1} without a setup")
    mass = float(inst.probs @ z)
    if mass > inst.epsilon + PROB_TOL:
        raise Infeasible(f"dropped probability {mass:.9g} exceeds epsilon {inst.epsilon}")
    s, phys, s2 = _inventories(inst, x, z)
    neg = np.flatnonzero(s < -FEAS_TOL)
    if neg.size:
        raise Infeasible(f"first-stage demand unmet in period {neg[0] + 1}")
    for j in range(inst.m):
        if z[j] == 0:
            bad = np.flatnonzero(phys[j] < -FEAS_TOL)
            if bad.size:
                raise Infeasible(
                    f"scenario {j} demand unmet in period {inst.p + 1 + bad[0]}"
                )
    s = np.maximum(s, 0.0)
    s2 = np.maximum(s2, 0.0)
    cost = inst.alpha @ x + inst.beta @ y + inst.h[: inst.p] @ s
    cost += float(inst.probs @ (s2 @ inst.h[inst.p :]))
    return float(cost)


def _check_shapes(inst: Instance, y, x, z) -> None:
    if y.shape != (inst.T,) or x.shape != (inst.T,) or z.shape != (inst.m,):
        raise ValueError("plan vectors have the wrong length")
    if np.any((y != 0) & (y != 1)) or np.any((z != 0) & (z != 1)):
        raise ValueError("y and z must be binary")


def make_plan(inst: Instance, y, x, z) -> PlanSolution:
    """Assemble a :class:`PlanSolution` from decisions, deriving inventories."""
    y = np.asarray(y, dtype=float)
    x = np.where(np.abs(np.asarray(x, dtype=float)) < 1e-11, 0.0, x)
    z = np.asarray(z, dtype=float)
    objective = evaluate(inst, y, x, z)
    s, _, s2 = _inventories(inst, x, z)
    return PlanSolution(
        y=_frozen(y.astype(int), int),
        x=_frozen(x),
        s=_frozen(np.maximum(s, 0.0)),
        s2=_frozen(np.maximum(s2, 0.0)),
        z=_frozen(z.astype(int), int),
        objective=objective,
    )


def check_feasible(inst: Instance, sol: PlanSolution, tol: float = FEAS_TOL) -> list[str]:
    """List every constraint the solution violates (empty when feasible)."""
    out: list[str] = []
    y, x, s, s2, z = (np.asarray(a, dtype=float) for a in (sol.y, sol.x, sol.s, sol.s2, sol.z))
    if y.shape != (inst.T,) or x.shape != (inst.T,) or s.shape != (inst.p,):
        return ["shape: y, x must have T entries and s must have p entries"]
    if z.shape != (inst.m,) or s2.shape != (inst.m, inst.n2):
        return ["shape: z must have m entries and s2 must be m x (T - p)"]
    for name, vec in (("y", y), ("z", z)):
        for idx in np.flatnonzero((vec != 0) & (vec != 1)):
            out.append(f"{name}[{idx}]: not binary")
    for name, vec in (("x", x), ("s", s), ("s2", s2.ravel())):
        if np.any(vec < -tol):
            out.append(f"{name}: negative entries")
    prev = 0.0
    for i in range(inst.p):
        if abs(x[i] + prev - inst.d[i] - s[i]) > tol:
            out.append(f"balance[{i + 1}]: x + s_prev != d + s")
        prev = s[i]
    for i in range(inst.T):
        if x[i] > tol and y[i] < 0.5:
            out.append(f"setup[{i + 1}]: x > 0 with y = 0")
    D = cumulants(inst).D
    s_p = s[-1]
    prod = np.cumsum(x[inst.p :]) if inst.n2 else np.zeros(0)
    for j in range(inst.m):
        for c in range(inst.n2):
            period = inst.p + 1 + c
            if z[j] == 0:
                if s_p + prod[c] < D[j, c] - tol:
                    out.append(f"demand[{j},{period}]: scenario demand unmet")
                if abs(s2[j, c] - (s_p + prod[c] - D[j, c])) > tol:
                    out.append(f"stock[{j},{period}]: inventory inconsistent with flow")
            elif abs(s2[j, c]) > tol:
                out.append(f"stock[{j},{period}]: dropped scenario carries stock")
    mass = float(inst.probs @ z)
    if mass > inst.epsilon + PROB_TOL:
        out.append(f"chance: dropped probability {mass:.9g} > epsilon {inst.epsilon}")
    if not out:
        try:
            obj = evaluate(inst, y, x, z)
        except Infeasible as exc:  # pragma: no cover - guarded by checks above
            out.append(f"evaluate: {exc}")
        else:
            if abs(obj - sol.objective) > tol * (1 + abs(obj)):
                out.append(f"objective: reported {sol.objective} but plan costs {obj}")
    return out


# ---------------------------------------------------------------------------
# Random instances


def random_instance(T: int, p: int, m: int, epsilon: float, seed: int) -> Instance:
    """Draw an instance that satisfies the stronger Wagner-Whitin condition.

    Demands are integers in [0, 20], setup costs lie in [1, 50], holding costs
    in [0.1, 2]. Unit costs are built backward from ``alpha_T`` so every
    adjacent pair keeps a nonnegative margin.
    """
    if not 1 <= p <= T or m < 1:
        raise ValueError("need T >= p >= 1 and m >= 1")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if p == T:
        m = 1
    rng = np.random.default_rng(seed)
    d = rng.integers(0, 21, size=p).astype(float)
    demands = rng.integers(0, 21, size=(m, T - p)).astype(float)
    beta = rng.uniform(1.0, 50.0, size=T)
    h = rng.uniform(0.1, 2.0, size=T)
    weights = rng.uniform(0.1, 1.0, size=m)
    probs = weights / weights.sum()
    alpha = np.empty(T)
    alpha[T - 1] = rng.uniform(1.0, 5.0)
    slack = rng.uniform(0.0, 1.0, size=T)
    for i in range(T - 2, -1, -1):
        w = 1.0 if i + 1 <= p else 1.0 - epsilon
        alpha[i] = max(0.1, alpha[i + 1] + slack[i] - h[i] * w)
    return validate_instance(
        {
            "T": T,
            "p": p,
            "alpha": alpha.tolist(),
            "beta": beta.tolist(),
            "h": h.tolist(),
            "d": d.tolist(),
            "scenarios": [
                {"prob": float(pr), "demands": row.tolist()}
                for pr, row in zip(probs, demands)
            ],
            "epsilon": float(epsilon),
        }
    )
