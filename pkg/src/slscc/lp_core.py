"""Dense two-phase simplex and a total-unimodularity spot checker.

Models are first rewritten into a canonical form ``min c'x`` subject to
``G x >= g``, ``E x = e``, ``x >= 0`` (fixed variables substituted, lower
bounds shifted, finite upper bounds turned into rows). Tall canonical models
are solved through their dual, which has one row per column of the primal;
the primal vertex is read off the final reduced costs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EntryOutOfRange, NumericalFailure, SizeCap
from .lpmodel import LinearModel

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
ZERO_SNAP = 1e-11
OPT_TOL = 1e-9


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpResult:
    status: Status
    objective: float
    point: dict[str, float]
    is_vertex: bool = False
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def __getitem__(self, name: str) -> float:
        return self.point[name]


# ---------------------------------------------------------------------------
# Tableau engine


@dataclass
class _Outcome:
    status: Status
    x: np.ndarray | None = None
    reduced: np.ndarray | None = None  # phase-two reduced costs of the structural columns
    pivots: int = 0


class _Tableau:
    """Dense tableau for ``min c'x, Ax = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], limit: int):
        m, n = A.shape
        self.m, self.n = m, n
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.pivots = 0
        self.limit = limit

    def set_costs(self, c: np.ndarray) -> None:
        row = np.zeros(self.n + 1)
        row[: len(c)] = c
        for r, k in enumerate(self.basis):
            if row[k] != 0.0:
                row -= row[k] * self.T[r]
        self.T[-1] = row

    def pivot(self, r: int, k: int) -> None:
        T = self.T
        T[r] /= T[r, k]
        col = T[:, k].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[np.abs(T) < ZERO_SNAP] = 0.0
        T[:, k] = 0.0
        T[r, k] = 1.0
        self.basis[r] = k
        self.pivots += 1
        if self.pivots > self.limit:
            raise NumericalFailure(f"pivot limit {self.limit} exhausted")

    def run(self, allowed: np.ndarray) -> Status:
        """Iterate to optimality over columns flagged in ``allowed``."""
        m = self.m
        degenerate = 0
        bland = False
        while True:
            rc = self.T[-1, : self.n]
            cand = np.flatnonzero((rc < -OPT_TOL) & allowed)
            if cand.size == 0:
                return Status.OPTIMAL
            if bland:
                k = int(cand[0])
            else:
                k = int(cand[np.argmin(rc[cand])])
            col = self.T[:m, k]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return Status.UNBOUNDED
            ratios = self.T[rows, self.n] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            basis = np.asarray(self.basis)
            r = int(ties[np.argmin(basis[ties])])
            if best <= ZERO_SNAP:
                degenerate += 1
                if degenerate > 10 * max(m, 1):
                    bland = True
            self.pivot(r, k)


def _solve_standard(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> _Outcome:
    """Two-phase simplex for ``min c'x, Ax = b, x >= 0``."""
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    limit = 50 * (m + n) + 50

    # Reuse unit columns as the starting basis where possible.
    basis = [-1] * m
    nz = A != 0.0
    unit_cols = np.flatnonzero((nz.sum(axis=0) == 1))
    for k in unit_cols:
        r = int(np.flatnonzero(nz[:, k])[0])
        if basis[r] < 0 and A[r, k] > 0:
            scale = A[r, k]
            A[r] /= scale
            b[r] /= scale
            basis[r] = int(k)
    missing = [r for r in range(m) if basis[r] < 0]
    n_art = len(missing)
    full = np.zeros((m, n + n_art))
    full[:, :n] = A
    for a, r in enumerate(missing):
        full[r, n + a] = 1.0
        basis[r] = n + a
    tab = _Tableau(full, b, basis, limit)
    if n_art:
        phase1 = np.zeros(n + n_art)
        phase1[n:] = 1.0
        tab.set_costs(phase1)
        allowed = np.ones(n + n_art, dtype=bool)
        tab.run(allowed)
        infeas = -tab.T[-1, -1]
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return _Outcome(Status.INFEASIBLE, pivots=tab.pivots)
        # Drive artificials out of the basis; drop rows that turn out redundant.
        r = 0
        while r < tab.m:
            if tab.basis[r] >= n:
                row = tab.T[r, :n]
                ks = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if ks.size:
                    tab.pivot(r, int(ks[0]))
                else:
                    tab.T = np.delete(tab.T, r, axis=0)
                    del tab.basis[r]
                    tab.m -= 1
                    continue
            r += 1
        allowed = np.zeros(n + n_art, dtype=bool)
        allowed[:n] = True
    else:
        allowed = np.ones(n, dtype=bool)
    cost = np.zeros(n + n_art)
    cost[:n] = c
    tab.set_costs(cost)
    status = tab.run(allowed)
    if status is Status.UNBOUNDED:
        return _Outcome(status, pivots=tab.pivots)
    x = np.zeros(n + n_art)
    for r, k in enumerate(tab.basis):
        x[k] = tab.T[r, -1]
    return _Outcome(Status.OPTIMAL, x=x[:n], reduced=tab.T[-1, :n].copy(), pivots=tab.pivots)


# ---------------------------------------------------------------------------
# Canonical form


@dataclass
class _Canonical:
    G: np.ndarray
    g: np.ndarray
    E: np.ndarray
    e: np.ndarray
    c: np.ndarray
    offset: float
    # original variable k = const[k] + sum(coef * canon[col]) over maps[k]
    const: np.ndarray
    maps: list[list[tuple[int, float]]]
    trivially_infeasible: bool = False


def _canonicalize(model: LinearModel) -> _Canonical:
    const = np.zeros(model.num_vars)
    maps: list[list[tuple[int, float]]] = []
    ncol = 0
    ub_rows: list[tuple[int, float]] = []
    for k, v in enumerate(model.variables):
        lo, hi = v.lb, v.ub
        if math.isfinite(lo) and math.isfinite(hi) and hi - lo <= 0.0:
            const[k] = lo
            maps.append([])
        elif math.isfinite(lo):
            const[k] = lo
            maps.append([(ncol, 1.0)])
            if math.isfinite(hi):
                ub_rows.append((ncol, hi - lo))
            ncol += 1
        elif math.isfinite(hi):
            const[k] = hi
            maps.append([(ncol, -1.0)])
            ncol += 1
        else:
            maps.append([(ncol, 1.0), (ncol + 1, -1.0)])
            ncol += 2

    c = np.zeros(ncol)
    offset = model.objective_constant
    for k, v in enumerate(model.variables):
        offset += v.obj * const[k]
        for col, coef in maps[k]:
            c[col] += v.obj * coef

    ge_rows: dict[bytes, tuple[np.ndarray, float]] = {}
    eq_rows: dict[bytes, tuple[np.ndarray, float]] = {}
    infeasible = False
    for row in model.constraints:
        vec = np.zeros(ncol)
        rhs = row.rhs
        for k, coef in row.coefs:
            rhs -= coef * const[k]
            for col, sgn in maps[k]:
                vec[col] += coef * sgn
        vec[np.abs(vec) < ZERO_SNAP] = 0.0
        if row.sense == "<=":
            vec, rhs = -vec, -rhs
        if not vec.any():
            tol = FEAS_TOL * (1.0 + abs(rhs))
            if (row.sense == "=" and abs(rhs) > tol) or (row.sense != "=" and rhs > tol):
                infeasible = True
            continue
        key = vec.tobytes() + np.float64(rhs).tobytes()
        (eq_rows if row.sense == "=" else ge_rows).setdefault(key, (vec, rhs))
    for col, bound in ub_rows:
        vec = np.zeros(ncol)
        vec[col] = -1.0
        ge_rows.setdefault(vec.tobytes() + np.float64(-bound).tobytes(), (vec, -bound))

    def stack(rows):
        if not rows:
            return np.zeros((0, ncol)), np.zeros(0)
        mats, rhs = zip(*rows.values())
        return np.vstack(mats), np.array(rhs)

    G, g = stack(ge_rows)
    E, e = stack(eq_rows)
    return _Canonical(G, g, E, e, c, offset, const, maps, infeasible)


def _solve_primal(cf: _Canonical) -> _Outcome:
    ng, n = cf.G.shape
    ne = cf.E.shape[0]
    A = np.zeros((ng + ne, n + ng))
    A[:ng, :n] = cf.G
    A[:ng, n:] = -np.eye(ng)
    A[ng:, :n] = cf.E
    b = np.concatenate([cf.g, cf.e])
    c = np.concatenate([cf.c, np.zeros(ng)])
    out = _solve_standard(A, b, c)
    if out.x is not None:
        out.x = out.x[:n]
    return out


def _dual_system(cf: _Canonical, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ng, n = cf.G.shape
    ne = cf.E.shape[0]
    A = np.hstack([cf.G.T, cf.E.T, -cf.E.T, np.eye(n)])
    obj = np.concatenate([-cf.g, -cf.e, cf.e, np.zeros(n)])
    return A, c, obj


def _solve_dual(cf: _Canonical) -> _Outcome:
    n = cf.G.shape[1]
    A, rhs, obj = _dual_system(cf, cf.c)
    out = _solve_standard(A, rhs, obj)
    if out.status is Status.OPTIMAL:
        x = out.reduced[A.shape[1] - n :]
        return _Outcome(Status.OPTIMAL, x=np.where(x < 0, 0.0, x), pivots=out.pivots)
    if out.status is Status.UNBOUNDED:
        return _Outcome(Status.INFEASIBLE, pivots=out.pivots)
    # Dual infeasible: the primal is unbounded when it is feasible at all.
    probe = _solve_standard(A, np.zeros(n), obj)
    status = Status.INFEASIBLE if probe.status is Status.UNBOUNDED else Status.UNBOUNDED
    return _Outcome(status, pivots=out.pivots + probe.pivots)


def _residual(cf: _Canonical, x: np.ndarray) -> float:
    worst = 0.0
    if cf.G.shape[0]:
        worst = max(worst, float(np.max((cf.g - cf.G @ x) / (1.0 + np.abs(cf.g)))))
    if cf.E.shape[0]:
        worst = max(worst, float(np.max(np.abs(cf.E @ x - cf.e) / (1.0 + np.abs(cf.e)))))
    return worst


def solve_lp(model: LinearModel, method: str = "auto") -> LpResult:
    """Solve the continuous relaxation of ``model`` (integrality is ignored).

    ``method`` picks the tableau: ``"primal"``, ``"dual"`` or ``"auto"``,
    which uses the dual when the canonical model has many more rows than
    columns. Both return a basic optimal solution.
    """
    if method not in ("auto", "primal", "dual"):
        raise ValueError(f"unknown method {method}")
    cf = _canonicalize(model)
    if cf.trivially_infeasible:
        return LpResult(Status.INFEASIBLE, math.nan, {})
    nrows = cf.G.shape[0] + cf.E.shape[0]
    ncols = cf.c.size
    if nrows == 0:
        if np.any(cf.c < -OPT_TOL):
            return LpResult(Status.UNBOUNDED, -math.inf, {})
        out = _Outcome(Status.OPTIMAL, x=np.zeros(ncols))
    else:
        use_dual = method == "dual" or (method == "auto" and nrows > 1.5 * ncols)
        out = _solve_dual(cf) if use_dual else _solve_primal(cf)
        if out.status is Status.OPTIMAL and _residual(cf, out.x) > FEAS_TOL and use_dual:
            out = _solve_primal(cf)  # numerical safety net
    if out.status is not Status.OPTIMAL:
        obj = math.nan if out.status is Status.INFEASIBLE else -math.inf
        return LpResult(out.status, obj, {}, pivots=out.pivots)
    values = cf.const.copy()
    for k, terms in enumerate(cf.maps):
        for col, coef in terms:
            values[k] += coef * out.x[col]
    values[np.abs(values) < ZERO_SNAP] = 0.0
    point = {v.name: float(values[k]) for k, v in enumerate(model.variables)}
    objective = model.objective_value(point)
    return LpResult(Status.OPTIMAL, float(objective), point, True, out.pivots)


def fix_and_solve(model: LinearModel, fixings: dict[str, float], method: str = "auto") -> LpResult:
    """Pin the named variables and solve; out-of-bounds fixings are infeasible."""
    for name, value in fixings.items():
        v = model.variables[model.index(name)]
        if value < v.lb - FEAS_TOL or value > v.ub + FEAS_TOL:
            return LpResult(Status.INFEASIBLE, math.nan, {})
    return solve_lp(model.with_bounds(fixings), method)


# ---------------------------------------------------------------------------
# Total unimodularity


@dataclass(frozen=True)
class TUReport:
    is_tu: bool
    max_order: int
    witness: np.ndarray | None = None
    rows: tuple[int, ...] | None = None
    cols: tuple[int, ...] | None = None
    determinant: int | None = None


_PERMS: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _permutations(k: int) -> tuple[np.ndarray, np.ndarray]:
    if k not in _PERMS:
        perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
        signs = np.array([_perm_sign(p) for p in perms], dtype=np.int64)
        _PERMS[k] = (perms, signs)
    return _PERMS[k]


def _perm_sign(perm) -> int:
    sign, seen = 1, [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length, j = 0, start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _batch_det(blocks: np.ndarray) -> np.ndarray:
    """Exact integer determinants of a stack of k x k integer matrices."""
    k = blocks.shape[1]
    perms, signs = _permutations(k)
    rows = np.arange(k)
    # prod over i of blocks[:, i, perm[i]] for each permutation
    terms = blocks[:, rows[None, :], perms].prod(axis=2)  # (batch, k!)
    return terms @ signs


def check_tu(matrix, max_order: int) -> TUReport:
    """Check every square submatrix up to ``max_order`` for determinant in {-1, 0, 1}."""
    M = np.asarray(matrix)
    if M.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if not np.all(np.isin(M, (-1, 0, 1))):
        raise EntryOutOfRange("entries must lie in {-1, 0, 1}")
    if max_order < 1 or max_order > 5 or max(M.shape) > 24:
        raise SizeCap("check_tu is capped at order 5 and dimension 24")
    M = M.astype(np.int64)
    nr, nc = M.shape
    for k in range(1, min(max_order, nr, nc) + 1):
        col_sets = np.array(list(itertools.combinations(range(nc), k)), dtype=np.int64)
        for rset in itertools.combinations(range(nr), k):
            sub = M[list(rset)]  # k x nc
            if not sub.any(axis=1).all():
                continue
            blocks = sub[:, col_sets].transpose(1, 0, 2)  # (ncombo, k, k)
            dets = _batch_det(blocks)
            bad = np.flatnonzero(np.abs(dets) > 1)
            if bad.size:
                cols = tuple(int(c) for c in col_sets[bad[0]])
                return TUReport(
                    False,
                    max_order,
                    witness=M[np.ix_(rset, cols)],
                    rows=tuple(rset),
                    cols=cols,
                    determinant=int(dets[bad[0]]),
                )
    return TUReport(True, max_order)
