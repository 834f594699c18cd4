"""Solver-agnostic linear model container and its LP text format."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, TextIO

INF = math.inf
SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    integer: bool = False
    obj: float = 0.0


@dataclass(frozen=True)
class Constraint:
    name: str
    family: str
    coefs: tuple[tuple[int, float], ...]  # (variable index, coefficient), sorted by index
    sense: str
    rhs: float


class Expr:
    """Affine expression accumulator keyed by variable name."""

    __slots__ = ("coefs", "const")

    def __init__(self) -> None:
        self.coefs: dict[str, float] = defaultdict(float)
        self.const = 0.0

    def add(self, var: str, coef: float) -> "Expr":
        if coef:
            self.coefs[var] += coef
        return self

    def add_const(self, value: float) -> "Expr":
        self.const += value
        return self


@dataclass
class LinearModel:
    """Minimization model: bounded variables, sparse rows, constant offset."""

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective_constant: float = 0.0
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                integer: bool = False, obj: float = 0.0) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        if lb > ub:
            raise ValueError(f"inconsistent bounds for {name}: {lb} > {ub}")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), integer, float(obj)))
        return self._index[name]

    def add_row(self, name: str, family: str, coefs: dict[str, float], sense: str,
                rhs: float) -> None:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense}")
        packed = sorted(
            (self._index[v], float(c)) for v, c in coefs.items() if c != 0.0
        )
        self.constraints.append(Constraint(name, family, tuple(packed), sense, float(rhs)))

    def add_cmp(self, name: str, family: str, lhs: Expr, sense: str, rhs: Expr) -> bool:
        """Add ``lhs (sense) rhs``; returns False when the row is trivially true.

        A row with no variables left is dropped if it holds and kept (so the
        model is visibly infeasible) otherwise.
        """
        coefs: dict[str, float] = defaultdict(float)
        for v, c in lhs.coefs.items():
            coefs[v] += c
        for v, c in rhs.coefs.items():
            coefs[v] -= c
        coefs = {v: c for v, c in coefs.items() if abs(c) > 1e-15}
        bound = rhs.const - lhs.const
        if not coefs:
            holds = {">=": bound <= 1e-12, "<=": bound >= -1e-12, "=": abs(bound) <= 1e-12}
            if holds[sense]:
                return False
        self.add_row(name, family, coefs, sense, bound)
        return True

    def add_ge(self, name: str, family: str, lhs: Expr, rhs: Expr) -> bool:
        return self.add_cmp(name, family, lhs, ">=", rhs)

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_rows(self) -> int:
        return len(self.constraints)

    def family_counts(self) -> dict[str, int]:
        return dict(Counter(c.family for c in self.constraints))

    def stats(self) -> dict[str, object]:
        return {
            "name": self.name,
            "variables": self.num_vars,
            "integer_variables": sum(v.integer for v in self.variables),
            "constraints": self.num_rows,
            "families": self.family_counts(),
        }

    def with_bounds(self, fixings: dict[str, float]) -> "LinearModel":
        """Copy with the named variables pinned (``lb = ub = value``)."""
        out = self.copy()
        for name, value in fixings.items():
            k = out._index[name]
            out.variables[k] = replace(out.variables[k], lb=float(value), ub=float(value))
        return out

    def copy(self) -> "LinearModel":
        return LinearModel(
            name=self.name,
            variables=list(self.variables),
            constraints=list(self.constraints),
            objective_constant=self.objective_constant,
            _index=dict(self._index),
        )

    def objective_value(self, point: dict[str, float]) -> float:
        return self.objective_constant + sum(v.obj * point[v.name] for v in self.variables)

    def violations(self, point: dict[str, float], tol: float = 1e-7) -> list[str]:
        out = []
        for v in self.variables:
            val = point[v.name]
            if val < v.lb - tol or val > v.ub + tol:
                out.append(f"bound {v.name}={val}")
        names = [v.name for v in self.variables]
        for row in self.constraints:
            lhs = sum(c * point[names[k]] for k, c in row.coefs)
            scale = tol * (1 + abs(row.rhs))
            if (row.sense == ">=" and lhs < row.rhs - scale) or (
                row.sense == "<=" and lhs > row.rhs + scale
            ) or (row.sense == "=" and abs(lhs - row.rhs) > scale):
                out.append(f"row {row.name}: {lhs} {row.sense} {row.rhs}")
        return out


# ---------------------------------------------------------------------------
# LP text format


def _fmt(x: float) -> str:
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return repr(float(x))


def _terms(pairs: Iterable[tuple[str, float]]) -> str:
    return " ".join(f"{_fmt(c)} {name}" for name, c in pairs) or "0"


def write_lp(model: LinearModel, out: TextIO) -> None:
    names = [v.name for v in model.variables]
    out.write("\\ slscc LP listing\n")
    out.write(f"\\ model: {model.name}\n")
    out.write("\\ periods and scenarios are numbered from 1\n")
    out.write("minimize\n")
    out.write(f"  obj: {_terms((v.name, v.obj) for v in model.variables if v.obj)}\n")
    out.write(f"  constant: {_fmt(model.objective_constant)}\n")
    out.write("subject to\n")
    for row in model.constraints:
        body = _terms((names[k], c) for k, c in row.coefs)
        out.write(f"  {row.name} <{row.family}>: {body} {row.sense} {_fmt(row.rhs)}\n")
    out.write("bounds\n")
    for v in model.variables:
        out.write(f"  {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}\n")
    out.write("integers\n")
    ints = [v.name for v in model.variables if v.integer]
    for k in range(0, len(ints), 10):
        out.write("  " + " ".join(ints[k : k + 10]) + "\n")
    out.write("end\n")


def dumps_lp(model: LinearModel) -> str:
    import io

    buf = io.StringIO()
    write_lp(model, buf)
    return buf.getvalue()


def export_model(model: LinearModel, destination: str | Path | TextIO) -> None:
    """Write the LP listing to a path or an open text stream."""
    if hasattr(destination, "write"):
        write_lp(model, destination)  # type: ignore[arg-type]
        return
    Path(destination).write_text(dumps_lp(model), encoding="utf-8")


def _parse_float(tok: str) -> float:
    return float(tok)  # float() accepts "inf" and "-inf"


def loads_lp(text: str) -> LinearModel:
    """Read back a listing produced by :func:`write_lp`."""
    model = LinearModel()
    section = None
    objective: list[tuple[str, float]] = []
    rows: list[tuple[str, str, list[tuple[str, float]], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    order: list[str] = []
    ints: set[str] = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if line.startswith("\\ model:"):
                model.name = line.split(":", 1)[1].strip()
            continue
        if line in ("minimize", "subject to", "bounds", "integers", "end"):
            section = line
            continue
        if section == "minimize":
            key, body = line.split(":", 1)
            if key == "obj":
                toks = body.split()
                if toks != ["0"]:
                    objective = [(toks[k + 1], _parse_float(toks[k])) for k in range(0, len(toks), 2)]
            else:
                model.objective_constant = _parse_float(body.strip())
        elif section == "subject to":
            head, body = line.split(":", 1)
            name, fam = head.split()
            fam = fam.strip("<>")
            toks = body.split()
            rhs = _parse_float(toks[-1])
            sense = toks[-2]
            toks = toks[:-2]
            terms = [] if toks == ["0"] else [
                (toks[k + 1], _parse_float(toks[k])) for k in range(0, len(toks), 2)
            ]
            rows.append((name, fam, terms, sense, rhs))
        elif section == "bounds":
            lo, _, name, _, hi = line.split()
            bounds[name] = (_parse_float(lo), _parse_float(hi))
            order.append(name)
        elif section == "integers":
            ints.update(line.split())
    obj = dict(objective)
    for name in order:
        lo, hi = bounds[name]
        model.add_var(name, lo, hi, name in ints, obj.get(name, 0.0))
    for name, fam, terms, sense, rhs in rows:
        model.add_row(name, fam, dict(terms), sense, rhs)
    return model
