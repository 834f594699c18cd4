import itertools

import numpy as np
import pytest

from slscc.errors import EntryOutOfRange, SizeCap
from slscc.formulations import build_c_subproblem, build_de, build_nslscc, build_s_lp, carry_matrix
from slscc.formulations import NodeConstraintSet, y_name, z_name
from slscc.lp_core import Status, check_tu, fix_and_solve, solve_lp
from slscc.lpmodel import LinearModel
from slscc.model import random_instance

scipy_opt = pytest.importorskip("scipy.optimize")


def one_var(rows, obj=-1.0):
    model = LinearModel("toy")
    model.add_var("x", obj=obj)
    for k, (sense, rhs) in enumerate(rows):
        model.add_row(f"r{k}", "toy", {"x": 1.0}, sense, rhs)
    return model


@pytest.mark.parametrize("method", ["primal", "dual", "auto"])
def test_textbook_statuses(method):
    res = solve_lp(one_var([("<=", 1.0)]), method)
    assert res.status is Status.OPTIMAL
    assert res.objective == pytest.approx(-1.0) and res["x"] == pytest.approx(1.0)
    assert solve_lp(one_var([("<=", -1.0)]), method).status is Status.INFEASIBLE
    assert solve_lp(one_var([]), method).status is Status.UNBOUNDED


def test_free_and_upper_bounded_variables():
    model = LinearModel()
    model.add_var("a", lb=-np.inf, ub=np.inf, obj=1.0)
    model.add_var("b", lb=-np.inf, ub=3.0, obj=-1.0)
    model.add_row("c0", "t", {"a": 1.0, "b": -1.0}, ">=", -5.0)
    res = solve_lp(model)
    assert res.optimal
    assert res["b"] == pytest.approx(3.0)
    assert res["a"] == pytest.approx(-2.0)


def test_fix_and_solve_examples(i1, i2):
    de = build_de(i1)
    assert fix_and_solve(de, {y_name(1): 1, y_name(2): 1}).objective == pytest.approx(15.5)
    assert fix_and_solve(de, {y_name(1): 1, y_name(2): 0}).objective == pytest.approx(18.0)
    all_dropped = {z_name(j): 1.0 for j in range(i2.m)}
    assert fix_and_solve(build_de(i2), all_dropped).status is Status.INFEASIBLE


def test_fix_out_of_bounds_is_infeasible(i1):
    assert fix_and_solve(build_de(i1), {y_name(1): 2.0}).status is Status.INFEASIBLE


def test_fix_whole_point(i1):
    de = build_de(i1)
    point = solve_lp(de).point
    res = fix_and_solve(de, point)
    assert res.optimal and res.objective == pytest.approx(de.objective_value(point))


def test_deterministic_pivots(i2):
    model = build_nslscc(i2)
    a, b = solve_lp(model), solve_lp(model)
    assert a.pivots == b.pivots and a.point == b.point


def test_tu_examples():
    assert check_tu(np.eye(3, dtype=int), 3).is_tu
    rep = check_tu([[1, 1], [-1, 1]], 2)
    assert not rep.is_tu and abs(rep.determinant) == 2
    assert rep.witness.shape == (2, 2)


def test_tu_guards():
    with pytest.raises(EntryOutOfRange):
        check_tu([[2, 0], [0, 1]], 2)
    with pytest.raises(SizeCap):
        check_tu(np.eye(3, dtype=int), 6)
    with pytest.raises(SizeCap):
        check_tu(np.zeros((25, 2), dtype=int), 2)


def test_interval_block_t4():
    assert check_tu(carry_matrix(4), 4).is_tu


def test_tu_matches_float_determinants():
    rng = np.random.default_rng(0)
    for _ in range(30):
        M = rng.integers(-1, 2, size=(3, 4))
        minors = [
            round(np.linalg.det(M[np.ix_(r, c)]))
            for k in (1, 2, 3)
            for r in itertools.combinations(range(3), k)
            for c in itertools.combinations(range(4), k)
        ]
        assert check_tu(M, 3).is_tu == all(abs(v) <= 1 for v in minors)


# -- cross-check against HiGHS ------------------------------------------------


def highs(model):
    n = model.num_vars
    c = np.array([v.obj for v in model.variables])
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row in model.constraints:
        vec = np.zeros(n)
        for k, coef in row.coefs:
            vec[k] = coef
        if row.sense == "=":
            A_eq.append(vec), b_eq.append(row.rhs)
        elif row.sense == "<=":
            A_ub.append(vec), b_ub.append(row.rhs)
        else:
            A_ub.append(-vec), b_ub.append(-row.rhs)
    bounds = [(None if v.lb == -np.inf else v.lb, None if v.ub == np.inf else v.ub)
              for v in model.variables]
    res = scipy_opt.linprog(
        c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
        A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
        bounds=bounds, method="highs",
    )
    return res.status, (res.fun + model.objective_constant if res.status == 0 else None)


def random_lp(rng, n, m):
    model = LinearModel("rand")
    for k in range(n):
        lb = float(rng.choice([0.0, -2.0, -np.inf]))
        ub = float(rng.choice([np.inf, 4.0]))
        model.add_var(f"v{k}", lb=lb, ub=ub, obj=float(rng.integers(-5, 6)))
    for r in range(m):
        coefs = {f"v{k}": float(rng.integers(-3, 4)) for k in range(n) if rng.random() < 0.6}
        model.add_row(f"r{r}", "rand", coefs, str(rng.choice([">=", "<=", "="])),
                      float(rng.integers(-6, 7)))
    return model


@pytest.mark.parametrize("seed", range(40))
def test_random_lp_matches_highs(seed):
    rng = np.random.default_rng(seed)
    model = random_lp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 8)))
    code, value = highs(model)
    for method in ("primal", "dual"):
        res = solve_lp(model, method)
        expected = {0: Status.OPTIMAL, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}[code]
        assert res.status is expected, method
        if value is not None:
            assert res.objective == pytest.approx(value, abs=1e-7)
            assert model.violations(res.point) == []


@pytest.mark.parametrize("seed", range(12))
def test_formulation_relaxations_match_highs(seed):
    inst = random_instance(5, 2, 3, 0.3, seed)
    models = [build_de(inst), build_nslscc(inst), build_s_lp(inst, range(inst.m)),
              build_c_subproblem(inst, NodeConstraintSet({0}, set()))]
    for model in models:
        code, value = highs(model)
        res = solve_lp(model)
        assert code == 0 and res.optimal
        assert res.objective == pytest.approx(value, rel=1e-9, abs=1e-7)
