"""Randomized invariants, driven by hypothesis with a fixed derandomized seed."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from slscc.formulations import build_de, build_s_extended, build_s_lp, y_name, z_name
from slscc.lp_core import fix_and_solve, solve_lp
from slscc.model import check_feasible, check_ww, cumulants, evaluate, pos_part, random_instance, validate_instance
from slscc.subproblem import closed_form, closed_form_general, dp_value, enumerate_family

SETTINGS = settings(max_examples=60, deadline=None, derandomize=True)


@st.composite
def instances(draw, max_T=6, max_m=4):
    T = draw(st.integers(2, max_T))
    p = draw(st.integers(1, T - 1))
    m = draw(st.integers(1, max_m))
    eps = draw(st.sampled_from([0.0, 0.1, 0.3, 0.5]))
    return random_instance(T, p, m, eps, draw(st.integers(0, 10**6)))


@st.composite
def plans(draw):
    """Instance plus a setup vector and an admissible indicator vector."""
    inst = draw(instances())
    y = np.array(draw(st.lists(st.integers(0, 1), min_size=inst.T, max_size=inst.T)))
    z = np.array(draw(st.lists(st.integers(0, 1), min_size=inst.m, max_size=inst.m)))
    assume(inst.probs @ z <= inst.epsilon + 1e-9 and not z.all())
    first = int(np.argmax(y)) if y.any() else inst.T
    merged = np.concatenate([inst.d, cumulants(inst).D[z == 0].max(axis=0)])
    assume(y.any() and not merged[:first].any())
    return inst, y, z


@SETTINGS
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_pos_part_idempotent_and_monotone(a, b):
    assert pos_part(pos_part(a)) == pos_part(a)
    if a <= b:
        assert pos_part(a) <= pos_part(b)


@SETTINGS
@given(instances())
def test_cumulants_shape(inst):
    D = cumulants(inst).D
    assert np.all(np.diff(D, axis=1) >= 0)
    np.testing.assert_allclose(D[:, -1], inst.demands.sum(axis=1))


@SETTINGS
@given(instances(), st.floats(0.0, 1.0))
def test_condition_monotone_in_epsilon(inst, frac):
    assert check_ww(inst).holds
    smaller = validate_instance({**inst.to_dict(), "epsilon": inst.epsilon * frac})
    assert check_ww(smaller).holds


@SETTINGS
@given(plans())
def test_closed_form_feasible_and_matches_de(data):
    inst, y, z = data
    sol = closed_form_general(inst, z, y)
    assert check_feasible(inst, sol) == []
    assert evaluate(inst, sol.y, sol.x, sol.z) == pytest.approx(sol.objective, abs=1e-9)
    fix = {y_name(i + 1): float(v) for i, v in enumerate(y)}
    fix |= {z_name(j): float(v) for j, v in enumerate(z)}
    assert fix_and_solve(build_de(inst), fix).objective == pytest.approx(sol.objective, abs=1e-7)


@SETTINGS
@given(plans())
def test_de_point_scores_like_evaluate(data):
    inst, y, z = data
    sol = closed_form_general(inst, z, y)
    model = build_de(inst)
    point = {y_name(i + 1): float(v) for i, v in enumerate(y)}
    point |= {z_name(j): float(v) for j, v in enumerate(z)}
    point |= {f"x[{i + 1}]": float(v) for i, v in enumerate(sol.x)}
    point |= {f"s[{i + 1}]": float(v) for i, v in enumerate(sol.s)}
    for j in range(inst.m):
        for c in range(inst.n2):
            point[f"sj[{j + 1},{inst.p + 1 + c}]"] = float(sol.s2[j, c])
    assert model.violations(point) == []
    assert model.objective_value(point) == pytest.approx(sol.objective, abs=1e-9)


@SETTINGS
@given(instances(), st.data())
def test_subproblem_three_ways(inst, data):
    S = data.draw(st.sampled_from(enumerate_family(inst, minimal_only=False).sets))
    dp = dp_value(inst, S)
    lp = solve_lp(build_s_lp(inst, S))
    assert lp.objective == pytest.approx(dp, abs=1e-7)
    assert solve_lp(build_s_extended(inst, S)).objective == pytest.approx(dp, abs=1e-7)
    y = np.array([lp[y_name(i)] for i in range(1, inst.T + 1)])
    assert np.all(np.minimum(np.abs(y), np.abs(y - 1)) <= 1e-6)
    assert check_feasible(inst, closed_form(inst, S, np.round(y))) == []


@SETTINGS
@given(instances(max_T=5, max_m=3))
def test_lp_optimum_is_locally_stable(inst):
    # Nudging the optimal point along any variable axis either breaks a row
    # or does not improve the objective.
    model = build_s_lp(inst, range(inst.m))
    res = solve_lp(model)
    assert model.violations(res.point) == []
    base = model.objective_value(res.point)
    assert base == pytest.approx(res.objective, abs=1e-9)
    for v in model.variables:
        for step in (1e-3, -1e-3):
            moved = dict(res.point)
            moved[v.name] += step
            if not model.violations(moved):
                assert model.objective_value(moved) >= base - 1e-9
