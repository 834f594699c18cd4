import io

import numpy as np
import pytest

from slscc.errors import EmptyJ1, EmptySet, InfeasibleNode
from slscc.formulations import (
    NodeConstraintSet,
    build_c_subproblem,
    build_de,
    build_nslscc,
    build_s_extended,
    build_s_lp,
    carry_matrix,
    subproblem_costs,
    u_name,
    y_name,
    z_name,
)
from slscc.lp_core import check_tu, fix_and_solve, solve_lp
from slscc.lpmodel import LinearModel, dumps_lp, export_model, loads_lp
from slscc.model import evaluate, make_instance, random_instance
from slscc.subproblem import closed_form, closed_form_general, enumerate_family, solve_s_dp


def test_de_sizes(i2):
    model = build_de(i2)
    # s_1, x_1..x_3, four scenario stocks, y_1..y_3, z_1..z_2
    assert model.num_vars == 13
    assert model.family_counts() == {"balance": 1, "demand": 4, "chance": 1, "stock": 4, "setup": 3}
    assert sum(v.integer for v in model.variables) == 5


def test_de_single_certain_scenario_pins_z(i1):
    z = build_de(i1).variables[build_de(i1).index(z_name(0))]
    assert z.ub == 0.0


def test_de_integer_points_match_evaluate(i2):
    model = build_de(i2)
    for y, x, z in [((1, 0, 0), (10, 0, 0), (0, 1)), ((1, 1, 0), (7, 3, 0), (0, 0)), ((1, 0, 1), (8, 0, 4), (1, 0))]:
        fix = {y_name(i + 1): v for i, v in enumerate(y)} | {z_name(j): v for j, v in enumerate(z)}
        fix |= {f"x[{i + 1}]": v for i, v in enumerate(x)}
        assert fix_and_solve(model, fix).objective == pytest.approx(evaluate(i2, y, x, z))


def test_de_relaxation_below_integer_optimum(i1):
    assert solve_lp(build_de(i1)).objective <= 15.5 + 1e-9


def test_nslscc_family_sizes(i2):
    counts = build_nslscc(i2).family_counts()
    assert "first_stage" not in counts
    assert counts["first_stage_scen"] == 4
    assert counts["production"] == 6
    assert counts["scenario_stock"] == 12
    assert counts["chance"] == 1


def test_nslscc_relaxation_is_a_bound(i1, i2):
    assert solve_lp(build_nslscc(i1)).objective == pytest.approx(15.5)
    assert solve_lp(build_nslscc(i2)).objective <= 14.6 + 1e-9


def test_nslscc_link_rows_needed():
    # Cheap late setup, nothing needed until period 3. Without the rows tying
    # scenario stock to cumulative supply the relaxation drops to 2.
    inst = make_instance((1, 1, 1), (100, 100, 1), (0.1, 0.1, 0.1), (0,), [(1.0, (0, 10))], 0.0)
    assert solve_lp(build_nslscc(inst, link_rows=False)).objective == pytest.approx(2.0)
    assert solve_lp(build_nslscc(inst)).objective == pytest.approx(11.0)
    assert closed_form_general(inst, (0,), (0, 0, 1)).objective == pytest.approx(11.0)


@pytest.mark.parametrize("seed", range(6))
def test_nslscc_pinned_matches_closed_form(seed):
    inst = random_instance(5, 2, 3, 0.4, seed)
    model = build_nslscc(inst)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        y = rng.integers(0, 2, inst.T)
        y[0] = 1
        z = np.zeros(inst.m, dtype=int)
        j = int(rng.integers(inst.m))
        if inst.probs[j] <= inst.epsilon:
            z[j] = 1
        fix = {y_name(i + 1): float(v) for i, v in enumerate(y)}
        fix |= {z_name(k): float(v) for k, v in enumerate(z)}
        assert fix_and_solve(model, fix).objective == pytest.approx(
            closed_form_general(inst, z, y).objective, abs=1e-7
        )


def test_subproblem_costs_tiny(i1):
    c = subproblem_costs(i1, [0])
    np.testing.assert_allclose(c.h_prime, [1.0])
    np.testing.assert_allclose(c.hJS, [[2.0]])
    np.testing.assert_allclose(c.r, [2.0, 3.0])
    assert c.constant == pytest.approx(5.0)
    with pytest.raises(EmptySet):
        subproblem_costs(i1, [])


def test_subproblem_costs_outside_set(i2):
    c = subproblem_costs(i2, [0])
    np.testing.assert_allclose(c.hJS[1], 0.5 * i2.h[1:])


def test_subproblem_costs_nonnegative():
    for seed in range(50):
        inst = random_instance(6, 2, 4, 0.3, seed)
        c = subproblem_costs(inst, range(inst.m))
        assert np.all(c.h_prime >= -1e-12) and np.all(c.hJS >= -1e-12) and np.all(c.r >= 0)


def test_s_lp_tiny(i1):
    res = solve_lp(build_s_lp(i1, [0]))
    assert res.objective == pytest.approx(15.5)
    assert [res[y_name(1)], res[y_name(2)]] == pytest.approx([1.0, 1.0])
    pinned = fix_and_solve(build_s_lp(i1, [0]), {y_name(1): 1.0, y_name(2): 0.0})
    assert pinned.objective == pytest.approx(18.0)
    with pytest.raises(EmptySet):
        build_s_lp(i1, [])


def test_s_extended_tiny(i1):
    res = solve_lp(build_s_extended(i1, [0]))
    assert res.objective == pytest.approx(15.5)


@pytest.mark.parametrize("seed", range(5))
def test_s_extended_carry_values(seed):
    inst = random_instance(5, 2, 3, 0.0, seed)
    res = solve_lp(build_s_extended(inst, range(inst.m)))
    y = [res[y_name(k)] for k in range(1, inst.T + 1)]
    for i in range(inst.T):
        for t in range(i + 1, inst.T + 1):
            expected = max(0.0, 1.0 - sum(y[i:t]))
            # carries into zero-demand periods are free to sit anywhere above the bound
            assert res[u_name(i, t)] >= expected - 1e-7


@pytest.mark.parametrize("T", [3, 4, 5])
def test_carry_block_tu(T):
    assert check_tu(carry_matrix(T), 4).is_tu


def test_c_subproblem_full_keep_matches_s_lp(i2):
    full = build_c_subproblem(i2, NodeConstraintSet(frozenset(range(i2.m))))
    base = build_s_lp(i2, range(i2.m))
    assert solve_lp(full).objective == pytest.approx(solve_lp(base).objective)
    for v in base.variables:
        assert v.name in full


def test_c_subproblem_errors(i2):
    with pytest.raises(EmptyJ1):
        build_c_subproblem(i2, NodeConstraintSet(frozenset(), frozenset({0})))
    heavy = make_instance((1, 1), (1, 1), (1, 1), (1,), [(0.3, (1,)), (0.3, (2,)), (0.4, (3,))], 0.45)
    with pytest.raises(InfeasibleNode):
        build_c_subproblem(heavy, NodeConstraintSet({0}, {1, 2}))


def test_c_subproblem_complete_fixing_equals_dp():
    for seed in range(8):
        inst = random_instance(5, 2, 3, 0.4, seed)
        for drop in range(inst.m):
            if inst.probs[drop] > inst.epsilon:
                continue
            keep = frozenset(set(range(inst.m)) - {drop})
            C = NodeConstraintSet(keep, frozenset({drop}))
            assert solve_lp(build_c_subproblem(inst, C)).objective == pytest.approx(
                solve_s_dp(inst, keep).objective, abs=1e-7
            )


def test_node_set_overlap_rejected():
    with pytest.raises(ValueError):
        NodeConstraintSet({1}, {1})


# -- LP listings --------------------------------------------------------------


def test_empty_model_listing():
    text = dumps_lp(LinearModel("empty"))
    assert text.splitlines()[0].startswith("\\")
    assert "subject to\nbounds\nintegers\nend" in text


def test_listing_deterministic(i1):
    assert dumps_lp(build_de(i1)) == dumps_lp(build_de(i1))


@pytest.mark.parametrize("builder", [build_de, build_nslscc, lambda inst: build_s_extended(inst, [0, 1])])
def test_listing_round_trip(i2, builder, tmp_path):
    model = builder(i2)
    path = tmp_path / "m.lp"
    export_model(model, path)
    back = loads_lp(path.read_text())
    assert back.name == model.name
    assert [v for v in back.variables] == [v for v in model.variables]
    assert back.constraints == model.constraints
    assert back.objective_constant == model.objective_constant
    buf = io.StringIO()
    export_model(back, buf)
    assert buf.getvalue() == path.read_text()
    assert solve_lp(back).objective == pytest.approx(solve_lp(model).objective)


@pytest.mark.parametrize("seed", range(8))
def test_transformed_objective_identity(seed):
    inst = random_instance(6, 2, 3, 0.3, seed)
    rng = np.random.default_rng(seed)
    for S in enumerate_family(inst, minimal_only=False):
        y = rng.integers(0, 2, inst.T)
        y[0] = 1
        sol = closed_form(inst, S, y)
        c = subproblem_costs(inst, S)
        value = inst.beta @ y + c.h_prime @ sol.s + np.sum(c.hJS * sol.s2) + c.r.sum()
        assert value == pytest.approx(sol.objective, abs=1e-9)
