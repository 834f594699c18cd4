"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from slscc.bnb import BnbConfig, BnbStatus, branch_and_bound
from slscc.cli import main
from slscc.errors import Infeasible, InfeasiblePattern
from slscc.formulations import build_de, build_s_extended, build_s_lp, carry_matrix, y_name, z_name
from slscc.lp_core import Status, check_tu, fix_and_solve, solve_lp
from slscc.model import make_instance, random_instance
from slscc.oracle import brute_force, classic_ww
from slscc.subproblem import (
    closed_form_general,
    enumerate_family,
    opt_star_enumeration,
    prop1_forward,
    prop2_direct,
    solve_s_dp,
)

EPSILONS = (0.0, 0.1, 0.3, 0.5)


def draw_instance(rng, seed, T_range=(2, 8), m_range=(2, 5)):
    T = int(rng.integers(T_range[0], T_range[1] + 1))
    p = int(rng.integers(1, T))
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    return random_instance(T, p, m, float(rng.choice(EPSILONS)), seed)


def rel_gap(a, b):
    return abs(a - b) / max(1.0, abs(b))


@pytest.fixture(scope="module")
def oracle_runs():
    """The 200 seeded instances of criterion 1, solved three ways."""
    rng = np.random.default_rng(20240601)
    runs = []
    start = time.perf_counter()
    for seed in range(200):
        inst = draw_instance(rng, 1000 + seed)
        res = branch_and_bound(inst, BnbConfig(delta=0.0))
        runs.append({
            "inst": inst,
            "bnb": res,
            "enum": opt_star_enumeration(inst).objective,
            "brute": brute_force(inst).objective,
        })
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def subproblem_pairs():
    """500 (instance, kept set) pairs for criteria 2 and 3."""
    rng = np.random.default_rng(7)
    pairs = []
    for seed in range(500):
        inst = draw_instance(rng, 5000 + seed)
        family = enumerate_family(inst, minimal_only=False).sets
        pairs.append((inst, family[int(rng.integers(len(family)))]))
    return pairs


def test_criterion_1_oracle_equivalence(oracle_runs, verdict):
    runs, elapsed = oracle_runs
    worst = max(
        max(rel_gap(r["bnb"].solution.objective, r["brute"]), rel_gap(r["enum"], r["brute"]))
        for r in runs
    )
    ok = worst <= 1e-6 and elapsed < 120
    verdict(1, ok, f"{len(runs)} instances, max relative gap {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_integrality(subproblem_pairs, verdict):
    start = time.perf_counter()
    worst_y = worst_obj = 0.0
    for inst, S in subproblem_pairs:
        res = solve_lp(build_s_lp(inst, S))
        y = np.array([res[y_name(i)] for i in range(1, inst.T + 1)])
        worst_y = max(worst_y, float(np.max(np.minimum(np.abs(y), np.abs(1 - y)))))
        worst_obj = max(worst_obj, abs(res.objective - solve_s_dp(inst, S).objective))
    elapsed = time.perf_counter() - start
    ok = worst_y <= 1e-6 and worst_obj <= 1e-7 and elapsed < 60
    verdict(2, ok, f"{len(subproblem_pairs)} pairs, max y fraction {worst_y:.1e}, "
                   f"max DP gap {worst_obj:.1e}, {elapsed:.1f}s")


def test_criterion_3_extended_equivalence(subproblem_pairs, verdict):
    worst = 0.0
    for inst, S in subproblem_pairs:
        a = solve_lp(build_s_lp(inst, S)).objective
        b = solve_lp(build_s_extended(inst, S)).objective
        worst = max(worst, abs(a - b))
    verdict(3, worst <= 1e-7, f"{len(subproblem_pairs)} pairs, max gap {worst:.1e}")


def test_criterion_4_tu_spot_check(verdict):
    start = time.perf_counter()
    failures = []
    for T in (3, 4, 5):
        rep = check_tu(carry_matrix(T), 4)
        if not rep.is_tu:
            failures.append((T, rep.rows, rep.cols, rep.determinant))
    elapsed = time.perf_counter() - start
    verdict(4, not failures and elapsed < 60,
            f"T in (3, 4, 5), minors up to order 4, {len(failures)} violations, {elapsed:.1f}s")


def test_criterion_5_closed_forms(verdict):
    rng = np.random.default_rng(99)
    checked = agree = exact = infeasible = 0
    worst = 0.0
    seed = 0
    while checked < 1000:
        seed += 1
        inst = draw_instance(rng, 90000 + seed, m_range=(1, 5))
        y = rng.integers(0, 2, inst.T)
        y[0] = y[0] or rng.random() < 0.9  # keep most draws coverable
        z = rng.integers(0, 2, inst.m)
        if z.all() or inst.probs @ z > inst.epsilon + 1e-9:
            continue
        checked += 1
        fix = {y_name(i + 1): float(v) for i, v in enumerate(y)}
        fix |= {z_name(j): float(v) for j, v in enumerate(z)}
        lp = fix_and_solve(build_de(inst), fix)
        try:
            sol = closed_form_general(inst, z, y)
        except InfeasiblePattern:
            infeasible += 1
            agree += lp.status is Status.INFEASIBLE
            exact += 1
            continue
        gap = abs(sol.objective - lp.objective) if lp.optimal else np.inf
        worst = max(worst, gap)
        agree += gap <= 1e-7
        a, b = prop1_forward(inst, z, y), prop2_direct(inst, z, y)
        exact += all(np.array_equal(u, v) for u, v in zip(a, b))
    ok = agree == checked and exact == checked
    verdict(5, ok, f"{checked} draws ({infeasible} infeasible patterns), "
                   f"max LP gap {worst:.1e}, recursion identical on {exact}")


def test_criterion_6_minimality(oracle_runs, verdict):
    runs, _ = oracle_runs
    worst = max(
        abs(opt_star_enumeration(r["inst"], minimal_only=False).objective - r["enum"])
        for r in runs
    )
    verdict(6, worst == 0.0, f"{len(runs)} instances, max full-vs-minimal difference {worst:.1e}")


def test_criterion_7_finite_convergence(oracle_runs, verdict):
    runs, _ = oracle_runs
    over = [r for r in runs if r["bnb"].nodes_expanded > 2 ** r["inst"].m]
    capped = [r for r in runs if r["bnb"].status is BnbStatus.NODE_CAP_HIT]
    ratio = max(r["bnb"].nodes_expanded / 2 ** r["inst"].m for r in runs)
    verdict(7, not over and not capped,
            f"{len(over)} runs above 2^m, {len(capped)} capped, max nodes/2^m {ratio:.3f}")


def test_criterion_8_degenerate_reductions(verdict):
    notes = []
    rng = np.random.default_rng(8)
    eps_gap = 0.0
    for seed in range(40):
        T = int(rng.integers(2, 9))
        inst = random_instance(T, int(rng.integers(1, T)), int(rng.integers(1, 6)), 0.0, seed)
        ref = solve_s_dp(inst, range(inst.m)).objective
        for obj in (branch_and_bound(inst, BnbConfig(delta=0.0)).solution.objective,
                    opt_star_enumeration(inst).objective, brute_force(inst).objective):
            eps_gap = max(eps_gap, rel_gap(obj, ref))
    notes.append(f"eps=0 max gap {eps_gap:.1e}")

    ww_gap = 0.0
    for seed in range(40):
        T = int(rng.integers(2, 9))
        inst = random_instance(T, int(rng.integers(1, T)), 1, float(rng.choice(EPSILONS)), seed)
        stream = np.concatenate([inst.d, inst.demands[0]])
        ref, _ = classic_ww(stream, inst.alpha, inst.beta, inst.h)
        ww_gap = max(ww_gap, rel_gap(branch_and_bound(inst, BnbConfig(delta=0.0)).solution.objective, ref))
    tiny = make_instance((1, 1), (10, 0.5), (1, 1), (2,), [(1.0, (3,))], 0.0)
    tiny_ref, _ = classic_ww([2, 3], tiny.alpha, tiny.beta, tiny.h)
    tiny_val = branch_and_bound(tiny).solution.objective
    notes.append(f"single scenario max gap {ww_gap:.1e}, small case {tiny_val:g} vs {tiny_ref:g}")
    ok = eps_gap <= 1e-9 and ww_gap <= 1e-9 and tiny_val == pytest.approx(15.5) == tiny_ref
    verdict(8, ok, "; ".join(notes))


def test_criterion_9_determinism(tmp_path, capsys, verdict):
    outputs = {}
    for run in range(2):
        for seed in (1, 2, 3):
            path = tmp_path / f"gen{run}_{seed}.json"
            main(["gen", "--T", "7", "--p", "3", "--m", "5", "--epsilon", "0.3",
                  "--seed", str(seed), "--out", str(path)])
            outputs.setdefault(("gen", seed), []).append(path.read_bytes())
            for method in ("bnb", "enumerate", "brute"):
                for fmt in ("json", "csv", "text"):
                    capsys.readouterr()
                    main(["solve", str(tmp_path / f"gen0_{seed}.json"), "--method", method,
                          "--output", fmt, "--jobs", str(1 + run)])
                    outputs.setdefault((method, fmt, seed), []).append(capsys.readouterr().out)
    differing = [k for k, v in outputs.items() if v[0] != v[1]]
    verdict(9, not differing, f"{len(outputs)} command variants run twice, {len(differing)} differ")
