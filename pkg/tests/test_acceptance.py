"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the summary
lines are repeated at the end of the session.  The full-scale solves
(b=10, d_max=400, alpha=0.9999) are shared between criteria 2, 3 and 4.
"""
import itertools
import time

import numpy as np
import pytest

from aosync.experiments import DEFAULT_GRID, DESK_HORIZON, DESK_REPLICATIONS, solve, sweep
from aosync.experiments import verify_policy_file
from aosync.model import AosState, ModelParams, advance
from aosync.policies import SKIP_POLICY, SWITCH_POLICY, solve_aoi_baseline, threshold_policy
from aosync.simulator import SimConfig, check_identities, simulate
from aosync.solver import (extract_policy, q_table, relative_value_iteration,
                           structured_value_iteration, value_iteration)
from oracles import DenseModel, deterministic_cycle, enumerate_optimal, policy_iteration

FULL_SCALE = dict(b=10, d_max=400, alpha=0.9999)
STRUCTURE_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
SMALL = list(itertools.product((2, 3), (5, 30), (0.1, 0.5, 0.9)))  # (b, d_max, p)


def combined_se(*rows):
    return float(np.sqrt(sum(r["se_aos"] ** 2 for r in rows)))


@pytest.fixture(scope="session")
def full_solutions():
    """Structured solves at full scale for every p of the sweep grid."""
    out = {}
    for p in sorted(set(DEFAULT_GRID) | set(STRUCTURE_GRID)):
        out[p] = solve(ModelParams(p=p, **FULL_SCALE), "structured", keep_values=True)
    return out


def test_criterion_1_oracle_equivalence(criterion):
    start = time.perf_counter()
    problems = []
    worst = 0.0
    for (b, d_max, p), alpha in itertools.product(SMALL, (0.9, 0.99)):
        params = ModelParams(p=p, b=b, d_max=d_max, alpha=alpha)
        model = DenseModel(params)
        if d_max == 5:
            v_star = enumerate_optimal(model, alpha)
        else:  # 2^60 or more policies; exact policy iteration instead
            v_star = policy_iteration(model, alpha)
        expected = model.greedy(v_star, alpha)
        plain, q_plain = value_iteration(params, epsilon=1e-10)
        fast, thresholds = structured_value_iteration(params, epsilon=1e-10)
        gap = float(np.max(np.abs(plain.values - fast.values)))
        worst = max(worst, gap)
        if not np.array_equal(q_plain.greedy(), expected):
            problems.append(f"plain VI policy differs at {params}")
        if not np.array_equal(q_table(fast.values, params).greedy(), expected):
            problems.append(f"structured VI policy differs at {params}")
        if thresholds != extract_policy(q_plain):
            problems.append(f"threshold tables differ at {params}")
        if gap > 1e-9:
            problems.append(f"value gap {gap:.2e} at {params}")
    seconds = time.perf_counter() - start
    ok = not problems and seconds < 60
    criterion(1, ok, f"24 instances, max |V_plain - V_struct| = {worst:.1e}, "
                     f"{seconds:.1f} s total" + ("" if ok else f"; {problems[:3]}"))
    assert ok, problems or f"took {seconds:.1f} s"


@pytest.mark.slow
def test_criterion_2_structure_at_full_scale(criterion, full_solutions):
    details, failures = [], []
    for p in STRUCTURE_GRID:
        sol = full_solutions[p]
        pf = sol.policy_file
        report = verify_policy_file(pf)
        details.append(f"p={p}: {sum(c.checked for c in report.checks)} checks, "
                       f"{sol.minimizations:.0f} min/iter, {sol.seconds:.0f} s")
        if not pf.converged:
            failures.append(f"p={p} did not converge")
        failures += [f"p={p} {c.name}: {c.counterexample}" for c in report.failures()]
    ok = not failures
    criterion(2, ok, "; ".join(details) + ("" if ok else f"; {failures[:3]}"))
    assert ok, failures


@pytest.mark.slow
def test_criterion_3_thresholds_rise_with_p(criterion, full_solutions):
    low = full_solutions[0.1].policy_file.thresholds.tau
    high = full_solutions[0.9].policy_file.thresholds.tau
    shared = (low >= 0) & (high >= 0)
    bad = np.argwhere(shared & (high < low))
    ok = len(bad) == 0
    criterion(3, ok, f"{int(shared.sum())} shared (d, l) entries, {len(bad)} with "
                     f"tau(0.9) < tau(0.1)" + ("" if ok else f", first at {tuple(bad[0])}"))
    assert ok


@pytest.mark.slow
def test_criterion_4_sweep_orderings(criterion, full_solutions):
    solved = {p: s.policy_file for p, s in full_solutions.items()}
    rows = sweep(DEFAULT_GRID, horizon=DESK_HORIZON, replications=DESK_REPLICATIONS, seed=2024,
                 solved=solved, **FULL_SCALE)
    assert not [r for r in rows if r["error"]]
    cell = {(r["p"], r["policy"]): r for r in rows}
    failures = []
    for p in DEFAULT_GRID:
        opt = cell[p, "optimal"]
        for other in ("always_skip", "always_switch"):
            base = cell[p, other]
            if opt["avg_aos"] > base["avg_aos"] + 3 * combined_se(opt, base):
                failures.append(f"(a) p={p}: optimal {opt['avg_aos']:.4f} > {other} "
                                f"{base['avg_aos']:.4f}")
        if p >= 0.9 - 1e-12:
            sw, sk = cell[p, "always_switch"], cell[p, "always_skip"]
            if sw["avg_aos"] < 10 * sk["avg_aos"]:
                failures.append(f"(b) p={p}: switch {sw['avg_aos']:.3f} < 10 x skip "
                                f"{sk['avg_aos']:.3f}")
        if p <= 0.1 + 1e-12:
            sw = cell[p, "always_switch"]
            if abs(opt["avg_aos"] - sw["avg_aos"]) > 3 * combined_se(opt, sw):
                failures.append(f"(c) p={p}: optimal {opt['avg_aos']:.4f} vs switch "
                                f"{sw['avg_aos']:.4f}")

    def minimum(p, key, se):
        r = min((cell[p, k] for k in ("optimal", "aoi_optimal", "always_skip", "always_switch")),
                key=lambda r: r[key])
        return r[key], r[se]

    for key, se, sign, label in (("avg_aoi", "se_aoi", -1, "min AoI"),
                                 ("avg_aos", "se_aos", 1, "min AoS")):
        series = [minimum(p, key, se) for p in DEFAULT_GRID]
        violations = []
        for (x, sx), (y, sy) in zip(series, series[1:]):
            step = sign * (y - x)  # should be >= 0
            if step < 0:
                violations.append((-step, 3 * np.hypot(sx, sy)))
        if len(violations) > 1 or any(v > lim for v, lim in violations):
            failures.append(f"(d) {label} trend violations {violations}")
    ok = not failures
    top = DEFAULT_GRID[-1]
    parts = " ".join(f"({k}) {'fail' if any(f.startswith(f'({k})') for f in failures) else 'ok'}"
                     for k in "abcd")
    ratio = cell[top, "always_switch"]["avg_aos"] / cell[top, "always_skip"]["avg_aos"]
    criterion(4, ok, f"{parts}; {len(DEFAULT_GRID)} p values x 4 policies, "
                     f"{DESK_REPLICATIONS} x {DESK_HORIZON} slots; switch/skip AoS ratio "
                     f"{ratio:.0f} at p={top}" + ("" if ok else f"; {failures[:3]}"))
    assert ok, failures


def test_criterion_5_simulator_identities(criterion):
    cases = []
    for b, d_max in ((1, 5), (2, 5), (3, 30), (10, 60)):
        for p in (0.1, 0.6):
            params = ModelParams(p=p, b=b, d_max=d_max, alpha=0.999)
            optimal = threshold_policy(structured_value_iteration(params)[1])
            for policy in (optimal, solve_aoi_baseline(params), SKIP_POLICY, SWITCH_POLICY):
                for seed in (0, 1):
                    cases.append((policy, params, seed))
    failures = []
    for policy, params, seed in cases:
        for c in check_identities(policy, params, horizon=10_000, seed=seed):
            if not c.passed:
                failures.append((policy.name, params, seed, c.name, c.counterexample))
    ok = not failures
    criterion(5, ok, f"{len(cases)} seeded traces x 6 identities"
                     + ("" if ok else f"; {failures[:2]}"))
    assert ok, failures


def test_criterion_6_deterministic_cycle(criterion):
    def step(s):
        return advance(*s, 1, int(SKIP_POLICY(AosState(*s, 1))), 2)

    prefix, cycle = deterministic_cycle(step, (0, 0, 0))
    derived = float(np.mean([s[0] for s in cycle]))
    params = ModelParams(p=1.0, b=2, d_max=5)
    steady = simulate(SKIP_POLICY, SimConfig(params, horizon=10**5, warmup=len(prefix))).avg_aos
    cold = simulate(SKIP_POLICY, SimConfig(params, horizon=10**7)).avg_aos
    ok = derived == 1.5 and abs(steady - 1.5) <= 1e-6 and abs(cold - 1.5) <= 1e-6
    criterion(6, ok, f"cycle {[s[0] for s in cycle]} -> {derived}; simulated {steady!r} "
                     f"(1e5 slots after {len(prefix)}-slot start-up), {cold!r} (1e7 slots)")
    assert ok


def test_criterion_7_relative_vi(criterion):
    failures, worst = [], 0.0
    for b, d_max, p in SMALL:
        params = ModelParams(p=p, b=b, d_max=d_max, alpha=0.9999)
        h, thresholds, gain = relative_value_iteration(params)
        _, q = value_iteration(params)
        if not np.array_equal(q_table(h.values, params, discount=1.0).greedy(), q.greedy()):
            failures.append(f"policy differs at b={b} d_max={d_max} p={p}")
        policy = threshold_policy(thresholds)
        runs = [SimConfig(params, horizon=DESK_HORIZON, replications=DESK_REPLICATIONS,
                          seed=7, truncate=True)]
        if d_max >= 30:  # far enough from the cap for the true dynamics too
            runs.append(SimConfig(params, horizon=DESK_HORIZON,
                                  replications=DESK_REPLICATIONS, seed=8))
        for config in runs:
            sim = simulate(policy, config).avg_aos
            err = abs(sim - gain) / gain
            worst = max(worst, err)
            if err > 0.01:
                failures.append(f"gain {gain:.5f} vs simulated {sim:.5f} at b={b} "
                                f"d_max={d_max} p={p} truncate={config.truncate}")
    ok = not failures
    criterion(7, ok, f"12 instances, policies match discounted VI at 0.9999, worst gain "
                     f"error {100 * worst:.2f}%" + ("" if ok else f"; {failures[:3]}"))
    assert ok, failures
