"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <k> PASS|FAIL: <detail>`` line.  Run
``python tests/test_acceptance.py`` for the lines alone, or through pytest
(``pytest tests/test_acceptance.py -s``) for pass/fail status.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from oracles import central_difference, projected_gaps, trace_one_psd_projection  # noqa: E402
from oracles import transport_lp, wasserstein_lp  # noqa: E402

from sparda.cli import run as cli_run, write_samples  # noqa: E402
from sparda.inference import PipelineConfig, default_grid, pda_analyze, permutation_test  # noqa: E402
from sparda.inference import run_pipeline  # noqa: E402
from sparda.relax import RelaxConfig, dual_ascent, matching_value, project_to_feasible, relax_solve  # noqa: E402
from sparda.rng import make_rng  # noqa: E402
from sparda.synth import ScenarioSpec, figure1a_dataset, scenario, wishart_blocks_dataset  # noqa: E402
from sparda.tighten import tighten  # noqa: E402
from sparda.wasserstein import gradient, objective, wasserstein1d  # noqa: E402

# Reduced relaxation budget for the permutation-heavy criteria (7 to 9);
# each pipeline run there happens thousands of times on one core.
PERM_RELAX = RelaxConfig(max_iter=200)
# Ties between RELAX-started and random-started tightening (criterion 6):
# both often reach the same optimum and differ only by the stall tolerance.
TIE_RTOL = 1e-6

RESULTS = {}


def report(k, ok, detail):
    RESULTS[k] = bool(ok)
    line = f"ACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return ok


def test_1_transport_lp_equivalence():
    rng = make_rng(2024, 1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n, m = rng.integers(1, 9, size=2)
        xs = rng.uniform(-5, 5, n)
        ys = rng.uniform(-5, 5, m)
        worst = max(worst, abs(wasserstein1d(xs, ys) - wasserstein_lp(xs, ys)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10
    assert report(1, ok, f"200 instances, max |diff| {worst:.2e}, {elapsed:.1f}s")


def test_2_gradient_finite_differences():
    rng = make_rng(2024, 2)
    start = time.perf_counter()
    worst, checked, skipped = 0.0, 0, 0
    while checked < 100:
        X, Y = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
        beta = rng.standard_normal(3)
        if projected_gaps(X, Y, beta) < 1e-4:
            skipped += 1
            continue
        g = gradient(X, Y, beta)
        fd = central_difference(lambda b: objective(X, Y, b), beta, 1e-6)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
        checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 5
    assert report(2, ok, f"100 points ({skipped} tie cases skipped), max rel err "
                         f"{worst:.2e}, {elapsed:.1f}s")


def test_3_projection_optimality():
    rng = make_rng(2024, 3)
    worst_opt, worst_idem = 0.0, 0.0
    for d in range(1, 5):
        for _ in range(15):
            A = rng.standard_normal((d, d)) * rng.uniform(0.1, 3)
            B = A + A.T
            ref = trace_one_psd_projection(B)
            worst_opt = max(worst_opt, np.abs(project_to_feasible(B) - ref).max())
            C = rng.standard_normal((d, d))
            F = C @ C.T
            F /= np.trace(F)
            worst_idem = max(worst_idem, np.abs(project_to_feasible(F) - F).max())
    ok = worst_opt <= 1e-6 and worst_idem <= 1e-9
    assert report(3, ok, f"d=1..4, 60 matrices: max deviation from conic solver "
                         f"{worst_opt:.2e}, idempotence {worst_idem:.2e}")


def test_4_duality_closure():
    worst = 0.0
    for s in range(20):
        rng = make_rng(2024, 4, s)
        X, Y = rng.standard_normal((6, 3)), rng.standard_normal((6, 3)) + 0.3
        C = rng.standard_normal((3, 3))
        B = C @ C.T
        B /= np.trace(B)
        _, _, val = dual_ascent(B, X, Y, steps=10_000)
        exact = transport_lp(np.array([[(x - y) @ B @ (x - y) for y in Y] for x in X]))[1]
        assert abs(exact - matching_value(B, X, Y)) <= 1e-9
        worst = max(worst, abs(val - exact))
    assert report(4, worst <= 1e-3, f"20 instances, 1e4 dual steps, max gap {worst:.2e}")


def test_5_mean_shift_recovery():
    start = time.perf_counter()
    good, rows = 0, []
    for s in range(10):
        X, Y = scenario(ScenarioSpec("mean_shift", n=500, m=500, d=5, shift=[2.0],
                                     noise=0.01, seed=s))
        res = pda_analyze(X, Y)
        cos = abs(res.beta[0]) / np.linalg.norm(res.beta)
        hit = cos >= 0.95 and abs(res.divergence - 4.0) <= 0.4
        good += hit
        rows.append(f"{cos:.3f}/{res.divergence:.3f}")
    elapsed = time.perf_counter() - start
    ok = good >= 9 and elapsed < 120
    assert report(5, ok, f"{good}/10 seeds with cos>=0.95 and divergence within 10% "
                         f"of 4, {elapsed:.0f}s")


def test_6_figure1a_relax_beats_random_starts():
    n = 1000
    start = time.perf_counter()
    wins, margins = 0, []
    for s in range(10):
        X, Y = figure1a_dataset(n, n, seed=s)
        rel = relax_solve(X, Y)
        j_relax = tighten(X, Y, rel.beta).objective
        rng = make_rng(s, 6)
        randoms = []
        for _ in range(10):
            b = rng.standard_normal(3)
            randoms.append(tighten(X, Y, b / np.linalg.norm(b)).objective)
        best_random = max(randoms)
        margins.append(j_relax - best_random)
        wins += j_relax >= best_random - TIE_RTOL * abs(j_relax)
    elapsed = time.perf_counter() - start
    ok = wins >= 8 and elapsed < 600
    assert report(6, ok, f"n=m={n}: RELAX start >= all 10 random starts in {wins}/10 "
                         f"seeds (min margin {min(margins):.2e}), {elapsed:.0f}s")


def test_7_type_one_error():
    start = time.perf_counter()
    cfg = PipelineConfig(relax=PERM_RELAX)
    pvals = []
    for s in range(20):
        X, Y = scenario(ScenarioSpec("null_identical", n=100, m=100, d=5, seed=700 + s))
        pvals.append(permutation_test(X, Y, cfg, n_perm=100, seed=s).p_value)
    frac = float(np.mean(np.array(pvals) < 0.05))
    elapsed = time.perf_counter() - start
    assert report(7, frac <= 0.15, f"20 null datasets x 100 permutations (PDA): "
                                   f"fraction p<0.05 = {frac:.2f}, {elapsed:.0f}s")


def _power_pvalues(ell, reps=5, n_perm=100):
    sparda, pda = [], []
    for r in range(reps):
        X, Y, _ = wishart_blocks_dataset(ell, 100, 100, seed=800 + 10 * ell + r)
        sp_cfg = PipelineConfig(relax=PERM_RELAX, grid=default_grid(X, Y), folds=5,
                                cv_in_permutations=False)
        sparda.append(permutation_test(X, Y, sp_cfg, n_perm, seed=r).p_value)
        pda.append(permutation_test(X, Y, PipelineConfig(relax=PERM_RELAX), n_perm,
                                    seed=r).p_value)
    return float(np.mean(sparda)), float(np.mean(pda))


def test_8_power_trend():
    start = time.perf_counter()
    table = {3 * ell: _power_pvalues(ell) for ell in (1, 4, 10)}
    sp = [table[d][0] for d in (3, 12, 30)]
    monotone = sp[0] <= sp[1] <= sp[2]
    ok = monotone and sp[0] <= 0.10 and table[30][1] >= table[30][0]
    detail = ", ".join(f"d={d}: SPARDA {a:.3f} PDA {b:.3f}" for d, (a, b) in table.items())
    elapsed = time.perf_counter() - start
    assert report(8, ok, f"mean p-values {detail} (fixed-lambda null), {elapsed:.0f}s")


def test_9_support_recovery():
    start = time.perf_counter()
    good, hits = 0, []
    for s in range(10):
        X, Y, support = wishart_blocks_dataset(10, 100, 100, seed=900 + s)
        cfg = PipelineConfig(relax=PERM_RELAX, grid=default_grid(X, Y), folds=5)
        res = run_pipeline(X, Y, cfg)
        top3 = set(np.argsort(-np.abs(res.beta), kind="stable")[:3].tolist())
        h = len(top3 & set(support))
        hits.append(h)
        good += h >= 2
    elapsed = time.perf_counter() - start
    assert report(9, good >= 7, f"d=30: top-3 holds >=2 true features in {good}/10 "
                                f"seeds (hits {hits}), {elapsed:.0f}s")


def _payload(text):
    doc = json.loads(text)
    doc["meta"].pop("wall_clock_seconds")
    return json.dumps(doc, sort_keys=True)


def test_10_cli_determinism(tmp_path, capsys):
    X, Y = scenario(ScenarioSpec("mean_shift", n=60, m=60, d=4, shift=[1.0], seed=10))
    px, py = str(tmp_path / "x.csv"), str(tmp_path / "y.csv")
    write_samples(px, X)
    write_samples(py, Y)
    commands = {
        "analyze": ["analyze", px, py, "--lambda", "0.01", "--seed", "4"],
        "permtest": ["permtest", px, py, "--perms", "5", "--max-iter", "50",
                     "--seed", "4"],
        "cv": ["cv", px, py, "--grid", "0,0.01,0.1", "--folds", "3", "--max-iter",
               "50", "--seed", "4"],
        "synth": ["synth", "wishart_blocks", "--ell", "2", "--seed", "4", "--out",
                  str(tmp_path / "s")],
        "oracle": ["oracle", "gradient", px, py, "--seed", "4"],
    }
    same = {}
    for name, argv in commands.items():
        outs = []
        for _ in range(2):
            assert cli_run(argv) == 0
            outs.append(_payload(capsys.readouterr().out))
        same[name] = outs[0] == outs[1]
    sx = (tmp_path / "s_X.csv").read_bytes()
    assert cli_run(commands["synth"]) == 0
    capsys.readouterr()
    same["synth files"] = sx == (tmp_path / "s_X.csv").read_bytes()
    ok = all(same.values())
    assert report(10, ok, "identical reruns: " + ", ".join(
        f"{k}={'yes' if v else 'no'}" for k, v in same.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
