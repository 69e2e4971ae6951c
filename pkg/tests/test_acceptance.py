"""Acceptance gate: one PASS/FAIL line per criterion, printed in the terminal summary.

Tolerances and seeds are fixed here before any run; a failing criterion is a
finding to report, not a threshold to adjust.
"""

import itertools
import math
import time

import numpy as np

from betaforge.cli import main
from betaforge.divergence import compare, kde_fit
from betaforge.experiments import (
    digits_pairs,
    run_pairs,
    sign_test,
    sign_test_outcomes,
    sweep_m,
    synthetic_ticket_pairs,
)
from betaforge.features import load_digits
from betaforge.forest import ForestConfig
from betaforge.scaled_beta import (
    ScaledBetaParams,
    beta_median_approx,
    estimate_from_stats,
    forward_stats,
    numeric_median,
)
from betaforge.selection import (
    ScoreProfile,
    approx_selection_probs,
    dilution_odds,
    exact_selection_probs,
    monte_carlo_selection,
)

SWEEP_SEEDS = (0, 1, 2)
EXPERIMENT_SEED = 42
SYNTHETIC_SEED = 42


def test_c01_estimator_round_trip(acceptance):
    t0 = time.perf_counter()
    grid = [0.5, 1, 2, 4, 8, 16]
    worst = 0.0
    for a, b in itertools.product(grid, grid):
        if a == b:
            continue
        back = estimate_from_stats(forward_stats(ScaledBetaParams(a, b, 0.0, 1.0)))
        worst = max(worst, abs(back.alpha - a) / a, abs(back.beta - b) / b)
    dt = time.perf_counter() - t0
    acceptance(1, worst <= 1e-9 and dt < 1.0, f"max rel err {worst:.2e} (<= 1e-9), {dt:.3f}s (< 1s)")


def test_c02_median_approximation(acceptance):
    t0 = time.perf_counter()
    gaps = []
    for a, b in itertools.product(np.linspace(1, 10, 20), repeat=2):
        p = ScaledBetaParams(float(a), float(b))
        gaps.append(abs(beta_median_approx(p) - numeric_median(p)))
    dt = time.perf_counter() - t0
    worst = max(gaps)
    acceptance(2, worst <= 0.02 and dt < 10, f"max median gap {worst:.5f} (<= 0.02), {dt:.2f}s (< 10s)")


def test_c03_selection_oracles(acceptance):
    rng = np.random.default_rng(2024)
    sum_err, worst_z, order_ok = 0.0, 0.0, True
    for i in range(50):
        n = int(rng.integers(3, 9))
        m = int(rng.choice([2, 3]))
        n_zv = int(rng.integers(0, 9 - n)) if n < 8 else 0
        scores = tuple(float(v) for v in rng.uniform(0.05, 1.0, n))
        prof = ScoreProfile(scores, m, n_zv)
        exact = exact_selection_probs(prof)
        sum_err = max(sum_err, abs(exact.sum() - 1.0))
        mc = monte_carlo_selection(prof, 1_000_000, seed=i)
        z = np.abs(mc.probs - exact) / np.maximum(mc.stderr, 1e-12)
        worst_z = max(worst_z, float(z.max()))
        approx = approx_selection_probs(prof)[:n]
        order = np.argsort(scores)
        order_ok &= bool(np.all(np.diff(approx[order]) > 0))
    worked = exact_selection_probs(ScoreProfile((3, 2, 1), 2))
    worked_ok = np.allclose(worked, [0.45, 0.3556, 0.1944], atol=5e-5)
    ok = sum_err <= 1e-12 and worst_z < 4 and order_ok and worked_ok
    acceptance(3, ok, f"sum err {sum_err:.1e}, max MC dev {worst_z:.2f} SE (< 4), "
                      f"order kept {order_ok}, worked case {np.round(worked, 4).tolist()}")


def test_c04_dilution_monotone(acceptance):
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(1000):
        a = float(rng.uniform(0.1, 10))
        b = a * float(rng.uniform(0.01, 0.99))
        m = int(rng.integers(2, 10))
        r_bar = float(rng.uniform(0.01, 10))
        n = int(rng.integers(m, 40))
        odds = [dilution_odds(a, b, m, r_bar, n, k).odds_after for k in range(41)]
        violations += int(not np.all(np.diff(odds) < 0))
    d = dilution_odds(2, 1, 2, 1.5, 2, 2)
    hand = abs(d.odds_before - 10 / 7) <= 1e-4 and abs(d.odds_after - 14 / 11) <= 1e-4
    acceptance(4, violations == 0 and hand,
               f"{violations}/1000 non-monotone, hand case {d.odds_before:.4f} -> {d.odds_after:.4f}")


def test_c05_sign_test_arithmetic(acceptance):
    cases = [((4488, 2773), 20.13), ((52, 14), 4.56), ((1084, 675), 9.72)]
    parts, ok = [], True
    for (better, worse), target in cases:
        z = sign_test(better, worse).z
        hit = abs(z - target) <= 0.01
        ok &= hit
        parts.append(f"({better},{worse}) z={z:.4f} vs {target}{'' if hit else ' MISS'}")
    acceptance(5, ok, "; ".join(parts))


def test_c06_digits_reproduction(acceptance, digits_csv):
    t0 = time.perf_counter()
    src = load_digits(digits_csv, subset_size=6, subset_seed=42)
    pairs = digits_pairs(src, n_zv=20)
    outs = run_pairs(pairs, ForestConfig(max_features=6), EXPERIMENT_SEED)
    st = sign_test_outcomes(outs)
    depth_a = np.mean([o.diagnostics_a["mean_depth"] for o in outs])
    depth_b = np.mean([o.diagnostics_b["mean_depth"] for o in outs])
    var_a = np.mean([o.diagnostics_a["variety_mean"] for o in outs])
    var_b = np.mean([o.diagnostics_b["variety_mean"] for o in outs])
    dt = time.perf_counter() - t0
    ok = len(outs) == 45 and st.p_one_sided < 0.05 and depth_b - depth_a >= 1.0 and var_b > var_a and dt < 900
    acceptance(6, ok, f"columns {src.columns}, better/worse/tie {st.n_better}/{st.n_worse}/{st.n_tie}, "
                      f"p={st.p_one_sided:.2e}, depth {depth_a:.2f}->{depth_b:.2f}, "
                      f"variety_mean {var_a:.2f}->{var_b:.2f}, {dt:.0f}s")


def test_c07_sweep_shape(acceptance, digits_csv):
    t0 = time.perf_counter()
    wins, parts = 0, []
    for seed in SWEEP_SEEDS:
        src = load_digits(digits_csv, subset_size=6, subset_seed=seed)
        res = sweep_m(digits_pairs(src, n_zv=20), range(1, 7), ForestConfig(), seed)
        (ma, acc_a), (mb, acc_b) = res.best("a"), res.best("b")
        wins += acc_b >= acc_a
        parts.append(f"seed {seed}: unreg m={ma} {acc_a:.5f} vs reg m={mb} {acc_b:.5f}")
    dt = time.perf_counter() - t0
    acceptance(7, wins >= 2 and dt < 2700, f"{wins}/3 seeds reg >= unreg; " + "; ".join(parts) + f"; {dt:.0f}s")


def test_c08_synthetic_benchmark(acceptance):
    t0 = time.perf_counter()
    pairs = synthetic_ticket_pairs(200, seed=SYNTHETIC_SEED)
    outs = run_pairs(pairs, ForestConfig(), EXPERIMENT_SEED)
    st = sign_test_outcomes(outs)
    acc_a = np.mean([o.accuracy_a for o in outs])
    acc_b = np.mean([o.accuracy_b for o in outs])
    dt = time.perf_counter() - t0
    ok = st.p_one_sided < 0.05 and st.n_better > st.n_worse and dt < 1200
    acceptance(8, ok, f"better/worse/tie {st.n_better}/{st.n_worse}/{st.n_tie}, z={st.z:.2f}, "
                      f"p={st.p_one_sided:.2e}, accuracy {acc_a:.3f}->{acc_b:.3f}, {dt:.0f}s")


def test_c09_divergence_properties(acceptance):
    rng = np.random.default_rng(11)
    same = kde_fit(rng.normal(size=500))
    r0 = compare(same, same)
    zero = max(r0.hellinger, r0.js_nats, r0.kl_forward, r0.kl_reverse, r0.tv) == 0.0
    far = compare(kde_fit(rng.normal(0, 0.01, 300)), kde_fit(rng.normal(50, 0.01, 300)))
    disjoint = (abs(far.hellinger - 1) <= 1e-6 and abs(far.js_nats - math.log(2)) <= 1e-6
                and abs(far.tv - 1) <= 1e-6)
    a, b = kde_fit(rng.normal(0, 1, 800)), kde_fit(rng.normal(0.5, 1.5, 800))
    ab, ba = compare(a, b), compare(b, a)
    sym = max(abs(ab.hellinger - ba.hellinger), abs(ab.js_nats - ba.js_nats), abs(ab.tv - ba.tv)) <= 1e-12
    g = compare(kde_fit(rng.normal(0, 1, 20000)), kde_fit(rng.normal(1, 1, 20000)))
    oracle = 2 * 0.5 * math.erfc(-0.5 / math.sqrt(2)) - 1
    tv_ok = abs(g.tv - oracle) <= 0.02
    acceptance(9, zero and disjoint and sym and tv_ok,
               f"identical->0 {zero}, disjoint H={far.hellinger:.7f} JS={far.js_nats:.7f} TV={far.tv:.7f}, "
               f"symmetric {sym}, Gaussian TV {g.tv:.4f} vs {oracle:.4f}")


def test_c10_cli_determinism(acceptance, digits_csv, tmp_path, monkeypatch):
    runs = {
        "sweep": ["sweep", "--synthetic", "6", "--m-values", "1-3", "--n-estimators", "25"],
        "train-pair": ["train-pair", "--digits", str(digits_csv), "--digit-pair", "1", "7",
                       "--max-features", "4", "--n-estimators", "25"],
    }
    identical = True
    for name, argv in runs.items():
        blobs = []
        for i, threads in enumerate((["--threads", "1"], ["--threads", "3"], [])):
            if not threads:
                monkeypatch.setenv("BETAFORGE_THREADS", "2")
            out = tmp_path / f"{name}{i}.json"
            assert main([*threads, *argv, "--output", str(out)]) == 0
            blobs.append(out.read_bytes())
        monkeypatch.delenv("BETAFORGE_THREADS", raising=False)
        identical &= len(set(blobs)) == 1
    acceptance(10, identical, f"sweep and train-pair reports byte-identical across threads 1/3/env=2: {identical}")
