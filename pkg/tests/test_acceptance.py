"""The nine acceptance criteria, each at its stated tolerance.

Every test prints (and records for the terminal summary) one pass/fail line.
"""
import time

import numpy as np
import pytest
from conftest import random_schedule

from stab import bounds, cli, experiments, probe
from stab.bounds import certify, stationary_report
from stab.coeffs import CoefficientTable, LayerSchedule
from stab.spectral import FrequencyGrid, build_eigensystem, reduce_frequencies

SLACK = 1e-12
M = 15
TAU = 1e-2
LAMBDAS = np.linspace(0.01, 2.0, 50)
ETAS = np.linspace(0.0, 1.0, 25)


@pytest.fixture(scope="module")
def eig256():
    return build_eigensystem(FrequencyGrid(256, 256), blur_k=3, epsilon=1e-2)


@pytest.fixture(scope="module")
def sweep(eig256):
    """Ledgers of the 50 x 25 stationary sweep (m = 15, identity pre-filter)."""
    eig = reduce_frequencies(eig256)[0]
    cells = {}
    for lam in LAMBDAS:
        for eta in ETAS:
            cells[lam, eta] = certify(LayerSchedule.build(M, lam, TAU, eta), eig)
    return cells


def _sandwich_slack(s):
    return min(s.lip - s.lower, s.upper - s.lip)


def test_criterion_1_dense_oracle(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for side in (4, 8):
        eig = build_eigensystem(FrequencyGrid(side, side), blur_k=3, epsilon=1e-2)
        for m in (1, 2, 3):
            for _ in range(20):
                schedule = random_schedule(rng, m)
                a, _ = bounds.a_tables(CoefficientTable(schedule, eig))
                norms, _ = probe.dense_thetas(schedule, eig)
                iu = np.triu_indices(m)
                worst = max(worst, float(np.max(np.abs(norms[iu] - np.sqrt(a[iu])) / np.sqrt(a[iu]))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 30.0
    report(1, ok, f"max rel err {worst:.2e} (tol 1e-8), {elapsed:.1f} s (limit 30 s)")
    assert ok


def test_criterion_2_sandwich_suite(sweep, report):
    worst = np.inf
    for (lam, eta), led in sweep.items():
        theta1 = np.sqrt(led.a[0, 0])
        slacks = [
            _sandwich_slack(led.vnn),
            _sandwich_slack(led.xout),
            _sandwich_slack(led.single),
            led.lip_vnn - led.corollary_lower,
            led.corollary_upper - led.lip_vnn,
            float(np.nanmin(led.a - led.a_bar)),
            # compared after the common 2**(m-1) normalization, like every reported value
            led.lip_vnn - led.lip_xout,
            theta1 ** M - led.lip_vnn,
            led.lip_vnn - eta ** M,
        ]
        worst = min(worst, min(slacks))
    ok = worst >= -SLACK
    report(2, ok, f"{len(sweep)} cells, smallest slack {worst:.3e} (tol -1e-12)")
    assert ok


def test_criterion_3_region_growth(sweep, report):
    deep = {c for c, led in sweep.items() if led.lip_vnn <= 1.0}
    shallow = {c for c, led in sweep.items() if np.sqrt(led.a[0, 0]) <= 1.0}
    both = shallow & deep
    ok = both < deep and len(deep) > len(shallow)
    report(3, ok, f"|theta15 region| = {len(deep)}, |theta1 region| = {len(shallow)}, |both| = {len(both)}")
    assert ok


def test_criterion_4_prefilter_monotonicity(eig256, report):
    eig = reduce_frequencies(eig256)[0]
    cmax = float(np.max(eig.beta_T + TAU * eig.beta_D_unit))
    cells = 0
    worst = np.inf
    for lam in LAMBDAS[LAMBDAS * cmax <= 1.0]:
        for eta in ETAS:
            schedule = LayerSchedule.build(M, lam, TAU, eta)
            values = [certify(schedule, eig, phi=np.full(eig.size, v, dtype=complex), alphas=()).lip_single
                      for v in (0.0, 0.5, 1.0)]
            worst = min(worst, values[1] - values[0], values[2] - values[1])
            cells += 1
    ok = cells > 0 and worst >= -SLACK
    report(4, ok, f"{cells} cells under the step-size condition, smallest gap {worst:.3e}")
    assert ok


def test_criterion_5_averagedness_consistency(eig16, report):
    rng = np.random.default_rng(5)
    worst = 0.0
    agree = 0
    for k in range(100):
        schedule = random_schedule(rng, int(rng.integers(1, 16)), stationary=bool(k % 2))
        led = certify(schedule, eig16, alphas=(1.0,))
        worst = max(worst, abs(led.b_alpha[1.0] - led.a[0, -1]))
        agree += led.averaged[1.0] == (led.lip_vnn <= 1.0)
    ok = worst <= 1e-12 and agree == 100
    report(5, ok, f"max |b1 - a1m| = {worst:.1e}, boolean agreement {agree}/100")
    assert ok


def test_criterion_6_empirical_certification(report):
    start = time.perf_counter()
    eig = build_eigensystem(FrequencyGrid(64, 64), blur_k=3, epsilon=1e-2)
    phi = np.ones(eig.size, dtype=complex)
    worst_ratio = 0.0
    worst_lower = np.inf
    runs = 0
    for kind in ("identity", "l1", "nonneg"):
        for lam, eta in ((0.5, 0.9), (1.0, 0.98), (1.5, 0.5)):
            schedule = LayerSchedule.build(M, lam, TAU, eta)
            ledger = certify(schedule, eig, phi=phi, alphas=())
            for runner in (probe.VirtualRunner(schedule, eig, kind, ledger=ledger),
                           probe.XOutputRunner(schedule, eig, kind, ledger=ledger),
                           probe.SingleInputRunner(schedule, eig, kind, phi, ledger=ledger)):
                rep = probe.empirical_lipschitz(runner, trials=1000, seed=6)
                runs += 1
                worst_ratio = max(worst_ratio, rep.empirical_lip / rep.theoretical_lip)
                assert not rep.violation, (kind, lam, eta, type(runner).__name__)
                if kind == "identity":
                    worst_lower = min(worst_lower, rep.empirical_lip / rep.lower_bound)
    elapsed = time.perf_counter() - start
    ok = worst_ratio <= 1.0 + 1e-9 and worst_lower >= 0.999 and elapsed < 600
    report(6, ok, f"{runs} probe runs, max empirical/certificate {worst_ratio:.4f}, "
                  f"min empirical/lower (identity) {worst_lower:.6f}, {elapsed:.0f} s")
    assert ok


def _brute_eta_max(c, w):
    """Largest eta for which every frequency admits some step size.

    Golden-section search over lambda per frequency, bisection over eta.
    """
    lo = np.zeros_like(c)
    hi = 2.0 / c
    g = (np.sqrt(5.0) - 1.0) / 2.0

    def h(lam):
        return 1.0 - (1.0 - lam * c) ** 2 - w * lam ** 2

    for _ in range(200):
        x1 = hi - g * (hi - lo)
        x2 = lo + g * (hi - lo)
        left = h(x1) >= h(x2)
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
    best = h(0.5 * (lo + hi))
    a, b = 0.0, 1.0
    while b - a > 1e-12:
        mid = 0.5 * (a + b)
        if np.all(best >= mid * mid):
            a = mid
        else:
            b = mid
    return a


def test_criterion_7_stationary_appendix(eig16, report):
    rng = np.random.default_rng(7)
    eig = reduce_frequencies(eig16)[0]
    implied = interval_hits = eta_checks = 0
    worst_eta = 0.0
    for k in range(1000):
        m = int(rng.integers(1, 16))
        lam = rng.uniform(0.01, 2.0)
        tau = rng.uniform(0.0, 0.05)
        chi = 0.0 if k % 2 == 0 else rng.uniform(0.0, 0.1)
        rep0 = stationary_report(lam, tau, 0.0, chi, eig, m)
        eta = rng.uniform(0.0, rep0.eta_max) if k % 3 else rng.uniform(0.0, 1.0)
        rep = stationary_report(lam, tau, eta, chi, eig, m)
        if rep.sufficient_ok:
            implied += 1
            lip = certify(LayerSchedule.build(m, lam, tau, eta, 1.0, chi), eig, alphas=()).lip_vnn
            assert lip <= 1.0 + 1e-12, (m, lam, tau, eta, chi, lip)
        if chi == 0.0 and rep.lambda_interval is not None:
            lo, hi = rep.lambda_interval
            for t in (0.01, 0.5, 0.99):
                inner = lo + t * (hi - lo)
                if inner > 0:
                    assert stationary_report(inner, tau, eta, 0.0, eig, m).sufficient_ok, (inner, tau, eta)
                    interval_hits += 1
        if k % 10 == 0:
            c = eig.beta_T + tau * eig.beta_D_unit
            worst_eta = max(worst_eta, abs(_brute_eta_max(c, eig.weights) - rep.eta_max))
            eta_checks += 1
    ok = implied > 0 and interval_hits > 0 and worst_eta <= 1e-10
    report(7, ok, f"{implied} sufficient configs all 1-Lipschitz, {interval_hits} interval points pass, "
                  f"eta_max vs bisection max err {worst_eta:.1e} over {eta_checks} configs")
    assert ok


def test_criterion_8_nonstationary_curves(report):
    cfg = experiments.preset("nonstationary")
    _, rows = experiments.bounds_layer_rows(cfg)
    worst = np.inf
    largest = 0.0
    for r in rows:
        for fam in ("vnn", "bar", "hat"):
            val = r["theta_" + fam]
            worst = min(worst, val - r["lower_" + fam], r["upper_" + fam] - val)
            largest = max(largest, val)
    ok = len(rows) == 15 and worst >= -SLACK and largest < 1e3
    report(8, ok, f"{len(rows)} layers, smallest bracket slack {worst:.3e}, largest value {largest:.2f}")
    assert ok


def test_criterion_9_determinism(tmp_path, monkeypatch, report):
    cfg = tmp_path / "grid.toml"
    cfg.write_text(experiments.STATIONARY_PRESET.replace("[0.01, 2.0, 200]", "[0.01, 2.0, 50]")
                   .replace("[0.0, 1.0, 100]", "[0.0, 1.0, 25]"))
    outputs = []
    for threads in ("1", "1", "8"):
        monkeypatch.setenv("STAB_THREADS", threads)
        out = tmp_path / f"out{len(outputs)}.csv"
        assert cli.main(["bounds-grid", "--config", str(cfg), "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2] and outputs[0].count(b"\n") == 1 + 50 * 25
    report(9, ok, "bounds-grid CSV byte-identical across two runs and STAB_THREADS 1 and 8")
    assert ok
