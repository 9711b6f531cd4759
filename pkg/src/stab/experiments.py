"""Sweeps, per-layer curves and the verification suite behind the CLI.

Every function here returns plain rows (dicts); formatting is left to
:mod:`stab.fileio`.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds, probe
from .bounds import InvalidUsageError
from .coeffs import CoefficientTable
from .config import ConfigError, parse_config
from .spectral import reduce_frequencies

__all__ = [
    "thread_count",
    "grid_header",
    "bounds_grid_rows",
    "LAYER_HEADER",
    "bounds_layer_rows",
    "VERIFY_HEADER",
    "verify_rows",
    "STATIONARY_PRESET",
    "NONSTATIONARY_PRESET",
    "preset",
]

STATIONARY_PRESET = """\
[grid]
n1 = 256
n2 = 256
blur_k = 3
epsilon = 0.01

[schedule]
m = 15
lambda = 1.0
tau = 0.01
eta = 0.9
chi_bar = 0.0

[sweep]
lambda = [0.01, 2.0, 200]
eta = [0.0, 1.0, 100]
"""

NONSTATIONARY_PRESET = """\
[grid]
n1 = 256
n2 = 256
blur_k = 5
epsilon = 0.01

[schedule]
m = 15
lambda = {uniform = [0.5128, 0.9585]}
tau = {uniform = [0.0099, 0.0249]}
eta = 0.98
mu = 1.0
chi_bar = 0.001

[prox]
prefilter = "identity"
"""


def preset(name):
    """The stationary or nonstationary experiment configuration."""
    texts = {"stationary": STATIONARY_PRESET, "nonstationary": NONSTATIONARY_PRESET}
    if name not in texts:
        raise ConfigError(f"unknown preset {name!r}")
    return parse_config(texts[name])


def thread_count(env=None):
    """Worker count from ``STAB_THREADS`` (default: all cores)."""
    env = os.environ if env is None else env
    raw = env.get("STAB_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"STAB_THREADS must be a positive integer, got {raw!r}")
    return n


def grid_header(alphas):
    return (["lambda", "eta", "theta_vnn", "lower_vnn", "upper_vnn", "nonexpansive_vnn",
             "theta_bar", "theta_hat_F0", "theta_hat_F1"]
            + [f"averaged_{a:g}" for a in alphas]
            + ["vartheta_fixed", "diff_separable", "diff_theta_minus_bar", "error"])


def _grid_cell(cfg, eig, lam, eta):
    row = {"lambda": lam, "eta": eta}
    try:
        schedule = cfg.schedule(**{"lambda": lam, "eta": eta})
        table = CoefficientTable(schedule, eig)
        a, a_bar = bounds.a_tables(table)
        vnn = bounds.theta_vnn(a)
        xout = bounds.theta_bar(a, a_bar)
        m = table.m
        lo, _ = bounds.corollary_bounds(table)
        row.update(
            theta_vnn=vnn.lip,
            lower_vnn=max(vnn.lower, lo),
            upper_vnn=vnn.upper,
            nonexpansive_vnn=vnn.lip <= 1.0,
            theta_bar=xout.lip,
            diff_separable=math.sqrt(a[0, 0]) ** m - vnn.lip,
            diff_theta_minus_bar=vnn.lip - xout.lip,
            vartheta_fixed=bounds.vartheta(vnn.lip, table.eta_prod(1, m), "fixed"),
        )
        if m >= 2:
            for tag, value in (("F0", 0.0), ("F1", 1.0)):
                inner, terminal = bounds.a_hat_rows(table, np.full(eig.size, value, dtype=complex))
                a_hat = inner.copy()
                a_hat[-1] = terminal[-1]
                row[f"theta_hat_{tag}"] = bounds.theta_hat(a_hat, a, a_bar).lip
        for alpha in cfg.alphas:
            row[f"averaged_{alpha:g}"] = bounds.averagedness(a[0, -1], vnn.theta_m, table, alpha)[1]
    except (ArithmeticError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    if any(isinstance(v, float) and math.isnan(v) for v in row.values()):
        row["error"] = "nan"
    return row


def bounds_grid_rows(cfg, threads=None):
    """One row per ``(lambda, eta)`` cell, lambda-major.

    Returns ``(header, rows, ok)``; ``ok`` is False if any cell failed.
    """
    if not cfg.is_stationary():
        raise InvalidUsageError("bounds-grid needs a stationary schedule (scalar lambda, tau, eta, mu)")
    eig = reduce_frequencies(cfg.eigensystem())[0]
    cells = [(float(lam), float(eta)) for lam in cfg.sweep_values("lambda") for eta in cfg.sweep_values("eta")]
    workers = thread_count() if threads is None else int(threads)
    if workers <= 1:
        rows = [_grid_cell(cfg, eig, lam, eta) for lam, eta in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map keeps submission order, so output does not depend on scheduling
            rows = list(pool.map(lambda c: _grid_cell(cfg, eig, *c), cells))
    ok = not any(r.get("error") for r in rows)
    return grid_header(cfg.alphas), rows, ok


LAYER_HEADER = ["n", "theta_vnn", "lower_vnn", "upper_vnn", "theta_bar", "lower_bar", "upper_bar",
                "theta_hat", "lower_hat", "upper_hat"]


def bounds_layer_rows(cfg):
    """Certificates of the ``n``-layer truncated networks, ``n = 1..m``."""
    if cfg.m < 2:
        raise InvalidUsageError("bounds-layers needs m >= 2")
    eig = cfg.eigensystem()
    curves = bounds.layer_curves(cfg.schedule(), eig, phi=cfg.phi(eig))
    rows = []
    for n in range(1, cfg.m + 1):
        k = n - 1
        rows.append({
            "n": n,
            "theta_vnn": curves.vnn[k], "lower_vnn": curves.vnn_lower[k], "upper_vnn": curves.vnn_upper[k],
            "theta_bar": curves.xout[k], "lower_bar": curves.xout_lower[k], "upper_bar": curves.xout_upper[k],
            "theta_hat": curves.single[k], "lower_hat": curves.single_lower[k],
            "upper_hat": curves.single_upper[k],
        })
    return LAYER_HEADER, rows


VERIFY_HEADER = ["check", "status", "value", "bound", "margin"]
DENSE_SIDE = 8
DENSE_MAX_LAYERS = 4
DENSE_RTOL = 1e-8
ORACLE_RTOL = 1e-12
LOWER_FRACTION = 0.999


def _check(name, ok, value, bound, margin):
    return {"check": name, "status": "pass" if ok else "fail", "value": value, "bound": bound, "margin": margin}


def _rel(x, y):
    return float(np.max(np.abs(x - y) / np.maximum(np.abs(y), 1e-300)))


def _dense_checks(cfg, scale):
    small = cfg.with_grid(DENSE_SIDE, DENSE_SIDE)
    eig = small.eigensystem()
    schedule = small.schedule().truncated(min(small.m, DENSE_MAX_LAYERS))
    m = schedule.m
    table = CoefficientTable(schedule, eig)
    a, a_bar = bounds.a_tables(table)
    norms, theta = probe.dense_thetas(schedule, eig)
    bar = np.full((m, m), np.nan)
    for i in range(1, m + 1):
        for n in range(i, m + 1):
            bar[i - 1, n - 1] = probe.spectral_norm(probe.dense_operator(schedule, eig, i, n, with_bias=False))
    iu = np.triu_indices(m)
    out = []
    err = _rel(np.sqrt(a[iu]), norms[iu])
    out.append(_check("dense_a", err <= DENSE_RTOL, err, DENSE_RTOL, DENSE_RTOL - err))
    err = _rel(np.sqrt(a_bar[iu]), bar[iu])
    out.append(_check("dense_a_bar", err <= DENSE_RTOL, err, DENSE_RTOL, DENSE_RTOL - err))
    lip = scale * bounds.theta_vnn(a).lip
    dense_lip = theta[m] / 2.0 ** (m - 1)
    err = abs(lip - dense_lip) / dense_lip
    out.append(_check("dense_theta", err <= DENSE_RTOL, err, DENSE_RTOL, DENSE_RTOL - err))
    for alpha in small.alphas:
        closed = bounds.averagedness(a[0, -1], bounds.theta_vnn(a).theta_m * scale, table, alpha)[1]
        dense = probe.dense_averagedness(schedule, eig, alpha)
        out.append(_check(f"dense_averaged_{alpha:g}", closed == dense, float(closed), float(dense), 0.0))
    return out


def _oracle_check(seed, count=1000):
    rng = np.random.default_rng([seed, 1])
    beta = rng.uniform(-2.0, 2.0, count)
    bt = rng.uniform(-2.0, 2.0, count)
    eta = rng.uniform(0.0, 1.5, count)
    w = rng.uniform(1e-3, 2.0, count)
    err = _rel(bounds.top_eigenvalue(beta, bt, eta, w), probe.two_by_two_oracle(beta, bt, eta, w))
    return _check("oracle_2x2", err <= ORACLE_RTOL, err, ORACLE_RTOL, ORACLE_RTOL - err)


def verify_rows(cfg, trials=None, seed=None, certificate_scale=1.0):
    """Run the probe suite. Returns ``(header, rows, ok)``.

    ``certificate_scale`` multiplies every closed-form certificate before it
    is compared; values below one let a test confirm the suite can fail.
    """
    trials = cfg.trials if trials is None else int(trials)
    seed = cfg.seed if seed is None else int(seed)
    if trials < 1:
        raise ConfigError("trials must be a positive integer")
    rows = _dense_checks(cfg, certificate_scale)
    rows.append(_oracle_check(seed))

    eig = cfg.eigensystem()
    schedule = cfg.schedule()
    prox = cfg.prox()
    phi = cfg.phi(eig)
    ledger = bounds.certify(schedule, eig, phi=phi, alphas=())
    runners = [("vnn", probe.VirtualRunner(schedule, eig, prox, ledger=ledger)),
               ("xout", probe.XOutputRunner(schedule, eig, prox, ledger=ledger))]
    if schedule.m >= 2:
        runners.append(("single", probe.SingleInputRunner(schedule, eig, prox, phi, ledger=ledger)))
    for name, runner in runners:
        cert = runner.certificate * certificate_scale
        rep = probe.empirical_lipschitz(runner, trials=trials, seed=seed, certificate=cert)
        rows.append(_check(f"empirical_{name}", not rep.violation, rep.empirical_lip, cert, rep.margin))
        if prox.kind == "identity":
            need = LOWER_FRACTION * rep.lower_bound
            rows.append(_check(f"lower_{name}", rep.empirical_lip >= need, rep.empirical_lip, need,
                               rep.empirical_lip - need))
    ok = all(r["status"] == "pass" for r in rows)
    return VERIFY_HEADER, rows, ok
