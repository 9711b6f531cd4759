"""Lipschitz and averagedness certificates of the unrolled network.

All suprema over frequencies are exact maxima over the finite DFT grid.
Index conventions follow the layers: ``a[i - 1, n - 1]`` holds the squared
norm of ``U_n o ... o U_i`` (entries below the diagonal are NaN).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientTable, SegmentIndexError
from .spectral import InvalidParameterError, PreFilterSpec, prefilter_eigs, reduce_frequencies

__all__ = [
    "NumericalInconsistencyError",
    "UnsupportedConfigurationError",
    "InvalidUsageError",
    "Sandwich",
    "BoundLedger",
    "StationaryReport",
    "top_eigenvalue",
    "a_in",
    "a_bar_in",
    "a_hat_1n",
    "a_tables",
    "a_hat_rows",
    "theta_vnn",
    "theta_bar",
    "theta_hat",
    "averagedness",
    "vartheta",
    "corollary_bounds",
    "stationary_report",
    "certify",
    "layer_curves",
    "LayerCurves",
]

_CLAMP = 1e-12


class NumericalInconsistencyError(ArithmeticError):
    pass


class UnsupportedConfigurationError(ValueError):
    pass


class InvalidUsageError(ValueError):
    pass


def top_eigenvalue(beta, beta_tilde, eta, w):
    """Largest eigenvalue of ``[[b^2, sqrt(w) b bt], [sqrt(w) b bt, eta^2 + w bt^2]]``.

    The square root of the discriminant is taken as ``hypot`` of a sum of
    squares: nonnegative by construction, no cancellation when ``b^2`` is
    close to ``eta^2``, and no underflow for tiny coefficients.
    """
    b2 = beta * beta
    wt2 = w * beta_tilde * beta_tilde
    e2 = eta * eta
    root = np.hypot(b2 - wt2 - e2, 2.0 * np.abs(beta * beta_tilde) * np.sqrt(w))
    return 0.5 * (b2 + wt2 + e2 + root)


def _sup(values):
    return float(np.max(values))


def a_in(table, i, n):
    """Squared weighted norm of ``U_n o ... o U_i``."""
    return _sup(top_eigenvalue(table.beta_seg(i, n), table.beta_tilde_seg(i, n),
                               table.eta_prod(i, n), table.eig.weights))


def a_bar_in(table, i, n):
    """Squared semi-norm (signal output only) of ``U_n o ... o U_i``."""
    b = table.beta_seg(i, n)
    bt = table.beta_tilde_seg(i, n)
    return _sup(b * b + table.eig.weights * bt * bt)


def a_hat_1n(table, phi, n, terminal=None):
    """Squared norm of the first ``n`` linear blocks fed with ``(F b0, b0)``.

    The input space carries the weighted norm. With ``terminal=True`` (the
    default when ``n == m``) the bias output is dropped, i.e. no
    ``eta_{1,n}**2`` term.
    """
    m = table.m
    if not 1 <= n <= m:
        raise SegmentIndexError(f"n={n} out of range for m={m}")
    if terminal is None:
        terminal = n == m
    phi = np.asarray(phi)
    v = table.eig.weights * np.abs(table.beta_seg(1, n) * phi + table.beta_tilde_seg(1, n)) ** 2
    out = _sup(v)
    if not terminal:
        out += table.eta_prod(1, n) ** 2
    return out


def a_tables(table):
    """All ``a_{i,n}`` and ``a_bar_{i,n}`` as two ``(m, m)`` upper-triangular arrays."""
    m = table.m
    w = table.eig.weights
    a = np.full((m, m), np.nan)
    a_bar = np.full((m, m), np.nan)
    starts = [1] if table.stationary else range(1, m + 1)
    for i in starts:
        b = table.beta_rows(i)
        bt = table.beta_tilde_rows(i)
        eta = table.eta_rows(i)[:, None]
        a[i - 1, i - 1:] = top_eigenvalue(b, bt, eta, w).max(axis=1)
        a_bar[i - 1, i - 1:] = (b * b + w * bt * bt).max(axis=1)
    if table.stationary:
        for i in range(2, m + 1):
            a[i - 1, i - 1:] = a[0, : m - i + 1]
            a_bar[i - 1, i - 1:] = a_bar[0, : m - i + 1]
    return a, a_bar


def a_hat_rows(table, phi):
    """``a_hat_{1,n}`` for ``n = 1..m``, with and without the bias term.

    Returns ``(inner, terminal)``: ``inner[n - 1]`` includes ``eta_{1,n}**2``
    (``n`` is an inner layer), ``terminal[n - 1]`` omits it (``n`` is the
    output layer).
    """
    phi = np.asarray(phi)
    v = table.eig.weights * np.abs(table.beta_rows(1) * phi + table.beta_tilde_rows(1)) ** 2
    terminal = v.max(axis=1)
    inner = terminal + table.eta_rows(1) ** 2
    return inner, terminal


@dataclass(frozen=True)
class Sandwich:
    """A certificate ``lip = theta[-1] / 2**(m-1)`` and its bracketing bounds."""

    theta: np.ndarray
    lip: float
    lower: float
    upper: float

    @property
    def theta_m(self):
        return float(self.theta[-1])


def _thetas(a):
    m = a.shape[0]
    sa = np.sqrt(a)
    theta = np.empty(m + 1)
    theta[0] = 1.0
    for n in range(1, m + 1):
        theta[n] = np.dot(theta[:n], sa[:n, n - 1])
    return theta


def theta_vnn(a):
    """Lipschitz certificate of the virtual network from the ``a`` table."""
    a = np.asarray(a, dtype=float)
    m = a.shape[0]
    theta = _thetas(a)
    lip = theta[m] / 2.0 ** (m - 1)
    lower = float(np.sqrt(a[0, m - 1]))
    upper = float(np.prod(np.sqrt(np.diag(a))))
    return Sandwich(theta, float(lip), lower, upper)


def theta_bar(a, a_bar):
    """Certificate of the map ``(x0, b0) -> x_m`` (semi-norm on the output).

    ``theta[n]`` for ``n < m`` are the virtual-network values; ``theta[m]``
    is replaced by the semi-norm value.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[0]
    theta = _thetas(a)
    theta[m] = np.dot(theta[:m], np.sqrt(a_bar[:m, m - 1]))
    lip = theta[m] / 2.0 ** (m - 1)
    lower = float(np.sqrt(a_bar[0, m - 1]))
    upper = float(np.sqrt(a_bar[m - 1, m - 1]) * np.prod(np.sqrt(np.diag(a)[: m - 1])))
    return Sandwich(theta, float(lip), lower, upper)


def theta_hat(a_hat, a, a_bar):
    """Certificate of the single-input network ``b0 -> x_m`` with ``x0 = F b0``.

    Parameters
    ----------
    a_hat : array, shape (m,)
        ``a_hat[n - 1]`` for ``n < m`` must include the bias term and
        ``a_hat[m - 1]`` must not (see :func:`a_hat_rows`).
    a, a_bar : (m, m) arrays from :func:`a_tables`.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[0]
    if m < 2:
        raise UnsupportedConfigurationError("the single-input certificate needs m >= 2")
    sa = np.sqrt(a)
    sh = np.sqrt(np.asarray(a_hat, dtype=float))
    th = np.empty(m + 1)
    th[0] = 1.0
    for n in range(1, m):
        th[n] = sh[n - 1] + np.dot(th[1:n], sa[1:n, n - 1])
    th[m] = sh[m - 1] + np.dot(th[1:m], np.sqrt(a_bar[1:m, m - 1]))
    lip = th[m] / 2.0 ** (m - 1)
    lower = float(sh[m - 1])
    upper = float(np.sqrt(a_bar[m - 1, m - 1] * np.prod(np.diag(a)[1: m - 1]) * a_hat[0]))
    return Sandwich(th, float(lip), lower, upper)


def averagedness(a_1m, theta_m, table, alpha):
    """Sufficient test for the virtual network to be ``alpha``-averaged.

    Returns ``(b_alpha, holds)`` where ``b_alpha`` is the squared norm of
    ``U - 2**m (1 - alpha) Id``. A ``False`` verdict only means the test is
    inconclusive.
    """
    if not 0.5 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [1/2, 1], got {alpha}")
    m = table.m
    gamma = 2.0 ** m * (1.0 - alpha)
    b = table.beta_seg(1, m)
    bt = table.beta_tilde_seg(1, m)
    eta = table.eta_prod(1, m)
    b_alpha = _sup(top_eigenvalue(b - gamma, bt, eta - gamma, table.eig.weights))
    holds = np.sqrt(b_alpha) - np.sqrt(a_1m) <= 2.0 ** m * alpha - 2.0 * theta_m
    return b_alpha, bool(holds)


def vartheta(lip_vnn, eta_1m, init_mode="fixed"):
    """Lipschitz constant of ``b0 -> x_m`` derived from the virtual network.

    ``init_mode="fixed"`` assumes a data-independent ``x0``; ``"data"``
    assumes ``x0 = b0``.
    """
    if init_mode == "fixed":
        rad = lip_vnn ** 2 - eta_1m ** 2
    elif init_mode == "data":
        rad = 2.0 * lip_vnn ** 2 - eta_1m ** 2
    else:
        raise InvalidParameterError(f"unknown init_mode {init_mode!r}")
    if rad < -_CLAMP:
        raise NumericalInconsistencyError(
            f"virtual-network certificate {lip_vnn} is below the leakage floor {eta_1m}")
    return float(np.sqrt(max(rad, 0.0)))


def corollary_bounds(table):
    """Closed-form bracket of ``theta_m / 2**(m-1)`` avoiding the ``a`` table."""
    s = table.schedule
    m = table.m
    w = table.eig.weights
    b = table.beta_seg(1, m)
    bt = table.beta_tilde_seg(1, m)
    eta = table.eta_prod(1, m)
    lower = _sup(np.maximum(np.abs(b), np.sqrt(w * bt * bt + eta * eta)))
    per_layer = (table.beta_layer ** 2 + w[None, :] * (s.bias_gain ** 2)[:, None]
                 + (s.eta ** 2)[:, None]).max(axis=1)
    upper = float(np.prod(np.sqrt(per_layer)))
    return lower, upper


@dataclass
class BoundLedger:
    """Every certificate computed for one configuration."""

    vnn: Sandwich
    xout: Sandwich
    single: Sandwich | None
    a: np.ndarray = field(repr=False)
    a_bar: np.ndarray = field(repr=False)
    eta_1m: float = 1.0
    corollary_lower: float = 0.0
    corollary_upper: float = np.inf
    vartheta_fixed_init: float = 0.0
    vartheta_data_init: float = 0.0
    b_alpha: dict = field(default_factory=dict)
    averaged: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def theta(self):
        return self.vnn.theta

    @property
    def lip_vnn(self):
        return self.vnn.lip

    @property
    def lip_xout(self):
        return self.xout.lip

    @property
    def lip_single(self):
        return None if self.single is None else self.single.lip

    @property
    def theta_bar_m(self):
        return self.xout.theta_m

    @property
    def theta_hat(self):
        return None if self.single is None else self.single.theta

    @property
    def lower_vnn(self):
        # the corollary bound never exceeds sqrt(a_1m); keep the larger one
        return max(self.vnn.lower, self.corollary_lower)

    def as_dict(self):
        out = {
            "m": self.m,
            "lip_vnn": self.lip_vnn,
            "lower_vnn": self.lower_vnn,
            "upper_vnn": self.vnn.upper,
            "corollary_lower": self.corollary_lower,
            "corollary_upper": self.corollary_upper,
            "theta_m": self.vnn.theta_m,
            "theta_bar_m": self.theta_bar_m,
            "lip_xout": self.lip_xout,
            "lower_xout": self.xout.lower,
            "upper_xout": self.xout.upper,
            "lip_single": self.lip_single,
            "lower_single": None if self.single is None else self.single.lower,
            "upper_single": None if self.single is None else self.single.upper,
            "eta_1m": self.eta_1m,
            "vartheta_fixed_init": self.vartheta_fixed_init,
            "vartheta_data_init": self.vartheta_data_init,
        }
        for alpha in sorted(self.b_alpha):
            out[f"b_alpha_{alpha:g}"] = self.b_alpha[alpha]
            out[f"averaged_{alpha:g}"] = self.averaged[alpha]
        return out


def _prepare(schedule, eig, phi, reduce):
    if phi is None:
        phi = prefilter_eigs(PreFilterSpec.identity(), eig)
    if reduce:
        eig, phi = reduce_frequencies(eig, phi)
    return CoefficientTable(schedule, eig), phi


def certify(schedule, eig, phi=None, alphas=(0.5, 0.75, 1.0), reduce=True):
    """Compute the full :class:`BoundLedger` for a schedule.

    Parameters
    ----------
    schedule : LayerSchedule
    eig : EigenSystem
    phi : array of complex, optional
        Pre-filter response for the single-input certificate; identity by
        default.
    alphas : iterable of float
        Averagedness levels to test.
    reduce : bool
        Collapse duplicate frequencies first (exact; only faster).
    """
    table, phi = _prepare(schedule, eig, phi, reduce)
    a, a_bar = a_tables(table)
    vnn = theta_vnn(a)
    xout = theta_bar(a, a_bar)
    single = None
    if table.m >= 2:
        inner, terminal = a_hat_rows(table, phi)
        a_hat = inner.copy()
        a_hat[-1] = terminal[-1]
        single = theta_hat(a_hat, a, a_bar)
    eta_1m = table.eta_prod(1, table.m)
    lo, hi = corollary_bounds(table)
    ledger = BoundLedger(
        vnn=vnn, xout=xout, single=single, a=a, a_bar=a_bar, eta_1m=eta_1m,
        corollary_lower=lo, corollary_upper=hi,
        vartheta_fixed_init=vartheta(vnn.lip, eta_1m, "fixed"),
        vartheta_data_init=vartheta(vnn.lip, eta_1m, "data"),
    )
    for alpha in alphas:
        b, ok = averagedness(a[0, -1], vnn.theta_m, table, alpha)
        ledger.b_alpha[float(alpha)] = b
        ledger.averaged[float(alpha)] = ok
    return ledger


@dataclass(frozen=True)
class LayerCurves:
    """Certificates of the networks truncated after ``n = 1..m`` layers.

    Each array has length ``m``; entry ``n - 1`` is the normalized constant
    ``theta / 2**(n-1)`` of the ``n``-layer network and its bracket.
    """

    vnn: np.ndarray
    vnn_lower: np.ndarray
    vnn_upper: np.ndarray
    xout: np.ndarray
    xout_lower: np.ndarray
    xout_upper: np.ndarray
    single: np.ndarray
    single_lower: np.ndarray
    single_upper: np.ndarray


def layer_curves(schedule, eig, phi=None, reduce=True):
    """Per-layer certificate curves, reusing one set of coefficient tables."""
    table, phi = _prepare(schedule, eig, phi, reduce)
    a, a_bar = a_tables(table)
    inner, terminal = a_hat_rows(table, phi)
    m = table.m
    cols = {k: np.empty(m) for k in LayerCurves.__dataclass_fields__}
    for n in range(1, m + 1):
        an, abn = a[:n, :n], a_bar[:n, :n]
        s = theta_vnn(an)
        cols["vnn"][n - 1], cols["vnn_lower"][n - 1], cols["vnn_upper"][n - 1] = s.lip, s.lower, s.upper
        s = theta_bar(an, abn)
        cols["xout"][n - 1], cols["xout_lower"][n - 1], cols["xout_upper"][n - 1] = s.lip, s.lower, s.upper
        if n == 1:
            v = float(np.sqrt(terminal[0]))
            cols["single"][0] = cols["single_lower"][0] = cols["single_upper"][0] = v
        else:
            ah = inner[:n].copy()
            ah[-1] = terminal[n - 1]
            s = theta_hat(ah, an, abn)
            cols["single"][n - 1], cols["single_lower"][n - 1], cols["single_upper"][n - 1] = s.lip, s.lower, s.upper
    return LayerCurves(**cols)


@dataclass(frozen=True)
class StationaryReport:
    """Closed-form 1-Lipschitz conditions for a stationary schedule."""

    necessary_spectrum_ok: bool
    necessary_eta_ok: bool
    sufficient_ok: bool
    eta_max: float
    lambda_interval: tuple | None
    spectrum_iff_ok: bool


def stationary_report(lam, tau, eta, chi, eig, m):
    """Necessary and sufficient conditions for ``theta_m / 2**(m-1) <= 1``.

    ``lambda_interval`` is the admissible step-size interval for the given
    ``eta`` when ``chi == 0`` (``None`` when empty or when ``chi > 0``).
    """
    for name, v in (("lam", lam), ("tau", tau), ("eta", eta), ("chi", chi)):
        if np.ndim(v) != 0 and not np.all(np.asarray(v) == np.ravel(v)[0]):
            raise InvalidUsageError(f"stationary_report needs a constant {name}")
    lam, tau, eta, chi = (float(np.ravel(v)[0]) for v in (lam, tau, eta, chi))
    m = int(m)
    c = eig.beta_T + tau * eig.beta_D_unit
    w = eig.weights
    g = lam / (1.0 + lam * chi)
    beta = (1.0 - lam * c) / (1.0 + lam * chi)

    spectrum_ok = bool(np.all(np.abs(beta) <= 1.0))
    spectrum_iff = bool(lam * (c.max() - chi) <= 2.0)

    geo = np.zeros_like(beta)
    for j in range(m):
        geo += beta ** j * eta ** (m - j - 1)
    eta_ok = bool(np.all(w * g * g * geo * geo + eta ** (2 * m) <= 1.0))

    suff = (1.0 - lam * c) ** 2 + w * lam * lam + (1.0 + lam * chi) ** 2 * (eta * eta - 1.0)
    sufficient_ok = bool(np.all(suff <= 0.0))

    eta_max = float(np.min(c / np.sqrt(c * c + w)))

    interval = None
    if chi == 0.0:
        q = c * c + w
        disc = c * c - eta * eta * q
        if np.all(disc >= 0.0):
            r = np.sqrt(disc)
            lo = float(np.max((c - r) / q))
            hi = float(np.min((c + r) / q))
            if lo <= hi:
                interval = (lo, hi)
    return StationaryReport(spectrum_ok, eta_ok, sufficient_ok, eta_max, interval, spectrum_iff)
