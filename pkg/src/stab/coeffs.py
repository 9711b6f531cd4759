"""Layer schedules and the spectral coefficient tables of the unrolled network."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import InvalidParameterError

__all__ = ["LayerSchedule", "CoefficientTable", "SegmentIndexError", "eta_prod", "beta_layer"]


class SegmentIndexError(IndexError):
    """Layer index outside the admissible range."""


def _as_layers(value, m, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise InvalidParameterError(f"{name} must be a scalar or have length {m}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LayerSchedule:
    """Per-layer step sizes, regularization weights and leakage factors.

    Attributes
    ----------
    lam, tau, mu, eta : ndarray, shape (m,)
        Step sizes, gradient-penalty weights, prox weights and leakage
        factors for layers ``1..m`` (index ``n - 1``).
    chi_bar : float
        Strong convexity modulus of the regularizer; ``chi_n = mu_n * chi_bar``.
    """

    lam: np.ndarray
    tau: np.ndarray
    mu: np.ndarray
    eta: np.ndarray
    chi_bar: float = 0.0

    def __post_init__(self):
        m = self.lam.shape[0]
        if m < 1:
            raise InvalidParameterError("at least one layer is required")
        for name in ("tau", "mu", "eta"):
            if getattr(self, name).shape != (m,):
                raise InvalidParameterError(f"{name} must have length {m}")
        if np.any(self.lam <= 0):
            raise InvalidParameterError("step sizes must be positive")
        if np.any(self.tau < 0) or np.any(self.mu < 0) or np.any(self.eta < 0):
            raise InvalidParameterError("tau, mu and eta must be nonnegative")
        if self.chi_bar < 0:
            raise InvalidParameterError("chi_bar must be nonnegative")

    @classmethod
    def build(cls, m, lam, tau=0.0, eta=1.0, mu=1.0, chi_bar=0.0):
        """Broadcast scalars or per-layer sequences to an ``m``-layer schedule."""
        m = int(m)
        if m < 1:
            raise InvalidParameterError("at least one layer is required")
        return cls(
            lam=_as_layers(lam, m, "lambda"),
            tau=_as_layers(tau, m, "tau"),
            mu=_as_layers(mu, m, "mu"),
            eta=_as_layers(eta, m, "eta"),
            chi_bar=float(chi_bar),
        )

    @property
    def m(self):
        return self.lam.shape[0]

    @property
    def chi(self):
        return self.mu * self.chi_bar

    @property
    def bias_gain(self):
        """``lambda_n / (1 + lambda_n chi_n)``, the eigenvalue of ``V_n``."""
        return self.lam / (1.0 + self.lam * self.chi)

    @property
    def prox_threshold(self):
        """``lambda_n mu_n / (1 + lambda_n chi_n)``, the scaling of ``g0`` in ``R_n``."""
        return self.lam * self.mu / (1.0 + self.lam * self.chi)

    @property
    def is_stationary(self):
        return all(np.all(v == v[0]) for v in (self.lam, self.tau, self.mu, self.eta))

    def truncated(self, n):
        """The schedule of the first ``n`` layers."""
        return LayerSchedule(self.lam[:n], self.tau[:n], self.mu[:n], self.eta[:n], self.chi_bar)


def eta_prod(schedule, i, j):
    """``eta_j ... eta_i`` for ``j >= i`` and 1 otherwise (1-based indices)."""
    m = schedule.m
    if not (1 <= i <= m + 1 and 0 <= j <= m):
        raise SegmentIndexError(f"eta_prod index ({i}, {j}) out of range for m={m}")
    if j < i:
        return 1.0
    return float(np.cumprod(schedule.eta[i - 1:j])[-1])


def beta_layer(schedule, eig):
    """Eigenvalues of every ``W_n``; shape ``(m, P)``.

    ``(1 - lambda_n (beta_T + beta_D_n)) / (1 + lambda_n chi_n)``, signed.
    """
    beta_D = eig.beta_D(schedule.tau)
    lc = schedule.lam * schedule.chi
    return (1.0 - schedule.lam[:, None] * (eig.beta_T[None, :] + beta_D)) / (1.0 + lc)[:, None]


class CoefficientTable:
    """Eigenvalues of ``W_n``, ``W_{i,n}`` and ``W~_{i,n}`` on every frequency.

    Segment arrays are stored per starting layer: ``self._beta[i - 1]`` has
    shape ``(m - i + 1, P)`` with row ``n - i`` holding ``beta_{i,n,p}``.
    For a stationary schedule the coefficients of a segment depend only on
    its length, so all starting layers share views of the ``i = 1`` block.
    """

    def __init__(self, schedule, eig):
        self.schedule = schedule
        self.eig = eig
        m = schedule.m
        self.beta_layer = beta_layer(schedule, eig)
        self.stationary = schedule.is_stationary
        self._beta = []
        self._beta_tilde = []
        if self.stationary:
            b, bt = self._segments_from(1)
            for i in range(1, m + 1):
                self._beta.append(b[: m - i + 1])
                self._beta_tilde.append(bt[: m - i + 1])
        else:
            for i in range(1, m + 1):
                b, bt = self._segments_from(i)
                self._beta.append(b)
                self._beta_tilde.append(bt)

    def _segments_from(self, i):
        s = self.schedule
        m = s.m
        gain = s.bias_gain
        P = self.eig.size
        beta = np.empty((m - i + 1, P))
        beta_tilde = np.empty((m - i + 1, P))
        prev_b = np.ones(P)
        prev_bt = np.zeros(P)
        leak = 1.0  # eta_{i, n-1}
        for n in range(i, m + 1):
            bn = self.beta_layer[n - 1]
            prev_b = bn * prev_b
            prev_bt = bn * prev_bt + gain[n - 1] * leak
            beta[n - i] = prev_b
            beta_tilde[n - i] = prev_bt
            leak *= s.eta[n - 1]
        return beta, beta_tilde

    @property
    def m(self):
        return self.schedule.m

    def _check(self, i, n):
        if not (1 <= i <= n <= self.m):
            raise SegmentIndexError(f"segment ({i}, {n}) out of range for m={self.m}")

    def beta_seg(self, i, n):
        """``beta_{i,n,p} = prod_{j=i}^n beta_p^{(j)}``."""
        self._check(i, n)
        return self._beta[i - 1][n - i]

    def beta_tilde_seg(self, i, n):
        """Eigenvalues of ``W~_{i,n}``, the bias-to-signal block of ``U_n...U_i``."""
        self._check(i, n)
        return self._beta_tilde[i - 1][n - i]

    def beta_rows(self, i):
        """All ``beta_{i,n,p}`` for ``n = i..m`` as an ``(m - i + 1, P)`` array."""
        self._check(i, i)
        return self._beta[i - 1]

    def beta_tilde_rows(self, i):
        self._check(i, i)
        return self._beta_tilde[i - 1]

    def eta_prod(self, i, j):
        return eta_prod(self.schedule, i, j)

    def eta_rows(self, i):
        """``eta_{i,n}`` for ``n = i..m``."""
        return np.cumprod(self.schedule.eta[i - 1:])
