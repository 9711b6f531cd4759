"""The unrolled forward-backward network and its virtual two-channel form.

Linear parts are applied in the Fourier domain (they are diagonal there),
proximity operators in the pixel domain (they are separable there).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import NumericalInconsistencyError, UnsupportedConfigurationError
from .coeffs import beta_layer
from .spectral import InvalidParameterError, fft2u, ifft2u

__all__ = [
    "ProxSpec",
    "VirtualState",
    "apply_prox",
    "layer_forward",
    "run_network",
    "run_virtual",
    "run_single_input",
    "make_observation",
    "objective_value",
    "apply_blur",
    "apply_blur_adjoint",
    "apply_prefilter",
    "weighted_norm",
]

_IMAG_TOL = 1e-10

PROX_KINDS = ("identity", "l1", "nonneg", "box")


@dataclass(frozen=True)
class ProxSpec:
    """Activation ``R_n = prox_{gamma_n g0}`` of every layer.

    ``identity`` is ``g0 = 0``, ``l1`` is ``g0 = ||.||_1`` (soft thresholding
    at ``gamma_n = lambda_n mu_n / (1 + lambda_n chi_n)``), ``nonneg`` and
    ``box`` are projections onto the nonnegative orthant and ``[lo, hi]``.
    """

    kind: str = "nonneg"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in PROX_KINDS:
            raise InvalidParameterError(f"unknown prox kind {self.kind!r}; expected one of {PROX_KINDS}")
        if self.kind == "box" and not self.lo < self.hi:
            raise InvalidParameterError("box projection needs lo < hi")


@dataclass
class VirtualState:
    """Signal and bias channels of the virtual network."""

    x: np.ndarray
    b: np.ndarray


def _real(z):
    scale = max(1.0, float(np.max(np.abs(z.real), initial=0.0)))
    if np.max(np.abs(z.imag), initial=0.0) > _IMAG_TOL * scale:
        raise NumericalInconsistencyError("inverse transform left a non-negligible imaginary part")
    return z.real


def _filter(x, response):
    return _real(ifft2u(response * fft2u(x)))


def apply_blur(x, eig):
    return _filter(x, eig.as_grid(eig.t_eig))


def apply_blur_adjoint(x, eig):
    return _filter(x, eig.as_grid(np.conj(eig.t_eig)))


def apply_prefilter(b, phi, eig):
    return _filter(b, eig.as_grid(phi))


def weighted_norm(b, eig):
    """``||b||_w = sqrt(sum_p |B_p|**2 / w_p)`` with ``B`` the unitary DFT of ``b``."""
    B = fft2u(b)
    out = np.sqrt(np.sum(np.abs(B) ** 2 / eig.as_grid(eig.weights), axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def apply_prox(spec, schedule, n, x):
    """Apply ``R_n`` elementwise to ``x`` (layer index ``n`` is 1-based)."""
    if spec.kind == "identity":
        return x
    if spec.kind == "nonneg":
        return np.maximum(x, 0.0)
    if spec.kind == "box":
        return np.clip(x, spec.lo, spec.hi)
    gamma = schedule.prox_threshold[n - 1]
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)


def _check_sizes(x, schedule, eig):
    if eig.grid is None:
        raise InvalidParameterError("the network needs an eigensystem with a grid")
    # leading axes, if any, index independent signals of a batch
    if np.shape(x)[-2:] != eig.grid.shape:
        raise InvalidParameterError(f"signal shape {np.shape(x)} does not match grid {eig.grid.shape}")


def _affine(x, b0, mult, vtilde):
    return _filter(x, mult) + vtilde * b0


def layer_forward(x, b0, schedule, eig, spec, n, multipliers=None):
    """One layer ``x_n = R_n(W_n x_{n-1} + V~_n b0)``.

    ``V~_n = lambda_n / (1 + lambda_n chi_n) * eta_{n-1} ... eta_1``.
    """
    _check_sizes(x, schedule, eig)
    if multipliers is None:
        multipliers = beta_layer(schedule, eig)
    mult = eig.as_grid(multipliers[n - 1])
    leak = float(np.prod(schedule.eta[: n - 1]))
    vtilde = schedule.bias_gain[n - 1] * leak
    return apply_prox(spec, schedule, n, _affine(x, b0, mult, vtilde))


def run_network(x0, b0, schedule, eig, spec, trajectory=False):
    """Run all ``m`` layers from ``x0`` with bias ``b0 = T* y``.

    Returns ``x_m``, or the list ``[x_0, ..., x_m]`` with ``trajectory=True``.
    """
    x = np.asarray(x0, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    _check_sizes(x, schedule, eig)
    _check_sizes(b0, schedule, eig)
    mults = beta_layer(schedule, eig)
    gain = schedule.bias_gain
    leak = 1.0
    path = [x]
    for n in range(1, schedule.m + 1):
        x = apply_prox(spec, schedule, n, _affine(x, b0, eig.as_grid(mults[n - 1]), gain[n - 1] * leak))
        leak *= schedule.eta[n - 1]
        path.append(x)
    return path if trajectory else x


def run_virtual(z0, schedule, eig, spec):
    """Run the virtual network ``z_n = Q_n(U_n z_{n-1})`` on ``z0 = (x0, b0)``."""
    if isinstance(z0, VirtualState):
        x, b = z0.x, z0.b
    else:
        x, b = z0
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_sizes(x, schedule, eig)
    mults = beta_layer(schedule, eig)
    gain = schedule.bias_gain
    for n in range(1, schedule.m + 1):
        x = apply_prox(spec, schedule, n, _affine(x, b, eig.as_grid(mults[n - 1]), gain[n - 1]))
        b = schedule.eta[n - 1] * b
    return VirtualState(x, b)


def run_single_input(b0, phi, schedule, eig, spec):
    """Run the network initialized with ``x0 = F b0`` (``F`` has response ``phi``)."""
    if schedule.m < 2:
        raise UnsupportedConfigurationError("the single-input network needs m >= 2")
    b0 = np.asarray(b0, dtype=float)
    _check_sizes(b0, schedule, eig)
    return run_network(apply_prefilter(b0, phi, eig), b0, schedule, eig, spec)


def make_observation(xbar, eig, noise_sigma=0.0, seed=0):
    """Blur ``xbar``, add i.i.d. Gaussian noise, and back-project.

    Returns ``(y, b0)`` with ``y = T xbar + w`` and ``b0 = T* y``.
    """
    if noise_sigma < 0:
        raise InvalidParameterError("noise_sigma must be nonnegative")
    xbar = np.asarray(xbar, dtype=float)
    _check_sizes(xbar, None, eig)
    rng = np.random.default_rng(seed)
    y = apply_blur(xbar, eig)
    if noise_sigma > 0:
        y = y + noise_sigma * rng.standard_normal(xbar.shape)
    return y, apply_blur_adjoint(y, eig)


def _g0(x, spec):
    if spec.kind == "identity":
        return 0.0
    if spec.kind == "l1":
        return float(np.abs(x).sum())
    if spec.kind == "nonneg":
        return 0.0 if np.all(x >= 0) else np.inf
    return 0.0 if np.all((x >= spec.lo) & (x <= spec.hi)) else np.inf


def objective_value(x, y, eig, tau, mu, spec, chi_bar=0.0):
    """``1/2 ||T x - y||^2 + tau/2 ||D x||^2 + mu g(x)``.

    ``g = g0 + chi_bar ||.||^2 / 2``; an infeasible point of an indicator
    returns ``inf`` rather than raising.
    """
    X = fft2u(x)
    resid = apply_blur(x, eig) - y
    grad2 = float(np.sum(eig.as_grid(eig.beta_D_unit) * np.abs(X) ** 2))
    g0 = _g0(x, spec)
    if mu == 0:
        g = 0.0
    else:
        g = mu * (g0 + 0.5 * chi_bar * float(np.sum(x * x)))
    return 0.5 * float(np.sum(resid * resid)) + 0.5 * tau * grad2 + g
