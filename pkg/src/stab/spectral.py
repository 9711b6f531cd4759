"""Eigensystems of periodic filters on a 2D DFT grid.

Every linear operator in the network (blur, gradient regularizer, pre-filter)
is a circular convolution, hence diagonal in the unitary 2D Fourier basis.
This module computes the per-frequency eigenvalues and the weights of the
weighted norm used on the bias channel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

__all__ = [
    "FrequencyGrid",
    "EigenSystem",
    "PreFilterSpec",
    "InvalidKernelError",
    "InvalidParameterError",
    "uniform_blur_eigs",
    "gradient_eigs",
    "norm_weights",
    "prefilter_eigs",
    "build_eigensystem",
    "reduce_frequencies",
    "fft2u",
    "ifft2u",
]


class InvalidKernelError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


def fft2u(x):
    """Unitary 2D DFT."""
    return scipy.fft.fft2(x, norm="ortho")


def ifft2u(X):
    """Inverse of :func:`fft2u`."""
    return scipy.fft.ifft2(X, norm="ortho")


@dataclass(frozen=True)
class FrequencyGrid:
    """Row-major N1 x N2 frequency grid, p = p1 * n2 + p2."""

    n1: int
    n2: int

    def __post_init__(self):
        if int(self.n1) < 1 or int(self.n2) < 1:
            raise InvalidParameterError(f"grid must be at least 1x1, got {self.n1}x{self.n2}")

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def size(self):
        return self.n1 * self.n2

    def flat_index(self, p1, p2):
        return p1 * self.n2 + p2

    def unflat_index(self, p):
        return divmod(p, self.n2)


def _folded(n):
    # min(p, n - p) keeps p and -p bitwise identical in every formula below
    p = np.arange(n)
    return np.minimum(p, n - p)


def _box_response(k, n):
    """DFT of the zero-phase 1D box (1/k) * ones(k), as a real array."""
    q = _folded(n)
    r = k // 2
    j = np.arange(-r, r + 1)
    return np.cos(2.0 * np.pi * np.outer(q, j) / n).sum(axis=1) / k


def uniform_blur_eigs(k, grid):
    """Eigenvalues of a centered k x k uniform blur.

    Parameters
    ----------
    k : int
        Odd kernel width; the kernel has all entries ``1 / k**2``.
    grid : FrequencyGrid

    Returns
    -------
    t_eig : ndarray of complex, shape ``grid.shape``
        Frequency response of the blur (real up to storage type).
    beta_T : ndarray, shape ``grid.shape``
        ``|t_eig|**2``, the eigenvalues of ``T* T``.
    """
    k = int(k)
    if k < 1 or k % 2 == 0 or k > min(grid.n1, grid.n2):
        raise InvalidKernelError(f"kernel width must be odd and <= {min(grid.n1, grid.n2)}, got {k}")
    h1 = _box_response(k, grid.n1)
    h2 = _box_response(k, grid.n2)
    t = np.outer(h1, h2)
    return t.astype(complex), t * t


def gradient_eigs(tau, grid):
    """Eigenvalues of ``D* D`` for ``D = sqrt(tau) [grad_H; grad_V]``.

    Forward differences with periodic wrap give
    ``tau * (4 sin^2(pi p1 / n1) + 4 sin^2(pi p2 / n2))``.
    """
    if not tau >= 0:
        raise InvalidParameterError(f"tau must be nonnegative, got {tau}")
    s1 = 4.0 * np.sin(np.pi * _folded(grid.n1) / grid.n1) ** 2
    s2 = 4.0 * np.sin(np.pi * _folded(grid.n2) / grid.n2) ** 2
    return tau * (s1[:, None] + s2[None, :])


def norm_weights(beta_T, epsilon):
    """Weights ``beta_T**2 + epsilon`` of the bias-channel norm."""
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    return np.asarray(beta_T, dtype=float) ** 2 + epsilon


@dataclass(frozen=True)
class PreFilterSpec:
    """Pre-filter ``F`` such that ``x0 = F b0``.

    ``kind`` is one of ``"zero"``, ``"identity"``, ``"wiener"`` (needs
    ``sigma > 0``) or ``"custom"`` (needs ``values``, one complex per
    frequency).
    """

    kind: str = "identity"
    sigma: float | None = None
    values: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "identity", "wiener", "custom"):
            raise InvalidParameterError(f"unknown pre-filter kind {self.kind!r}")
        if self.kind == "wiener" and not (self.sigma is not None and self.sigma > 0):
            raise InvalidParameterError("wiener pre-filter needs sigma > 0")
        if self.kind == "custom" and self.values is None:
            raise InvalidParameterError("custom pre-filter needs values")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def wiener(cls, sigma):
        return cls("wiener", sigma=float(sigma))

    @classmethod
    def custom(cls, values):
        return cls("custom", values=np.asarray(values, dtype=complex))


@dataclass(frozen=True)
class EigenSystem:
    """Per-frequency eigenvalues of the filters, flattened row-major.

    ``beta_D_unit`` holds the eigenvalues of the unscaled gradient stack;
    layer ``n`` uses ``tau_n * beta_D_unit``. ``grid`` is ``None`` for a
    frequency-reduced system (see :func:`reduce_frequencies`), which is
    enough for every bound but cannot drive the network.
    """

    grid: FrequencyGrid | None
    beta_T: np.ndarray
    beta_D_unit: np.ndarray
    t_eig: np.ndarray
    weights: np.ndarray
    blur_k: int | None = None

    def __post_init__(self):
        n = self.beta_T.shape[0]
        for name in ("beta_D_unit", "t_eig", "weights"):
            if getattr(self, name).shape != (n,):
                raise InvalidParameterError(f"{name} must have shape ({n},)")
        if self.grid is not None and self.grid.size != n:
            raise InvalidParameterError("eigenvalue arrays do not match the grid size")
        if np.any(self.beta_T < 0) or np.any(self.beta_D_unit < 0):
            raise InvalidParameterError("eigenvalues of T*T and D*D must be nonnegative")
        if not (np.all(np.isfinite(self.weights)) and self.weights.min() > 0):
            raise InvalidParameterError("norm weights must be finite and positive")

    @property
    def size(self):
        return self.beta_T.shape[0]

    def beta_D(self, tau):
        """Eigenvalues of ``D_n* D_n`` for each ``tau_n``; shape ``(m, P)``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return tau[:, None] * self.beta_D_unit[None, :]

    def as_grid(self, values):
        if self.grid is None:
            raise InvalidParameterError("reduced eigensystem has no grid")
        return np.asarray(values).reshape(self.grid.shape)


def build_eigensystem(grid, blur_k=3, epsilon=1e-2):
    """Blur + unit gradient eigensystem with the ``beta_T**2 + eps`` weights."""
    t_eig, beta_T = uniform_blur_eigs(blur_k, grid)
    beta_D = gradient_eigs(1.0, grid)
    return EigenSystem(
        grid=grid,
        beta_T=beta_T.ravel(),
        beta_D_unit=beta_D.ravel(),
        t_eig=t_eig.ravel(),
        weights=norm_weights(beta_T, epsilon).ravel(),
        blur_k=int(blur_k),
    )


def prefilter_eigs(spec, eig):
    """Frequency response ``phi_p`` of the pre-filter.

    The Wiener choice is ``1 / (beta_T + sigma)``, so that ``F T*`` has the
    response ``conj(t) / (|t|**2 + sigma)``.
    """
    if spec.kind == "zero":
        return np.zeros(eig.size, dtype=complex)
    if spec.kind == "identity":
        return np.ones(eig.size, dtype=complex)
    if spec.kind == "wiener":
        return (1.0 / (eig.beta_T + spec.sigma)).astype(complex)
    values = np.asarray(spec.values, dtype=complex).ravel()
    if values.shape != (eig.size,):
        raise InvalidParameterError(f"custom pre-filter needs {eig.size} values, got {values.size}")
    return values


def reduce_frequencies(eig, *extra):
    """Drop frequencies that repeat an earlier ``(beta_T, beta_D, weight)`` tuple.

    Every bound is a max over frequencies of a function of these values, so
    duplicates (mirror frequencies, transposed ones on square grids) can be
    removed. ``extra`` per-frequency arrays (e.g. ``phi``) join the key and
    are returned reduced alongside the eigensystem.
    """
    cols = [eig.beta_T, eig.beta_D_unit, eig.weights, eig.t_eig.real, eig.t_eig.imag]
    for e in extra:
        e = np.asarray(e)
        cols += [e.real.astype(float), e.imag.astype(float) if np.iscomplexobj(e) else np.zeros(e.shape)]
    key = np.ascontiguousarray(np.stack(cols, axis=1))
    _, idx = np.unique(key, axis=0, return_index=True)
    idx = np.sort(idx)
    reduced = EigenSystem(
        grid=None,
        beta_T=eig.beta_T[idx],
        beta_D_unit=eig.beta_D_unit[idx],
        t_eig=eig.t_eig[idx],
        weights=eig.weights[idx],
        blur_k=eig.blur_k,
    )
    return (reduced, *[np.asarray(e)[idx] for e in extra])
