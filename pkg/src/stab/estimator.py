"""scikit-learn style wrapper around the unrolled network."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import certify
from .coeffs import LayerSchedule
from .network import ProxSpec, apply_blur_adjoint, apply_prefilter, run_network
from .spectral import FrequencyGrid, PreFilterSpec, build_eigensystem, prefilter_eigs


class UnfoldedDeconvolver(TransformerMixin, BaseEstimator):
    """Restore blurred images with a fixed unrolled forward-backward network.

    Nothing is learned: ``fit`` only records the image shape and computes
    the stability certificates of the network for that shape
    (``ledger_``). ``transform`` maps observations ``y`` of shape
    ``(n_samples, n1, n2)`` (or a single ``(n1, n2)`` image) to restorations.

    Parameters
    ----------
    m : int
        Number of layers.
    lam, tau, eta, mu : float or sequence of float
        Per-layer step sizes, gradient weights, leakage factors and prox weights.
    chi_bar : float
        Strong convexity modulus of the regularizer.
    blur_k : int
        Side of the uniform blur kernel (odd).
    epsilon : float
        Floor of the bias-channel norm weights.
    prox : {"identity", "l1", "nonneg", "box"}
    prefilter : {"identity", "zero", "wiener"}
    prefilter_sigma : float
        Regularization of the Wiener pre-filter.
    """

    def __init__(self, m=15, lam=1.0, tau=1e-2, eta=1.0, mu=1.0, chi_bar=0.0, blur_k=3,
                 epsilon=1e-2, prox="nonneg", prefilter="identity", prefilter_sigma=1e-2):
        self.m = m
        self.lam = lam
        self.tau = tau
        self.eta = eta
        self.mu = mu
        self.chi_bar = chi_bar
        self.blur_k = blur_k
        self.epsilon = epsilon
        self.prox = prox
        self.prefilter = prefilter
        self.prefilter_sigma = prefilter_sigma

    def _images(self, X):
        X = check_array(X, allow_nd=True, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            return X[None], True
        if X.ndim != 3:
            raise ValueError(f"expected images of shape (n1, n2) or (n_samples, n1, n2), got {X.shape}")
        return X, False

    def fit(self, X, y=None):
        X, _ = self._images(X)
        self.eigensystem_ = build_eigensystem(FrequencyGrid(*X.shape[1:]), self.blur_k, self.epsilon)
        self.schedule_ = LayerSchedule.build(self.m, self.lam, self.tau, self.eta, self.mu, self.chi_bar)
        self.prox_ = ProxSpec(self.prox)
        if self.prefilter == "wiener":
            spec = PreFilterSpec.wiener(self.prefilter_sigma)
        else:
            spec = PreFilterSpec(self.prefilter)
        self.phi_ = prefilter_eigs(spec, self.eigensystem_)
        self.ledger_ = certify(self.schedule_, self.eigensystem_, phi=self.phi_)
        self.image_shape_ = X.shape[1:]
        return self

    def transform(self, X):
        check_is_fitted(self, "ledger_")
        X, single = self._images(X)
        if X.shape[1:] != self.image_shape_:
            raise ValueError(f"fitted for images of shape {self.image_shape_}, got {X.shape[1:]}")
        eig = self.eigensystem_
        b0 = apply_blur_adjoint(X, eig)
        # x0 = F b0 as in the single-input network, also for m = 1
        out = run_network(apply_prefilter(b0, self.phi_, eig), b0, self.schedule_, eig, self.prox_)
        return out[0] if single else out
