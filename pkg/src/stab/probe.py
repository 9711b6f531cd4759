"""Independent checks of the certificates.

Dense oracles assemble the operators from pixel-domain stencils (shifts of
the identity), never from the closed-form eigenvalues, so agreement with
:mod:`stab.bounds` is a genuine cross-check. Empirical probes measure
output/input distance ratios of the actual nonlinear networks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .bounds import InvalidUsageError
from .coeffs import CoefficientTable
from .network import ProxSpec, run_network, run_virtual, apply_prefilter, weighted_norm

__all__ = [
    "ResourceGuardError",
    "ProbeReport",
    "power_iteration",
    "spectral_norm",
    "dense_operator",
    "dense_single_input",
    "dense_thetas",
    "dense_averagedness",
    "two_by_two_oracle",
    "VirtualRunner",
    "XOutputRunner",
    "SingleInputRunner",
    "empirical_lipschitz",
    "seminorm_check",
    "leakage_check",
]

MAX_DENSE_PIXELS = 64


class ResourceGuardError(RuntimeError):
    pass


def power_iteration(M, max_iter=10_000, tol=1e-12, seed=0, squarings=40):
    """Largest singular value of ``M`` by power iteration on ``A = M^T M``.

    The start vector is first pushed through ``A**(2**k)`` by repeated
    normalized squaring (a power step that costs ``log2`` of the usual
    number of matrix products), which handles nearly repeated top singular
    values. Plain iterations on ``A`` then polish the vector until the
    Rayleigh quotient changes by less than ``tol`` (relative) and the
    eigen-residual is below ``sqrt(tol)``. Returns ``(sigma, v)``.
    """
    rng = np.random.default_rng(seed)
    A = M.T @ M
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    B = A
    for _ in range(squarings):
        s = np.linalg.norm(B)
        if s == 0.0:
            return 0.0, v
        B = B / s
        w = B @ v
        if np.linalg.norm(w) > 0.0:
            v = w / np.linalg.norm(w)
        B = B @ B
    lam_old = 0.0
    lam = 0.0
    for _ in range(max_iter):
        u = A @ v
        lam = float(v @ u)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0, v
        resid = np.linalg.norm(u - lam * v)
        if abs(lam - lam_old) <= tol * lam and resid <= np.sqrt(tol) * lam:
            break
        lam_old = lam
        v = u / nu
    return float(np.sqrt(max(lam, 0.0))), v


def spectral_norm(M, **kwargs):
    return power_iteration(M, **kwargs)[0]


def _guard(eig):
    if eig.grid is None or eig.grid.size > MAX_DENSE_PIXELS:
        raise ResourceGuardError(f"dense assembly is limited to {MAX_DENSE_PIXELS} pixels")


def _shift(grid, d1, d2):
    """Matrix of ``x -> roll(x, (d1, d2))`` on flattened images."""
    eye = np.eye(grid.size).reshape(grid.size, grid.n1, grid.n2)
    return np.roll(eye, (d1, d2), axis=(1, 2)).reshape(grid.size, grid.size).T


def _dense_blocks(eig):
    """Dense ``T``, ``D^T D`` (unit gradient stack) and ``Omega^{1/2}``."""
    grid = eig.grid
    k = eig.blur_k
    r = k // 2
    T = sum(_shift(grid, d1, d2) for d1 in range(-r, r + 1) for d2 in range(-r, r + 1)) / k ** 2
    I = np.eye(grid.size)
    gh = _shift(grid, 0, -1) - I
    gv = _shift(grid, -1, 0) - I
    DtD = gh.T @ gh + gv.T @ gv
    # weights live in the frequency domain; synthesize with an explicit DFT matrix
    f1 = np.exp(-2j * np.pi * np.outer(np.arange(grid.n1), np.arange(grid.n1)) / grid.n1) / np.sqrt(grid.n1)
    f2 = np.exp(-2j * np.pi * np.outer(np.arange(grid.n2), np.arange(grid.n2)) / grid.n2) / np.sqrt(grid.n2)
    F = np.kron(f1, f2)
    root = F.conj().T @ np.diag(np.sqrt(eig.weights)) @ F
    return T, DtD, root.real, F


def _dense_layers(schedule, eig):
    T, DtD, root, F = _dense_blocks(eig)
    P = eig.grid.size
    I = np.eye(P)
    TtT = T.T @ T
    layers = []
    for n in range(schedule.m):
        lam, chi = schedule.lam[n], schedule.chi[n]
        W = (I - lam * (TtT + schedule.tau[n] * DtD)) / (1.0 + lam * chi)
        U = np.block([[W, lam / (1.0 + lam * chi) * I], [np.zeros((P, P)), schedule.eta[n] * I]])
        layers.append(U)
    return layers, root, F


def _weighted(U, root):
    P = root.shape[0]
    S = np.block([[np.eye(P), np.zeros((P, P))], [np.zeros((P, P)), root]])
    Sinv = np.block([[np.eye(P), np.zeros((P, P))], [np.zeros((P, P)), np.linalg.inv(root)]])
    return Sinv @ U @ S


def dense_operator(schedule, eig, i, n, with_bias=True, gamma=0.0):
    """Dense ``U_n o ... o U_i - gamma Id`` in weighted coordinates.

    The bias channel input is ``Omega^{1/2} b'`` and its output is mapped
    back by ``Omega^{-1/2}``, so the Euclidean spectral norm of the result is
    the operator norm for the weighted product norm. ``with_bias=False``
    zeroes the bias output rows (the signal-only semi-norm).
    """
    _guard(eig)
    layers, root, _ = _dense_layers(schedule, eig)
    U = np.eye(2 * eig.grid.size)
    for k in range(i, n + 1):
        U = layers[k - 1] @ U
    M = _weighted(U, root) - gamma * np.eye(U.shape[0])
    if not with_bias:
        M[eig.grid.size:, :] = 0.0
    return M


def dense_single_input(schedule, eig, phi, n, terminal=None):
    """Dense map ``b' -> U_n ... U_1 [F; I] Omega^{1/2} b'`` (weighted output)."""
    _guard(eig)
    if terminal is None:
        terminal = n == schedule.m
    layers, root, F = _dense_layers(schedule, eig)
    P = eig.grid.size
    Fd = F.conj().T @ np.diag(np.asarray(phi)) @ F
    if np.max(np.abs(Fd.imag)) > 1e-10:
        raise InvalidUsageError("pre-filter does not map real images to real images")
    U = np.vstack([Fd.real, np.eye(P)])
    for k in range(1, n + 1):
        U = layers[k - 1] @ U
    out = np.vstack([U[:P], np.linalg.inv(root) @ U[P:]]) @ root
    if terminal:
        out[P:] = 0.0
    return out


def dense_thetas(schedule, eig):
    """Segment norms and the theta recursion computed from dense operators."""
    m = schedule.m
    norms = np.full((m, m), np.nan)
    for i in range(1, m + 1):
        for n in range(i, m + 1):
            norms[i - 1, n - 1] = spectral_norm(dense_operator(schedule, eig, i, n))
    theta = np.empty(m + 1)
    theta[0] = 1.0
    for n in range(1, m + 1):
        theta[n] = sum(theta[i - 1] * norms[i - 1, n - 1] for i in range(1, n + 1))
    return norms, theta


def dense_averagedness(schedule, eig, alpha):
    """Evaluate ``||U - g Id|| - ||U|| + 2 theta_m <= 2**m alpha`` with dense norms."""
    m = schedule.m
    norms, theta = dense_thetas(schedule, eig)
    gamma = 2.0 ** m * (1.0 - alpha)
    shifted = spectral_norm(dense_operator(schedule, eig, 1, m, gamma=gamma))
    return bool(shifted - norms[0, m - 1] + 2.0 * theta[m] <= 2.0 ** m * alpha)


def two_by_two_oracle(beta, beta_tilde, eta, w):
    """Largest eigenvalue of ``[[A, B], [B, C]]`` via half-trace plus hypot.

    ``A = beta^2``, ``B = sqrt(w) beta beta_tilde``, ``C = eta^2 + w beta_tilde^2``.
    Both summands are nonnegative, so the larger root has no cancellation.
    """
    A = beta * beta
    B = np.sqrt(w) * beta * beta_tilde
    C = eta * eta + w * beta_tilde * beta_tilde
    return 0.5 * (A + C) + np.hypot(0.5 * (A - C), B)


def _top_vector(A, B, C):
    nu = 0.5 * (A + C) + np.hypot(0.5 * (A - C), B)
    v1 = np.array([B, nu - A])
    v2 = np.array([nu - C, B])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) == 0.0:
        v = np.array([1.0, 0.0]) if A >= C else np.array([0.0, 1.0])
    return v / np.linalg.norm(v)


def _cos_mode(grid, p):
    p1, p2 = grid.unflat_index(int(p))
    i = np.arange(grid.n1)[:, None]
    j = np.arange(grid.n2)[None, :]
    c = np.cos(2.0 * np.pi * (p1 * i / grid.n1 + p2 * j / grid.n2))
    return c / np.linalg.norm(c)


@dataclass
class ProbeReport:
    """Outcome of an empirical Lipschitz probe."""

    empirical_lip: float
    theoretical_lip: float
    trials: int
    seed: int
    violation: bool
    ratios: np.ndarray = field(repr=False)
    lower_bound: float = float("nan")

    @property
    def margin(self):
        return self.theoretical_lip - self.empirical_lip


class _Runner:
    norm = None

    def __init__(self, schedule, eig, prox, phi=None, ledger=None):
        if eig.grid is None:
            raise InvalidUsageError("probing needs an eigensystem with a grid")
        self.schedule = schedule
        self.eig = eig
        self.prox = prox if isinstance(prox, ProxSpec) else ProxSpec(prox)
        self.phi = phi
        self.ledger = ledger if ledger is not None else bounds.certify(schedule, eig, phi=phi, alphas=())
        self._table = None

    @property
    def table(self):
        if self._table is None:
            self._table = CoefficientTable(self.schedule, self.eig)
        return self._table

    @property
    def shape(self):
        return (2, *self.eig.grid.shape)


class VirtualRunner(_Runner):
    """``(x0, b0) -> (x_m, b_m)`` with the weighted product norm on both sides."""

    norm = "product"

    @property
    def certificate(self):
        return self.ledger.lip_vnn

    @property
    def lower(self):
        return self.ledger.vnn.lower

    def __call__(self, z):
        out = run_virtual((z[..., 0, :, :], z[..., 1, :, :]), self.schedule, self.eig, self.prox)
        return np.stack([out.x, out.b], axis=-3)

    def input_norm(self, z):
        return np.hypot(np.linalg.norm(z[..., 0, :, :], axis=(-2, -1)), weighted_norm(z[..., 1, :, :], self.eig))

    def output_distance(self, s, t):
        return self.input_norm(s - t)

    def _eta(self):
        return self.table.eta_prod(1, self.schedule.m)

    def top_direction(self):
        m = self.schedule.m
        b = self.table.beta_seg(1, m)
        bt = self.table.beta_tilde_seg(1, m)
        w = self.eig.weights
        eta = self._eta()
        p = int(np.argmax(two_by_two_oracle(b, bt, eta, w)))
        u = _top_vector(b[p] ** 2, np.sqrt(w[p]) * b[p] * bt[p], eta ** 2 + w[p] * bt[p] ** 2)
        c = _cos_mode(self.eig.grid, p)
        return np.stack([u[0] * c, u[1] * np.sqrt(w[p]) * c])


class XOutputRunner(VirtualRunner):
    """``(x0, b0) -> x_m``; weighted product norm in, Euclidean norm out."""

    norm = "seminorm"

    @property
    def certificate(self):
        return self.ledger.lip_xout

    @property
    def lower(self):
        return self.ledger.xout.lower

    def __call__(self, z):
        return run_network(z[..., 0, :, :], z[..., 1, :, :], self.schedule, self.eig, self.prox)

    def output_distance(self, s, t):
        return np.linalg.norm(s - t, axis=(-2, -1))

    def _eta(self):
        return 0.0


class SingleInputRunner(_Runner):
    """``b0 -> x_m`` with ``x0 = F b0``; weighted norm in, Euclidean norm out."""

    norm = "weighted"

    def __init__(self, schedule, eig, prox, phi, ledger=None):
        phi = np.asarray(phi, dtype=complex)
        super().__init__(schedule, eig, prox, phi=phi, ledger=ledger)

    @property
    def shape(self):
        return self.eig.grid.shape

    @property
    def certificate(self):
        return self.ledger.lip_single

    @property
    def lower(self):
        return self.ledger.single.lower

    def __call__(self, b):
        x0 = apply_prefilter(b, self.phi, self.eig)
        return run_network(x0, b, self.schedule, self.eig, self.prox)

    def input_norm(self, b):
        return weighted_norm(b, self.eig)

    def output_distance(self, s, t):
        return np.linalg.norm(s - t, axis=(-2, -1))

    def top_direction(self):
        m = self.schedule.m
        w = self.eig.weights
        v = w * np.abs(self.table.beta_seg(1, m) * self.phi + self.table.beta_tilde_seg(1, m)) ** 2
        p = int(np.argmax(v))
        return np.sqrt(w[p]) * _cos_mode(self.eig.grid, p)


def _trial_inputs(runner, seed, t, scales):
    rng = np.random.default_rng([seed, t])
    z = rng.standard_normal(runner.shape)
    u = rng.standard_normal(runner.shape)
    u /= runner.input_norm(u)
    return z, u, scales[t % len(scales)]


def empirical_lipschitz(runner, trials=1000, seed=0, scales=(1.0, 1e-2, 1e-4), seeded=True,
                        norm=None, tol=1e-9, batch=64, certificate=None):
    """Largest observed ``dist(S(z + s u), S(z)) / s`` over random probes.

    Each trial draws its own generator from ``(seed, trial)``, so results do
    not depend on batching. With ``seeded=True`` the extremal direction of
    the linear part is added as one extra probe per scale (these tighten
    the estimate in the linear case). ``certificate`` overrides the
    runner's theoretical constant.
    """
    if trials < 1:
        raise InvalidUsageError("trials must be at least 1")
    if norm is not None and norm != runner.norm:
        raise InvalidUsageError(f"runner measures in the {runner.norm!r} norm, not {norm!r}")
    theoretical = runner.certificate if certificate is None else certificate
    ratios = []
    for start in range(0, trials, batch):
        draws = [_trial_inputs(runner, seed, t, scales) for t in range(start, min(trials, start + batch))]
        z = np.stack([d[0] for d in draws])
        u = np.stack([d[1] for d in draws])
        s = np.array([d[2] for d in draws]).reshape((-1,) + (1,) * len(runner.shape))
        d = runner.output_distance(runner(z + s * u), runner(z))
        ratios.append(d / s.ravel())
    if seeded:
        u = runner.top_direction()
        rng = np.random.default_rng([seed, trials])
        base = rng.standard_normal(runner.shape)
        for s in scales:
            d = runner.output_distance(runner(base + s * u), runner(base))
            ratios.append(np.atleast_1d(d / s))
    ratios = np.concatenate(ratios)
    emp = float(ratios.max())
    return ProbeReport(
        empirical_lip=emp,
        theoretical_lip=float(theoretical),
        trials=int(ratios.size),
        seed=seed,
        violation=bool(emp > theoretical * (1.0 + tol)),
        ratios=ratios,
        lower_bound=float(runner.lower),
    )


def seminorm_check(runner, trials=1000, seed=0, **kwargs):
    """Probe the ``(x0, b0) -> x_m`` certificate."""
    if not isinstance(runner, XOutputRunner):
        raise InvalidUsageError("seminorm_check needs an XOutputRunner")
    return empirical_lipschitz(runner, trials=trials, seed=seed, norm="seminorm", **kwargs)


def leakage_check(schedule, eig, prox, seed=0):
    """Compare outputs for one ``x0`` and two biases ``b0 != b0'``.

    Returns ``(outputs_differ, lip_vnn)``. When the leakage factors are all
    one and the outputs differ, no certificate below 1 can exist.
    """
    prox = prox if isinstance(prox, ProxSpec) else ProxSpec(prox)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(eig.grid.shape)
    b = np.abs(rng.standard_normal(eig.grid.shape))
    b2 = b + 0.5 * np.abs(rng.standard_normal(eig.grid.shape))
    xm = run_network(x, b, schedule, eig, prox)
    xm2 = run_network(x, b2, schedule, eig, prox)
    differ = bool(np.linalg.norm(xm - xm2) > 1e-12 * max(1.0, np.linalg.norm(xm)))
    return differ, bounds.certify(schedule, eig, alphas=()).lip_vnn
