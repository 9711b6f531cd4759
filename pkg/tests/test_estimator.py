import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stab import UnfoldedDeconvolver
from stab.bounds import certify
from stab.network import make_observation


def test_params_and_clone():
    est = UnfoldedDeconvolver(m=4, lam=0.5, prox="identity")
    params = est.get_params()
    assert params["m"] == 4 and params["lam"] == 0.5 and params["prox"] == "identity"
    twin = clone(est).set_params(eta=0.9)
    assert twin.eta == 0.9 and est.eta == 1.0


def test_fit_computes_certificates():
    X = np.zeros((3, 16, 16))
    est = UnfoldedDeconvolver(m=5, lam=0.8, eta=0.9).fit(X)
    ref = certify(est.schedule_, est.eigensystem_, phi=est.phi_)
    assert est.ledger_.lip_vnn == pytest.approx(ref.lip_vnn)
    assert est.image_shape_ == (16, 16)


def test_transform_restores_constant_images():
    est = UnfoldedDeconvolver(m=30, lam=0.2, prox="identity")
    X = np.full((16, 16), 0.25)
    est.fit(X)
    y, _ = make_observation(X, est.eigensystem_)
    out = est.transform(y)
    assert out.shape == (16, 16)
    np.testing.assert_allclose(out, 0.25, atol=1e-8)
    batch = est.transform(np.stack([y, 2 * y]))
    assert batch.shape == (2, 16, 16)
    np.testing.assert_allclose(batch[1], 0.5, atol=1e-8)


def test_transform_checks():
    est = UnfoldedDeconvolver(m=2)
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((8, 8)))
    est.fit(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        est.transform(np.zeros((8, 9)))
    with pytest.raises(ValueError):
        est.fit(np.zeros(8))


def test_fit_transform_single_layer_wiener():
    est = UnfoldedDeconvolver(m=1, prefilter="wiener", prefilter_sigma=0.1)
    out = est.fit_transform(np.random.default_rng(0).random((2, 8, 8)))
    assert out.shape == (2, 8, 8) and est.ledger_.lip_single is None
