import numpy as np
import pytest
from conftest import random_schedule

from stab.coeffs import CoefficientTable, LayerSchedule, SegmentIndexError, beta_layer, eta_prod
from stab.spectral import InvalidParameterError


def explicit_segments(schedule, eig, i, n):
    """beta_{i,n} and beta~_{i,n} summed term by term."""
    layers = beta_layer(schedule, eig)
    gain = schedule.bias_gain
    beta = np.prod(layers[i - 1:n], axis=0)
    bt = np.zeros(eig.size)
    for k in range(i, n + 1):
        tail = np.prod(layers[k:n], axis=0) if k < n else np.ones(eig.size)
        leak = np.prod(schedule.eta[i - 1:k - 1])
        bt += tail * gain[k - 1] * leak
    return beta, bt


def test_build_broadcasts_scalars():
    s = LayerSchedule.build(4, 0.5, tau=[0.1, 0.2, 0.3, 0.4], eta=0.9, mu=2.0, chi_bar=0.5)
    assert s.m == 4
    np.testing.assert_array_equal(s.lam, 0.5)
    np.testing.assert_array_equal(s.chi, 1.0)
    np.testing.assert_allclose(s.bias_gain, 0.5 / 1.5)
    np.testing.assert_allclose(s.prox_threshold, 1.0 / 1.5)
    assert not s.is_stationary
    assert LayerSchedule.build(3, 1.0).is_stationary


@pytest.mark.parametrize("kwargs", [
    dict(m=0, lam=1.0),
    dict(m=2, lam=0.0),
    dict(m=2, lam=1.0, tau=-1.0),
    dict(m=2, lam=1.0, eta=-0.1),
    dict(m=2, lam=1.0, chi_bar=-1.0),
    dict(m=3, lam=[1.0, 2.0]),
])
def test_build_rejects(kwargs):
    with pytest.raises(InvalidParameterError):
        LayerSchedule.build(**kwargs)


def test_truncated():
    s = LayerSchedule.build(3, [0.1, 0.2, 0.3], eta=[0.5, 0.6, 0.7])
    t = s.truncated(2)
    np.testing.assert_array_equal(t.lam, [0.1, 0.2])
    np.testing.assert_array_equal(t.eta, [0.5, 0.6])


def test_eta_prod():
    s = LayerSchedule.build(4, 1.0, eta=[0.5, 2.0, 3.0, 0.1])
    assert eta_prod(s, 2, 3) == pytest.approx(6.0)
    assert eta_prod(s, 3, 2) == 1.0
    assert eta_prod(s, 1, 0) == 1.0
    with pytest.raises(SegmentIndexError):
        eta_prod(s, 0, 2)
    with pytest.raises(SegmentIndexError):
        eta_prod(s, 1, 5)


def test_beta_layer_formula(eig8):
    s = LayerSchedule.build(2, [0.5, 1.5], tau=[0.01, 0.02], mu=[1.0, 2.0], chi_bar=0.1)
    got = beta_layer(s, eig8)
    for n in range(2):
        c = eig8.beta_T + s.tau[n] * eig8.beta_D_unit
        np.testing.assert_allclose(got[n], (1 - s.lam[n] * c) / (1 + s.lam[n] * s.chi[n]), rtol=1e-14)


@pytest.mark.parametrize("stationary", [False, True])
def test_segments_match_explicit_sums(eig8, stationary):
    rng = np.random.default_rng(3)
    for _ in range(5):
        s = random_schedule(rng, 5, stationary=stationary)
        table = CoefficientTable(s, eig8)
        assert table.stationary == stationary
        for i in range(1, 6):
            for n in range(i, 6):
                beta, bt = explicit_segments(s, eig8, i, n)
                np.testing.assert_allclose(table.beta_seg(i, n), beta, rtol=1e-12, atol=1e-15)
                np.testing.assert_allclose(table.beta_tilde_seg(i, n), bt, rtol=1e-12, atol=1e-15)
            assert table.beta_rows(i).shape == (6 - i, eig8.size)
            np.testing.assert_allclose(table.eta_rows(i)[-1], s.eta[i - 1:].prod())


def test_limit_cases(eig8):
    # a single layer with zero leakage: beta~ is just the bias gain
    s = LayerSchedule.build(1, 0.7, tau=0.0, eta=0.0, mu=1.0, chi_bar=0.2)
    table = CoefficientTable(s, eig8)
    np.testing.assert_allclose(table.beta_tilde_seg(1, 1), 0.7 / (1 + 0.7 * 0.2))
    np.testing.assert_allclose(table.beta_seg(1, 1), (1 - 0.7 * eig8.beta_T) / (1 + 0.14))


def test_segment_index_errors(eig8):
    table = CoefficientTable(LayerSchedule.build(3, 1.0), eig8)
    for i, n in ((0, 1), (2, 1), (1, 4)):
        with pytest.raises(SegmentIndexError):
            table.beta_seg(i, n)
    with pytest.raises(SegmentIndexError):
        table.beta_rows(4)
