"""Simulation designs: coefficient paths, autocorrelation, determinism."""

import numpy as np
import pytest

from covspec.simulate import (
    ar1_true_log_spectrum,
    gen_ar1,
    gen_piecewise_ar,
    gen_slowly_varying_ar,
    slowly_varying_phi,
    subject_covariates,
)


def lag1_autocorr(x):
    x = x - x.mean()
    return float(np.sum(x[1:] * x[:-1]) / np.sum(x * x))


def test_covariates_equally_spaced():
    w = subject_covariates(8)
    assert np.allclose(w, np.arange(8) / 7)


def test_piecewise_shapes_and_covariates():
    data = gen_piecewise_ar(L=8, T=1000, seed=1)
    assert data.series.shape == (8, 1000)
    assert np.allclose(data.covariates, np.arange(8) / 7)


def test_piecewise_lag1_autocorrelation():
    """First half has AR coefficient -phi, second half +phi."""
    data = gen_piecewise_ar(L=8, T=1000, seed=7)
    first = data.series[0, :500]  # low group, phi = 0.5
    second = data.series[0, 500:]
    assert lag1_autocorr(first) == pytest.approx(-0.5, abs=0.1)
    assert lag1_autocorr(second) == pytest.approx(0.5, abs=0.1)
    high_first = data.series[7, :500]  # high group, phi = 0.9
    assert lag1_autocorr(high_first) == pytest.approx(-0.9, abs=0.05)


def test_piecewise_deterministic():
    a = gen_piecewise_ar(L=4, T=300, seed=5).series
    b = gen_piecewise_ar(L=4, T=300, seed=5).series
    assert np.array_equal(a, b)
    c = gen_piecewise_ar(L=4, T=300, seed=6).series
    assert not np.array_equal(a, c)


def test_subject_streams_independent():
    """Adding a subject must not perturb the draws of existing subjects.

    Uses the constant-coefficient design; the grouped designs reassign
    covariates (and hence regimes) when L changes.
    """
    a = gen_ar1(L=4, T=300, phi=0.4, seed=3).series
    b = gen_ar1(L=5, T=300, phi=0.4, seed=3).series
    assert np.array_equal(a[:4], b[:4])


def test_slowly_varying_phi_endpoints():
    assert slowly_varying_phi(np.array([1000]), 1000, high_group=False)[0] == pytest.approx(0.5)
    assert slowly_varying_phi(np.array([500]), 1000, high_group=False)[0] == pytest.approx(0.0)
    assert slowly_varying_phi(np.array([1000]), 1000, high_group=True)[0] == pytest.approx(0.9)
    assert slowly_varying_phi(np.array([500]), 1000, high_group=True)[0] == pytest.approx(0.0)


def test_slowly_varying_series_bounded():
    data = gen_slowly_varying_ar(L=8, T=1000, seed=2)
    assert data.series.shape == (8, 1000)
    assert np.all(np.isfinite(data.series))
    # the coefficient stays inside (-1, 1): sample paths remain modest
    assert np.max(np.abs(data.series)) < 50


def test_slowly_varying_halves_autocorrelation_sign():
    data = gen_slowly_varying_ar(L=8, T=1000, seed=11)
    x = data.series[0]
    assert lag1_autocorr(x[:300]) < -0.1  # early: coefficient near -0.5
    assert lag1_autocorr(x[700:]) > 0.1  # late: coefficient near +0.5


def test_ar1_panel():
    data = gen_ar1(L=4, T=1000, phi=0.5, seed=0)
    for row in data.series:
        assert lag1_autocorr(row) == pytest.approx(0.5, abs=0.1)
    with pytest.raises(ValueError):
        gen_ar1(L=2, T=100, phi=1.0)


def test_ar1_log_spectrum_values():
    assert ar1_true_log_spectrum(0.5, 0.0)[0] == pytest.approx(np.log(4.0), rel=1e-12)
    # white noise: flat zero
    assert np.allclose(ar1_true_log_spectrum(0.0, np.linspace(0, 0.5, 7)), 0.0)
    # nu = 0.5: -log((1+phi)^2)
    assert ar1_true_log_spectrum(0.5, 0.5)[0] == pytest.approx(-np.log(2.25), rel=1e-12)


def test_ar1_spectrum_integrates_to_variance():
    """2 * integral of f over (0, 1/2) equals the AR(1) variance 1/(1-phi^2)."""
    from scipy.integrate import quad

    phi = 0.6
    val, _ = quad(lambda nu: np.exp(ar1_true_log_spectrum(phi, nu)[0]), 0.0, 0.5, limit=200)
    assert 2 * val == pytest.approx(1.0 / (1 - phi**2), rel=1e-8)


def test_ar1_periodogram_matches_spectrum():
    """Averaged periodogram of many AR(1) subjects tracks the true spectrum."""
    from covspec.dataset import demean
    from covspec.periodogram import periodogram

    data = gen_ar1(L=30, T=512, phi=0.5, seed=9)
    pooled = np.mean([periodogram(demean(r)).values for r in data.series], axis=0)
    grid = periodogram(demean(data.series[0])).grid
    truth = np.exp(ar1_true_log_spectrum(0.5, grid.frequencies))
    ratio = pooled / truth
    assert abs(np.mean(np.log(ratio))) < 0.15
