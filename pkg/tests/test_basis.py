"""Cosine basis construction, evaluation, and the analytic penalty."""

import numpy as np
import pytest

from covspec.basis import BasisError, build_basis, log_spectrum_eval, penalty_matrix
from covspec.periodogram import fourier_grid


def test_entries_are_cosines():
    grid = fourier_grid(100)
    Z = build_basis(grid, 5).values
    for k, nu in enumerate(grid.frequencies):
        for b in range(1, 6):
            assert Z[k, b - 1] == pytest.approx(np.cos(2 * np.pi * b * nu), abs=1e-14)


def test_shapes():
    grid = fourier_grid(1000)
    Z = build_basis(grid, 7)
    assert Z.values.shape == (501, 7)
    assert Z.n_basis == 7


def test_weighted_orthogonality():
    """Under the fold weights the cosine columns are exactly orthogonal on the
    full grid of an even length: sum_k w_k cos(2 pi b nu_k) cos(2 pi c nu_k)
    is (T/4) delta_{bc} for 1 <= b, c < T/2."""
    T = 1024
    grid = fourier_grid(T)
    Z = build_basis(grid, 7).values
    G = (Z.T * grid.weights) @ Z
    assert np.allclose(np.diag(G), T / 4, rtol=1e-12)
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) < 1e-9


def test_penalty_values():
    pen = penalty_matrix(4)
    want = [(2 * np.pi * b) ** -2 for b in (1, 2, 3, 4)]
    assert np.allclose(pen.diagonal, want, rtol=1e-15)
    assert np.allclose(pen.inverse_diagonal(), 1.0 / np.array(want), rtol=1e-15)


def test_penalty_quad_form():
    pen = penalty_matrix(3)
    beta = np.array([1.0, -2.0, 0.5])
    want = float(beta @ np.diag(1.0 / pen.diagonal) @ beta)
    assert pen.quad_form(beta) == pytest.approx(want, rel=1e-14)


def test_min_basis_enforced():
    with pytest.raises(BasisError):
        build_basis(fourier_grid(100), 2)
    with pytest.raises(BasisError):
        penalty_matrix(2)


def test_eval_matches_basis_product():
    grid = fourier_grid(200)
    Z = build_basis(grid, 6).values
    rng = np.random.default_rng(0)
    beta = rng.standard_normal(6)
    alpha = 0.7
    got = log_spectrum_eval(alpha, beta, grid.frequencies)
    assert np.allclose(got, alpha + Z @ beta, rtol=1e-13)


def test_eval_linearity():
    freqs = np.linspace(0.01, 0.49, 20)
    b1 = np.array([1.0, 0.0, 0.0])
    b2 = np.array([0.0, 2.0, -1.0])
    lhs = log_spectrum_eval(0.0, b1 + b2, freqs)
    rhs = log_spectrum_eval(0.0, b1, freqs) + log_spectrum_eval(0.0, b2, freqs)
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_eval_at_zero_frequency():
    beta = np.array([0.5, 0.25, -0.1])
    assert log_spectrum_eval(1.0, beta, 0.0)[0] == pytest.approx(1.0 + beta.sum(), rel=1e-14)


def test_eval_even_symmetry():
    """cos basis gives f(nu) = f(-nu) = f(1 - nu)."""
    beta = np.array([0.3, -0.4, 0.2, 0.1])
    nu = np.linspace(0.0, 0.5, 11)
    a = log_spectrum_eval(0.0, beta, nu)
    b = log_spectrum_eval(0.0, beta, 1.0 - nu)
    assert np.allclose(a, b, atol=1e-12)
