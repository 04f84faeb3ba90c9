"""Cosine smoothing basis for log spectra and its roughness penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .periodogram import FourierGrid

MIN_BASIS = 3


class BasisError(ValueError):
    """Invalid basis dimension."""


@dataclass(frozen=True)
class BasisMatrix:
    """Columns cos(2*pi*b*nu) for b = 1..n_basis evaluated on a frequency grid."""

    grid: FourierGrid
    values: np.ndarray  # shape (n, n_basis)

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    @property
    def n_basis(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PenaltyMatrix:
    """Diagonal prior covariance scaling diag((2*pi*b)^-2); inverse is analytic."""

    diagonal: np.ndarray

    def __post_init__(self) -> None:
        self.diagonal.setflags(write=False)

    @property
    def n_basis(self) -> int:
        return self.diagonal.size

    def inverse_diagonal(self) -> np.ndarray:
        return 1.0 / self.diagonal

    def quad_form(self, beta: np.ndarray) -> float:
        """beta' D^-1 beta without forming a matrix."""
        return float(np.sum(np.asarray(beta) ** 2 / self.diagonal))


def build_basis(grid: FourierGrid, n_basis: int) -> BasisMatrix:
    if n_basis < MIN_BASIS:
        raise BasisError(f"n_basis={n_basis} < {MIN_BASIS}")
    b = np.arange(1, n_basis + 1, dtype=float)
    values = np.cos(2.0 * np.pi * np.outer(grid.frequencies, b))
    return BasisMatrix(grid=grid, values=values)


def penalty_matrix(n_basis: int) -> PenaltyMatrix:
    if n_basis < MIN_BASIS:
        raise BasisError(f"n_basis={n_basis} < {MIN_BASIS}")
    b = np.arange(1, n_basis + 1, dtype=float)
    return PenaltyMatrix(diagonal=(2.0 * np.pi * b) ** -2.0)


def log_spectrum_eval(alpha: float, beta: np.ndarray, frequencies: np.ndarray) -> np.ndarray:
    """Evaluate alpha + sum_b beta_b cos(2*pi*b*nu) at arbitrary frequencies."""
    beta = np.asarray(beta, dtype=float)
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    b = np.arange(1, beta.size + 1, dtype=float)
    return alpha + np.cos(2.0 * np.pi * np.outer(freqs, b)) @ beta
