"""Synthetic replicated AR designs with known time-varying spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesSet, make_dataset


@dataclass(frozen=True)
class SimDesign:
    """Manifest of a simulated dataset."""

    kind: str
    n_subjects: int
    n_times: int
    seed: int
    phi: float | None = None  # only for the constant-coefficient design


def _subject_rngs(seed: int, L: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(L)]


def subject_covariates(L: int) -> np.ndarray:
    """Equally spaced covariates (l-1)/(L-1) for subjects l = 1..L."""
    return np.arange(L, dtype=float) / (L - 1)


def gen_piecewise_ar(L: int = 8, T: int = 1000, seed: int = 0) -> TimeSeriesSet:
    """Two-regime AR(1) panel: coefficient -phi_l for t <= T/2 and +phi_l after,
    with phi_l = 0.5 for covariates <= 0.5 and 0.9 above.

    The recursion starts from the stationary distribution of the first regime.
    """
    w = subject_covariates(L)
    half = T // 2
    series = np.empty((L, T))
    for idx, rng in enumerate(_subject_rngs(seed, L)):
        phi = 0.5 if w[idx] <= 0.5 else 0.9
        eps = rng.standard_normal(T)
        x_prev = rng.normal(scale=1.0 / np.sqrt(1.0 - phi**2))
        for t in range(T):
            coef = -phi if t < half else phi
            x_prev = coef * x_prev + eps[t]
            series[idx, t] = x_prev
    return make_dataset(series, w)


def slowly_varying_phi(t: np.ndarray, T: int, high_group: bool) -> np.ndarray:
    """AR coefficient path at observation index t (1-based): the low group moves
    linearly from -0.5 to 0.5, the high group from -0.9 to 0.9."""
    t = np.asarray(t, dtype=float)
    if high_group:
        return -0.9 + 1.8 * t / T
    return -0.5 + t / T


def gen_slowly_varying_ar(L: int = 8, T: int = 1000, seed: int = 0) -> TimeSeriesSet:
    """AR(1) panel whose coefficient drifts linearly in time; subjects with
    covariate <= 0.5 sweep (-0.5, 0.5], the rest sweep (-0.9, 0.9]."""
    w = subject_covariates(L)
    series = np.empty((L, T))
    t_grid = np.arange(1, T + 1)
    for idx, rng in enumerate(_subject_rngs(seed, L)):
        phi = slowly_varying_phi(t_grid, T, high_group=w[idx] > 0.5)
        eps = rng.standard_normal(T)
        x_prev = 0.0
        for t in range(T):
            x_prev = phi[t] * x_prev + eps[t]
            series[idx, t] = x_prev
    return make_dataset(series, w)


def gen_ar1(L: int, T: int, phi: float, seed: int = 0) -> TimeSeriesSet:
    """Stationary AR(1) panel with a common coefficient; covariates are equally
    spaced but carry no signal."""
    if not -1.0 < phi < 1.0:
        raise ValueError(f"AR coefficient {phi} is not stationary")
    w = subject_covariates(L)
    series = np.empty((L, T))
    for idx, rng in enumerate(_subject_rngs(seed, L)):
        eps = rng.standard_normal(T)
        x_prev = rng.normal(scale=1.0 / np.sqrt(1.0 - phi**2))
        for t in range(T):
            x_prev = phi * x_prev + eps[t]
            series[idx, t] = x_prev
    return make_dataset(series, w)


def ar1_true_log_spectrum(phi: float, frequencies) -> np.ndarray:
    """log f(nu) = -log(1 + phi^2 - 2 phi cos(2 pi nu)) for unit innovation variance."""
    nu = np.atleast_1d(np.asarray(frequencies, dtype=float))
    return -np.log(1.0 + phi**2 - 2.0 * phi * np.cos(2.0 * np.pi * nu))
