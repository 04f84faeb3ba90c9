"""Shared helpers for building random blocks and small datasets."""

import numpy as np

from covspec.basis import build_basis, penalty_matrix
from covspec.dataset import demean, make_dataset
from covspec.periodogram import periodogram
from covspec.whittle import BlockData, BlockParams


def random_block(seed=0, n_subjects=3, T=200, n_basis=5):
    """A BlockData built from white-noise subjects plus its penalty."""
    rng = np.random.default_rng(seed)
    pgs = tuple(periodogram(demean(rng.standard_normal(T))) for _ in range(n_subjects))
    basis = build_basis(pgs[0].grid, n_basis)
    return BlockData(periodograms=pgs, basis=basis), penalty_matrix(n_basis)


def random_params(seed=0, n_basis=5, tau2=1.0):
    rng = np.random.default_rng(seed)
    return BlockParams(
        alpha=float(rng.normal(scale=0.5)),
        beta=rng.normal(scale=0.3, size=n_basis),
        tau2=tau2,
    )


def toy_dataset(L=4, T=200, seed=0, covariates=None):
    rng = np.random.default_rng(seed)
    if covariates is None:
        covariates = np.arange(L, dtype=float)
    return make_dataset(rng.standard_normal((L, T)), covariates, t_min=min(40, T // 2))
