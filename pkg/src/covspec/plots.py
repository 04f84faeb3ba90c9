"""Figure rendering for chain summaries. All functions save PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .summarize import (
    CollapsedMeasure,
    ModelPosterior,
    SurfaceSummary,
    cov_cut_samples,
    time_cut_samples,
)


def plot_model_posterior(mp: ModelPosterior, path: str) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, marginal, label in (
        (axes[0], mp.m_marginal, "time segments"),
        (axes[1], mp.p_marginal, "covariate segments"),
    ):
        keys = sorted(marginal)
        ax.bar(keys, [marginal[k] for k in keys], color="#4878b0")
        ax.set_xlabel(f"number of {label}")
        ax.set_ylabel("posterior probability")
        ax.set_xticks(keys)
        ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_time_cuts(records: list, m: int, n_times: int, path: str) -> None:
    samples = time_cut_samples(records, m)
    n = max(len(samples), 1)
    fig, axes = plt.subplots(n, 1, figsize=(7, 2.5 * n), squeeze=False)
    for k in range(n):
        ax = axes[k][0]
        if samples and samples[k].size:
            ax.hist(samples[k], bins=40, color="#4878b0")
            ax.axvline(samples[k].mean(), color="#d65f5f", label="mean")
            ax.legend()
        ax.set_xlim(0, n_times)
        ax.set_xlabel(f"time cut {k} location")
        ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cov_cuts(records: list, p: int, path: str) -> None:
    samples = cov_cut_samples(records, p)
    n = max(len(samples), 1)
    fig, axes = plt.subplots(n, 1, figsize=(7, 2.5 * n), squeeze=False)
    for k in range(n):
        ax = axes[k][0]
        if samples and samples[k].size:
            values, counts = np.unique(samples[k], return_counts=True)
            ax.bar(values, counts / samples[k].size, width=0.02, color="#4878b0")
        ax.set_xlim(-0.02, 1.02)
        ax.set_xlabel(f"covariate cut {k} value")
        ax.set_ylabel("frequency")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_surface(surface: SurfaceSummary, path: str) -> None:
    """Heatmap of the posterior mean log spectrum, one panel per covariate value."""
    n_w = surface.w_values.size
    fig, axes = plt.subplots(1, n_w, figsize=(4.5 * n_w, 3.8), squeeze=False)
    vmin = float(surface.mean.min())
    vmax = float(surface.mean.max())
    for iw, wv in enumerate(surface.w_values):
        ax = axes[0][iw]
        pcm = ax.pcolormesh(
            surface.u_grid,
            surface.frequencies,
            surface.mean[iw].T,
            shading="auto",
            vmin=vmin,
            vmax=vmax,
            cmap="viridis",
        )
        ax.set_xlabel("time (rescaled)")
        ax.set_ylabel("frequency (cycles/sample)")
        ax.set_title(f"covariate = {wv:.3g}")
    fig.colorbar(pcm, ax=axes[0].tolist(), label="mean log spectrum")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_collapsed(cm: CollapsedMeasure, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.8))
    xs, means, lo_err, hi_err, labels = [], [], [], [], []
    i = 0
    for j in range(cm.m):
        for g in range(cm.p):
            xs.append(i)
            means.append(cm.mean[j, g])
            lo_err.append(cm.mean[j, g] - cm.lower[j, g])
            hi_err.append(cm.upper[j, g] - cm.mean[j, g])
            labels.append(f"t{j},w{g}")
            i += 1
    ax.errorbar(xs, means, yerr=[lo_err, hi_err], fmt="o", capsize=4, color="#4878b0")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels)
    ax.set_xlabel("block (time segment, covariate segment)")
    ax.set_ylabel("band power ratio")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
