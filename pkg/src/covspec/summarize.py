"""Posterior summaries of a sampled chain.

All functions take plain record lists (burn-in already dropped unless stated)
so callers can pool several chains. Surfaces are model-averaged: each record
contributes the spectrum of whichever block covers a given (time, covariate)
cell. Quantile bands are equal-tailed. Surface evaluation works one time-grid
row at a time, keeping peak memory at one (n_records, n_frequencies) panel
per covariate value.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .basis import log_spectrum_eval
from .partition import CovariatePartition, TimePartition


def drop_burn_in(records: list, burn_in: int) -> list:
    """Keep records with iteration > burn_in (the initial state counts as 0)."""
    return [r for r in records if r.iteration > burn_in]


def filter_records(records: list, m: int | None = None, p: int | None = None) -> list:
    out = records
    if m is not None:
        out = [r for r in out if r.m == m]
    if p is not None:
        out = [r for r in out if r.p == p]
    return out


@dataclass(frozen=True)
class ModelPosterior:
    joint: dict  # (m, p) -> probability
    m_marginal: dict
    p_marginal: dict
    modal_m: int
    modal_p: int
    n_records: int

    def prob_m(self, m: int) -> float:
        return self.m_marginal.get(m, 0.0)

    def prob_p(self, p: int) -> float:
        return self.p_marginal.get(p, 0.0)

    def prob_m_at_least(self, m: int) -> float:
        return sum(v for k, v in self.m_marginal.items() if k >= m)


def model_posterior(records: list) -> ModelPosterior:
    if not records:
        raise ValueError("no records to summarize")
    n = len(records)
    joint = Counter((r.m, r.p) for r in records)
    ms = Counter(r.m for r in records)
    ps = Counter(r.p for r in records)
    # ties broken toward the smaller model
    modal_m = min(ms, key=lambda k: (-ms[k], k))
    modal_p = min(ps, key=lambda k: (-ps[k], k))
    return ModelPosterior(
        joint={k: v / n for k, v in sorted(joint.items())},
        m_marginal={k: v / n for k, v in sorted(ms.items())},
        p_marginal={k: v / n for k, v in sorted(ps.items())},
        modal_m=modal_m,
        modal_p=modal_p,
        n_records=n,
    )


def time_cut_samples(records: list, m: int) -> list[np.ndarray]:
    """Per cut index, the sampled cut positions among records with m segments."""
    matching = [r for r in records if r.m == m]
    if m < 2:
        return []
    return [
        np.array([r.time_cuts[k] for r in matching], dtype=int) for k in range(m - 1)
    ]


def cov_cut_samples(records: list, p: int) -> list[np.ndarray]:
    matching = [r for r in records if r.p == p]
    if p < 2:
        return []
    return [
        np.array([r.cov_cuts[k] for r in matching], dtype=float) for k in range(p - 1)
    ]


def modal_cov_cut(records: list, p: int, k: int = 0) -> float:
    """Most frequent value of covariate cut k among records with p segments."""
    samples = cov_cut_samples(records, p)[k]
    if samples.size == 0:
        raise ValueError(f"no records with p={p}")
    counts = Counter(samples.tolist())
    return max(sorted(counts), key=lambda v: counts[v])


# ---------------------------------------------------------------------------
# spectrum surfaces


@dataclass(frozen=True)
class SurfaceSummary:
    w_values: np.ndarray
    u_grid: np.ndarray
    frequencies: np.ndarray
    mean: np.ndarray  # (n_w, n_u, n_freq) posterior mean log spectrum
    lower: np.ndarray
    upper: np.ndarray
    n_records: int


def _block_lookup(rec, u: float, w: float):
    j = TimePartition(rec.n_times, rec.time_cuts).segment_of(u)
    g = CovariatePartition(rec.cov_cuts).segment_of(w)
    return rec.params[j][g]


def spectrum_surface(
    records: list,
    w_values,
    u_grid=None,
    frequencies=None,
    quantiles: tuple[float, float] = (0.025, 0.975),
) -> SurfaceSummary:
    """Pointwise posterior mean and equal-tailed band of the log spectrum."""
    if not records:
        raise ValueError("no records to summarize")
    w_values = np.atleast_1d(np.asarray(w_values, dtype=float))
    if u_grid is None:
        u_grid = (np.arange(25) + 0.5) / 25
    u_grid = np.asarray(u_grid, dtype=float)
    if frequencies is None:
        frequencies = np.linspace(0.0, 0.5, 101)
    frequencies = np.asarray(frequencies, dtype=float)

    n_basis = records[0].params[0][0].beta.size
    basis = np.cos(
        2.0 * np.pi * np.outer(frequencies, np.arange(1, n_basis + 1))
    )  # (n_freq, B)
    n_w, n_u, n_f = w_values.size, u_grid.size, frequencies.size
    mean = np.empty((n_w, n_u, n_f))
    lower = np.empty((n_w, n_u, n_f))
    upper = np.empty((n_w, n_u, n_f))
    panel = np.empty((len(records), n_f))
    for iu, u in enumerate(u_grid):
        for iw, w in enumerate(w_values):
            for ir, rec in enumerate(records):
                bp = _block_lookup(rec, float(u), float(w))
                panel[ir] = bp.alpha + basis @ bp.beta
            mean[iw, iu] = panel.mean(axis=0)
            lo, hi = np.quantile(panel, quantiles, axis=0)
            lower[iw, iu] = lo
            upper[iw, iu] = hi
    return SurfaceSummary(
        w_values=w_values,
        u_grid=u_grid,
        frequencies=frequencies,
        mean=mean,
        lower=lower,
        upper=upper,
        n_records=len(records),
    )


def integrated_squared_error(surface: SurfaceSummary, true_log_spectrum) -> np.ndarray:
    """Frequency-integrated squared error of the posterior mean log spectrum.

    true_log_spectrum(u, w, frequencies) must return the reference curve.
    Returns an (n_w, n_u) array of integrals over frequency.
    """
    out = np.empty((surface.w_values.size, surface.u_grid.size))
    for iw, w in enumerate(surface.w_values):
        for iu, u in enumerate(surface.u_grid):
            truth = true_log_spectrum(float(u), float(w), surface.frequencies)
            err = surface.mean[iw, iu] - np.asarray(truth, dtype=float)
            out[iw, iu] = np.trapezoid(err**2, surface.frequencies)
    return out


# ---------------------------------------------------------------------------
# collapsed band-power measure


def band_power_ratio(
    alpha: float,
    beta: np.ndarray,
    band: tuple[float, float] = (0.15, 0.40),
    norm_band: tuple[float, float] = (0.04, 0.40),
    sampling_rate: float = 1.0,
    n_points: int = 512,
) -> float:
    """Spectral power in `band` relative to `norm_band` (bands in Hz)."""
    if sampling_rate <= 0:
        raise ValueError("sampling_rate must be positive")
    spans = []
    for name, (lo, hi) in (("band", band), ("norm_band", norm_band)):
        lo_c, hi_c = lo / sampling_rate, hi / sampling_rate
        if not 0.0 <= lo_c < hi_c <= 0.5:
            raise ValueError(
                f"{name} ({lo}, {hi}) Hz maps to ({lo_c}, {hi_c}) cycles/sample, "
                "outside [0, 0.5]"
            )
        spans.append((lo_c, hi_c))
    out = []
    for lo_c, hi_c in spans:
        grid = np.linspace(lo_c, hi_c, n_points)
        f = np.exp(log_spectrum_eval(alpha, np.asarray(beta, dtype=float), grid))
        out.append(float(np.trapezoid(f, grid)))
    return out[0] / out[1]


@dataclass(frozen=True)
class CollapsedMeasure:
    m: int
    p: int
    mean: np.ndarray  # (m, p)
    lower: np.ndarray
    upper: np.ndarray
    n_records: int


def collapsed_measure(
    records: list,
    band: tuple[float, float] = (0.15, 0.40),
    norm_band: tuple[float, float] = (0.04, 0.40),
    sampling_rate: float = 1.0,
    quantiles: tuple[float, float] = (0.025, 0.975),
    n_points: int = 512,
) -> CollapsedMeasure:
    """Posterior band-power ratio per block, conditional on the modal (m, p)."""
    mp = model_posterior(records)
    joint_modal = max(sorted(mp.joint), key=lambda k: mp.joint[k])
    m, p = joint_modal
    matching = filter_records(records, m=m, p=p)
    samples = np.empty((len(matching), m, p))
    for ir, rec in enumerate(matching):
        for j in range(m):
            for g in range(p):
                bp = rec.params[j][g]
                samples[ir, j, g] = band_power_ratio(
                    bp.alpha, bp.beta, band, norm_band, sampling_rate, n_points
                )
    lo, hi = np.quantile(samples, quantiles, axis=0)
    return CollapsedMeasure(
        m=m,
        p=p,
        mean=samples.mean(axis=0),
        lower=lo,
        upper=hi,
        n_records=len(matching),
    )


# ---------------------------------------------------------------------------
# delimited output


def write_model_posterior_csv(path: str, mp: ModelPosterior) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n_time_segments", "n_cov_segments", "probability"])
        for (m, p), prob in mp.joint.items():
            w.writerow([m, p, f"{prob:.10g}"])


def write_time_cuts_csv(path: str, records: list, m: int, n_times: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cut_index", "mean", "sd", "scaled_mean", "n_samples"])
        for k, samples in enumerate(time_cut_samples(records, m)):
            if samples.size:
                w.writerow(
                    [
                        k,
                        f"{samples.mean():.10g}",
                        f"{samples.std():.10g}",
                        f"{samples.mean() / n_times:.10g}",
                        samples.size,
                    ]
                )


def write_cov_cuts_csv(path: str, records: list, p: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cut_index", "value", "count", "frequency"])
        for k, samples in enumerate(cov_cut_samples(records, p)):
            counts = Counter(samples.tolist())
            total = samples.size
            for value in sorted(counts):
                w.writerow([k, f"{value:.10g}", counts[value], f"{counts[value] / total:.10g}"])


def write_surface_csv(path: str, surface: SurfaceSummary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["covariate", "time", "frequency", "mean_log_spectrum", "lower", "upper"])
        for iw, wv in enumerate(surface.w_values):
            for iu, u in enumerate(surface.u_grid):
                for k, nu in enumerate(surface.frequencies):
                    w.writerow(
                        [
                            f"{wv:.10g}",
                            f"{u:.10g}",
                            f"{nu:.10g}",
                            f"{surface.mean[iw, iu, k]:.10g}",
                            f"{surface.lower[iw, iu, k]:.10g}",
                            f"{surface.upper[iw, iu, k]:.10g}",
                        ]
                    )


def write_collapsed_csv(path: str, cm: CollapsedMeasure) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time_segment", "cov_segment", "mean", "lower", "upper", "n_samples"])
        for j in range(cm.m):
            for g in range(cm.p):
                w.writerow(
                    [
                        j,
                        g,
                        f"{cm.mean[j, g]:.10g}",
                        f"{cm.lower[j, g]:.10g}",
                        f"{cm.upper[j, g]:.10g}",
                        cm.n_records,
                    ]
                )
