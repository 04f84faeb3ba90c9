"""Time and covariate partitions, their priors, and cut relocation kernels.

Time partitions cut the index range 1..T at integer locations; segment j
covers observations (cut[j-1], cut[j]]. Covariate partitions cut at realized
(rescaled) covariate values; segment g holds subjects with w in
(cut[g-1], cut[g]]. Priors are sequential uniform over feasible cut
locations, so each conditional factor is one over a position count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class PartitionError(ValueError):
    """A partition violates its segment-size constraints."""


# ---------------------------------------------------------------------------
# time axis


@dataclass(frozen=True)
class TimePartition:
    """Integer cut locations within 1..n_times-1, strictly increasing."""

    n_times: int
    cuts: tuple[int, ...] = ()

    @property
    def m(self) -> int:
        return len(self.cuts) + 1

    def boundaries(self) -> tuple[int, ...]:
        return (0, *self.cuts, self.n_times)

    def segment_bounds(self) -> list[tuple[int, int]]:
        """Half-open (start, end] bounds of each segment as python slice pairs."""
        b = self.boundaries()
        return [(b[j], b[j + 1]) for j in range(self.m)]

    def segment_lengths(self) -> list[int]:
        b = self.boundaries()
        return [b[j + 1] - b[j] for j in range(self.m)]

    def segment_of(self, u: float) -> int:
        """Index of the segment containing scaled time u in [0, 1]."""
        scaled = np.asarray(self.cuts, dtype=float) / self.n_times
        return int(np.searchsorted(scaled, u, side="left"))

    def with_cut_moved(self, k: int, new_cut: int) -> "TimePartition":
        cuts = list(self.cuts)
        cuts[k] = new_cut
        return TimePartition(self.n_times, tuple(cuts))

    def with_cut_added(self, new_cut: int) -> "TimePartition":
        cuts = sorted(self.cuts + (new_cut,))
        return TimePartition(self.n_times, tuple(cuts))

    def with_cut_removed(self, k: int) -> "TimePartition":
        cuts = list(self.cuts)
        del cuts[k]
        return TimePartition(self.n_times, tuple(cuts))


def validate_time_partition(part: TimePartition, t_min: int) -> None:
    cuts = part.cuts
    if any(cuts[i] >= cuts[i + 1] for i in range(len(cuts) - 1)):
        raise PartitionError(f"cuts not strictly increasing: {cuts}")
    if cuts and (cuts[0] < 1 or cuts[-1] > part.n_times - 1):
        raise PartitionError(f"cuts out of range 1..{part.n_times - 1}: {cuts}")
    for j, length in enumerate(part.segment_lengths()):
        if length < t_min:
            raise PartitionError(f"time segment {j + 1} has {length} < t_min={t_min} observations")


def splittable_time_segments(part: TimePartition, t_min: int) -> list[int]:
    """Segments long enough to be split into two segments of >= t_min each."""
    return [j for j, length in enumerate(part.segment_lengths()) if length >= 2 * t_min]


def log_prior_m(m: int, max_segments: int) -> float:
    """Uniform prior over 1..max_segments segment counts."""
    if not 1 <= m <= max_segments:
        return -math.inf
    return -math.log(max_segments)


def time_position_count(n_times: int, prev_cut: int, j: int, m: int, t_min: int) -> int:
    """Number of feasible locations for cut j given cut j-1, leaving room for
    t_min observations in every remaining segment."""
    return n_times - (m - j) * t_min - prev_cut - t_min + 1


def log_prior_time_partition(part: TimePartition, t_min: int) -> float:
    """Log of prod_j 1/p_j, the sequential-uniform prior of the cut locations."""
    validate_time_partition(part, t_min)
    m = part.m
    total = 0.0
    prev = 0
    for j, cut in enumerate(part.cuts, start=1):
        count = time_position_count(part.n_times, prev, j, m, t_min)
        if count < 1 or not (prev + t_min <= cut <= part.n_times - (m - j) * t_min):
            raise PartitionError(f"cut {cut} infeasible at position {j} of {m}")
        total -= math.log(count)
        prev = cut
    return total


# ---------------------------------------------------------------------------
# covariate axis


@dataclass(frozen=True)
class CovariatePartition:
    """Cut values drawn from the realized distinct covariate values, increasing."""

    cuts: tuple[float, ...] = ()

    @property
    def p(self) -> int:
        return len(self.cuts) + 1

    def segment_of(self, w: float) -> int:
        """Index of the segment containing covariate value w (w <= cut goes left)."""
        return int(np.searchsorted(np.asarray(self.cuts), w, side="left"))

    def with_cut_moved(self, k: int, new_cut: float) -> "CovariatePartition":
        cuts = list(self.cuts)
        cuts[k] = new_cut
        return CovariatePartition(tuple(sorted(cuts)))

    def with_cut_added(self, new_cut: float) -> "CovariatePartition":
        return CovariatePartition(tuple(sorted(self.cuts + (new_cut,))))

    def with_cut_removed(self, k: int) -> "CovariatePartition":
        cuts = list(self.cuts)
        del cuts[k]
        return CovariatePartition(tuple(cuts))


def segment_value_counts(part: CovariatePartition, distinct_values: np.ndarray) -> list[int]:
    """Number of distinct covariate values falling in each segment."""
    edges = np.searchsorted(distinct_values, np.asarray(part.cuts), side="right")
    edges = np.concatenate(([0], edges, [distinct_values.size]))
    return [int(edges[g + 1] - edges[g]) for g in range(part.p)]


def subjects_in_segment(part: CovariatePartition, covariates: np.ndarray, g: int) -> np.ndarray:
    """Indices of subjects whose covariate lies in segment g."""
    lo = -np.inf if g == 0 else part.cuts[g - 1]
    hi = np.inf if g == part.p - 1 else part.cuts[g]
    return np.flatnonzero((covariates > lo) & (covariates <= hi))


def validate_covariate_partition(
    part: CovariatePartition, distinct_values: np.ndarray, w_min: int
) -> None:
    cuts = part.cuts
    if any(cuts[i] >= cuts[i + 1] for i in range(len(cuts) - 1)):
        raise PartitionError(f"covariate cuts not strictly increasing: {cuts}")
    realized = set(np.asarray(distinct_values).tolist())
    for c in cuts:
        if c not in realized:
            raise PartitionError(f"covariate cut {c} is not a realized value")
    if cuts and cuts[-1] >= distinct_values[-1]:
        raise PartitionError("last covariate cut leaves an empty final segment")
    for g, count in enumerate(segment_value_counts(part, distinct_values)):
        if count < w_min:
            raise PartitionError(
                f"covariate segment {g + 1} holds {count} < w_min={w_min} distinct values"
            )


def splittable_cov_segments(
    part: CovariatePartition, distinct_values: np.ndarray, w_min: int
) -> list[int]:
    counts = segment_value_counts(part, distinct_values)
    return [g for g, r in enumerate(counts) if r >= 2 * w_min]


def cov_position_count(n_values_above: int, g: int, p: int, w_min: int) -> int:
    """Feasible cut values for covariate cut g given the count of distinct values
    above the previous cut; every later segment keeps >= w_min values.

    With w_min = 1 this reduces to (values above) - (p - g).
    """
    return n_values_above - (p - g) * w_min - (w_min - 1)


def log_prior_covariate_partition(
    part: CovariatePartition, distinct_values: np.ndarray, w_min: int
) -> float:
    """Log sequential-uniform prior of the covariate cut values."""
    distinct_values = np.asarray(distinct_values, dtype=float)
    validate_covariate_partition(part, distinct_values, w_min)
    p = part.p
    total = 0.0
    above = distinct_values.size
    for g, cut in enumerate(part.cuts, start=1):
        count = cov_position_count(above, g, p, w_min)
        if count < 1:
            raise PartitionError(f"no feasible location for covariate cut {g} of {p}")
        total -= math.log(count)
        above = int(np.sum(distinct_values > cut))
    return total


# ---------------------------------------------------------------------------
# within-model relocation kernels
#
# A relocated cut is proposed from the mixture pi*q1 + (1-pi)*q2 where q1 is
# uniform over every feasible location between the neighbouring cuts and q2
# is uniform over the feasible one-step moves {down, stay, up}. Both the
# forward and the reverse mixture densities are returned; the reverse q2
# support is evaluated at the proposed configuration.


def _one_step_support(center: int, lo: int, hi: int) -> list[int]:
    return [t for t in (center - 1, center, center + 1) if lo <= t <= hi]


def relocation_kernel_time(
    part: TimePartition, k: int, t_min: int, pi_mix: float, rng: np.random.Generator
) -> tuple[int, float, float]:
    """Propose a new location for time cut k.

    Returns (proposed cut, log forward density, log reverse density).
    """
    b = part.boundaries()
    left, cur, right = b[k], b[k + 1], b[k + 2]
    lo, hi = left + t_min, right - t_min
    if not lo <= cur <= hi:
        raise PartitionError(f"cut {cur} outside feasible range [{lo}, {hi}]")
    n1 = hi - lo + 1
    if rng.random() < pi_mix:
        prop = int(rng.integers(lo, hi + 1))
    else:
        support = _one_step_support(cur, lo, hi)
        prop = int(support[rng.integers(len(support))])
    fwd_sup = _one_step_support(cur, lo, hi)
    rev_sup = _one_step_support(prop, lo, hi)
    q2_fwd = (1.0 / len(fwd_sup)) if prop in fwd_sup else 0.0
    q2_rev = (1.0 / len(rev_sup)) if cur in rev_sup else 0.0
    log_fwd = math.log(pi_mix / n1 + (1.0 - pi_mix) * q2_fwd)
    log_rev = math.log(pi_mix / n1 + (1.0 - pi_mix) * q2_rev)
    return prop, log_fwd, log_rev


def pair_positions_count(left: int, right: int, t_min: int) -> int:
    """Number of ordered pairs (a, b) of cut locations inside (left, right)
    with every resulting stretch (left,a], (a,b], (b,right] at least t_min long."""
    n = right - left - 3 * t_min + 1
    return n * (n + 1) // 2 if n > 0 else 0


def sample_pair_positions(
    left: int, right: int, t_min: int, rng: np.random.Generator
) -> tuple[int, int] | None:
    """Uniform draw over the pairs counted by pair_positions_count, or None
    when no pair is feasible.

    Both cuts move jointly inside fixed outer boundaries, so the proposal set
    is identical in the forward and the reverse direction and the densities
    cancel in a Metropolis ratio. Sampling is by rejection from the bounding
    box (acceptance is about one half), which keeps the draw exactly uniform.
    """
    if pair_positions_count(left, right, t_min) < 1:
        return None
    lo_a, hi_a = left + t_min, right - 2 * t_min
    lo_b, hi_b = left + 2 * t_min, right - t_min
    for _ in range(1000):
        a = int(rng.integers(lo_a, hi_a + 1))
        b = int(rng.integers(lo_b, hi_b + 1))
        if b - a >= t_min:
            return a, b
    return None


def relocation_kernel_covariate(
    part: CovariatePartition,
    distinct_values: np.ndarray,
    k: int,
    w_min: int,
    pi_mix: float,
    rng: np.random.Generator,
) -> tuple[float, float, float]:
    """Propose a new value for covariate cut k on the lattice of distinct values.

    Returns (proposed cut value, log forward density, log reverse density).
    """
    distinct_values = np.asarray(distinct_values, dtype=float)
    left = -np.inf if k == 0 else part.cuts[k - 1]
    right = np.inf if k == part.p - 2 else part.cuts[k + 1]
    # candidate lattice: distinct values in (left, right], positions are indices
    window = distinct_values[(distinct_values > left) & (distinct_values <= right)]
    big = window.size
    lo, hi = w_min - 1, big - 1 - w_min  # 0-based feasible index range
    cur_idx = int(np.searchsorted(window, part.cuts[k]))
    if not lo <= cur_idx <= hi:
        raise PartitionError(f"covariate cut index {cur_idx} outside [{lo}, {hi}]")
    n1 = hi - lo + 1
    if rng.random() < pi_mix:
        prop_idx = int(rng.integers(lo, hi + 1))
    else:
        support = _one_step_support(cur_idx, lo, hi)
        prop_idx = int(support[rng.integers(len(support))])
    fwd_sup = _one_step_support(cur_idx, lo, hi)
    rev_sup = _one_step_support(prop_idx, lo, hi)
    q2_fwd = (1.0 / len(fwd_sup)) if prop_idx in fwd_sup else 0.0
    q2_rev = (1.0 / len(rev_sup)) if cur_idx in rev_sup else 0.0
    log_fwd = math.log(pi_mix / n1 + (1.0 - pi_mix) * q2_fwd)
    log_rev = math.log(pi_mix / n1 + (1.0 - pi_mix) * q2_rev)
    return float(window[prop_idx]), log_fwd, log_rev
