"""Fourier frequency grids and periodograms of (local) series segments.

Grids are folded: they carry every ordinate k/T for k = 0..floor(T/2) with
weight 1 on interior frequencies and weight 1/2 at 0 and (for even T) at
Nyquist.  The weighted ordinate count is then exactly T/2 for every segment
length, so likelihoods of different segmentations of the same series stay
comparable: no segmentation can gain or lose ordinates by moving cut points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataError, TimeSeriesSet, demean
from .partition import TimePartition

MIN_SEGMENT_LENGTH = 4


@dataclass(frozen=True)
class FourierGrid:
    """Folded Fourier frequencies k/T for k = 0..floor(T/2) with fold weights."""

    segment_length: int
    frequencies: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.frequencies.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.frequencies.size

    @property
    def weight_total(self) -> float:
        """Effective ordinate count: exactly segment_length / 2."""
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class Periodogram:
    grid: FourierGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values.setflags(write=False)


def fourier_grid(segment_length: int) -> FourierGrid:
    """Build the folded frequency grid for a segment of the given length."""
    if segment_length < MIN_SEGMENT_LENGTH:
        raise DataError(f"segment length {segment_length} < {MIN_SEGMENT_LENGTH}")
    half = segment_length // 2
    freqs = np.arange(0, half + 1, dtype=float) / segment_length
    weights = np.ones(half + 1)
    weights[0] = 0.5
    if segment_length % 2 == 0:
        weights[half] = 0.5
    return FourierGrid(segment_length=segment_length, frequencies=freqs, weights=weights)


def periodogram(segment: np.ndarray) -> Periodogram:
    """Periodogram Y(k/T) = |sum_t x_t exp(-2*pi*i*k*t/T)|^2 / T for k = 0..floor(T/2).

    Computed with an FFT; matches the direct defining sum to high relative
    accuracy for arbitrary segment lengths.  For a demeaned segment the k = 0
    ordinate vanishes, and the weighted sum satisfies Parseval exactly:
    (2/T) * sum_k w_k Y(k/T) equals the segment sample variance.
    """
    segment = np.asarray(segment, dtype=float)
    if not np.all(np.isfinite(segment)):
        raise DataError("segment contains non-finite values")
    grid = fourier_grid(segment.size)
    spec = np.fft.rfft(segment)
    values = (spec.real**2 + spec.imag**2) / segment.size
    return Periodogram(grid=grid, values=values)


def local_periodograms(data: TimeSeriesSet, part: TimePartition) -> list[list[Periodogram]]:
    """Per-segment, per-subject periodograms; each segment is demeaned per subject.

    Returns a list indexed [segment][subject]. All subjects in one segment share
    the same frequency grid.
    """
    out: list[list[Periodogram]] = []
    for start, end in part.segment_bounds():
        if end - start < MIN_SEGMENT_LENGTH:
            raise DataError(f"time segment ({start}, {end}] shorter than {MIN_SEGMENT_LENGTH}")
        out.append([periodogram(demean(row[start:end])) for row in data.series])
    return out
