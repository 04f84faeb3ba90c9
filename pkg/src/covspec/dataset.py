"""Ingestion and validation of replicated time series with a scalar covariate."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

DEFAULT_T_MIN = 40


class DataError(ValueError):
    """Input data violates the expected format or shape."""


@dataclass(frozen=True)
class TimeSeriesSet:
    """L replicated series of common length T, one scalar covariate per subject.

    Covariates are min-max rescaled to [0, 1]; the original values are kept in
    ``raw_covariates``. Arrays are read-only after construction.
    """

    series: np.ndarray          # shape (L, T)
    covariates: np.ndarray      # shape (L,), rescaled to [0, 1]
    raw_covariates: np.ndarray  # shape (L,)
    subject_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        for arr in (self.series, self.covariates, self.raw_covariates):
            arr.setflags(write=False)

    @property
    def n_subjects(self) -> int:
        return self.series.shape[0]

    @property
    def n_times(self) -> int:
        return self.series.shape[1]

    def distinct_covariates(self) -> np.ndarray:
        """Sorted unique rescaled covariate values."""
        return np.unique(self.covariates)


def rescale_covariates(raw: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; ties share a value, order is preserved."""
    lo, hi = float(np.min(raw)), float(np.max(raw))
    if hi == lo:
        raise DataError("all covariate values are identical; cannot rescale")
    return (raw - lo) / (hi - lo)


def make_dataset(
    series,
    raw_covariates,
    subject_ids: tuple[str, ...] | None = None,
    t_min: int = DEFAULT_T_MIN,
) -> TimeSeriesSet:
    """Validate raw arrays and build a TimeSeriesSet.

    Raises DataError on ragged/short series, subject-count mismatch,
    non-finite values, or a degenerate covariate.
    """
    series = np.asarray(series, dtype=float)
    raw = np.asarray(raw_covariates, dtype=float)
    if series.ndim != 2:
        raise DataError(f"series must be 2-d (subjects x time), got ndim={series.ndim}")
    L, T = series.shape
    if L < 2:
        raise DataError(f"need at least 2 subjects, got L={L}")
    if raw.shape != (L,):
        raise DataError(
            f"covariate count {raw.shape[0] if raw.ndim == 1 else raw.shape} "
            f"does not match subject count L={L}"
        )
    if T < 2 * t_min:
        raise DataError(f"series length T={T} is below 2*t_min={2 * t_min}")
    if not np.all(np.isfinite(series)):
        raise DataError("series contain non-finite values")
    if not np.all(np.isfinite(raw)):
        raise DataError("covariates contain non-finite values")
    if subject_ids is None:
        subject_ids = tuple(str(i) for i in range(1, L + 1))
    if len(subject_ids) != L:
        raise DataError(f"got {len(subject_ids)} subject ids for L={L} subjects")
    return TimeSeriesSet(
        series=series.copy(),
        covariates=rescale_covariates(raw),
        raw_covariates=raw.copy(),
        subject_ids=tuple(subject_ids),
    )


def _parse_numeric_rows(path: str, what: str) -> list[list[float]]:
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",") if "," in line else line.split()
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise DataError(f"{what} line {lineno}: non-numeric field ({exc})") from None
    if not rows:
        raise DataError(f"{what}: no data rows found in {path}")
    return rows


def load_dataset(series_path: str, covariate_path: str, t_min: int = DEFAULT_T_MIN) -> TimeSeriesSet:
    """Load series (one subject per row) and covariates (one value per subject).

    Both files are delimited text (comma or whitespace); '#' lines are comments.
    """
    series_rows = _parse_numeric_rows(series_path, "series")
    lengths = {len(r) for r in series_rows}
    if len(lengths) != 1:
        raise DataError(f"series rows have unequal lengths: {sorted(lengths)}")
    cov_rows = _parse_numeric_rows(covariate_path, "covariates")
    cov = [v for row in cov_rows for v in row]
    if len(cov) != len(series_rows):
        raise DataError(
            f"covariate count {len(cov)} does not match subject count L={len(series_rows)}"
        )
    return make_dataset(np.array(series_rows), np.array(cov), t_min=t_min)


def save_dataset(data: TimeSeriesSet, series_path: str, covariate_path: str) -> None:
    """Write the series and raw covariates as delimited text (17 significant digits)."""
    for path, rows in ((series_path, data.series), (covariate_path, data.raw_covariates[:, None])):
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        os.replace(tmp, path)


def demean(segment: np.ndarray) -> np.ndarray:
    """Subtract the sample mean from a 1-d segment."""
    segment = np.asarray(segment, dtype=float)
    if segment.size == 0:
        raise DataError("cannot demean an empty segment")
    return segment - segment.mean()
