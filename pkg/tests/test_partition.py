"""Partition priors (with exhaustive normalization oracles) and relocation kernels."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covspec.partition import (
    CovariatePartition,
    PartitionError,
    TimePartition,
    cov_position_count,
    log_prior_covariate_partition,
    log_prior_m,
    log_prior_time_partition,
    pair_positions_count,
    relocation_kernel_covariate,
    relocation_kernel_time,
    sample_pair_positions,
    segment_value_counts,
    splittable_cov_segments,
    splittable_time_segments,
    subjects_in_segment,
    validate_covariate_partition,
    validate_time_partition,
)


def enumerate_time_partitions(T, t_min, m):
    """All strictly increasing cut tuples whose segments each hold >= t_min points."""
    if m == 1:
        yield ()
        return
    for cuts in itertools.combinations(range(1, T), m - 1):
        bounds = (0, *cuts, T)
        if all(bounds[i + 1] - bounds[i] >= t_min for i in range(m)):
            yield cuts


def enumerate_cov_partitions(values, w_min, p):
    """All increasing cut-value tuples leaving >= w_min distinct values per segment."""
    values = list(values)
    if p == 1:
        yield ()
        return
    for cut_idx in itertools.combinations(range(len(values)), p - 1):
        counts = []
        prev = -1
        for i in cut_idx:
            counts.append(i - prev)
            prev = i
        counts.append(len(values) - 1 - prev)
        if all(c >= w_min for c in counts):
            yield tuple(values[i] for i in cut_idx)


# ---------------------------------------------------------------------------
# structure


def test_segment_bounds_and_lengths():
    part = TimePartition(100, (40, 70))
    assert part.m == 3
    assert part.segment_bounds() == [(0, 40), (40, 70), (70, 100)]
    assert part.segment_lengths() == [40, 30, 30]


def test_segment_of_scaled_time():
    part = TimePartition(1000, (500,))
    assert part.segment_of(0.0) == 0
    assert part.segment_of(0.5) == 0  # boundary point belongs to the left segment
    assert part.segment_of(0.5001) == 1
    assert part.segment_of(1.0) == 1


def test_validate_time_partition():
    validate_time_partition(TimePartition(100, (40,)), t_min=40)
    with pytest.raises(PartitionError):
        validate_time_partition(TimePartition(100, (39,)), t_min=40)
    with pytest.raises(PartitionError):
        validate_time_partition(TimePartition(100, (50, 50)), t_min=10)
    with pytest.raises(PartitionError):
        validate_time_partition(TimePartition(100, (61,)), t_min=40)


def test_splittable_time_segments():
    part = TimePartition(200, (80,))
    assert splittable_time_segments(part, t_min=40) == [0, 1]
    assert splittable_time_segments(part, t_min=41) == [1]
    assert splittable_time_segments(part, t_min=61) == []


def test_covariate_segment_of():
    part = CovariatePartition((0.4,))
    assert part.segment_of(0.0) == 0
    assert part.segment_of(0.4) == 0  # value equal to the cut stays left
    assert part.segment_of(0.41) == 1


def test_segment_value_counts_and_subjects():
    values = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    part = CovariatePartition((0.4,))
    assert segment_value_counts(part, values) == [3, 3]
    cov = np.array([0.0, 0.4, 0.6, 1.0, 0.2])
    assert list(subjects_in_segment(part, cov, 0)) == [0, 1, 4]
    assert list(subjects_in_segment(part, cov, 1)) == [2, 3]


def test_validate_covariate_partition():
    values = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    validate_covariate_partition(CovariatePartition((0.5,)), values, w_min=2)
    with pytest.raises(PartitionError):
        validate_covariate_partition(CovariatePartition((0.0,)), values, w_min=2)
    with pytest.raises(PartitionError):  # not a realized value
        validate_covariate_partition(CovariatePartition((0.3,)), values, w_min=1)
    with pytest.raises(PartitionError):  # empty final segment
        validate_covariate_partition(CovariatePartition((1.0,)), values, w_min=1)


def test_splittable_cov_segments():
    values = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    part = CovariatePartition((0.4,))
    assert splittable_cov_segments(part, values, w_min=1) == [0, 1]
    assert splittable_cov_segments(part, values, w_min=2) == []


# ---------------------------------------------------------------------------
# priors


def test_log_prior_m_uniform():
    assert log_prior_m(3, 10) == pytest.approx(-math.log(10))
    assert log_prior_m(11, 10) == -math.inf
    assert log_prior_m(0, 10) == -math.inf


def test_time_prior_single_cut_count():
    """T=100, t_min=40, m=2: the cut can sit at 40..60, so 21 positions."""
    got = log_prior_time_partition(TimePartition(100, (50,)), t_min=40)
    assert got == pytest.approx(-math.log(21))


def test_time_prior_m1_zero():
    assert log_prior_time_partition(TimePartition(500, ()), t_min=40) == 0.0


def test_time_prior_normalizes_small_cases():
    """Sequential-uniform cut prior sums to one over every feasible partition."""
    for T in range(4, 61, 7):
        for t_min in (1, 2, 3, 5, 10):
            for m in (1, 2, 3):
                if T < m * t_min:
                    continue
                total = 0.0
                count = 0
                for cuts in enumerate_time_partitions(T, t_min, m):
                    total += math.exp(log_prior_time_partition(TimePartition(T, cuts), t_min))
                    count += 1
                if count:
                    assert total == pytest.approx(1.0, abs=1e-12), (T, t_min, m)


def test_cov_prior_example_count():
    """8 distinct values, p=2, w_min=1: 7 candidate cuts."""
    values = np.arange(8) / 7.0
    got = log_prior_covariate_partition(CovariatePartition((values[3],)), values, w_min=1)
    assert got == pytest.approx(-math.log(7))


def test_cov_prior_wmin_count():
    assert cov_position_count(8, 1, 2, 1) == 7
    assert cov_position_count(8, 1, 2, 2) == 5
    assert cov_position_count(8, 1, 3, 2) == 3


def test_cov_prior_normalizes_small_cases():
    for n_values in range(2, 9):
        values = np.linspace(0.0, 1.0, n_values)
        for w_min in (1, 2, 3):
            for p in (1, 2, 3):
                if n_values < p * w_min:
                    continue
                total = 0.0
                count = 0
                for cuts in enumerate_cov_partitions(values, w_min, p):
                    part = CovariatePartition(cuts)
                    total += math.exp(log_prior_covariate_partition(part, values, w_min))
                    count += 1
                if count:
                    assert total == pytest.approx(1.0, abs=1e-12), (n_values, w_min, p)


def test_infeasible_partition_raises():
    with pytest.raises(PartitionError):
        log_prior_time_partition(TimePartition(100, (39,)), t_min=40)
    values = np.linspace(0, 1, 4)
    with pytest.raises(PartitionError):
        log_prior_covariate_partition(CovariatePartition((values[0],)), values, w_min=2)


# ---------------------------------------------------------------------------
# relocation kernels


def test_time_kernel_stay_put_when_pinned():
    """Both neighbouring segments at t_min: the only draw is the current cut."""
    part = TimePartition(80, (40,))
    prop, fwd, rev = relocation_kernel_time(part, 0, t_min=40, pi_mix=0.2, rng=np.random.default_rng(0))
    assert prop == 40
    assert fwd == pytest.approx(0.0)
    assert rev == pytest.approx(0.0)


def test_time_kernel_support_and_density():
    part = TimePartition(100, (50,))
    t_min = 40
    rng = np.random.default_rng(1)
    seen = set()
    for _ in range(500):
        prop, fwd, rev = relocation_kernel_time(part, 0, t_min, 0.5, rng)
        assert 40 <= prop <= 60
        seen.add(prop)
        # interior cut, wide segments: one-step support has 3 points both ways
        if abs(prop - 50) <= 1 and 41 <= prop <= 59:
            want_fwd = 0.5 / 21 + 0.5 / 3
            assert math.exp(fwd) == pytest.approx(want_fwd)
    assert len(seen) > 10


def test_time_kernel_one_sided_density():
    """Right segment at t_min: one-step support drops the rightward move."""
    part = TimePartition(100, (60,))
    t_min = 40
    rng = np.random.default_rng(2)
    for _ in range(200):
        prop, fwd, _ = relocation_kernel_time(part, 0, t_min, 0.3, rng)
        assert 40 <= prop <= 60
        if prop == 60:
            assert math.exp(fwd) == pytest.approx(0.3 / 21 + 0.7 / 2)
        if prop == 59:
            assert math.exp(fwd) == pytest.approx(0.3 / 21 + 0.7 / 2)
        if prop < 59:
            assert math.exp(fwd) == pytest.approx(0.3 / 21)


def test_time_kernel_reverse_density_consistent():
    """Reverse density equals the forward density of the mirror proposal."""
    part = TimePartition(300, (100,))
    rng = np.random.default_rng(3)
    for _ in range(200):
        prop, fwd, rev = relocation_kernel_time(part, 0, 40, 0.2, rng)
        if prop == part.cuts[0]:
            assert fwd == pytest.approx(rev)
        moved = part.with_cut_moved(0, prop)
        back_sup_fwd = relocation_kernel_time(moved, 0, 40, 0.2, np.random.default_rng(9))
        # evaluating the kernel from the proposed state must reproduce rev for
        # the path back to the original cut; check via density formula
        lo, hi = 40, 260
        n1 = hi - lo + 1
        sup = [t for t in (prop - 1, prop, prop + 1) if lo <= t <= hi]
        q2 = (1 / len(sup)) if part.cuts[0] in sup else 0.0
        assert math.exp(rev) == pytest.approx(0.2 / n1 + 0.8 * q2)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_time_kernel_never_violates_t_min(data):
    T = data.draw(st.integers(min_value=30, max_value=200))
    t_min = data.draw(st.integers(min_value=5, max_value=max(5, T // 4)))
    # build a random feasible 3-segment partition when possible
    if T < 3 * t_min:
        return
    c1 = data.draw(st.integers(min_value=t_min, max_value=T - 2 * t_min))
    c2 = data.draw(st.integers(min_value=c1 + t_min, max_value=T - t_min))
    part = TimePartition(T, (c1, c2))
    k = data.draw(st.integers(min_value=0, max_value=1))
    seed = data.draw(st.integers(min_value=0, max_value=2**31))
    prop, _, _ = relocation_kernel_time(part, k, t_min, 0.2, np.random.default_rng(seed))
    moved = part.with_cut_moved(k, prop)
    validate_time_partition(moved, t_min)


def test_cov_kernel_support():
    values = np.arange(8) / 7.0
    part = CovariatePartition((values[3],))
    rng = np.random.default_rng(4)
    seen = set()
    for _ in range(400):
        prop, fwd, rev = relocation_kernel_covariate(part, values, 0, 2, 0.3, rng)
        idx = int(np.where(values == prop)[0][0])
        assert 1 <= idx <= 5  # leaves >= 2 values on each side
        seen.add(idx)
        moved = part.with_cut_moved(0, prop)
        validate_covariate_partition(moved, values, 2)
    assert seen == {1, 2, 3, 4, 5}


def test_cov_kernel_pinned_stays():
    values = np.linspace(0, 1, 4)
    part = CovariatePartition((values[1],))
    prop, fwd, rev = relocation_kernel_covariate(
        part, values, 0, 2, 0.5, np.random.default_rng(0)
    )
    assert prop == values[1]
    assert fwd == pytest.approx(0.0)
    assert rev == pytest.approx(0.0)


def test_cov_kernel_lattice_density():
    values = np.arange(10) / 9.0
    part = CovariatePartition((values[4],))
    rng = np.random.default_rng(5)
    n1 = 10 - 2 * 2 + 1  # r_union - 2 w_min + 1 candidate cut values
    for _ in range(300):
        prop, fwd, _ = relocation_kernel_covariate(part, values, 0, 2, 0.4, rng)
        idx = int(np.where(values == prop)[0][0])
        if abs(idx - 4) <= 1:
            assert math.exp(fwd) == pytest.approx(0.4 / n1 + 0.6 / 3)
        else:
            assert math.exp(fwd) == pytest.approx(0.4 / n1)


def test_cov_kernel_middle_cut_window():
    """With three segments the kernel only moves within the two adjacent ones."""
    values = np.arange(12) / 11.0
    part = CovariatePartition((values[3], values[7]))
    rng = np.random.default_rng(6)
    for _ in range(300):
        prop, _, _ = relocation_kernel_covariate(part, values, 1, 2, 0.5, rng)
        assert values[3] < prop <= values[10]
        moved = part.with_cut_moved(1, prop)
        validate_covariate_partition(moved, values, 2)


# ---------------------------------------------------------------------------
# joint two-cut relocation support


def brute_force_pairs(left, right, t_min):
    return [
        (a, b)
        for a in range(left + 1, right)
        for b in range(a + 1, right)
        if a - left >= t_min and b - a >= t_min and right - b >= t_min
    ]


@pytest.mark.parametrize(
    "left,right,t_min", [(0, 130, 40), (0, 120, 40), (100, 400, 50), (0, 119, 40)]
)
def test_pair_positions_count_matches_enumeration(left, right, t_min):
    assert pair_positions_count(left, right, t_min) == len(
        brute_force_pairs(left, right, t_min)
    )


def test_sample_pair_positions_uniform_over_valid_set():
    left, right, t_min = 0, 130, 40
    valid = set(brute_force_pairs(left, right, t_min))
    assert len(valid) == pair_positions_count(left, right, t_min) == 66
    rng = np.random.default_rng(12)
    counts = {}
    draws = 13_200  # 200 per pair on average
    for _ in range(draws):
        ab = sample_pair_positions(left, right, t_min, rng)
        assert ab in valid
        counts[ab] = counts.get(ab, 0) + 1
    assert set(counts) == valid
    # each pair within 5 sigma of the uniform expectation
    expect = draws / len(valid)
    sigma = math.sqrt(expect * (1 - 1 / len(valid)))
    for c in counts.values():
        assert abs(c - expect) < 5 * sigma


def test_sample_pair_positions_infeasible_returns_none():
    assert pair_positions_count(0, 119, 40) == 0
    assert sample_pair_positions(0, 119, 40, np.random.default_rng(0)) is None
