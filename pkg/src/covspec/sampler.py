"""Reversible-jump sampler over time/covariate partitions and block spectra.

Each iteration applies four moves in a fixed order: time birth-death, time
cut relocation, covariate birth-death, covariate cut relocation. Births split
one segment, splitting the smoothing variance through an auxiliary uniform
draw, and propose new block coefficients from Laplace approximations of their
conditional posteriors; deaths mirror births exactly (geometric-mean variance
merge), so each acceptance ratio is the inverse of its opposite move.

Acceptance ratios carry the full posterior ratio (Whittle likelihood with
constants, partition priors, coefficient priors, smoothing-variance prior)
and the full proposal ratio in both directions (segment and position
selection, coefficient proposal densities, auxiliary-variable Jacobian, and,
switchably, the relocation kernel densities).

When both partition axes are fixed to a single segment, no partition move can
update the coefficients, so each iteration instead refreshes the lone block
with the stationary two-step sampler (joint coefficient proposal from the
Laplace approximation, then a Gibbs draw of the smoothing variance).
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .basis import build_basis, penalty_matrix
from .dataset import TimeSeriesSet, demean
from .partition import (
    CovariatePartition,
    TimePartition,
    log_prior_covariate_partition,
    log_prior_m,
    log_prior_time_partition,
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
from .periodogram import periodogram
from .whittle import (
    BlockData,
    BlockParams,
    LaplaceError,
    Tau2Prior,
    block_log_whittle,
    coef_log_prior,
    empty_block_data,
    gibbs_tau2,
    laplace_approx,
    log_conditional_posterior,
)

MOVE_NAMES = ("time_between", "time_within", "cov_between", "cov_within", "refresh")

U_EPS = 1e-12


class ConfigError(ValueError):
    """Invalid sampler configuration."""


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 10_000
    burn_in: int = 2_000
    t_min: int = 40
    w_min: int = 2
    max_time_segments: int = 10
    max_cov_segments: int = 10
    n_basis: int = 7
    sigma2_alpha: float = 100.0
    pi_mix_time: float = 0.2
    pi_mix_cov: float = 0.2
    pair_relocation_prob: float = 0.2
    seed: int = 0
    tau2_prior: Tau2Prior = Tau2Prior()
    include_relocation_density: bool = True
    prior_only: bool = False
    audit_every: int = 1000
    laplace_grad_tol: float = 1e-6
    laplace_max_iter: int = 100

    def validate(self) -> None:
        if self.iterations < 0:
            raise ConfigError(f"iterations={self.iterations} must be >= 0")
        if not 0 <= self.burn_in <= self.iterations:
            raise ConfigError(f"burn_in={self.burn_in} outside 0..iterations")
        if self.iterations > 0 and self.burn_in >= self.iterations:
            raise ConfigError("burn_in must be smaller than iterations")
        if self.t_min < 4:
            raise ConfigError(f"t_min={self.t_min} must be >= 4")
        if self.w_min < 1:
            raise ConfigError(f"w_min={self.w_min} must be >= 1")
        if self.max_time_segments < 1 or self.max_cov_segments < 1:
            raise ConfigError("segment limits must be >= 1")
        if self.n_basis < 3:
            raise ConfigError(f"n_basis={self.n_basis} must be >= 3")
        if self.sigma2_alpha <= 0:
            raise ConfigError("sigma2_alpha must be positive")
        for name in ("pi_mix_time", "pi_mix_cov"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name}={v} outside (0, 1]")
        if not 0.0 <= self.pair_relocation_prob < 1.0:
            raise ConfigError(
                f"pair_relocation_prob={self.pair_relocation_prob} outside [0, 1)"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.audit_every < 1:
            raise ConfigError("audit_every must be >= 1")


@dataclass(frozen=True)
class ChainRecord:
    """Snapshot of the sampler state after one iteration."""

    iteration: int
    n_times: int
    time_cuts: tuple[int, ...]
    cov_cuts: tuple[float, ...]
    params: tuple[tuple[BlockParams, ...], ...]  # [time segment][cov segment]
    loglik: tuple[tuple[float, ...], ...]

    @property
    def m(self) -> int:
        return len(self.time_cuts) + 1

    @property
    def p(self) -> int:
        return len(self.cov_cuts) + 1


@dataclass
class _State:
    time_part: TimePartition
    cov_part: CovariatePartition
    params: list[list[BlockParams]]
    loglik: list[list[float]]

    @property
    def m(self) -> int:
        return self.time_part.m

    @property
    def p(self) -> int:
        return self.cov_part.p

    def snapshot(self, iteration: int) -> ChainRecord:
        return ChainRecord(
            iteration=iteration,
            n_times=self.time_part.n_times,
            time_cuts=self.time_part.cuts,
            cov_cuts=self.cov_part.cuts,
            params=tuple(tuple(bp.copy() for bp in row) for row in self.params),
            loglik=tuple(tuple(row) for row in self.loglik),
        )


def move_rng(seed: int, iteration: int, move_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one move of one iteration."""
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, iteration, move_index]))


class FitContext:
    """Per-run caches: segment periodograms, bases, and block construction."""

    def __init__(self, data: TimeSeriesSet, config: SamplerConfig, cache_size: int = 4096):
        self.data = data
        self.config = config
        self.penalty = penalty_matrix(config.n_basis)
        self.distinct_values = data.distinct_covariates()
        self._segments: OrderedDict[tuple, list] = OrderedDict()
        self._blocks: OrderedDict[tuple, BlockData] = OrderedDict()
        self._cache_size = cache_size
        self._empty = empty_block_data(config.n_basis)

    def _segment_periodograms(self, start: int, end: int) -> list:
        key = (start, end)
        hit = self._segments.get(key)
        if hit is not None:
            self._segments.move_to_end(key)
            return hit
        pgs = [periodogram(demean(row[start:end])) for row in self.data.series]
        basis = build_basis(pgs[0].grid, self.config.n_basis)
        entry = [pgs, basis]
        self._segments[key] = entry
        if len(self._segments) > self._cache_size:
            self._segments.popitem(last=False)
        return entry

    def subjects(self, cov_part: CovariatePartition, g: int) -> np.ndarray:
        return subjects_in_segment(cov_part, self.data.covariates, g)

    def block(self, bounds: tuple[int, int], subject_idx: np.ndarray) -> BlockData:
        if self.config.prior_only:
            return self._empty
        key = (bounds[0], bounds[1], tuple(int(i) for i in subject_idx))
        hit = self._blocks.get(key)
        if hit is not None:
            self._blocks.move_to_end(key)
            return hit
        pgs, basis = self._segment_periodograms(*bounds)
        block = BlockData(periodograms=tuple(pgs[i] for i in subject_idx), basis=basis)
        self._blocks[key] = block
        if len(self._blocks) > self._cache_size:
            self._blocks.popitem(last=False)
        return block

    def blocks_for(self, time_part: TimePartition, cov_part: CovariatePartition):
        """Matrix of BlockData for a full partition pair."""
        subj = [self.subjects(cov_part, g) for g in range(cov_part.p)]
        return [
            [self.block(bounds, subj[g]) for g in range(cov_part.p)]
            for bounds in time_part.segment_bounds()
        ]

    def loglik(self, block: BlockData, params: BlockParams) -> float:
        return block_log_whittle(params, block)

    def coef_prior(self, params: BlockParams) -> float:
        return coef_log_prior(params, self.penalty, self.config.sigma2_alpha)

    def conditional(self, params: BlockParams, block: BlockData) -> float:
        return log_conditional_posterior(params, block, self.penalty, self.config.sigma2_alpha)

    def laplace(self, block: BlockData, tau2: float, init: np.ndarray | None = None):
        return laplace_approx(
            block,
            self.penalty,
            self.config.sigma2_alpha,
            tau2,
            init=init,
            grad_tol=self.config.laplace_grad_tol,
            max_iter=self.config.laplace_max_iter,
        )

    def cov_prior_terms(self, cov_part: CovariatePartition) -> float:
        return log_prior_covariate_partition(cov_part, self.distinct_values, self.config.w_min)

    def time_prior_terms(self, time_part: TimePartition) -> float:
        return log_prior_time_partition(time_part, self.config.t_min)


# ---------------------------------------------------------------------------
# between-model machinery


def _prob_kind(kind: str, m: int, limit: int, n_splittable: int) -> float:
    """Probability of proposing a birth or death from a state with m segments."""
    if limit == 1:
        return 0.0
    if kind == "birth":
        if m >= limit or n_splittable == 0:
            return 0.0
        return 1.0 if m == 1 else 0.5
    if m == 1:
        return 0.0
    return 1.0 if (m >= limit or n_splittable == 0) else 0.5


def _split_tau2(tau2: float, u: float) -> tuple[float, float]:
    return tau2 * u / (1.0 - u), tau2 * (1.0 - u) / u


def _log_jacobian(tau2: float, u: float) -> float:
    """|d(tau1, tau2) / d(tau, u)| = 2 tau / (u (1 - u)) for the variance split."""
    return math.log(2.0 * tau2 / (u * (1.0 - u)))


def _implied_u(tau2_left: float, tau2_right: float) -> float:
    s1, s2 = math.sqrt(tau2_left), math.sqrt(tau2_right)
    return s1 / (s1 + s2)


@dataclass
class _BetweenOutcome:
    proposed: _State
    log_ratio: float


def time_birth_details(
    ctx: FitContext,
    state: _State,
    k: int,
    t_star: int,
    us: list[float],
    rng: np.random.Generator | None = None,
    child_draws: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> _BetweenOutcome:
    """Split time segment k at t_star and compute the log acceptance ratio.

    us holds one auxiliary uniform per covariate segment. child_draws, when
    given, pins the child coefficient vectors (used by tests and by the death
    move when evaluating its reverse direction).
    """
    cfg = ctx.config
    old_part = state.time_part
    new_part = old_part.with_cut_added(t_star)
    bounds = old_part.segment_bounds()[k]
    if not bounds[0] + cfg.t_min <= t_star <= bounds[1] - cfg.t_min:
        raise ValueError(f"cut {t_star} violates t_min within segment {bounds}")
    b1, b2 = (bounds[0], t_star), (t_star, bounds[1])
    p = state.p

    log_ratio = 0.0
    row1: list[BlockParams] = []
    row2: list[BlockParams] = []
    ll1: list[float] = []
    ll2: list[float] = []
    for g in range(p):
        subj = ctx.subjects(state.cov_part, g)
        parent = state.params[k][g]
        u = us[g]
        tau_a, tau_b = _split_tau2(parent.tau2, u)
        block_a, block_b = ctx.block(b1, subj), ctx.block(b2, subj)
        lap_a = ctx.laplace(block_a, tau_a, init=parent.stacked())
        lap_b = ctx.laplace(block_b, tau_b, init=parent.stacked())
        if child_draws is None:
            ca, cb = lap_a.sample(rng), lap_b.sample(rng)
        else:
            ca, cb = child_draws[g]
        pa = BlockParams(alpha=float(ca[0]), beta=np.asarray(ca[1:]), tau2=tau_a)
        pb = BlockParams(alpha=float(cb[0]), beta=np.asarray(cb[1:]), tau2=tau_b)
        row1.append(pa)
        row2.append(pb)
        lla, llb = ctx.loglik(block_a, pa), ctx.loglik(block_b, pb)
        ll1.append(lla)
        ll2.append(llb)
        # likelihood and coefficient/variance priors
        log_ratio += lla + llb - state.loglik[k][g]
        log_ratio += ctx.coef_prior(pa) + ctx.coef_prior(pb) - ctx.coef_prior(parent)
        log_ratio += (
            cfg.tau2_prior.logpdf(tau_a)
            + cfg.tau2_prior.logpdf(tau_b)
            - cfg.tau2_prior.logpdf(parent.tau2)
        )
        # coefficient proposal densities: reverse (merge) minus forward (split)
        parent_block = ctx.block(bounds, subj)
        lap_parent = ctx.laplace(parent_block, parent.tau2, init=parent.stacked())
        log_ratio += lap_parent.logpdf(parent.stacked())
        log_ratio -= lap_a.logpdf(ca) + lap_b.logpdf(cb)
        log_ratio += _log_jacobian(parent.tau2, u) - log_split_u_pdf(u)

    # partition priors
    log_ratio += ctx.time_prior_terms(new_part) - ctx.time_prior_terms(old_part)
    log_ratio += log_prior_m(new_part.m, cfg.max_time_segments) - log_prior_m(
        old_part.m, cfg.max_time_segments
    )
    # structure proposal: reverse death (pick the new cut among m cuts) over
    # forward birth (pick a splittable segment, then a cut position)
    n_split = len(splittable_time_segments(old_part, cfg.t_min))
    n_positions = bounds[1] - bounds[0] - 2 * cfg.t_min + 1
    q_birth = _prob_kind("birth", old_part.m, cfg.max_time_segments, n_split)
    n_split_new = len(splittable_time_segments(new_part, cfg.t_min))
    q_death_rev = _prob_kind("death", new_part.m, cfg.max_time_segments, n_split_new)
    log_ratio += math.log(q_death_rev) - math.log(len(new_part.cuts))
    log_ratio -= math.log(q_birth) - math.log(n_split) - math.log(n_positions)

    new_params = [list(r) for r in state.params]
    new_ll = [list(r) for r in state.loglik]
    new_params[k : k + 1] = [row1, row2]
    new_ll[k : k + 1] = [ll1, ll2]
    proposed = _State(new_part, state.cov_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


def time_death_details(
    ctx: FitContext,
    state: _State,
    k: int,
    rng: np.random.Generator | None = None,
    merged_draws: list[np.ndarray] | None = None,
) -> _BetweenOutcome:
    """Remove time cut k, merging segments k and k+1; exact inverse of a birth."""
    cfg = ctx.config
    old_part = state.time_part
    new_part = old_part.with_cut_removed(k)
    all_bounds = old_part.segment_bounds()
    b1, b2 = all_bounds[k], all_bounds[k + 1]
    merged_bounds = (b1[0], b2[1])
    p = state.p

    log_ratio = 0.0
    merged_row: list[BlockParams] = []
    merged_ll: list[float] = []
    for g in range(p):
        subj = ctx.subjects(state.cov_part, g)
        left, right = state.params[k][g], state.params[k + 1][g]
        tau_merged = math.sqrt(left.tau2 * right.tau2)
        u = _implied_u(left.tau2, right.tau2)
        merged_block = ctx.block(merged_bounds, subj)
        lap_m = ctx.laplace(merged_block, tau_merged, init=left.stacked())
        cm = lap_m.sample(rng) if merged_draws is None else merged_draws[g]
        pm = BlockParams(alpha=float(cm[0]), beta=np.asarray(cm[1:]), tau2=tau_merged)
        merged_row.append(pm)
        llm = ctx.loglik(merged_block, pm)
        merged_ll.append(llm)
        log_ratio += llm - state.loglik[k][g] - state.loglik[k + 1][g]
        log_ratio += ctx.coef_prior(pm) - ctx.coef_prior(left) - ctx.coef_prior(right)
        log_ratio += (
            cfg.tau2_prior.logpdf(tau_merged)
            - cfg.tau2_prior.logpdf(left.tau2)
            - cfg.tau2_prior.logpdf(right.tau2)
        )
        # reverse split would redraw both children from their Laplace fits
        block_a, block_b = ctx.block(b1, subj), ctx.block(b2, subj)
        lap_a = ctx.laplace(block_a, left.tau2, init=left.stacked())
        lap_b = ctx.laplace(block_b, right.tau2, init=right.stacked())
        log_ratio += lap_a.logpdf(left.stacked()) + lap_b.logpdf(right.stacked())
        log_ratio -= lap_m.logpdf(cm)
        log_ratio -= _log_jacobian(tau_merged, u) - log_split_u_pdf(u)

    log_ratio += ctx.time_prior_terms(new_part) - ctx.time_prior_terms(old_part)
    log_ratio += log_prior_m(new_part.m, cfg.max_time_segments) - log_prior_m(
        old_part.m, cfg.max_time_segments
    )
    n_split_old = len(splittable_time_segments(old_part, cfg.t_min))
    q_death = _prob_kind("death", old_part.m, cfg.max_time_segments, n_split_old)
    n_split_new = len(splittable_time_segments(new_part, cfg.t_min))
    q_birth_rev = _prob_kind("birth", new_part.m, cfg.max_time_segments, n_split_new)
    n_positions = merged_bounds[1] - merged_bounds[0] - 2 * cfg.t_min + 1
    log_ratio += math.log(q_birth_rev) - math.log(n_split_new) - math.log(n_positions)
    log_ratio -= math.log(q_death) - math.log(len(old_part.cuts))

    new_params = [list(r) for r in state.params]
    new_ll = [list(r) for r in state.loglik]
    new_params[k : k + 2] = [merged_row]
    new_ll[k : k + 2] = [merged_ll]
    proposed = _State(new_part, state.cov_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


def cov_birth_details(
    ctx: FitContext,
    state: _State,
    g: int,
    cut_value: float,
    us: list[float],
    rng: np.random.Generator | None = None,
    child_draws: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> _BetweenOutcome:
    """Split covariate segment g at a realized value; us holds one uniform per
    time segment."""
    cfg = ctx.config
    old_part = state.cov_part
    new_part = old_part.with_cut_added(cut_value)
    m = state.m
    counts = segment_value_counts(old_part, ctx.distinct_values)
    subj_left = ctx.subjects(new_part, g)
    subj_right = ctx.subjects(new_part, g + 1)
    time_bounds = state.time_part.segment_bounds()

    log_ratio = 0.0
    col1: list[BlockParams] = []
    col2: list[BlockParams] = []
    ll1: list[float] = []
    ll2: list[float] = []
    for j in range(m):
        parent = state.params[j][g]
        u = us[j]
        tau_a, tau_b = _split_tau2(parent.tau2, u)
        block_a = ctx.block(time_bounds[j], subj_left)
        block_b = ctx.block(time_bounds[j], subj_right)
        lap_a = ctx.laplace(block_a, tau_a, init=parent.stacked())
        lap_b = ctx.laplace(block_b, tau_b, init=parent.stacked())
        if child_draws is None:
            ca, cb = lap_a.sample(rng), lap_b.sample(rng)
        else:
            ca, cb = child_draws[j]
        pa = BlockParams(alpha=float(ca[0]), beta=np.asarray(ca[1:]), tau2=tau_a)
        pb = BlockParams(alpha=float(cb[0]), beta=np.asarray(cb[1:]), tau2=tau_b)
        col1.append(pa)
        col2.append(pb)
        lla, llb = ctx.loglik(block_a, pa), ctx.loglik(block_b, pb)
        ll1.append(lla)
        ll2.append(llb)
        log_ratio += lla + llb - state.loglik[j][g]
        log_ratio += ctx.coef_prior(pa) + ctx.coef_prior(pb) - ctx.coef_prior(parent)
        log_ratio += (
            cfg.tau2_prior.logpdf(tau_a)
            + cfg.tau2_prior.logpdf(tau_b)
            - cfg.tau2_prior.logpdf(parent.tau2)
        )
        parent_block = ctx.block(time_bounds[j], ctx.subjects(old_part, g))
        lap_parent = ctx.laplace(parent_block, parent.tau2, init=parent.stacked())
        log_ratio += lap_parent.logpdf(parent.stacked())
        log_ratio -= lap_a.logpdf(ca) + lap_b.logpdf(cb)
        log_ratio += _log_jacobian(parent.tau2, u) - log_split_u_pdf(u)

    log_ratio += ctx.cov_prior_terms(new_part) - ctx.cov_prior_terms(old_part)
    log_ratio += log_prior_m(new_part.p, cfg.max_cov_segments) - log_prior_m(
        old_part.p, cfg.max_cov_segments
    )
    n_split = len(splittable_cov_segments(old_part, ctx.distinct_values, cfg.w_min))
    n_positions = counts[g] - 2 * cfg.w_min + 1
    q_birth = _prob_kind("birth", old_part.p, cfg.max_cov_segments, n_split)
    n_split_new = len(splittable_cov_segments(new_part, ctx.distinct_values, cfg.w_min))
    q_death_rev = _prob_kind("death", new_part.p, cfg.max_cov_segments, n_split_new)
    log_ratio += math.log(q_death_rev) - math.log(len(new_part.cuts))
    log_ratio -= math.log(q_birth) - math.log(n_split) - math.log(n_positions)

    new_params = [row[:g] + [col1[j], col2[j]] + row[g + 1 :] for j, row in enumerate(state.params)]
    new_ll = [row[:g] + [ll1[j], ll2[j]] + row[g + 1 :] for j, row in enumerate(state.loglik)]
    proposed = _State(state.time_part, new_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


def cov_death_details(
    ctx: FitContext,
    state: _State,
    g: int,
    rng: np.random.Generator | None = None,
    merged_draws: list[np.ndarray] | None = None,
) -> _BetweenOutcome:
    """Remove covariate cut g, merging segments g and g+1."""
    cfg = ctx.config
    old_part = state.cov_part
    new_part = old_part.with_cut_removed(g)
    m = state.m
    time_bounds = state.time_part.segment_bounds()
    subj_left = ctx.subjects(old_part, g)
    subj_right = ctx.subjects(old_part, g + 1)
    subj_merged = ctx.subjects(new_part, g)

    log_ratio = 0.0
    merged_col: list[BlockParams] = []
    merged_ll: list[float] = []
    for j in range(m):
        left, right = state.params[j][g], state.params[j][g + 1]
        tau_merged = math.sqrt(left.tau2 * right.tau2)
        u = _implied_u(left.tau2, right.tau2)
        merged_block = ctx.block(time_bounds[j], subj_merged)
        lap_m = ctx.laplace(merged_block, tau_merged, init=left.stacked())
        cm = lap_m.sample(rng) if merged_draws is None else merged_draws[j]
        pm = BlockParams(alpha=float(cm[0]), beta=np.asarray(cm[1:]), tau2=tau_merged)
        merged_col.append(pm)
        llm = ctx.loglik(merged_block, pm)
        merged_ll.append(llm)
        log_ratio += llm - state.loglik[j][g] - state.loglik[j][g + 1]
        log_ratio += ctx.coef_prior(pm) - ctx.coef_prior(left) - ctx.coef_prior(right)
        log_ratio += (
            cfg.tau2_prior.logpdf(tau_merged)
            - cfg.tau2_prior.logpdf(left.tau2)
            - cfg.tau2_prior.logpdf(right.tau2)
        )
        block_a = ctx.block(time_bounds[j], subj_left)
        block_b = ctx.block(time_bounds[j], subj_right)
        lap_a = ctx.laplace(block_a, left.tau2, init=left.stacked())
        lap_b = ctx.laplace(block_b, right.tau2, init=right.stacked())
        log_ratio += lap_a.logpdf(left.stacked()) + lap_b.logpdf(right.stacked())
        log_ratio -= lap_m.logpdf(cm)
        log_ratio -= _log_jacobian(tau_merged, u) - log_split_u_pdf(u)

    log_ratio += ctx.cov_prior_terms(new_part) - ctx.cov_prior_terms(old_part)
    log_ratio += log_prior_m(new_part.p, cfg.max_cov_segments) - log_prior_m(
        old_part.p, cfg.max_cov_segments
    )
    n_split_old = len(splittable_cov_segments(old_part, ctx.distinct_values, cfg.w_min))
    q_death = _prob_kind("death", old_part.p, cfg.max_cov_segments, n_split_old)
    n_split_new = len(splittable_cov_segments(new_part, ctx.distinct_values, cfg.w_min))
    q_birth_rev = _prob_kind("birth", new_part.p, cfg.max_cov_segments, n_split_new)
    merged_counts = segment_value_counts(new_part, ctx.distinct_values)
    n_positions = merged_counts[g] - 2 * cfg.w_min + 1
    log_ratio += math.log(q_birth_rev) - math.log(n_split_new) - math.log(n_positions)
    log_ratio -= math.log(q_death) - math.log(len(old_part.cuts))

    new_params = [row[:g] + [merged_col[j]] + row[g + 2 :] for j, row in enumerate(state.params)]
    new_ll = [row[:g] + [merged_ll[j]] + row[g + 2 :] for j, row in enumerate(state.loglik)]
    proposed = _State(state.time_part, new_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


# ---------------------------------------------------------------------------
# within-model machinery


def time_within_details(
    ctx: FitContext,
    state: _State,
    k: int,
    t_prop: int,
    log_q_fwd: float,
    log_q_rev: float,
    rng: np.random.Generator | None = None,
    draws: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> _BetweenOutcome:
    """Relocate time cut k to t_prop, redrawing the coefficients of the two
    adjacent rows from their Laplace fits."""
    cfg = ctx.config
    old_part = state.time_part
    new_part = old_part.with_cut_moved(k, t_prop)
    old_bounds = old_part.segment_bounds()
    new_bounds = new_part.segment_bounds()
    p = state.p

    log_ratio = 0.0
    rows_new: list[list[BlockParams]] = [[], []]
    ll_new: list[list[float]] = [[], []]
    for g in range(p):
        subj = ctx.subjects(state.cov_part, g)
        for side in (0, 1):
            cur = state.params[k + side][g]
            new_block = ctx.block(new_bounds[k + side], subj)
            lap_new = ctx.laplace(new_block, cur.tau2, init=cur.stacked())
            c = lap_new.sample(rng) if draws is None else draws[g][side]
            prop = BlockParams(alpha=float(c[0]), beta=np.asarray(c[1:]), tau2=cur.tau2)
            rows_new[side].append(prop)
            ll = ctx.loglik(new_block, prop)
            ll_new[side].append(ll)
            log_ratio += ll - state.loglik[k + side][g]
            log_ratio += ctx.coef_prior(prop) - ctx.coef_prior(cur)
            cur_block = ctx.block(old_bounds[k + side], subj)
            lap_cur = ctx.laplace(cur_block, cur.tau2, init=cur.stacked())
            log_ratio += lap_cur.logpdf(cur.stacked()) - lap_new.logpdf(c)

    log_ratio += ctx.time_prior_terms(new_part) - ctx.time_prior_terms(old_part)
    if cfg.include_relocation_density:
        log_ratio += log_q_rev - log_q_fwd

    new_params = [list(r) for r in state.params]
    new_ll = [list(r) for r in state.loglik]
    new_params[k : k + 2] = [rows_new[0], rows_new[1]]
    new_ll[k : k + 2] = [ll_new[0], ll_new[1]]
    proposed = _State(new_part, state.cov_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


def time_pair_relocate_details(
    ctx: FitContext,
    state: _State,
    k: int,
    a: int,
    b: int,
    rng: np.random.Generator | None = None,
    draws: list[tuple[np.ndarray, ...]] | None = None,
) -> _BetweenOutcome:
    """Relocate the adjacent time cuts k and k+1 jointly to (a, b), redrawing
    the coefficients of the three affected rows from their Laplace fits.

    Single-cut relocations can only slide a cut between its neighbours, so a
    pair of cuts that closed in on one spectral change from both sides (each
    within t_min of it) walls itself in: every one-cut move is downhill and
    the deaths pass through far worse states. The joint move teleports the
    pair anywhere valid between the outer boundaries, which restores mixing
    across such configurations. The proposal is uniform over the same pair
    set in both directions (sample_pair_positions), so no proposal-density
    terms appear in the ratio.
    """
    old_part = state.time_part
    cuts = list(old_part.cuts)
    cuts[k : k + 2] = [a, b]
    new_part = TimePartition(old_part.n_times, tuple(cuts))
    old_bounds = old_part.segment_bounds()
    new_bounds = new_part.segment_bounds()
    p = state.p

    log_ratio = 0.0
    rows_new: list[list[BlockParams]] = [[], [], []]
    ll_new: list[list[float]] = [[], [], []]
    for g in range(p):
        subj = ctx.subjects(state.cov_part, g)
        for side in (0, 1, 2):
            cur = state.params[k + side][g]
            new_block = ctx.block(new_bounds[k + side], subj)
            lap_new = ctx.laplace(new_block, cur.tau2, init=cur.stacked())
            c = lap_new.sample(rng) if draws is None else draws[g][side]
            prop = BlockParams(alpha=float(c[0]), beta=np.asarray(c[1:]), tau2=cur.tau2)
            rows_new[side].append(prop)
            ll = ctx.loglik(new_block, prop)
            ll_new[side].append(ll)
            log_ratio += ll - state.loglik[k + side][g]
            log_ratio += ctx.coef_prior(prop) - ctx.coef_prior(cur)
            cur_block = ctx.block(old_bounds[k + side], subj)
            lap_cur = ctx.laplace(cur_block, cur.tau2, init=cur.stacked())
            log_ratio += lap_cur.logpdf(cur.stacked()) - lap_new.logpdf(c)

    log_ratio += ctx.time_prior_terms(new_part) - ctx.time_prior_terms(old_part)

    new_params = [list(r) for r in state.params]
    new_ll = [list(r) for r in state.loglik]
    new_params[k : k + 3] = rows_new
    new_ll[k : k + 3] = ll_new
    proposed = _State(new_part, state.cov_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


def cov_within_details(
    ctx: FitContext,
    state: _State,
    k: int,
    w_prop: float,
    log_q_fwd: float,
    log_q_rev: float,
    rng: np.random.Generator | None = None,
    draws: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> _BetweenOutcome:
    """Relocate covariate cut k to w_prop, redrawing the two adjacent columns."""
    cfg = ctx.config
    old_part = state.cov_part
    new_part = old_part.with_cut_moved(k, w_prop)
    time_bounds = state.time_part.segment_bounds()
    m = state.m

    subj_new = [ctx.subjects(new_part, k), ctx.subjects(new_part, k + 1)]
    subj_old = [ctx.subjects(old_part, k), ctx.subjects(old_part, k + 1)]
    log_ratio = 0.0
    cols_new: list[list[BlockParams]] = [[], []]
    ll_new: list[list[float]] = [[], []]
    for j in range(m):
        for side in (0, 1):
            cur = state.params[j][k + side]
            new_block = ctx.block(time_bounds[j], subj_new[side])
            lap_new = ctx.laplace(new_block, cur.tau2, init=cur.stacked())
            c = lap_new.sample(rng) if draws is None else draws[j][side]
            prop = BlockParams(alpha=float(c[0]), beta=np.asarray(c[1:]), tau2=cur.tau2)
            cols_new[side].append(prop)
            ll = ctx.loglik(new_block, prop)
            ll_new[side].append(ll)
            log_ratio += ll - state.loglik[j][k + side]
            log_ratio += ctx.coef_prior(prop) - ctx.coef_prior(cur)
            cur_block = ctx.block(time_bounds[j], subj_old[side])
            lap_cur = ctx.laplace(cur_block, cur.tau2, init=cur.stacked())
            log_ratio += lap_cur.logpdf(cur.stacked()) - lap_new.logpdf(c)

    log_ratio += ctx.cov_prior_terms(new_part) - ctx.cov_prior_terms(old_part)
    if cfg.include_relocation_density:
        log_ratio += log_q_rev - log_q_fwd

    new_params = [
        row[:k] + [cols_new[0][j], cols_new[1][j]] + row[k + 2 :]
        for j, row in enumerate(state.params)
    ]
    new_ll = [
        row[:k] + [ll_new[0][j], ll_new[1][j]] + row[k + 2 :]
        for j, row in enumerate(state.loglik)
    ]
    proposed = _State(state.time_part, new_part, new_params, new_ll)
    return _BetweenOutcome(proposed=proposed, log_ratio=log_ratio)


# ---------------------------------------------------------------------------
# move wrappers


def _accept(log_ratio: float, rng: np.random.Generator) -> bool:
    if not np.isfinite(log_ratio):
        return False
    return log_ratio >= 0.0 or rng.random() < math.exp(log_ratio)


SPLIT_U_UNIFORM_WEIGHT = 0.5
SPLIT_U_BETA_SHAPE = 12.0
_SPLIT_U_LOG_BETA_NORM = 2.0 * math.lgamma(SPLIT_U_BETA_SHAPE) - math.lgamma(
    2.0 * SPLIT_U_BETA_SHAPE
)


def _draw_u(rng: np.random.Generator) -> float:
    """Auxiliary fraction for splitting a smoothing variance on a birth:
    a mixture of U(0,1) and Beta(a,a) centered at 1/2.

    The balanced component starts both children near the parent's scale, which
    matters when a covariate birth must split every time row at once: wild
    child variances would each cost tens of log-likelihood units and sink the
    move. The uniform component keeps every fraction reachable so the matching
    death is never starved; the density enters the acceptance ratio through
    log_split_u_pdf."""
    if rng.random() < SPLIT_U_UNIFORM_WEIGHT:
        u = rng.random()
    else:
        u = rng.beta(SPLIT_U_BETA_SHAPE, SPLIT_U_BETA_SHAPE)
    return float(min(max(u, U_EPS), 1.0 - U_EPS))


def log_split_u_pdf(u: float) -> float:
    """Density of _draw_u on (0, 1)."""
    a = SPLIT_U_BETA_SHAPE
    log_beta = (a - 1.0) * (math.log(u) + math.log1p(-u)) - _SPLIT_U_LOG_BETA_NORM
    return math.log(
        SPLIT_U_UNIFORM_WEIGHT + (1.0 - SPLIT_U_UNIFORM_WEIGHT) * math.exp(log_beta)
    )


def move_time_between(ctx: FitContext, state: _State, rng: np.random.Generator, stats) -> _State:
    cfg = ctx.config
    if cfg.max_time_segments == 1:
        return state
    splittable = splittable_time_segments(state.time_part, cfg.t_min)
    p_birth = _prob_kind("birth", state.m, cfg.max_time_segments, len(splittable))
    p_death = _prob_kind("death", state.m, cfg.max_time_segments, len(splittable))
    if p_birth + p_death == 0.0:
        return state
    stats["time_between"][0] += 1
    try:
        if rng.random() < p_birth:
            k = int(splittable[rng.integers(len(splittable))])
            lo, hi = state.time_part.segment_bounds()[k]
            t_star = int(rng.integers(lo + cfg.t_min, hi - cfg.t_min + 1))
            us = [_draw_u(rng) for _ in range(state.p)]
            out = time_birth_details(ctx, state, k, t_star, us, rng=rng)
        else:
            k = int(rng.integers(state.m - 1))
            out = time_death_details(ctx, state, k, rng=rng)
    except LaplaceError:
        return state
    if _accept(out.log_ratio, rng):
        stats["time_between"][1] += 1
        return out.proposed
    return state


def move_time_within(ctx: FitContext, state: _State, rng: np.random.Generator, stats) -> _State:
    cfg = ctx.config
    if state.m == 1:
        return state
    stats["time_within"][0] += 1
    pair = (
        state.m >= 3
        and cfg.pair_relocation_prob > 0.0
        and rng.random() < cfg.pair_relocation_prob
    )
    out = None
    if pair:
        k = int(rng.integers(state.m - 2))
        bounds = state.time_part.boundaries()
        ab = sample_pair_positions(bounds[k], bounds[k + 3], cfg.t_min, rng)
        if ab is not None:
            try:
                out = time_pair_relocate_details(ctx, state, k, ab[0], ab[1], rng=rng)
            except LaplaceError:
                out = None
        touched = (k, k + 1, k + 2)
    else:
        k = int(rng.integers(state.m - 1))
        t_prop, log_q_fwd, log_q_rev = relocation_kernel_time(
            state.time_part, k, cfg.t_min, cfg.pi_mix_time, rng
        )
        try:
            out = time_within_details(ctx, state, k, t_prop, log_q_fwd, log_q_rev, rng=rng)
        except LaplaceError:
            out = None
        touched = (k, k + 1)
    if out is not None and _accept(out.log_ratio, rng):
        stats["time_within"][1] += 1
        state = out.proposed
    # Gibbs refresh of the affected rows' smoothing variances
    for j in touched:
        for g in range(state.p):
            bp = state.params[j][g]
            bp.tau2 = gibbs_tau2(bp.beta, ctx.penalty, rng, prior=cfg.tau2_prior)
    return state


def move_cov_between(ctx: FitContext, state: _State, rng: np.random.Generator, stats) -> _State:
    cfg = ctx.config
    if cfg.max_cov_segments == 1:
        return state
    splittable = splittable_cov_segments(state.cov_part, ctx.distinct_values, cfg.w_min)
    p_birth = _prob_kind("birth", state.p, cfg.max_cov_segments, len(splittable))
    p_death = _prob_kind("death", state.p, cfg.max_cov_segments, len(splittable))
    if p_birth + p_death == 0.0:
        return state
    stats["cov_between"][0] += 1
    try:
        if rng.random() < p_birth:
            g = int(splittable[rng.integers(len(splittable))])
            counts = segment_value_counts(state.cov_part, ctx.distinct_values)
            lo = -np.inf if g == 0 else state.cov_part.cuts[g - 1]
            vals = ctx.distinct_values[ctx.distinct_values > lo][: counts[g]]
            idx = int(rng.integers(cfg.w_min - 1, counts[g] - cfg.w_min))
            us = [_draw_u(rng) for _ in range(state.m)]
            out = cov_birth_details(ctx, state, g, float(vals[idx]), us, rng=rng)
        else:
            g = int(rng.integers(state.p - 1))
            out = cov_death_details(ctx, state, g, rng=rng)
    except LaplaceError:
        return state
    if _accept(out.log_ratio, rng):
        stats["cov_between"][1] += 1
        return out.proposed
    return state


def move_cov_within(ctx: FitContext, state: _State, rng: np.random.Generator, stats) -> _State:
    cfg = ctx.config
    if state.p == 1:
        return state
    stats["cov_within"][0] += 1
    k = int(rng.integers(state.p - 1))
    w_prop, log_q_fwd, log_q_rev = relocation_kernel_covariate(
        state.cov_part, ctx.distinct_values, k, cfg.w_min, cfg.pi_mix_cov, rng
    )
    try:
        out = cov_within_details(ctx, state, k, w_prop, log_q_fwd, log_q_rev, rng=rng)
    except LaplaceError:
        out = None
    if out is not None and _accept(out.log_ratio, rng):
        stats["cov_within"][1] += 1
        state = out.proposed
    for j in range(state.m):
        for g in (k, k + 1):
            bp = state.params[j][g]
            bp.tau2 = gibbs_tau2(bp.beta, ctx.penalty, rng, prior=cfg.tau2_prior)
    return state


def move_refresh(ctx: FitContext, state: _State, rng: np.random.Generator, stats) -> _State:
    """Stationary-mode update of the single block: joint coefficient proposal
    from the Laplace fit, then a Gibbs draw of the smoothing variance."""
    cfg = ctx.config
    stats["refresh"][0] += 1
    subj = ctx.subjects(state.cov_part, 0)
    block = ctx.block(state.time_part.segment_bounds()[0], subj)
    cur = state.params[0][0]
    try:
        lap = ctx.laplace(block, cur.tau2, init=cur.stacked())
    except LaplaceError:
        lap = None
    if lap is not None:
        c = lap.sample(rng)
        prop = BlockParams(alpha=float(c[0]), beta=np.asarray(c[1:]), tau2=cur.tau2)
        ll_prop = ctx.loglik(block, prop)
        log_ratio = (
            ll_prop
            - state.loglik[0][0]
            + ctx.coef_prior(prop)
            - ctx.coef_prior(cur)
            + lap.logpdf(cur.stacked())
            - lap.logpdf(c)
        )
        if _accept(log_ratio, rng):
            stats["refresh"][1] += 1
            state.params[0][0] = prop
            state.loglik[0][0] = ll_prop
    bp = state.params[0][0]
    bp.tau2 = gibbs_tau2(bp.beta, ctx.penalty, rng, prior=cfg.tau2_prior)
    return state


# ---------------------------------------------------------------------------
# the chain


def initial_state(ctx: FitContext) -> _State:
    cfg = ctx.config
    time_part = TimePartition(ctx.data.n_times, ())
    cov_part = CovariatePartition(())
    block = ctx.block((0, ctx.data.n_times), ctx.subjects(cov_part, 0))
    if cfg.prior_only or block.n == 0:
        alpha0 = 0.0
    else:
        pos = block.basis.grid.frequencies > 0
        logs = [np.log(np.maximum(p.values[pos], 1e-300)) for p in block.periodograms]
        alpha0 = float(np.mean(logs)) + np.euler_gamma
    params = BlockParams(alpha=alpha0, beta=np.zeros(cfg.n_basis), tau2=1.0)
    state = _State(
        time_part=time_part,
        cov_part=cov_part,
        params=[[params]],
        loglik=[[ctx.loglik(block, params)]],
    )
    return state


def audit_state(ctx: FitContext, state: _State, atol: float = 1e-8) -> None:
    """Recompute cached block log likelihoods and re-validate the partitions."""
    validate_time_partition(state.time_part, ctx.config.t_min)
    validate_covariate_partition(state.cov_part, ctx.distinct_values, ctx.config.w_min)
    blocks = ctx.blocks_for(state.time_part, state.cov_part)
    for j in range(state.m):
        for g in range(state.p):
            fresh = ctx.loglik(blocks[j][g], state.params[j][g])
            cached = state.loglik[j][g]
            if not math.isclose(fresh, cached, rel_tol=atol, abs_tol=atol):
                raise RuntimeError(
                    f"cached log likelihood drifted at block ({j}, {g}): "
                    f"{cached} vs {fresh}"
                )


class Sampler:
    """Owns one chain: context, state, acceptance counters."""

    def __init__(self, data: TimeSeriesSet, config: SamplerConfig):
        config.validate()
        if data.n_times < 2 * config.t_min:
            raise ConfigError(
                f"series length {data.n_times} below 2*t_min={2 * config.t_min}"
            )
        self.data = data
        self.config = config
        self.ctx = FitContext(data, config)
        self.stats = {name: [0, 0] for name in MOVE_NAMES}

    def acceptance_rates(self) -> dict[str, dict[str, float]]:
        out = {}
        for name, (proposed, accepted) in self.stats.items():
            rate = accepted / proposed if proposed else 0.0
            out[name] = {"proposed": proposed, "accepted": accepted, "rate": rate}
        return out

    def run(self) -> list[ChainRecord]:
        cfg = self.config
        ctx = self.ctx
        state = initial_state(ctx)
        records = [state.snapshot(0)]
        stationary = cfg.max_time_segments == 1 and cfg.max_cov_segments == 1
        for it in range(1, cfg.iterations + 1):
            if stationary:
                state = move_refresh(ctx, state, move_rng(cfg.seed, it, 4), self.stats)
            else:
                state = move_time_between(ctx, state, move_rng(cfg.seed, it, 0), self.stats)
                state = move_time_within(ctx, state, move_rng(cfg.seed, it, 1), self.stats)
                state = move_cov_between(ctx, state, move_rng(cfg.seed, it, 2), self.stats)
                state = move_cov_within(ctx, state, move_rng(cfg.seed, it, 3), self.stats)
            if it % cfg.audit_every == 0:
                audit_state(ctx, state)
            records.append(state.snapshot(it))
        return records


def run_chain(data: TimeSeriesSet, config: SamplerConfig) -> list[ChainRecord]:
    """Run one chain and return a record per iteration, the initial state included."""
    return Sampler(data, config).run()
