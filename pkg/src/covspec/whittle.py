"""Whittle block likelihood, conditional posterior, Laplace proposals, and the
smoothing-parameter Gibbs step.

A block holds the periodogram ordinates of every subject assigned to one
(time segment, covariate segment) cell. Its log spectrum is modelled as
alpha + Z beta on the segment's frequency grid, with priors
alpha ~ N(0, sigma2_alpha) and beta ~ N(0, tau2 * D), D the diagonal
smoothing penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .basis import BasisMatrix, PenaltyMatrix
from .periodogram import FourierGrid, Periodogram

LOG_2PI = math.log(2.0 * math.pi)
GIBBS_SCALE_FLOOR = 1e-12


class LaplaceError(RuntimeError):
    """Newton mode search failed to converge; the caller should reject the move."""


@dataclass
class BlockParams:
    """Log-spectrum coefficients and smoothing variance of one block."""

    alpha: float
    beta: np.ndarray
    tau2: float

    def copy(self) -> "BlockParams":
        return BlockParams(self.alpha, self.beta.copy(), self.tau2)

    def stacked(self) -> np.ndarray:
        return np.concatenate(([self.alpha], self.beta))


@dataclass(frozen=True)
class BlockData:
    """Observed periodograms of one block plus the shared basis on its grid.

    An empty periodogram list is allowed and makes every data term vanish;
    that degenerate form backs the prior-only sampler validation mode.
    """

    periodograms: tuple[Periodogram, ...]
    basis: BasisMatrix

    @cached_property
    def n(self) -> int:
        return self.basis.grid.n

    @cached_property
    def n_subjects(self) -> int:
        return len(self.periodograms)

    @cached_property
    def weights(self) -> np.ndarray:
        """Fold weights of the grid: 1/2 at 0 and Nyquist, 1 on the interior."""
        return self.basis.grid.weights

    @cached_property
    def weight_total(self) -> float:
        return self.basis.grid.weight_total if self.n else 0.0

    @cached_property
    def pooled(self) -> np.ndarray:
        """Sum of periodogram ordinates over subjects (the Whittle sufficient statistic)."""
        if not self.periodograms:
            return np.zeros(self.n)
        return np.sum([p.values for p in self.periodograms], axis=0)

    @cached_property
    def weighted_pooled(self) -> np.ndarray:
        """Pooled ordinates premultiplied by the fold weights."""
        return self.weights * self.pooled if self.n else self.pooled

    @cached_property
    def design(self) -> np.ndarray:
        """[1 | Z] so alpha and beta are handled as one stacked coefficient vector."""
        return np.hstack([np.ones((self.n, 1)), self.basis.values])


def empty_block_data(n_basis: int) -> BlockData:
    """Block with no observations: every data term is identically zero, so the
    conditional posterior reduces to the prior (prior-only sampling mode)."""
    grid = FourierGrid(segment_length=0, frequencies=np.empty(0), weights=np.empty(0))
    return BlockData(periodograms=(), basis=BasisMatrix(grid=grid, values=np.empty((0, n_basis))))


def block_log_whittle(params: BlockParams, data: BlockData) -> float:
    """Fold-weighted Whittle log likelihood of the block.

    Each ordinate contributes -w_k [eta_k + Y(nu_k) exp(-eta_k) + log 2 pi]
    per subject, so the total ordinate weight is T/2 per subject regardless
    of where the segmentation places its cuts.
    """
    eta = data.design @ params.stacked()
    with np.errstate(over="ignore"):
        fit = data.n_subjects * float(data.weights @ eta) + float(
            data.weighted_pooled @ np.exp(-eta)
        )
    return -fit - data.n_subjects * data.weight_total * LOG_2PI


def coef_log_prior(
    params: BlockParams, penalty: PenaltyMatrix, sigma2_alpha: float
) -> float:
    """Log N(alpha; 0, sigma2_alpha) + log N(beta; 0, tau2 * D), fully normalized."""
    B = penalty.n_basis
    quad = penalty.quad_form(params.beta)
    out = -0.5 * (LOG_2PI + math.log(sigma2_alpha)) - 0.5 * params.alpha**2 / sigma2_alpha
    out += -0.5 * (B * (LOG_2PI + math.log(params.tau2)) + float(np.sum(np.log(penalty.diagonal))))
    out += -0.5 * quad / params.tau2
    return out


def log_conditional_posterior(
    params: BlockParams, data: BlockData, penalty: PenaltyMatrix, sigma2_alpha: float
) -> float:
    """Log posterior of (alpha, beta) given tau2 and the block data.

    Equals the unnormalized sum
        -sum_l sum_k w_k [eta_k + Y_lk exp(-eta_k)] - alpha^2/(2 sigma2_alpha)
        - beta' D^-1 beta / (2 tau2)
    plus a constant that does not involve (alpha, beta):
        -(n_subjects * T / 2) log(2 pi) - (1/2) log(2 pi sigma2_alpha)
        - (1/2) sum_b log(2 pi tau2 D_bb).
    """
    return block_log_whittle(params, data) + coef_log_prior(params, penalty, sigma2_alpha)


def _prior_precision(penalty: PenaltyMatrix, sigma2_alpha: float, tau2: float) -> np.ndarray:
    return np.concatenate(([1.0 / sigma2_alpha], penalty.inverse_diagonal() / tau2))


def grad_hessian(
    coef: np.ndarray,
    data: BlockData,
    penalty: PenaltyMatrix,
    sigma2_alpha: float,
    tau2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient and Hessian of the conditional log posterior at the
    stacked coefficient vector (alpha, beta)."""
    X = data.design
    eta = X @ coef
    with np.errstate(over="ignore"):
        w = data.weighted_pooled * np.exp(-eta)
    prior_prec = _prior_precision(penalty, sigma2_alpha, tau2)
    grad = X.T @ (w - data.n_subjects * data.weights) - prior_prec * coef
    hess = -(X.T * w) @ X - np.diag(prior_prec)
    return grad, hess


@dataclass(frozen=True)
class LaplaceProposal:
    """Gaussian approximation N(mode, cov) to a conditional coefficient posterior."""

    mode: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray  # lower Cholesky factor of the covariance

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mode + self.chol @ rng.standard_normal(self.mode.size)

    def logpdf(self, x: np.ndarray) -> float:
        d = x - self.mode
        z = np.linalg.solve(self.chol, d)
        logdet = 2.0 * float(np.sum(np.log(np.diag(self.chol))))
        return -0.5 * (self.mode.size * LOG_2PI + logdet + float(z @ z))


def _chol_with_jitter(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(mat + 1e-10 * np.eye(mat.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise LaplaceError(f"covariance factorization failed: {exc}") from None


def laplace_approx(
    data: BlockData,
    penalty: PenaltyMatrix,
    sigma2_alpha: float,
    tau2: float,
    init: np.ndarray | None = None,
    grad_tol: float = 1e-6,
    max_iter: int = 100,
) -> LaplaceProposal:
    """Newton mode search with step halving; covariance is the inverse negative
    Hessian at the mode. Raises LaplaceError on non-convergence so the caller
    can reject the move."""
    B = penalty.n_basis
    if init is None:
        init = np.zeros(B + 1)
        if data.n:
            # seed alpha from the positive-frequency ordinates; the demeaned
            # zero-frequency ordinate is degenerate and would poison the mean
            pos = data.basis.grid.frequencies > 0
            mean_pooled = float(np.mean(data.pooled[pos])) / max(data.n_subjects, 1)
            if mean_pooled > 0:
                init[0] = math.log(mean_pooled)
    coef = np.asarray(init, dtype=float).copy()

    def objective(c: np.ndarray) -> float:
        p = BlockParams(alpha=float(c[0]), beta=c[1:], tau2=tau2)
        return log_conditional_posterior(p, data, penalty, sigma2_alpha)

    cur = objective(coef)
    if not np.isfinite(cur):
        coef = np.zeros(B + 1)
        cur = objective(coef)
    converged = False
    for _ in range(max_iter):
        grad, hess = grad_hessian(coef, data, penalty, sigma2_alpha, tau2)
        if not np.all(np.isfinite(grad)):
            raise LaplaceError("non-finite gradient in Newton iteration")
        if float(np.max(np.abs(grad))) < grad_tol:
            converged = True
            break
        step = np.linalg.solve(-hess, grad)
        scale = 1.0
        for _ in range(50):
            cand = coef + scale * step
            val = objective(cand)
            if np.isfinite(val) and val >= cur - 1e-12:
                coef, cur = cand, val
                break
            scale *= 0.5
        else:
            raise LaplaceError("step halving failed to improve the objective")
    if not converged:
        grad, hess = grad_hessian(coef, data, penalty, sigma2_alpha, tau2)
        if float(np.max(np.abs(grad))) >= grad_tol:
            raise LaplaceError(f"Newton did not converge in {max_iter} iterations")
    _, hess = grad_hessian(coef, data, penalty, sigma2_alpha, tau2)
    cov = np.linalg.inv(-hess)
    cov = 0.5 * (cov + cov.T)
    return LaplaceProposal(mode=coef, covariance=cov, chol=_chol_with_jitter(cov))


# ---------------------------------------------------------------------------
# smoothing parameter


@dataclass(frozen=True)
class Tau2Prior:
    """Prior on tau2 selecting the Gibbs conditional and the log density used
    in between-model ratios.

    kind "flat" (the default) is the improper constant density on (0, inf):
    the Gibbs conditional is InverseGamma(B/2 - 1, q/2) and the prior
    contributes nothing to dimension-changing ratios, so segment births are
    charged only the intrinsic Occam cost carried by the coefficient priors
    and the Laplace normalisation.  The density constant of an improper
    prior is arbitrary; it is fixed at 1 here, which is the convention the
    acceptance ratios assume.  In practice that intrinsic cost is enough to
    keep the number of segments from drifting toward the cap, while leaving
    genuine but diffuse structure (smoothing scales spread over several
    orders of magnitude across blocks) affordable to split off.

    kind "uniform" is the proper truncated variant Uniform(0, tau2_max]:
    same conditional truncated above, and a -log(tau2_max) charge per block
    in every dimension-changing ratio -- a much stiffer complexity penalty.
    kind "reciprocal" uses p(tau2) = 1/tau2, giving InverseGamma(B/2, q/2);
    "inverse_gamma" is the proper conjugate IG(a0, b0) pair, the only kind
    whose joint prior is proper and therefore the one used when sampling
    from the prior alone.  All three are sensitivity switches.
    """

    kind: str = "flat"
    a0: float = 2.0
    b0: float = 1.0
    tau2_max: float = 1e5

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "flat", "reciprocal", "inverse_gamma"):
            raise ValueError(f"unknown tau2 prior kind: {self.kind}")
        if not self.tau2_max > 0:
            raise ValueError(f"tau2_max must be positive, got {self.tau2_max}")

    def gibbs_shape(self, n_basis: int) -> float:
        if self.kind in ("uniform", "flat"):
            return 0.5 * n_basis - 1.0
        if self.kind == "reciprocal":
            return 0.5 * n_basis
        return 0.5 * n_basis + self.a0

    def extra_scale(self) -> float:
        return self.b0 if self.kind == "inverse_gamma" else 0.0

    def logpdf(self, tau2: float) -> float:
        if tau2 <= 0:
            return -math.inf
        if self.kind == "uniform":
            return -math.log(self.tau2_max) if tau2 <= self.tau2_max else -math.inf
        if self.kind == "flat":
            return 0.0
        if self.kind == "reciprocal":
            return -math.log(tau2)
        a, b = self.a0, self.b0
        return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(tau2) - b / tau2


def gibbs_tau2(
    beta: np.ndarray,
    penalty: PenaltyMatrix,
    rng: np.random.Generator,
    prior: Tau2Prior = Tau2Prior(),
) -> float:
    """Draw tau2 from its inverse-gamma full conditional given beta.

    The scale is floored at a tiny positive value so beta = 0 still yields a
    proper draw.
    """
    B = penalty.n_basis
    if B < 3:
        raise ValueError(f"n_basis={B} < 3: conditional shape would be non-positive")
    shape = prior.gibbs_shape(B)
    scale = max(0.5 * penalty.quad_form(beta), GIBBS_SCALE_FLOOR) + prior.extra_scale()
    draw = float(scale / rng.gamma(shape, 1.0))
    if prior.kind == "uniform":
        # Truncate by rejection; the bound sits so far in the tail that the
        # first draw is almost always accepted.  The fallback to the bound
        # itself is reachable only when essentially all conditional mass
        # exceeds tau2_max.
        for _ in range(1000):
            if draw <= prior.tau2_max:
                return draw
            draw = float(scale / rng.gamma(shape, 1.0))
        return prior.tau2_max
    return draw
