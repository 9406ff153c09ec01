"""Bayesian Lasso Gibbs sampler for the probit mixed model.

The Laplace shrinkage prior is expressed as a normal scale mixture:
beta | Lambda ~ N_p(0, Lambda) with Lambda = diag(lambda_1..lambda_p),
1/lambda_j | beta ~ inverse-Gaussian, and delta | Lambda ~ Gamma. The
latent-liability, random-effect and variance conditionals are the exact
same code paths as the SSVS chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import (
    RngStream,
    sample_inverse_gaussian,
    spd_factorize,
    sample_mvn,
    _truncated_at_zero,
)
from .model import Dataset
# shared conditionals: identical code paths by construction
from .ssvs import (
    ChainNumericError,
    sample_latent,
    sample_random_effects,
    sample_variances,
)

# |beta_j| floor before forming sqrt(delta)/|beta_j|; prevents an infinite
# inverse-Gaussian mean when a coefficient collapses to zero.
BETA_FLOOR = 1e-10


@dataclass
class LassoHyper:
    """Hyper-priors: delta ~ Gamma(e, f) and sigma_l^2 ~ IG(ig_shape, ig_scale)."""

    e: float = 1.0
    f: float = 1.0
    ig_shape: float = 1.0
    ig_scale: float = 1.0

    def __post_init__(self):
        if min(self.e, self.f, self.ig_shape, self.ig_scale) <= 0:
            raise ValueError("all Lasso hyper-parameters must be positive")


@dataclass
class LassoConfig:
    """Run-length and prior settings for one Bayesian Lasso chain."""

    hyper: LassoHyper = field(default_factory=LassoHyper)
    burn_in: int = 5000
    post_burn_in: int = 15000
    ci_level: float = 0.95
    seed: int = 0
    stream_id: int = 0

    def validate(self):
        if self.burn_in < 0 or self.post_burn_in < 1:
            raise ValueError("burn_in must be >= 0 and post_burn_in >= 1")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")

    def echo(self) -> dict:
        return asdict(self)


@dataclass
class LassoState:
    """Mutable state of one Bayesian Lasso chain."""

    beta: np.ndarray
    lambda_j: np.ndarray
    delta: float
    U: np.ndarray
    L: np.ndarray
    sigma2: np.ndarray


@dataclass
class LassoOutput:
    """Posterior summaries of one finished Lasso chain."""

    beta_mean: np.ndarray
    lambda_mean: np.ndarray
    delta_mean: float
    beta_ci: np.ndarray  # p x 2 equal-tailed interval at ci_level
    ci_level: float
    sigma2_trace: np.ndarray
    u_trace: np.ndarray
    seed: int
    stream_id: int
    config: dict = field(default_factory=dict)
    method: str = "lasso"


def sample_beta_lasso(L, ZU, X, Lambda, rng: RngStream) -> np.ndarray:
    """Draw beta ~ N_p(V X^T (L - ZU), V) with V = (X^T X + Lambda^{-1})^{-1}.

    For p > n the draw runs in the n-dimensional dual: with u ~ N_p(0, Lambda)
    and v ~ N_n(X u, I), beta = u + Lambda X^T (X Lambda X^T + I)^{-1}(t - v)
    has exactly the target law (Woodbury); otherwise the p x p precision is
    factorized directly.
    """
    X = np.asarray(X, dtype=float)
    Lambda = np.asarray(Lambda, dtype=float)
    if Lambda.ndim != 1 or Lambda.shape[0] != X.shape[1] or np.any(Lambda <= 0):
        raise ValueError("Lambda must be the positive diagonal of the prior covariance")
    target = np.asarray(L, dtype=float) - np.asarray(ZU, dtype=float)
    if X.shape[1] > X.shape[0]:
        return _sample_beta_lasso_dual(X, target, Lambda, rng)
    return _sample_beta_lasso_pre(X.T @ X, X.T @ target, Lambda, rng)


def _sample_beta_lasso_pre(XtX, rhs, Lambda, rng: RngStream) -> np.ndarray:
    precision = XtX + np.diag(1.0 / Lambda)
    factor = spd_factorize(precision)
    y = solve_triangular(factor.lower, rhs, lower=True, check_finite=False)
    mean = solve_triangular(factor.lower.T, y, lower=False, check_finite=False)
    return sample_mvn(mean, factor, rng)


def _sample_beta_lasso_dual(X, target, Lambda, rng: RngStream) -> np.ndarray:
    n, p = X.shape
    u = np.sqrt(Lambda) * rng.gen.standard_normal(p)
    v = X @ u + rng.gen.standard_normal(n)
    XL = X * Lambda
    M = XL @ X.T
    M[np.diag_indices(n)] += 1.0
    low = np.linalg.cholesky(M)
    y = solve_triangular(low, target - v, lower=True, check_finite=False)
    w = solve_triangular(low.T, y, lower=False, check_finite=False)
    return u + XL.T @ w


def sample_lambda_inverse(beta, delta, rng: RngStream) -> np.ndarray:
    """Draw each lambda_j from its conditional via 1/lambda_j ~ IGauss.

    The inverse-Gaussian mean is sqrt(delta)/|beta_j| (absolute value keeps
    the mean positive) with shape delta; |beta_j| is floored at BETA_FLOOR.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    babs = np.maximum(np.abs(np.asarray(beta, dtype=float)), BETA_FLOOR)
    inv = np.atleast_1d(sample_inverse_gaussian(np.sqrt(delta) / babs, delta, rng))
    # The wald transform cancels catastrophically once mean/shape is huge
    # (|beta_j| near the floor) and can emit 0, inf, or negative draws.
    # In that regime IGauss(mu, s) -> Levy(s), i.e. s / chi^2_1.
    bad = ~np.isfinite(inv) | (inv <= 0.0)
    if np.any(bad):
        y = rng.gen.standard_normal(int(bad.sum())) ** 2
        inv[bad] = delta / np.maximum(y, 1e-300)
    return 1.0 / inv


def sample_delta(lambda_j, e, f, rng: RngStream) -> float:
    """Draw delta ~ Gamma(p + e, scale (sum lambda_j / 2 + 1/f)^{-1})."""
    lambda_j = np.asarray(lambda_j, dtype=float)
    if np.any(lambda_j <= 0):
        raise ValueError("lambda_j must be positive")
    shape = lambda_j.size + e
    scale = 1.0 / (lambda_j.sum() / 2.0 + 1.0 / f)
    return float(rng.gen.gamma(shape, scale))


def run_lasso_chain(data: Dataset, config: LassoConfig) -> LassoOutput:
    """Run one Bayesian Lasso chain; sweep order L -> U -> sigma^2 -> beta
    -> {1/lambda_j} -> delta."""
    config.validate()
    hyper = config.hyper
    p, n, q = data.p, data.n, data.q
    rng = RngStream(config.seed, config.stream_id)
    gen = rng.gen

    beta = np.zeros(p)
    lambda_j = np.ones(p)
    delta = 1.0
    U = np.zeros(q)
    sigma2 = np.ones(len(data.block_sizes))
    expand = np.repeat(np.arange(len(data.block_sizes)), data.block_sizes)
    signs = 2.0 * data.Y - 1.0
    dual = p > n
    XtX = None if dual else data.X.T @ data.X

    total = config.burn_in + config.post_burn_in
    beta_trace = np.zeros((config.post_burn_in, p))
    lambda_sum = np.zeros(p)
    delta_sum = 0.0
    sigma2_trace = np.zeros((config.post_burn_in, len(data.block_sizes)))
    u_trace = np.zeros((config.post_burn_in, q))

    for sweep in range(total):
        try:
            centers = data.X @ beta
            if q:
                centers = centers + data.Z @ U
            L = _truncated_at_zero(centers, 1.0, signs, gen)
            if q:
                U = sample_random_effects(L, data.X, beta, data.Z, sigma2[expand], rng)
                sigma2 = sample_variances(
                    U, data.block_sizes, hyper.ig_shape, hyper.ig_scale, rng
                )
                resid = L - data.Z @ U
            else:
                resid = L
            if dual:
                beta = _sample_beta_lasso_dual(data.X, resid, lambda_j, rng)
            else:
                beta = _sample_beta_lasso_pre(XtX, data.X.T @ resid, lambda_j, rng)
            lambda_j = sample_lambda_inverse(beta, delta, rng)
            delta = sample_delta(lambda_j, hyper.e, hyper.f, rng)
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise ChainNumericError(sweep, exc) from exc
        post = sweep - config.burn_in
        if post >= 0:
            beta_trace[post] = beta
            lambda_sum += lambda_j
            delta_sum += delta
            sigma2_trace[post] = sigma2
            u_trace[post] = U

    alpha = (1.0 - config.ci_level) / 2.0
    beta_ci = np.quantile(beta_trace, [alpha, 1.0 - alpha], axis=0).T
    return LassoOutput(
        beta_mean=beta_trace.mean(axis=0),
        lambda_mean=lambda_sum / config.post_burn_in,
        delta_mean=delta_sum / config.post_burn_in,
        beta_ci=beta_ci,
        ci_level=config.ci_level,
        sigma2_trace=sigma2_trace,
        u_trace=u_trace,
        seed=config.seed,
        stream_id=config.stream_id,
        config=config.echo(),
        method="lasso",
    )
