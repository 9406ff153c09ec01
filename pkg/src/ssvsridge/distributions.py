"""Random samplers and SPD linear-algebra primitives shared by both chains.

Everything here is driven by an explicit RngStream so that chains, inner
Metropolis loops and tests get reproducible, independent randomness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri

# Standardized truncation bound beyond which inverse-CDF sampling loses
# precision; deeper tails switch to exponential rejection.
TAIL_SWITCH = 4.0

_MAX_RESAMPLE_ROUNDS = 10_000

LEFT_TRUNCATED_AT_0 = "left_truncated_at_0"
RIGHT_TRUNCATED_AT_0 = "right_truncated_at_0"


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix expected to be SPD has a non-positive pivot."""

    def __init__(self, pivot_index: int, message: str | None = None):
        self.pivot_index = int(pivot_index)
        super().__init__(
            message
            or f"matrix is numerically singular at pivot index {pivot_index}"
        )


class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Two streams built from the same pair replay the same sequence; distinct
    stream_ids under one seed are statistically independent, so chains can
    run in parallel without sharing state.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 0 <= stream_id < 2**64:
            raise ValueError("stream_id must be an unsigned 64-bit integer")
        self.seed = seed
        self.stream_id = stream_id
        self.gen = np.random.Generator(np.random.Philox(key=[seed, stream_id]))

    def child(self, stream_id: int) -> "RngStream":
        """A fresh stream under the same seed, for per-chain independence."""
        return RngStream(self.seed, stream_id)

    def __repr__(self):  # pragma: no cover
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass
class SpdFactor:
    """Lower Cholesky factor of an SPD matrix together with its log-determinant."""

    lower: np.ndarray
    log_det: float

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def spd_factorize(matrix: np.ndarray) -> SpdFactor:
    """Cholesky-factorize a symmetric positive-definite matrix.

    Raises SingularMatrixError naming the failing pivot when a pivot falls
    below 1e-12 times the largest diagonal entry (callers are expected to
    ridge-regularize; silent jitter would mask bugs).
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    d = a.shape[0]
    if d == 0:
        return SpdFactor(lower=np.zeros((0, 0)), log_det=0.0)
    if not np.allclose(a, a.T, rtol=1e-8, atol=0.0):
        raise ValueError("matrix must be symmetric")
    tol = 1e-12 * float(np.max(np.diag(a)))
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        _raise_naming_pivot(a)
        raise  # unreachable
    pivots2 = np.diag(lower) ** 2
    bad = np.flatnonzero(pivots2 < tol)
    if bad.size:
        raise SingularMatrixError(int(bad[0]))
    log_det = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return SpdFactor(lower=lower, log_det=log_det)


def _raise_naming_pivot(a: np.ndarray):
    """Slow scalar Cholesky used only to attribute a factorization failure."""
    a = a.copy()
    d = a.shape[0]
    tol = 1e-12 * float(np.max(np.diag(a)))
    for k in range(d):
        pivot = a[k, k]
        if not np.isfinite(pivot) or pivot <= 0.0 or pivot < tol:
            raise SingularMatrixError(k)
        root = np.sqrt(pivot)
        a[k:, k] /= root
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k + 1 :, k])
    raise SingularMatrixError(d - 1)


def _std_lower_truncated(a: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Standard normal draws conditioned on z > a, elementwise.

    Inverse-CDF below TAIL_SWITCH, Robert exponential rejection beyond it.
    Guarantees z > a strictly (floating-point boundary hits are resampled).
    """
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape)
    flat_a = a.ravel()
    flat_out = out.ravel()
    pending = np.arange(flat_a.size)
    for _ in range(_MAX_RESAMPLE_ROUNDS):
        if pending.size == 0:
            return out
        ai = flat_a[pending]
        zi = np.empty(pending.size)
        easy = ai <= TAIL_SWITCH
        if easy.any():
            ae = ai[easy]
            u = gen.random(ae.size)
            # survival-function form keeps tail precision: P(Z > z) = u P(Z > a)
            zi[easy] = -ndtri(u * ndtr(-ae))
        hard = ~easy
        if hard.any():
            ah = ai[hard]
            alpha = 0.5 * (ah + np.sqrt(ah * ah + 4.0))
            z = ah + gen.exponential(size=ah.size) / alpha
            reject = np.log(gen.random(ah.size)) >= -0.5 * (z - alpha) ** 2
            z[reject] = np.nan
            zi[hard] = z
        good = np.isfinite(zi) & (zi > ai)
        flat_out[pending[good]] = zi[good]
        pending = pending[~good]
    raise RuntimeError("truncated-normal sampler failed to converge")


def _truncated_at_zero(
    mean: np.ndarray, sd, sign: np.ndarray, gen: np.random.Generator
) -> np.ndarray:
    """N(mean, sd^2) draws restricted to sign*x > 0, vectorized, strict sign."""
    mean = np.asarray(mean, dtype=float)
    sign = np.broadcast_to(np.asarray(sign, dtype=float), mean.shape)
    sd = np.broadcast_to(np.asarray(sd, dtype=float), mean.shape)
    out = np.empty(mean.shape)
    flat_m = (sign * mean).ravel()
    flat_sd = sd.ravel()
    flat_sign = sign.ravel()
    flat_out = out.ravel()
    pending = np.arange(flat_m.size)
    for _ in range(_MAX_RESAMPLE_ROUNDS):
        if pending.size == 0:
            return out
        m = flat_m[pending]
        s = flat_sd[pending]
        z = _std_lower_truncated(-m / s, gen)
        x = m + s * z
        good = x > 0.0
        flat_out[pending[good]] = flat_sign[pending[good]] * x[good]
        pending = pending[~good]
    raise RuntimeError("truncated-normal sampler failed to converge")


def sample_truncated_normal(mean, sd, side: str, rng: RngStream) -> float:
    """One draw from N(mean, sd^2) restricted to (0, inf) or (-inf, 0).

    side selects the half line: "left_truncated_at_0" keeps x > 0,
    "right_truncated_at_0" keeps x < 0. The sign of the result always
    matches the side, even for |mean|/sd deep in the tail.
    """
    mean = float(mean)
    sd = float(sd)
    if not np.isfinite(mean) or not np.isfinite(sd) or sd <= 0.0:
        raise ValueError("mean must be finite and sd finite and positive")
    if side == LEFT_TRUNCATED_AT_0:
        sign = 1.0
    elif side == RIGHT_TRUNCATED_AT_0:
        sign = -1.0
    else:
        raise ValueError(f"unknown truncation side: {side!r}")
    return float(_truncated_at_zero(np.array([mean]), sd, np.array([sign]), rng.gen)[0])


def sample_mvn(mean: np.ndarray, precision_factor: SpdFactor, rng: RngStream) -> np.ndarray:
    """Multivariate normal draw given the Cholesky factor of the precision.

    If precision = L L^T then x = mean + L^{-T} z has covariance precision^{-1}.
    """
    mean = np.asarray(mean, dtype=float)
    d = precision_factor.dim
    if mean.shape != (d,):
        raise ValueError(
            f"mean has shape {mean.shape}, expected ({d},) to match the factor"
        )
    if d == 0:
        return np.zeros(0)
    z = rng.gen.standard_normal(d)
    return mean + solve_triangular(
        precision_factor.lower, z, lower=True, trans="T", check_finite=False
    )


def sample_inverse_gamma(shape, scale, rng: RngStream):
    """Inverse-gamma draw(s) with density proportional to x^{-shape-1} exp(-scale/x).

    Sampled as the reciprocal of a gamma draw with the matching rate
    convention; shape and scale may be arrays of a common shape.
    """
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if not (np.all(np.isfinite(shape)) and np.all(np.isfinite(scale))):
        raise ValueError("shape and scale must be finite")
    if np.any(shape <= 0.0) or np.any(scale <= 0.0):
        raise ValueError("shape and scale must be positive")
    draw = scale / rng.gen.gamma(shape)
    return float(draw) if draw.ndim == 0 else draw


def sample_inverse_gaussian(mu, shape, rng: RngStream):
    """Inverse-Gaussian draw(s) with mean mu and shape parameter.

    Uses the exact root-transform construction (square of a normal followed
    by a probabilistic root selection); array parameters broadcast.
    """
    mu = np.asarray(mu, dtype=float)
    shape = np.asarray(shape, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(shape))):
        raise ValueError("mu and shape must be finite")
    if np.any(mu <= 0.0) or np.any(shape <= 0.0):
        raise ValueError("mu and shape must be positive")
    draw = rng.gen.wald(mu, shape)
    return float(draw) if draw.ndim == 0 else draw
