"""Independent slow-path verifiers for the integrated gamma conditional.

quadrature_gamma_marginal integrates the joint density over beta_gamma on a
whitened Simpson grid; enumerate_gamma_posterior normalizes the integrated
density over all 2^p models at toy scale. Both exist only to check the
fast log-density code and the Metropolis kernel against something that
cannot share their algebra shortcuts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import Dataset, GammaVector, RidgeHyper, log_integrated_gamma_density

QUAD_POINTS = 201  # composite Simpson per dimension, after whitening
QUAD_HALF_WIDTH = 12.0  # integration half-width in posterior sd units


@dataclass
class OracleReport:
    """Fast-path value versus oracle value for one comparison."""

    fast_value: float
    oracle_value: float
    abs_error: float
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "fast_value": self.fast_value,
                "oracle_value": self.oracle_value,
                "abs_error": self.abs_error,
                "config": self.config,
            },
            sort_keys=True,
        )


def _simpson_log_weights(m: int, h: float) -> np.ndarray:
    # composite Simpson coefficients h/3 * (1, 4, 2, ..., 2, 4, 1)
    if m % 2 == 0:
        raise ValueError("Simpson rule needs an odd point count")
    w = np.full(m, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return np.log(w * h / 3.0)


def quadrature_gamma_marginal(
    gamma: GammaVector,
    L: np.ndarray,
    ZU: np.ndarray,
    data: Dataset,
    hyper: RidgeHyper,
) -> float:
    """log integral over beta_gamma of the joint gamma conditional, d_gamma <= 2.

    Matches log_integrated_gamma_density up to a gamma-independent additive
    constant; compare differences between two gamma values.
    """
    idx = gamma.active
    d = idx.size
    if d > 2:
        raise ValueError("quadrature oracle supports d_gamma <= 2 only")
    r = np.asarray(L, dtype=float) - np.asarray(ZU, dtype=float)
    pi = hyper.pi_vector(data.p)
    bits = gamma.bits
    prior = float(np.sum(bits * np.log(pi) + (1 - bits) * np.log1p(-pi)))
    if d == 0:
        return -0.5 * float(r @ r) + prior

    Xg = data.X[:, idx]
    P1 = Xg.T @ Xg / hyper.tau + hyper.lam * np.eye(d)
    sign1, logdet1 = np.linalg.slogdet(P1)
    assert sign1 > 0
    # posterior precision only supplies the whitening frame for the grid
    P2 = P1 + Xg.T @ Xg
    cov = np.linalg.inv(P2)
    mode = cov @ (Xg.T @ r)
    A = np.linalg.cholesky(cov)

    grid = np.linspace(-QUAD_HALF_WIDTH, QUAD_HALF_WIDTH, QUAD_POINTS)
    h = grid[1] - grid[0]
    logw1 = _simpson_log_weights(QUAD_POINTS, h)
    if d == 1:
        u = grid[:, None]
        logw = logw1
    else:
        u = np.stack(
            [g.ravel() for g in np.meshgrid(grid, grid, indexing="ij")], axis=1
        )
        logw = (logw1[:, None] + logw1[None, :]).ravel()
    betas = mode[None, :] + u @ A.T
    resid = r[None, :] - betas @ Xg.T
    log_joint = -0.5 * np.einsum("ij,ij->i", resid, resid)
    log_joint -= 0.5 * np.einsum("ij,jk,ik->i", betas, P1, betas)
    # change of variables: d beta = |det A| d u
    log_det_A = float(np.sum(np.log(np.diag(A))))
    log_integral = float(logsumexp(log_joint + logw)) + log_det_A
    # prior normalizer (2 pi)^{-d/2} |Sigma|^{-1/2} with |Sigma| = 1/det(P1)
    return (
        log_integral
        - 0.5 * d * np.log(2.0 * np.pi)
        + 0.5 * logdet1
        + prior
    )


def enumerate_gamma_posterior(
    data: Dataset,
    hyper: RidgeHyper,
    L: np.ndarray,
    ZU: np.ndarray,
) -> np.ndarray:
    """Exact posterior over all 2^p models (p <= 12), indexed by bitmask.

    Entry k is the probability of the model whose active set is the bit
    pattern of k; this is the target distribution of the inner Metropolis
    loop at fixed (L, U).
    """
    p = data.p
    if p > 12:
        raise ValueError("exhaustive enumeration supports p <= 12 only")
    logs = np.empty(2**p)
    for mask in range(2**p):
        bits = np.fromiter(((mask >> j) & 1 for j in range(p)), dtype=np.int8, count=p)
        logs[mask] = log_integrated_gamma_density(
            GammaVector(bits), L, ZU, data, hyper
        )
    logs -= logsumexp(logs)
    return np.exp(logs)
