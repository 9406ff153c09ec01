"""Metropolis-within-Gibbs sampler for SSVS under the ridge g-prior.

Each Gibbs sweep cycles L -> U -> sigma^2 -> gamma (inner Metropolis loop
on the integrated conditional, beta integrated out) -> beta. The gamma
conditional depends on (L, U) only through w = X^T (L - ZU), so the inner
loop precomputes per-variable log acceptance ratios for all single-bit
flips and revalidates them only when a proposal is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import RngStream, spd_factorize, sample_mvn, sample_inverse_gamma, _truncated_at_zero
from .model import (
    Dataset,
    GammaVector,
    RidgeHyper,
    SsvsState,
    posterior_coef_precision,
)

# Proposals are drawn in blocks between accepted flips; 128 comfortably
# covers typical acceptance gaps without wasting draws on tiny models.
_PROPOSAL_BLOCK = 128


class ChainNumericError(RuntimeError):
    """Numeric failure inside a Gibbs sweep, tagged with the sweep index."""

    def __init__(self, sweep: int, original: Exception):
        super().__init__(f"numeric failure at sweep {sweep}: {original}")
        self.sweep = sweep
        self.original = original


@dataclass
class SsvsConfig:
    """Run-length, proposal and prior settings for one SSVS chain."""

    hyper: RidgeHyper
    burn_in: int = 1000
    post_burn_in: int = 4000
    mh_inner_iters: int = 500
    flip_count: int = 1
    init_model_size: int = 5
    seed: int = 0
    stream_id: int = 0
    init_gamma: np.ndarray | None = None

    def validate(self, p: int):
        if self.burn_in < 0 or self.post_burn_in < 1:
            raise ValueError("burn_in must be >= 0 and post_burn_in >= 1")
        if self.mh_inner_iters < 1:
            raise ValueError("mh_inner_iters must be >= 1")
        # flip_count 0 is the identity-proposal test hook
        if not 0 <= self.flip_count <= p:
            raise ValueError("flip_count must lie in [0, p]")
        if self.init_gamma is None and not 0 <= self.init_model_size <= p:
            raise ValueError("init_model_size must lie in [0, p]")
        if self.init_gamma is not None:
            ig = np.asarray(self.init_gamma, dtype=int)
            if ig.size and (ig.min() < 0 or ig.max() >= p or np.unique(ig).size != ig.size):
                raise ValueError("init_gamma must be distinct indices below p")
        self.hyper.pi_vector(p)

    def echo(self) -> dict:
        out = asdict(self)
        out["hyper"]["pi"] = np.asarray(out["hyper"]["pi"]).tolist()
        if out["init_gamma"] is not None:
            out["init_gamma"] = np.asarray(out["init_gamma"]).tolist()
        return out


@dataclass
class ChainOutput:
    """Everything post-processing needs from one finished chain."""

    selection_counts: np.ndarray
    gamma_trace: list
    model_size_trace: np.ndarray
    sigma2_trace: np.ndarray
    u_trace: np.ndarray
    beta_mean: np.ndarray
    acceptance_rate: float
    accept_count: int
    proposal_count: int
    seed: int
    stream_id: int
    config: dict = field(default_factory=dict)
    method: str = "ssvs"


def sample_latent(L, Y, X_active, beta_gamma, Z, U, rng: RngStream) -> np.ndarray:
    """Redraw every latent liability from its truncated-normal conditional.

    L_i ~ N(X_i beta + Z_i U, 1) restricted to (0, inf) when Y_i = 1 and to
    (-inf, 0) when Y_i = 0; the previous L enters only through its shape.
    """
    Y = np.asarray(Y)
    centers = np.zeros(Y.shape[0])
    if beta_gamma is not None and np.size(beta_gamma):
        centers = centers + np.asarray(X_active, dtype=float) @ np.asarray(beta_gamma, dtype=float)
    if U is not None and np.size(U):
        centers = centers + np.asarray(Z, dtype=float) @ np.asarray(U, dtype=float)
    signs = 2.0 * Y - 1.0
    return _truncated_at_zero(centers, 1.0, signs, rng.gen)


def sample_random_effects(L, X_active, beta_gamma, Z, D, rng: RngStream) -> np.ndarray:
    """Draw U ~ N_q(W Z^T (L - X beta), W) with W = (Z^T Z + D^{-1})^{-1}.

    D is the diagonal of the random-effect prior covariance (q-vector).
    """
    Z = np.asarray(Z, dtype=float)
    q = Z.shape[1]
    if q == 0:
        return np.zeros(0)
    D = np.asarray(D, dtype=float)
    if D.shape != (q,) or np.any(D <= 0):
        raise ValueError("D must be a positive q-vector (diagonal of the prior covariance)")
    resid = np.asarray(L, dtype=float)
    if beta_gamma is not None and np.size(beta_gamma):
        resid = resid - np.asarray(X_active, dtype=float) @ np.asarray(beta_gamma, dtype=float)
    precision = Z.T @ Z + np.diag(1.0 / D)
    factor = spd_factorize(precision)
    y = solve_triangular(factor.lower, Z.T @ resid, lower=True, check_finite=False)
    mean = solve_triangular(factor.lower.T, y, lower=False, check_finite=False)
    return sample_mvn(mean, factor, rng)


def sample_variances(U, block_sizes, ig_shape, ig_scale, rng: RngStream) -> np.ndarray:
    """Draw each sigma_l^2 from IG(q_l / 2 + a, ||U_l||^2 / 2 + b)."""
    U = np.asarray(U, dtype=float)
    sizes = np.asarray(block_sizes, dtype=int)
    if sizes.sum() != U.size:
        raise ValueError("block sizes must partition U")
    if sizes.size == 0:
        return np.zeros(0)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    ssq = np.add.reduceat(U * U, starts) if U.size else np.zeros(len(sizes))
    shape = sizes / 2.0 + ig_shape
    scale = ssq / 2.0 + ig_scale
    return np.atleast_1d(sample_inverse_gamma(shape, scale, rng))


def propose_gamma(gamma: GammaVector, r: int, rng: RngStream) -> GammaVector:
    """Flip r uniformly chosen distinct positions of gamma (symmetric kernel)."""
    p = gamma.p
    if not 0 <= r <= p:
        raise ValueError("r must lie in [0, p]")
    bits = gamma.bits.copy()
    if r:
        flip = rng.gen.choice(p, size=r, replace=False)
        bits[flip] = 1 - bits[flip]
    return GammaVector(bits)


class _GammaSampler:
    """Inner Metropolis machinery for gamma with beta integrated out.

    Holds the dataset-level precomputations (the p x p Gram matrix, prior
    log odds) and, per rebuild, the Cholesky factors of the active-set
    prior/posterior precisions plus the vector of log acceptance ratios
    for every single-bit flip. A rebuild costs two (d x p) triangular
    solves; proposals between accepted flips cost O(1) table lookups.
    """

    def __init__(self, data: Dataset, hyper: RidgeHyper):
        self.p = data.p
        self.G = data.X.T @ data.X
        self.diag_G = np.diag(self.G).copy()
        self.lam = hyper.lam
        self.c0 = 1.0 / hyper.tau
        self.c1 = (1.0 + hyper.tau) / hyper.tau
        pi = hyper.pi_vector(data.p)
        self.log_odds = np.log(pi) - np.log1p(-pi)
        self.idx = None
        self._key = None

    # -- state rebuild ----------------------------------------------------

    def rebuild(self, idx: np.ndarray, w: np.ndarray):
        p = self.p
        idx = np.sort(np.asarray(idx, dtype=np.intp))
        d = idx.size
        lam, c0, c1 = self.lam, self.c0, self.c1
        if d:
            Gaa = self.G[np.ix_(idx, idx)]
            eye = np.eye(d)
            L1 = np.linalg.cholesky(c0 * Gaa + lam * eye)
            L2 = np.linalg.cholesky(c1 * Gaa + lam * eye)
            wa = w[idx]
            y2 = solve_triangular(L2, wa, lower=True, check_finite=False)
            K1 = solve_triangular(L1, eye, lower=True, check_finite=False)
            K2 = solve_triangular(L2, eye, lower=True, check_finite=False)
            M2 = K2.T @ K2
            v2 = M2 @ wa
            m1diag = np.einsum("ij,ij->j", K1, K1)
            m2diag = np.diag(M2).copy()
            rows = self.G[idx, :]
            T1 = solve_triangular(L1, c0 * rows, lower=True, check_finite=False)
            T2 = solve_triangular(L2, c1 * rows, lower=True, check_finite=False)
            s1 = c0 * self.diag_G + lam - np.einsum("ij,ij->j", T1, T1)
            s2 = c1 * self.diag_G + lam - np.einsum("ij,ij->j", T2, T2)
            wt = w - T2.T @ y2
        else:
            L2 = np.zeros((0, 0))
            M2 = np.zeros((0, 0))
            s1 = c0 * self.diag_G + lam
            s2 = c1 * self.diag_G + lam
            wt = w
        # mathematically s >= lam > 0; the floor only absorbs cancellation noise
        s1 = np.maximum(s1, 1e-14 * (c0 * self.diag_G + lam))
        s2 = np.maximum(s2, 1e-14 * (c1 * self.diag_G + lam))
        delta = 0.5 * (np.log(s1) - np.log(s2)) + 0.5 * wt * wt / s2 + self.log_odds
        if d:
            delta[idx] = (
                0.5 * np.log(m1diag)
                - 0.5 * np.log(m2diag)
                - 0.5 * v2 * v2 / m2diag
                - self.log_odds[idx]
            )
        self.idx = idx
        self.L2 = L2
        self.M2 = M2
        self.delta = delta
        self._key = None

    def key(self) -> int:
        """Bitmask of the active set (visit counting; needs p <= 63)."""
        if self._key is None:
            k = 0
            for j in self.idx:
                k |= 1 << int(j)
            self._key = k
        return self._key

    def flip(self, j: int, w: np.ndarray):
        if (self.idx == j).any():
            idx = self.idx[self.idx != j]
        else:
            idx = np.append(self.idx, j)
        self.rebuild(idx, w)

    # -- inner Metropolis loop --------------------------------------------

    def update(self, w: np.ndarray, iters: int, gen: np.random.Generator,
               visit: dict | None = None) -> int:
        """Run `iters` single-flip proposals; returns the acceptance count.

        Between accepted flips the chain state is constant, so proposals are
        screened in vectorized blocks against the cached delta table; the
        table is rebuilt after each accepted flip.
        """
        accepts = 0
        remaining = iters
        while remaining > 0:
            m = min(remaining, _PROPOSAL_BLOCK)
            js = gen.integers(0, self.p, size=m)
            logu = np.log(gen.random(m))
            acc = logu < self.delta[js]
            if not acc.any():
                if visit is not None:
                    visit[self.key()] = visit.get(self.key(), 0) + m
                remaining -= m
                continue
            hit = int(np.argmax(acc))
            if visit is not None and hit:
                visit[self.key()] = visit.get(self.key(), 0) + hit
            self.flip(int(js[hit]), w)
            accepts += 1
            if visit is not None:
                visit[self.key()] = visit.get(self.key(), 0) + 1
            remaining -= hit + 1
        return accepts

    def draw_beta(self, w: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        """beta_gamma ~ N(V w_a, V) reusing the cached posterior factor."""
        d = self.idx.size
        if d == 0:
            return np.zeros(0)
        mean = self.M2 @ w[self.idx]
        z = gen.standard_normal(d)
        return mean + solve_triangular(self.L2.T, z, lower=False, check_finite=False)

    # -- slow reference path (r > 1 proposals, tests) ----------------------

    def logpdf_active(self, idx: np.ndarray, w: np.ndarray) -> float:
        """Integrated log density at an active set, dropping gamma-free terms."""
        idx = np.asarray(idx, dtype=np.intp)
        d = idx.size
        prior = float(self.log_odds[idx].sum())
        if d == 0:
            return prior
        Gaa = self.G[np.ix_(idx, idx)]
        eye = np.eye(d)
        L1 = np.linalg.cholesky(self.c0 * Gaa + self.lam * eye)
        L2 = np.linalg.cholesky(self.c1 * Gaa + self.lam * eye)
        y = solve_triangular(L2, w[idx], lower=True, check_finite=False)
        ld1 = 2.0 * float(np.sum(np.log(np.diag(L1))))
        ld2 = 2.0 * float(np.sum(np.log(np.diag(L2))))
        return 0.5 * (ld1 - ld2) + 0.5 * float(y @ y) + prior

    def update_generic(self, w: np.ndarray, iters: int, r: int,
                       gen: np.random.Generator, visit: dict | None = None) -> int:
        """Direct-evaluation loop for r-bit flips (r >= 1), any r."""
        accepts = 0
        mask = np.zeros(self.p, dtype=bool)
        mask[self.idx] = True
        cur = self.logpdf_active(self.idx, w)
        for _ in range(iters):
            flip = gen.choice(self.p, size=r, replace=False)
            cand_mask = mask.copy()
            cand_mask[flip] = ~cand_mask[flip]
            cand_idx = np.flatnonzero(cand_mask)
            cand = self.logpdf_active(cand_idx, w)
            if np.log(gen.random()) < cand - cur:
                mask = cand_mask
                cur = cand
                accepts += 1
            if visit is not None:
                key = 0
                for j in np.flatnonzero(mask):
                    key |= 1 << int(j)
                visit[key] = visit.get(key, 0) + 1
        self.rebuild(np.flatnonzero(mask), w)
        return accepts


def mh_gamma_update(
    state: SsvsState,
    data: Dataset,
    config: SsvsConfig,
    rng: RngStream,
    visit_counter: dict | None = None,
) -> tuple[GammaVector, int]:
    """Run the inner Metropolis loop on gamma with L and U held fixed.

    Returns the final gamma and the number of accepted proposals. beta never
    enters: the target is the integrated conditional f(gamma | L, U).
    visit_counter, if given, accumulates bitmask -> iteration counts of the
    model visited after each proposal decision (requires p <= 63).
    """
    config.validate(data.p)
    sampler = _GammaSampler(data, config.hyper)
    ZU = data.Z @ state.U if data.q else np.zeros(data.n)
    w = data.X.T @ (state.L - ZU)
    sampler.rebuild(state.gamma.active, w)
    accepts = _run_inner(sampler, w, config, rng.gen, visit_counter)
    return GammaVector.from_active(sampler.idx, data.p), accepts


def _run_inner(sampler: _GammaSampler, w: np.ndarray, config: SsvsConfig,
               gen: np.random.Generator, visit: dict | None = None) -> int:
    iters = config.mh_inner_iters
    r = config.flip_count
    if r == 0:
        # identity proposal: ratio 1, always accepted, gamma unchanged
        if visit is not None:
            visit[sampler.key()] = visit.get(sampler.key(), 0) + iters
        return iters
    if r == 1:
        return sampler.update(w, iters, gen, visit)
    return sampler.update_generic(w, iters, r, gen, visit)


def sample_beta(gamma: GammaVector, L, ZU, data: Dataset, hyper: RidgeHyper,
                rng: RngStream) -> np.ndarray:
    """Draw beta_gamma ~ N(V_gamma X_gamma^T (L - ZU), V_gamma)."""
    idx = gamma.active
    if idx.size == 0:
        return np.zeros(0)
    Xg = data.X[:, idx]
    factor = spd_factorize(posterior_coef_precision(Xg, hyper.tau, hyper.lam))
    w = Xg.T @ (np.asarray(L, dtype=float) - np.asarray(ZU, dtype=float))
    y = solve_triangular(factor.lower, w, lower=True, check_finite=False)
    mean = solve_triangular(factor.lower.T, y, lower=False, check_finite=False)
    return sample_mvn(mean, factor, rng)


def run_ssvs_chain(data: Dataset, config: SsvsConfig) -> ChainOutput:
    """Run one full SSVS chain and collect post-burn-in summaries.

    Sweep order: L -> U -> sigma^2 -> inner MH on gamma -> beta. Selection
    counts tally the gamma state once per post-burn-in sweep.
    """
    p, n, q = data.p, data.n, data.q
    config.validate(p)
    hyper = config.hyper
    rng = RngStream(config.seed, config.stream_id)
    gen = rng.gen

    if config.init_gamma is not None:
        idx = np.sort(np.asarray(config.init_gamma, dtype=np.intp))
    else:
        idx = np.sort(gen.choice(p, size=config.init_model_size, replace=False))
    beta = np.zeros(idx.size)
    U = np.zeros(q)
    sigma2 = np.ones(len(data.block_sizes))
    expand = np.repeat(np.arange(len(data.block_sizes)), data.block_sizes)
    signs = 2.0 * data.Y - 1.0

    sampler = _GammaSampler(data, hyper)
    total = config.burn_in + config.post_burn_in
    selection_counts = np.zeros(p, dtype=np.int64)
    beta_sum = np.zeros(p)
    gamma_trace = []
    model_size_trace = np.zeros(config.post_burn_in, dtype=np.int64)
    sigma2_trace = np.zeros((config.post_burn_in, len(data.block_sizes)))
    u_trace = np.zeros((config.post_burn_in, q))
    accept_count = 0

    for sweep in range(total):
        try:
            centers = data.X[:, idx] @ beta if idx.size else np.zeros(n)
            if q:
                centers = centers + data.Z @ U
            L = _truncated_at_zero(centers, 1.0, signs, gen)
            if q:
                U = sample_random_effects(
                    L, data.X[:, idx], beta, data.Z, sigma2[expand], rng
                )
                sigma2 = sample_variances(
                    U, data.block_sizes, hyper.ig_shape, hyper.ig_scale, rng
                )
                ZU = data.Z @ U
                w = data.X.T @ (L - ZU)
            else:
                w = data.X.T @ L
            sampler.rebuild(idx, w)
            accept_count += _run_inner(sampler, w, config, gen)
            idx = sampler.idx
            beta = sampler.draw_beta(w, gen)
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise ChainNumericError(sweep, exc) from exc
        post = sweep - config.burn_in
        if post >= 0:
            selection_counts[idx] += 1
            beta_sum[idx] += beta
            gamma_trace.append(idx.copy())
            model_size_trace[post] = idx.size
            sigma2_trace[post] = sigma2
            u_trace[post] = U

    proposals = total * config.mh_inner_iters
    return ChainOutput(
        selection_counts=selection_counts,
        gamma_trace=gamma_trace,
        model_size_trace=model_size_trace,
        sigma2_trace=sigma2_trace,
        u_trace=u_trace,
        beta_mean=beta_sum / config.post_burn_in,
        acceptance_rate=accept_count / proposals,
        accept_count=accept_count,
        proposal_count=proposals,
        seed=config.seed,
        stream_id=config.stream_id,
        config=config.echo(),
        method="ssvs",
    )
