"""Final selections, stability scoring and predictive refits.

Selection counts from SSVS chains (or posterior summaries from Lasso
chains) are turned into final variable subsets, subsets from repeated runs
are scored with the relative weighted consistency measure, and a selected
subset can be refit as a fixed-support probit mixed model to obtain
sensitivity and specificity on validation data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .blasso import LassoOutput
from .model import Dataset, RidgeHyper, calibrate_tau, default_lambda
from .ssvs import ChainOutput, SsvsConfig, run_ssvs_chain

GAP_WINDOW = 50
GAP_DOMINANCE = 2.0


@dataclass
class SelectionResult:
    """One final variable selection with the evidence that produced it."""

    selected: set
    counts: np.ndarray
    threshold_used: float
    method: str


@dataclass
class StabilityReport:
    cw_rel: float
    run_count: int
    subsets: list = field(default_factory=list)


@dataclass
class RefitConfig:
    """Settings for the fixed-support refit used in prediction."""

    burn_in: int = 500
    post_burn_in: int = 2000
    tau0: float = 50.0
    epsilon: float = 0.0
    ig_shape: float = 1.0
    ig_scale: float = 1.0
    seed: int = 0
    stream_id: int = 0


def final_selection(counts, mode: str = "gap", threshold: float | None = None,
                    window: int = GAP_WINDOW, dominance: float = GAP_DOMINANCE
                    ) -> SelectionResult:
    """Turn per-variable selection counts into a final subset.

    mode "fixed" keeps counts > threshold. mode "gap" sorts counts
    descending and cuts at the largest consecutive difference within the
    top min(p, window) entries, provided that difference exceeds
    `dominance` times the second largest; otherwise no variable stands out
    and the selection is empty. The rule is invariant under adding a
    constant to all counts.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or np.any(counts < 0):
        raise ValueError("counts must be a nonnegative vector")
    if mode == "fixed":
        if threshold is None:
            raise ValueError("fixed mode needs a threshold")
        selected = set(np.flatnonzero(counts > threshold).tolist())
        return SelectionResult(selected, counts, float(threshold), "fixed_threshold")
    if mode != "gap":
        raise ValueError(f"unknown selection mode: {mode!r}")
    p = counts.size
    cut = float(counts.max()) if p else 0.0  # empty selection by default
    if p >= 2:
        top = np.sort(counts)[::-1][: min(p, window)]
        gaps = top[:-1] - top[1:]
        order = np.argsort(-gaps, kind="stable")  # ties: highest-count gap wins
        largest = gaps[order[0]]
        second = gaps[order[1]] if gaps.size > 1 else 0.0
        if largest > 0 and largest > dominance * second:
            cut = float(top[order[0] + 1])
    selected = set(np.flatnonzero(counts > cut).tolist())
    return SelectionResult(selected, counts, cut, "gap")


def lasso_select(output: LassoOutput, rule: str, threshold: float | None = None
                 ) -> SelectionResult:
    """Select variables from a Lasso chain by one of the three rules.

    beta_magnitude keeps |posterior mean beta_j| > threshold,
    lambda_magnitude keeps posterior mean lambda_j > threshold, and
    credible_interval keeps coefficients whose equal-tailed interval
    (at the level the chain was run with) excludes 0.
    """
    if rule == "beta_magnitude":
        if threshold is None:
            raise ValueError("beta_magnitude needs a threshold")
        scores = np.abs(output.beta_mean)
        selected = set(np.flatnonzero(scores > threshold).tolist())
        return SelectionResult(selected, scores, float(threshold), rule)
    if rule == "lambda_magnitude":
        if threshold is None:
            raise ValueError("lambda_magnitude needs a threshold")
        scores = output.lambda_mean
        selected = set(np.flatnonzero(scores > threshold).tolist())
        return SelectionResult(selected, scores, float(threshold), rule)
    if rule == "credible_interval":
        if threshold is not None and not np.isclose(threshold, output.ci_level):
            raise ValueError(
                "credible_interval uses the level the chain was run with "
                f"({output.ci_level}); rerun the chain to change it"
            )
        lo, hi = output.beta_ci[:, 0], output.beta_ci[:, 1]
        scores = ((lo > 0) | (hi < 0)).astype(float)
        selected = set(np.flatnonzero(scores > 0.5).tolist())
        return SelectionResult(selected, scores, 0.5, rule)
    raise ValueError(f"unknown selection rule: {rule!r}")


def cw_rel(subsets, p: int) -> float:
    """Relative weighted consistency of selected subsets across runs.

    CW = sum_f F_f (F_f - 1) / (N (n - 1)) over feature occurrence counts
    F_f with N = sum F_f and n runs, rescaled to [0, 1] by the analytic
    extremes for the given (N, n, p): with H = N mod n,
    CW_max = (H^2 + N(n-1) - Hn) / (N(n-1)), and with D = N mod p,
    CW_min = (N^2 - p(N - D) - D^2) / (p N (n-1)).
    """
    subsets = [set(int(j) for j in s) for s in subsets]
    n = len(subsets)
    if n < 2:
        raise ValueError("cw_rel needs at least 2 subsets")
    if any(j < 0 or j >= p for s in subsets for j in s):
        raise ValueError("subset indices must lie below p")
    N = sum(len(s) for s in subsets)
    if N == 0:
        return 0.0  # no variable ever selected: nothing is consistent
    occ = {}
    for s in subsets:
        for j in s:
            occ[j] = occ.get(j, 0) + 1
    counts = np.array(list(occ.values()), dtype=float)
    cw = float(np.sum(counts * (counts - 1.0))) / (N * (n - 1))
    H = N % n
    cw_max = (H * H + N * (n - 1) - H * n) / (N * (n - 1))
    D = N % p
    cw_min = (N * N - p * (N - D) - D * D) / (p * N * (n - 1))
    if cw_max - cw_min < 1e-12:
        return 1.0 if cw >= cw_max - 1e-12 else 0.0
    value = (cw - cw_min) / (cw_max - cw_min)
    return float(min(1.0, max(0.0, value)))


def full_rank_submatrix(X_sel: np.ndarray) -> list:
    """Greedy left-to-right maximal independent column subset.

    A column joins the kept set when it lifts the numerical rank, judged by
    singular values above 1e-8 times the largest singular value of X_sel.
    """
    X_sel = np.asarray(X_sel, dtype=float)
    if X_sel.ndim != 2 or X_sel.shape[1] < 1:
        raise ValueError("X_sel must have at least one column")
    svals = np.linalg.svd(X_sel, compute_uv=False)
    if svals.size == 0 or svals[0] <= 0.0:
        return []
    tol = 1e-8 * svals[0]
    kept = []
    rank = 0
    for j in range(X_sel.shape[1]):
        trial = X_sel[:, kept + [j]]
        trial_rank = int(np.sum(np.linalg.svd(trial, compute_uv=False) > tol))
        if trial_rank > rank:
            kept.append(j)
            rank = trial_rank
    return kept


def refit_and_predict(train: Dataset, selected, valid: Dataset,
                      refit_config: RefitConfig | None = None
                      ) -> tuple[float, float]:
    """Refit a fixed-support probit mixed model and score it on validation.

    The selected set is first reduced to a full-rank column subset, then the
    Gibbs machinery runs with gamma frozen to that subset (no Metropolis
    step). Point estimates are posterior means; predictions are
    yhat_i = 1{Phi(x_i beta + z_i U) > 0.5}. Returns (sensitivity,
    specificity) on the validation set.
    """
    cfg = refit_config or RefitConfig()
    sel = sorted(int(j) for j in selected)
    if not sel:
        raise ValueError("selected set must be nonempty")
    keep = full_rank_submatrix(train.X[:, sel])
    sub = [sel[i] for i in keep]
    if not sub:
        raise ValueError("selected columns are all zero after rank reduction")

    sub_train = Dataset(
        X=train.X[:, sub],
        Z=train.Z,
        Y=train.Y,
        block_sizes=train.block_sizes,
        variable_names=[train.variable_names[j] for j in sub],
    )
    d = len(sub)
    lam = default_lambda(d, cfg.epsilon)
    tau = calibrate_tau(cfg.tau0, sub_train.trace_xtx, d, lam)
    hyper = RidgeHyper(tau0=cfg.tau0, tau=tau, lam=lam, pi=np.full(d, 0.5),
                       ig_shape=cfg.ig_shape, ig_scale=cfg.ig_scale)
    config = SsvsConfig(
        hyper=hyper,
        burn_in=cfg.burn_in,
        post_burn_in=cfg.post_burn_in,
        mh_inner_iters=1,
        flip_count=0,  # gamma frozen: identity proposals only
        init_gamma=np.arange(d),
        seed=cfg.seed,
        stream_id=cfg.stream_id,
    )
    out = run_ssvs_chain(sub_train, config)
    beta_hat = out.beta_mean
    u_hat = out.u_trace.mean(axis=0) if valid.q else np.zeros(0)

    scores = valid.X[:, sub] @ beta_hat
    if valid.q:
        scores = scores + valid.Z @ u_hat
    yhat = (ndtr(scores) > 0.5).astype(int)
    y = valid.Y
    tp = int(np.sum((yhat == 1) & (y == 1)))
    fn = int(np.sum((yhat == 0) & (y == 1)))
    tn = int(np.sum((yhat == 0) & (y == 0)))
    fp = int(np.sum((yhat == 1) & (y == 0)))
    if tp + fn == 0 or tn + fp == 0:
        raise ValueError("validation set must contain both classes")
    return tp / (tp + fn), tn / (tn + fp)
