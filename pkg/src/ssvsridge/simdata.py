"""Seeded synthetic datasets with engineered collinearity.

Two generators: a 300-variable probit mixed design whose last 20 columns
are exact linear combinations of the first 280, and a smaller
expression-style analog (275 correlated columns plus 3 exact combinations)
with a 3-level grouping effect.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import RngStream
from .model import Dataset

# Analog signal columns (0-based): V148, V260, V263, V273.
ANALOG_SIGNAL_VARS = (147, 259, 262, 272)
# The three constructed columns are combinations of signal columns only,
# so the relevant set is signal plus constructed: V276, V277, V278.
ANALOG_RELEVANT_VARS = ANALOG_SIGNAL_VARS + (275, 276, 277)
ANALOG_SIGNAL_BETA = (1.0, -1.0, 1.0, 1.0)


def _default_collinear_map() -> list:
    """The 20 constructed columns: (target, [(source, coeff), ...]), 0-based."""
    rules = [(280 + i, [(i, 2.0)]) for i in range(10)]
    rules.append((290, [(0, 1.0), (1, 1.0)]))
    rules.append((291, [(2, 1.0), (3, -1.0)]))
    rules.extend((292 + k, [(4 + k, 1.0), (12 + k, 1.0)]) for k in range(8))
    return rules


@dataclass
class SimSpec:
    """Recipe for the simulated probit mixed dataset."""

    n_train: int = 100
    n_valid: int = 100
    p_base: int = 280
    collinear_map: list = field(default_factory=_default_collinear_map)
    true_beta: np.ndarray = field(default_factory=lambda: np.array([1.0, -1.0, 2.0, -2.0, 3.0]))
    true_U: np.ndarray = field(default_factory=lambda: np.array([-3.0, -2.0, 2.0, 3.0]))
    obs_per_level: int = 25
    seed: int = 0

    def __post_init__(self):
        self.true_beta = np.asarray(self.true_beta, dtype=float)
        self.true_U = np.asarray(self.true_U, dtype=float)
        if self.n_train < 1 or self.n_valid < 1 or self.p_base < 1:
            raise ValueError("n_train, n_valid and p_base must be positive")
        if self.true_beta.size > self.p_base:
            raise ValueError("true_beta cannot be longer than p_base")
        levels = self.true_U.size
        if levels < 1:
            raise ValueError("true_U must have at least one level")
        for split_n in (self.n_train, self.n_valid):
            if self.obs_per_level * levels != split_n:
                raise ValueError(
                    "obs_per_level x levels must equal the size of each split"
                )
        targets = [t for t, _ in self.collinear_map]
        if len(set(targets)) != len(targets):
            raise ValueError("constructed column targets must be distinct")
        for t, sources in self.collinear_map:
            if t < self.p_base or t >= self.p_base + len(self.collinear_map):
                raise ValueError(
                    "targets must lie in the constructed range after the base columns"
                )
            for s, _ in sources:
                if not 0 <= s < self.p_base:
                    raise ValueError("constructed columns must source base columns")

    @property
    def p(self) -> int:
        return self.p_base + len(self.collinear_map)

    @property
    def levels(self) -> int:
        return self.true_U.size

    def relevant_variables(self) -> list:
        """Generating columns plus constructed columns built only from them."""
        generating = set(range(self.true_beta.size))
        relevant = sorted(generating)
        for t, sources in sorted(self.collinear_map):
            if all(s in generating for s, _ in sources):
                relevant.append(t)
        return relevant


def _one_hot(levels: np.ndarray, q: int) -> np.ndarray:
    Z = np.zeros((levels.size, q))
    Z[np.arange(levels.size), levels] = 1.0
    return Z


def generate_simulated(spec: SimSpec) -> tuple[Dataset, Dataset, dict]:
    """Generate (train, valid, truth) from a SimSpec.

    Base columns are iid Uniform[-5, 5]; constructed columns are exact
    arithmetic combinations. Random-effect levels are contiguous blocks of
    obs_per_level rows within each split. Latent liabilities are
    X beta + Z U + N(0, 1) and Y = 1{L > 0}.
    """
    gen = RngStream(spec.seed).gen
    n = spec.n_train + spec.n_valid
    X = np.empty((n, spec.p))
    X[:, : spec.p_base] = gen.uniform(-5.0, 5.0, size=(n, spec.p_base))
    for t, sources in spec.collinear_map:
        col = np.zeros(n)
        for s, coeff in sources:
            col += coeff * X[:, s]
        X[:, t] = col

    levels_split = np.repeat(np.arange(spec.levels), spec.obs_per_level)
    levels = np.concatenate([levels_split, levels_split])
    Z = _one_hot(levels, spec.levels)

    k = spec.true_beta.size
    latent = X[:, :k] @ spec.true_beta + Z @ spec.true_U + gen.standard_normal(n)
    Y = (latent > 0).astype(np.int64)

    names = [f"V{j + 1}" for j in range(spec.p)]
    block = [spec.levels]
    tr = slice(0, spec.n_train)
    va = slice(spec.n_train, n)
    train = Dataset(X=X[tr], Z=Z[tr], Y=Y[tr], block_sizes=block, variable_names=names)
    valid = Dataset(X=X[va], Z=Z[va], Y=Y[va], block_sizes=block, variable_names=names)
    truth = {
        "seed": spec.seed,
        "generating_variables": [names[j] for j in range(k)],
        "true_beta": spec.true_beta.tolist(),
        "true_U": spec.true_U.tolist(),
        "relevant_variables": [names[j] for j in spec.relevant_variables()],
        "collinear_map": [
            {"target": names[t], "sources": [[names[s], c] for s, c in sources]}
            for t, sources in spec.collinear_map
        ],
        "class_balance_train": float(train.Y.mean()),
        "class_balance_valid": float(valid.Y.mean()),
    }
    return train, valid, truth


def base_only(data: Dataset, p_base: int = 280) -> Dataset:
    """Restrict a generated dataset to its first p_base (independent) columns."""
    return Dataset(
        X=data.X[:, :p_base],
        Z=data.Z,
        Y=data.Y,
        block_sizes=data.block_sizes,
        variable_names=data.variable_names[:p_base],
    )


def generate_microarray_analog(seed: int) -> tuple[Dataset, Dataset]:
    """Expression-style analog: 275 correlated columns plus 3 exact combinations.

    Columns are generated from a latent factor model (correlated, with
    heterogeneous scales), 4 designated signal columns carry latent
    coefficients (1, -1, 1, 1), and a 3-level grouping effect with a single
    shared variance (D = sigma^2 I_3) enters the liabilities. The appended
    columns are V276 = 2 x V148, V277 = -V260 and V278 = V263 + V273.
    Rows split 100 train / 88 validation. Synthetic stand-in, not real data.
    """
    gen = RngStream(int(seed), stream_id=1).gen
    n_train, n_valid = 100, 88
    n = n_train + n_valid
    p_base = 275
    n_factors = 10

    loadings = gen.standard_normal((n_factors, p_base)) * 0.6
    factors = gen.standard_normal((n, n_factors))
    X_base = factors @ loadings + gen.standard_normal((n, p_base))
    scales = gen.uniform(0.5, 1.5, size=p_base)
    scales[list(ANALOG_SIGNAL_VARS)] = 2.5  # separable signal at unit coefficients
    X_base *= scales

    X = np.empty((n, p_base + 3))
    X[:, :p_base] = X_base
    X[:, 275] = 2.0 * X_base[:, 147]
    X[:, 276] = -X_base[:, 259]
    X[:, 277] = X_base[:, 262] + X_base[:, 272]

    # three sites, contiguous blocks per split, one shared variance component
    levels = np.concatenate([
        np.repeat(np.arange(3), (34, 33, 33)),
        np.repeat(np.arange(3), (30, 29, 29)),
    ])
    Z = _one_hot(levels, 3)
    true_U = np.array([-1.0, 0.5, 1.0])

    beta = np.zeros(p_base + 3)
    beta[list(ANALOG_SIGNAL_VARS)] = ANALOG_SIGNAL_BETA
    latent = X @ beta + Z @ true_U + gen.standard_normal(n)
    Y = (latent > 0).astype(np.int64)

    names = [f"V{j + 1}" for j in range(p_base + 3)]
    block = [3]
    train = Dataset(X=X[:n_train], Z=Z[:n_train], Y=Y[:n_train],
                    block_sizes=block, variable_names=names)
    valid = Dataset(X=X[n_train:], Z=Z[n_train:], Y=Y[n_train:],
                    block_sizes=block, variable_names=names)
    return train, valid
