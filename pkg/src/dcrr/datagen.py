"""Synthetic data generation, CSV ingestion and shard partitioning.

RNG streams: every dataset draws from a counter-based Philox generator keyed
by SeedSequence(seed).  The harness derives an independent 64-bit seed per
replicate with SeedSequence(root_seed, replicate), so replicates can be
generated in parallel in any order.  Covariates are drawn before errors, so
the same seed yields the same design under every error law, and generation
never depends on the machine count: the pooled (X, y) is sampled first and
then split, making datasets bit-identical across shard counts.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.random import Generator, Philox, SeedSequence

from .errors import ConfigError, IngestionError

ERROR_LAWS = ("normal", "t4scaled", "cauchy", "zero")


@dataclass(frozen=True)
class DesignSpec:
    """Covariate distribution: N(0, Sigma) with AR(rho) or identity Sigma."""

    p: int
    covariance: str = "ar"  # "ar" or "identity"
    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.covariance not in ("ar", "identity"):
            raise ConfigError(f"unknown covariance {self.covariance!r}")
        if self.covariance == "ar" and not (-1.0 < self.rho < 1.0):
            raise ConfigError(f"AR parameter must lie in (-1, 1), got {self.rho}")

    def sigma(self) -> np.ndarray:
        """Population covariance matrix (explicit; only for small p)."""
        if self.covariance == "identity":
            return np.eye(self.p)
        idx = np.arange(self.p)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass(frozen=True)
class ErrorLaw:
    """Noise distribution.

    "t4scaled" is sqrt(2) * t(4), sampled as the ratio of a standard normal
    to sqrt(chi2(4)/4); "cauchy" uses the tangent transform of a uniform;
    "zero" is the degenerate noiseless law used in tests.
    """

    variant: str = "normal"

    def __post_init__(self):
        if self.variant not in ERROR_LAWS:
            raise ConfigError(f"unknown error law {self.variant!r}; choose from {ERROR_LAWS}")

    def sample(self, rng: Generator, size: int) -> np.ndarray:
        if self.variant == "normal":
            return rng.standard_normal(size)
        if self.variant == "t4scaled":
            z = rng.standard_normal(size)
            v = rng.chisquare(4, size)
            return math.sqrt(2.0) * z / np.sqrt(v / 4.0)
        if self.variant == "cauchy":
            return np.tan(np.pi * (rng.uniform(size=size) - 0.5))
        return np.zeros(size)


@dataclass(frozen=True)
class TrueModel:
    beta_star: np.ndarray
    support: np.ndarray  # sorted indices of nonzero coefficients
    s: int


def make_beta_star(p: int) -> TrueModel:
    """Sparse truth: first three coefficients sqrt(3), the rest zero."""
    if p < 3:
        raise ConfigError(f"need p >= 3 for the three-signal truth, got p={p}")
    beta = np.zeros(p)
    beta[:3] = math.sqrt(3.0)
    return TrueModel(beta_star=beta, support=np.arange(3), s=3)


@dataclass(frozen=True)
class Shard:
    """One machine's immutable (X, y) block."""

    X: np.ndarray
    y: np.ndarray
    machine_id: int
    is_master: bool = False

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ConfigError("shard X must be n x p with matching y of length n")
        if X.shape[0] < 2:
            raise ConfigError("a shard needs at least 2 rows for the pairwise loss")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ConfigError("shard contains non-finite entries")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def replicate_seed(root_seed: int, replicate: int) -> int:
    """Independent 64-bit stream key for one replicate."""
    return int(SeedSequence((root_seed, replicate)).generate_state(1, np.uint64)[0])


def _ar_transform(W: np.ndarray, rho: float) -> np.ndarray:
    """Apply the lower-triangular factor of the AR covariance to iid normals.

    Column recursion x_j = rho*x_{j-1} + sqrt(1-rho^2)*w_j is exactly the
    Cholesky factor of Sigma_ij = rho^|i-j|, so rows are N(0, Sigma) without
    forming the p x p matrix.
    """
    X = np.empty_like(W)
    X[:, 0] = W[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, W.shape[1]):
        X[:, j] = rho * X[:, j - 1] + c * W[:, j]
    return X


def sample_dataset(spec: DesignSpec, law: ErrorLaw, model: TrueModel, N: int):
    """Draw (X, y) with y = X beta* + eps, deterministically under spec.seed."""
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    if model.beta_star.shape[0] != spec.p:
        raise ConfigError("model dimension does not match design dimension")
    rng = Generator(Philox(SeedSequence(spec.seed)))
    W = rng.standard_normal((N, spec.p))
    X = W if spec.covariance == "identity" else _ar_transform(W, spec.rho)
    eps = law.sample(rng, N)
    y = X @ model.beta_star + eps
    return X, y


def partition(X: np.ndarray, y: np.ndarray, M: int, sizes=None) -> list[Shard]:
    """Split rows into M contiguous shards; flag the master.

    Balanced mode (sizes=None) requires M to divide N and flags shard 1 as
    master; with explicit sizes, the largest shard (lowest id on ties) is the
    master.
    """
    N = X.shape[0]
    if sizes is None:
        if M < 1 or N % M != 0:
            raise ConfigError(f"M={M} must divide N={N} in balanced mode")
        sizes = [N // M] * M
    else:
        sizes = list(sizes)
        if len(sizes) != M or sum(sizes) != N:
            raise ConfigError("explicit shard sizes must have length M and sum to N")
    if any(n < 2 for n in sizes):
        raise ConfigError("every shard needs at least 2 rows")
    master = int(np.argmax(sizes))  # balanced: all equal -> shard 0
    shards = []
    offset = 0
    for m, n in enumerate(sizes):
        shards.append(
            Shard(
                X=X[offset : offset + n],
                y=y[offset : offset + n],
                machine_id=m + 1,
                is_master=(m == master),
            )
        )
        offset += n
    return shards


def master_shard(shards: list[Shard]) -> Shard:
    for s in shards:
        if s.is_master:
            return s
    raise ConfigError("no shard is flagged as master")


def pool_shards(shards: list[Shard]) -> Shard:
    """Concatenate shards into one pooled pseudo-shard (centralized baselines)."""
    X = np.concatenate([s.X for s in shards], axis=0)
    y = np.concatenate([s.y for s in shards])
    return Shard(X=X, y=y, machine_id=0, is_master=True)


@dataclass
class IngestReport:
    feature_names: list[str] = field(default_factory=list)
    dropped_columns: list[str] = field(default_factory=list)
    dropped_rows: int = 0
    constant_columns: list[str] = field(default_factory=list)


def load_csv(path, response_column: str, standardize: bool = False):
    """Load a numeric CSV with header; returns (X, y, report).

    Non-numeric columns are dropped (reported), rows with missing values are
    dropped (counted), and with standardize=True the feature columns are
    mean-centered (constant columns become zero and are flagged).
    """
    df = pd.read_csv(path)
    if response_column not in df.columns:
        raise ConfigError(f"response column {response_column!r} not in CSV header")
    report = IngestReport()
    numeric = df.apply(pd.to_numeric, errors="coerce")
    for col in df.columns:
        if numeric[col].isna().all() and not df[col].isna().all():
            report.dropped_columns.append(col)
    if response_column in report.dropped_columns:
        raise IngestionError(f"response column {response_column!r} is not numeric")
    numeric = numeric.drop(columns=report.dropped_columns)
    n_before = len(numeric)
    numeric = numeric.dropna(axis=0)
    report.dropped_rows = n_before - len(numeric)
    y = numeric[response_column].to_numpy(dtype=np.float64)
    feats = numeric.drop(columns=[response_column])
    report.feature_names = list(feats.columns)
    X = feats.to_numpy(dtype=np.float64)
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise IngestionError("no usable rows/columns after ingestion")
    if standardize:
        std = X.std(axis=0)
        report.constant_columns = [c for c, s in zip(report.feature_names, std) if s == 0.0]
        X = X - X.mean(axis=0)
    return X, y, report
