"""Exact pairwise rank loss and gradient, per shard and pooled.

For residuals z_i = y_i - x_i @ beta the ordered-pair loss over a shard is

    (1/(n(n-1))) * sum_{i != j} L_h(z_i - z_j),

and its gradient reduces, by oddness of L_h', to -(2/(n(n-1))) X^T a with
a_i = sum_{j != i} L_h'(z_i - z_j).  The O(n^2) scalar accumulations run in
the selected pairwise backend; only O(p) extra memory is used and no n x n
matrix is materialized.
"""

import numpy as np

from . import pairwise
from .datagen import Shard, pool_shards
from .smoothing import SmoothedLoss


def _residuals(shard: Shard, beta: np.ndarray) -> np.ndarray:
    return shard.y - shard.X @ beta


def local_loss(shard: Shard, sl: SmoothedLoss, beta: np.ndarray) -> float:
    """Ordered-pair average of L_h over one shard (evenness halves the work)."""
    z = _residuals(shard, beta)
    n = shard.n
    return 2.0 * pairwise.loss_sum(z, sl.h, sl.kernel.code) / (n * (n - 1))


def local_gradient(shard: Shard, sl: SmoothedLoss, beta: np.ndarray) -> np.ndarray:
    z = _residuals(shard, beta)
    n = shard.n
    a = pairwise.dloss_rowsums(z, sl.h, sl.kernel.code)
    return (-2.0 / (n * (n - 1))) * (a @ shard.X)


def _pooled(shards) -> Shard:
    if isinstance(shards, Shard):
        return shards
    shards = list(shards)
    return shards[0] if len(shards) == 1 else pool_shards(shards)


def global_loss(shards, sl: SmoothedLoss, beta: np.ndarray) -> float:
    """Full U-statistic loss over the pooled data, cross-shard pairs included."""
    return local_loss(_pooled(shards), sl, beta)


def global_gradient(shards, sl: SmoothedLoss, beta: np.ndarray) -> np.ndarray:
    return local_gradient(_pooled(shards), sl, beta)


def mean_local_loss(shards, sl: SmoothedLoss, beta: np.ndarray) -> float:
    """Unweighted machine average of the per-shard losses."""
    shards = list(shards)
    total = 0.0
    for s in shards:
        total += local_loss(s, sl, beta)
    return total / len(shards)


def mean_local_gradient(shards, sl: SmoothedLoss, beta: np.ndarray) -> np.ndarray:
    shards = list(shards)
    acc = local_gradient(shards[0], sl, beta)
    for s in shards[1:]:
        acc = acc + local_gradient(s, sl, beta)
    return acc / len(shards)
