"""Distributed convoluted rank regression.

Robust high-dimensional linear regression under a smoothed pairwise rank
loss, fit across data shards with a communication-efficient surrogate:
the master shard's loss plus a gradient correction aggregated from all
machines.  Includes l1 and folded-concave (SCAD/MCP) penalization, DHBIC
model selection, centralized and divide-and-conquer baselines, and a
benchmark harness.
"""

from .datagen import DesignSpec, ErrorLaw, Shard, TrueModel, make_beta_star, partition
from .penalty import PenaltySpec
from .smoothing import SmoothedLoss, get_kernel, smoothed_loss
from .solver import CompositeProblem, SolverConfig

__version__ = "0.1.0"

__all__ = [
    "CompositeProblem",
    "DesignSpec",
    "ErrorLaw",
    "PenaltySpec",
    "Shard",
    "SmoothedLoss",
    "SolverConfig",
    "TrueModel",
    "get_kernel",
    "make_beta_star",
    "partition",
    "smoothed_loss",
    "__version__",
]
