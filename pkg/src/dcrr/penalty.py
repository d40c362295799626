"""Sparsity penalties: l1, SCAD and MCP derivatives, and LLA weights.

Only the derivative p'_lambda is ever needed: the folded-concave stages
solve weighted-l1 subproblems with weights p'_lambda(|beta_ref|), and model
selection scores the loss, not the penalty value.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SCAD_DEFAULT_A = 3.7
MCP_DEFAULT_A = 3.0


@dataclass(frozen=True)
class PenaltySpec:
    variant: str  # "l1", "scad" or "mcp"
    lam: float
    a: float | None = None

    def __post_init__(self):
        if self.variant not in ("l1", "scad", "mcp"):
            raise ConfigError(f"unknown penalty {self.variant!r}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.a is None:
            default = {"l1": None, "scad": SCAD_DEFAULT_A, "mcp": MCP_DEFAULT_A}[self.variant]
            object.__setattr__(self, "a", default)
        if self.variant == "scad" and self.a <= 2:
            raise ConfigError(f"SCAD needs a > 2, got {self.a}")
        if self.variant == "mcp" and self.a <= 1:
            raise ConfigError(f"MCP needs a > 1, got {self.a}")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.variant, lam, self.a)


def derivative(spec: PenaltySpec, v):
    """p'_lambda(v) for v >= 0 (scalar or array)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("penalty derivative argument must be nonnegative")
    lam, a = spec.lam, spec.a
    if spec.variant == "l1":
        out = np.full_like(v, lam)
    elif spec.variant == "scad":
        out = np.where(v <= lam, lam, np.maximum(a * lam - v, 0.0) / (a - 1.0))
    else:  # mcp
        out = np.maximum(lam - v / a, 0.0)
    return float(out) if out.ndim == 0 else out


def lla_weights(spec: PenaltySpec, beta_ref: np.ndarray) -> np.ndarray:
    """Weighted-l1 weights w_j = p'_lambda(|beta_ref_j|); all lambda at zero."""
    return derivative(spec, np.abs(np.asarray(beta_ref, dtype=float)))
