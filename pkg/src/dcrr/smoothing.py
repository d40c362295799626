"""Kernels and the smoothed absolute loss.

The loss is the convolution of u -> |u| with a scaled kernel K_h(v) = K(v/h)/h.
For both built-in kernels the convolution integral has a closed form, so the
pairwise inner loops never touch quadrature.  Writing t = u/h:

    Gaussian:      L_h(u) = h * { t(2*Phi(t) - 1) + 2*phi(t) }
    Epanechnikov:  L_h(u) = h * { 3/8 + (3/4)t^2 - t^4/8 }   for |t| <= 1
                          = |u|                              for |t| >= 1

and in general L_h'(u) = 2*F_K(u/h) - 1 and L_h''(u) = 2*K(u/h)/h, where F_K
is the kernel CDF.  All closed forms are written in terms of |t| so that
evenness of the loss (and oddness of its derivative) holds exactly in floating
point.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError

# numeric codes shared with the compiled pairwise kernels
GAUSSIAN = 0
EPANECHNIKOV = 1

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Kernel:
    """A symmetric probability density on the real line.

    Subclasses supply the density, the CDF and the convolution of |.| with
    the density at unit bandwidth; adding a kernel means providing those
    three pieces (the last may fall back to quadrature if no closed form
    exists).
    """

    name: str
    code: int

    def density(self, t):
        raise NotImplementedError

    def cdf(self, t):
        raise NotImplementedError

    def smoothed_abs(self, t):
        """E|t - Z| with Z distributed as the kernel (unit bandwidth)."""
        raise NotImplementedError


class GaussianKernel(Kernel):
    name = "gaussian"
    code = GAUSSIAN

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return _INV_SQRT_2PI * np.exp(-0.5 * t * t)

    def cdf(self, t):
        return ndtr(np.asarray(t, dtype=float))

    def smoothed_abs(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        return a * (2.0 * ndtr(a) - 1.0) + 2.0 * self.density(a)


class EpanechnikovKernel(Kernel):
    name = "epanechnikov"
    code = EPANECHNIKOV

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t * t), 0.0)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, -1.0, 1.0)
        return 0.5 + 0.25 * (3.0 * tc - tc**3)

    def smoothed_abs(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        inside = 0.375 + 0.75 * a * a - 0.125 * a**4
        return np.where(a >= 1.0, a, inside)


_KERNELS = {k.name: k for k in (GaussianKernel(), EpanechnikovKernel())}


def get_kernel(name: str) -> Kernel:
    try:
        return _KERNELS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown kernel {name!r}; available: {sorted(_KERNELS)}") from None


def _checked(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("loss argument must be finite")
    return u


@dataclass(frozen=True)
class SmoothedLoss:
    """Smoothed absolute loss with a fixed kernel and bandwidth h > 0."""

    kernel: Kernel
    h: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ConfigError(f"bandwidth must be positive, got {self.h}")

    def loss(self, u):
        u = _checked(u)
        out = self.h * self.kernel.smoothed_abs(u / self.h)
        return float(out) if out.ndim == 0 else out

    def dloss(self, u):
        u = _checked(u)
        a = np.abs(u) / self.h
        out = np.sign(u) * (2.0 * self.kernel.cdf(a) - 1.0)
        return float(out) if out.ndim == 0 else out

    def ddloss(self, u):
        u = _checked(u)
        out = 2.0 * self.kernel.density(u / self.h) / self.h
        return float(out) if out.ndim == 0 else out


def smoothed_loss(kernel: str = "epanechnikov", h: float = 1.0) -> SmoothedLoss:
    return SmoothedLoss(get_kernel(kernel), float(h))
