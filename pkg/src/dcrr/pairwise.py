"""Backend selection for the pairwise inner loops.

The compiled extension is used when it imported cleanly; set
DCRR_PAIRWISE=python (or =compiled) to force a backend.  Both expose the
same two functions:

    loss_sum(z, h, kernel_code)       -> float
    dloss_rowsums(z, h, kernel_code)  -> ndarray of shape (len(z),)
"""

import os

from . import _pairwise_np

try:
    from . import _pairwise as _compiled
except ImportError:  # pragma: no cover - source tree without built extension
    _compiled = None


def _select(name: str | None):
    if name in (None, ""):
        return _compiled if _compiled is not None else _pairwise_np
    name = name.lower()
    if name in ("compiled", "c", "cython"):
        if _compiled is None:
            raise ImportError("compiled pairwise extension is not available")
        return _compiled
    if name in ("python", "py", "numpy"):
        return _pairwise_np
    raise ValueError(f"unknown pairwise backend {name!r}")


_impl = _select(os.environ.get("DCRR_PAIRWISE"))

BACKEND = _impl.BACKEND
loss_sum = _impl.loss_sum
dloss_rowsums = _impl.dloss_rowsums


def available_backends() -> list[str]:
    out = ["python"]
    if _compiled is not None:
        out.insert(0, "compiled")
    return out


def get_backend(name: str | None = None):
    """Return the module implementing a named backend (default: active one)."""
    return _impl if name is None else _select(name)
