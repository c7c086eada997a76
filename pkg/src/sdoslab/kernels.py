"""Backend selection for the hot stencil/Chebyshev loops.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is used. Both expose ``matvec``,
``cheb_moments`` and ``cheb_series`` with identical signatures. Setting
``SDOSLAB_BACKEND=python`` forces the numpy implementation.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

BACKEND = "compiled" if _ckernels is not None else "python"
if os.environ.get("SDOSLAB_BACKEND") in _BACKENDS:
    BACKEND = os.environ["SDOSLAB_BACKEND"]
_impl = _BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> str:
    """Switch the active backend; returns the previous one."""
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    previous = BACKEND
    BACKEND, _impl = name, _BACKENDS[name]
    return previous


def _block(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def matvec(nbr, diag, hop, x):
    xb = _block(x)
    out = _impl.matvec(nbr, diag, float(hop), xb)
    return out[:, 0] if np.ndim(x) == 1 else out


def cheb_moments(nbr, diag, hop, x0, n_moments):
    return _impl.cheb_moments(nbr, diag, float(hop), _block(x0), int(n_moments))


def cheb_series(nbr, diag, hop, x0, coeffs):
    xb = _block(x0)
    out = _impl.cheb_series(nbr, diag, float(hop), xb, np.ascontiguousarray(coeffs, dtype=np.float64))
    return out[:, 0] if np.ndim(x0) == 1 else out
