"""Backend selection for the time-stepping kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_pykernels`` is used.  Set ``SEMIMARKOV_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_FORCE_PURE = os.environ.get("SEMIMARKOV_PURE_PYTHON", "") not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-Python backend forced by environment")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('cython', 'python', or None for the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def forward_filter(haz, p, supports, loggam, q0, h0, map0, backend=None):
    return get_backend(backend).forward_filter(
        _f(haz), _f(p), _i(supports), _f(loggam), _f(q0), int(h0), int(map0))


def backward_pass(haz, p, loggam, hhat, backend=None):
    return get_backend(backend).backward_pass(_f(haz), _f(p), _f(loggam), _i(hhat))


def forward_statistics(haz, p, q, hhat, bscaled, fvals, stats, backend=None):
    """Advance ``stats`` in place (a contiguous float64 array) and return it."""
    if stats.dtype != np.float64 or not stats.flags.c_contiguous:
        raise TypeError("stats must be a C-contiguous float64 array")
    return get_backend(backend).forward_statistics(
        _f(haz), _f(p), _f(q), _i(hhat), _f(bscaled), _f(fvals), stats)


def simulate_path(haz, cum_p, supports, x0, u_exit, u_jump, backend=None):
    return get_backend(backend).simulate_path(
        _f(haz), _f(cum_p), _i(supports), int(x0), _f(u_exit), _f(u_jump))
