"""Backend selection for the hot kernels.

The compiled extension ``linksparse._ckernels`` is preferred. Setting the
environment variable ``LINKSPARSE_PURE=1`` before import forces the numpy
fallback in ``linksparse._kernels_py``. ``BACKEND`` names the one in use.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("LINKSPARSE_PURE") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

_BACKENDS = {"python": _kernels_py}
if BACKEND == "cython":
    _BACKENDS["cython"] = _impl


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: the active one)."""
    if name is None:
        return _impl
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available") from None


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _u8(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.uint8)


def lgs_rounds(indptr, indices, weights, active, backend=None):
    """Round-synchronous local greedy over the ``active`` vertices.

    Returns ``(scheduled, decision_round, messages)``.
    """
    impl = get_backend(backend)
    return impl.lgs_rounds(
        _i64(indptr), _i64(indices), np.ascontiguousarray(weights, dtype=np.float64), _u8(active)
    )


def csma_contend(indptr, indices, contending, backoff, backend=None):
    """Return ``(winners, collided)`` masks for one backoff contention."""
    impl = get_backend(backend)
    return impl.csma_contend(_i64(indptr), _i64(indices), _u8(contending), _i64(backoff))


def laplacian_apply(indptr, indices, inv_sqrt_deg, x, backend=None):
    impl = get_backend(backend)
    x = np.ascontiguousarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    out = impl.laplacian_apply(
        _i64(indptr), _i64(indices), np.ascontiguousarray(inv_sqrt_deg, dtype=np.float64), x
    )
    return out[:, 0] if squeeze else out


def induced_degrees(indptr, indices, mask, backend=None):
    impl = get_backend(backend)
    return impl.induced_degrees(_i64(indptr), _i64(indices), _u8(mask))
