"""Numeric kernels with a compiled fast path.

``knapsack_dp`` and ``bnb_min_bins`` come from the Cython extension
``_ckernels`` when it has been built, otherwise from the pure-Python module
``_kernels_py``.  Both give identical results; the compiled versions work on
64-bit integers, so callers fall back to the Python versions automatically
when the inputs are too large for that range.
"""

from __future__ import annotations

import os
from typing import List, Sequence, Tuple

from . import _kernels_py

_INT64_SAFE = 1 << 62

try:  # pragma: no cover - depends on the build
    if os.environ.get("DYNBINPACK_PURE_PYTHON"):
        raise ImportError("compiled kernels disabled by environment")
    from . import _ckernels as _compiled
    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None
    BACKEND = "python"


def knapsack_dp(weights: Sequence[int], values: Sequence[int], capacity: int,
                backend: str = "auto") -> Tuple[int, List[int]]:
    """Unbounded integer knapsack (see :func:`_kernels_py.knapsack_dp`)."""
    impl = _pick(backend)
    if impl is not _kernels_py:
        bound = max(values, default=0) * (capacity + 1)
        if bound >= _INT64_SAFE or capacity >= _INT64_SAFE or min(values, default=0) < 0:
            impl = _kernels_py
    return impl.knapsack_dp(list(weights), list(values), int(capacity))


def bnb_min_bins(sizes: Sequence[int], capacity: int, upper: int, backend: str = "auto") -> int:
    """Exact minimum bin count for integer sizes (see :func:`_kernels_py.bnb_min_bins`)."""
    impl = _pick(backend)
    if impl is not _kernels_py and (sum(sizes) + capacity) >= _INT64_SAFE:
        impl = _kernels_py
    return impl.bnb_min_bins(list(sizes), int(capacity), int(upper))


def _pick(backend: str):
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if backend != "auto":
        raise ValueError(f"unknown backend {backend!r}")
    return _compiled if _compiled is not None else _kernels_py
