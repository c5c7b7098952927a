"""Ground truth for small instances and the FirstFit baseline.

* :func:`exact_opt` - optimal bin count by branch and bound (``n <= 20``);
* :func:`brute_force_opt` - an independent check by enumerating set partitions;
* :func:`first_fit` - the classical online FirstFit algorithm on an event
  stream (deletions leave holes, nothing is ever moved);
* :func:`lower_bound_suite` - SIZE, LP and exact bounds side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .core import Event, Item, ceil_fraction
from .kernels import bnb_min_bins
from .lp import ENUMERATION_LIMIT, exact_lin, lp_from_sizes

SizeLike = Union[Item, Fraction, int, str]

DEFAULT_MAX_N = 20


def _sizes(items: Iterable[SizeLike]) -> List[Fraction]:
    out = []
    for entry in items:
        out.append(entry.size if isinstance(entry, Item) else Fraction(entry))
    return out


def _integerize(sizes: Sequence[Fraction]) -> Tuple[List[int], int]:
    den = 1
    for s in sizes:
        den = den * s.denominator // math.gcd(den, s.denominator)
    return [int(s * den) for s in sizes], den


def first_fit_decreasing(items: Iterable[SizeLike]) -> int:
    """Bin count of FirstFit on the sizes sorted in non-increasing order."""
    residual: List[Fraction] = []
    for s in sorted(_sizes(items), reverse=True):
        for j, r in enumerate(residual):
            if r >= s:
                residual[j] = r - s
                break
        else:
            residual.append(1 - s)
    return len(residual)


def l2_bound(items: Iterable[SizeLike]) -> int:
    """Martello-Toth lower bound L2 (maximised over the threshold)."""
    sizes = sorted(_sizes(items), reverse=True)
    if not sizes:
        return 0
    best = ceil_fraction(sum(sizes, Fraction(0)))
    candidates = sorted({s for s in sizes if s <= Fraction(1, 2)} | {Fraction(0)})
    for k in candidates:
        big = [s for s in sizes if s > 1 - k]
        mid = [s for s in sizes if 1 - k >= s > Fraction(1, 2)]
        small = [s for s in sizes if Fraction(1, 2) >= s >= k]
        free = len(mid) - sum(mid, Fraction(0))
        extra = sum(small, Fraction(0)) - free
        value = len(big) + len(mid) + (ceil_fraction(extra) if extra > 0 else 0)
        best = max(best, value)
    return best


@lru_cache(maxsize=100_000)
def _exact_cached(sizes: Tuple[Fraction, ...]) -> int:
    ints, cap = _integerize(sizes)
    upper = first_fit_decreasing(sizes)
    lower = l2_bound(sizes)
    if lower >= upper:
        return upper
    return bnb_min_bins(ints, cap, upper)


def exact_opt(items: Iterable[SizeLike], max_n: int = DEFAULT_MAX_N) -> int:
    """Optimal number of unit bins for at most ``max_n`` items."""
    sizes = tuple(sorted(_sizes(items), reverse=True))
    if len(sizes) > max_n:
        raise ValueError(f"instance has {len(sizes)} items; exact oracle limited to {max_n}")
    if any(not 0 < s <= 1 for s in sizes):
        raise ValueError("sizes must lie in (0, 1]")
    return _exact_cached(sizes)


def brute_force_opt(items: Iterable[SizeLike]) -> int:
    """Optimal bin count by enumerating all set partitions (``n <= 10``)."""
    sizes = _sizes(items)
    n = len(sizes)
    if n > 10:
        raise ValueError("brute force limited to 10 items")
    if n == 0:
        return 0
    best = n
    loads: List[Fraction] = []

    def rec(i: int) -> None:
        nonlocal best
        if len(loads) >= best:
            return
        if i == n:
            best = len(loads)
            return
        for j in range(len(loads)):
            if loads[j] + sizes[i] <= 1:
                loads[j] += sizes[i]
                rec(i + 1)
                loads[j] -= sizes[i]
        loads.append(sizes[i])
        rec(i + 1)
        loads.pop()

    rec(0)
    return best


# --------------------------------------------------------------------------- FirstFit
@dataclass
class FirstFitTrace:
    """Result of replaying a stream through FirstFit."""

    bins: List[List[int]] = field(default_factory=list)
    loads: List[Fraction] = field(default_factory=list)
    bin_of: Dict[int, int] = field(default_factory=dict)
    sizes: Dict[int, Fraction] = field(default_factory=dict)
    bins_over_time: List[int] = field(default_factory=list)
    moves: int = 0

    def used_bins(self) -> int:
        return sum(1 for content in self.bins if content)


def first_fit(stream: Iterable[Event]) -> FirstFitTrace:
    """Replay ``stream``: each insert goes to the lowest-indexed bin that fits,
    deletes remove the item in place, nothing is ever repacked."""
    trace = FirstFitTrace()
    for event in stream:
        if event.kind == "insert":
            size = event.size
            for j, load in enumerate(trace.loads):
                if load + size <= 1:
                    break
            else:
                j = len(trace.bins)
                trace.bins.append([])
                trace.loads.append(Fraction(0))
            trace.bins[j].append(event.id)
            trace.loads[j] += size
            trace.bin_of[event.id] = j
            trace.sizes[event.id] = size
        else:
            j = trace.bin_of.pop(event.id)
            trace.bins[j].remove(event.id)
            trace.loads[j] -= trace.sizes.pop(event.id)
        trace.bins_over_time.append(trace.used_bins())
    return trace


# --------------------------------------------------------------------------- bounds
@dataclass(frozen=True)
class Bound:
    value: Union[int, Fraction]
    kind: str  # "size_lower", "lp_lower" or "exact"


def lower_bound_suite(items: Iterable[SizeLike], max_exact_n: int = DEFAULT_MAX_N,
                      max_lp_rows: int = 60) -> Dict[str, Bound]:
    """All computable bounds on OPT: ``ceil(SIZE)``, the rounded-up
    configuration-LP optimum (when the number of distinct sizes is modest)
    and the exact optimum (when ``n <= max_exact_n``)."""
    sizes = _sizes(items)
    bounds = {"size_lower": Bound(ceil_fraction(sum(sizes, Fraction(0))), "size_lower")}
    if not sizes:
        bounds["lp_lower"] = Bound(0, "lp_lower")
        bounds["exact"] = Bound(0, "exact")
        return bounds
    lp = lp_from_sizes(sizes)
    if lp.m <= max_lp_rows:
        value, _ = exact_lin(lp)
        bounds["lp_lower"] = Bound(ceil_fraction(value), "lp_lower")
    if len(sizes) <= max_exact_n:
        bounds["exact"] = Bound(exact_opt(sizes, max_exact_n), "exact")
    return bounds


def opt_lower_bound(items: Iterable[SizeLike], max_exact_n: int = DEFAULT_MAX_N) -> int:
    """Best available lower bound on OPT (exact when small enough)."""
    sizes = _sizes(items)
    if len(sizes) <= max_exact_n:
        return exact_opt(sizes, max_exact_n)
    big = sum(1 for s in sizes if s > Fraction(1, 2))
    return max(ceil_fraction(sum(sizes, Fraction(0))), big)


__all__ = [
    "Bound", "FirstFitTrace", "brute_force_opt", "exact_opt", "first_fit", "first_fit_decreasing",
    "l2_bound", "lower_bound_suite", "opt_lower_bound", "ENUMERATION_LIMIT",
]
