"""Pure-Python reference implementations of the numeric hot loops.

The compiled module ``_ckernels`` exposes the same functions with the same
semantics; :mod:`dynbinpack.kernels` picks one at import time.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple


def knapsack_dp(weights: Sequence[int], values: Sequence[int], capacity: int) -> Tuple[int, List[int]]:
    """Unbounded integer knapsack: maximise ``sum(values[i]*a[i])`` subject to
    ``sum(weights[i]*a[i]) <= capacity`` with ``a[i] >= 0`` integral.

    Returns the optimum and one optimal count vector.  Ties are broken towards
    the lowest type index so the result is deterministic.
    """
    n = len(weights)
    best = [0] * (capacity + 1)
    choice = [-1] * (capacity + 1)
    for c in range(1, capacity + 1):
        b = best[c - 1]
        ch = -2  # inherit from c - 1 (unused capacity)
        for i in range(n):
            w = weights[i]
            if w <= c:
                v = best[c - w] + values[i]
                if v > b:
                    b = v
                    ch = i
        best[c] = b
        choice[c] = ch
    counts = [0] * n
    c = capacity
    while c > 0:
        ch = choice[c]
        if ch == -2:
            c -= 1
        elif ch >= 0:
            counts[ch] += 1
            c -= weights[ch]
        else:
            break
    return best[capacity], counts


def bnb_min_bins(sizes: Sequence[int], capacity: int, upper: int) -> int:
    """Minimum number of bins of integer ``capacity`` for integer ``sizes``.

    ``sizes`` must be sorted in non-increasing order; ``upper`` is the size of
    a known feasible packing.  Depth-first branch and bound: items are placed
    in order, an item may go into any open bin with a distinct residual or
    open exactly one new bin, and nodes are pruned with the volume bound.
    """
    n = len(sizes)
    if n == 0:
        return 0
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + sizes[i]
    best = [upper]
    residual: List[int] = []

    def search(i: int) -> None:
        opened = len(residual)
        if i == n:
            if opened < best[0]:
                best[0] = opened
            return
        free = sum(residual)
        extra = suffix[i] - free
        need = opened + (-(-extra // capacity) if extra > 0 else 0)
        if need >= best[0]:
            return
        s = sizes[i]
        seen = set()
        for j in range(opened):
            r = residual[j]
            if r >= s and r not in seen:
                seen.add(r)
                residual[j] = r - s
                search(i + 1)
                residual[j] = r
                if best[0] <= need:
                    return
        if opened + 1 < best[0]:
            residual.append(capacity - s)
            search(i + 1)
            residual.pop()

    search(0)
    return best[0]
