"""Configuration LP over rounded sizes, its solvers, and the solution-pair
maintenance procedures (improvement and component reduction).

A *configuration* is a multiset of rounded sizes whose sum is at most one,
stored canonically as a tuple of ``(size, count)`` pairs sorted by size
descending.  The LP has one row per distinct rounded size, with demand equal
to the number of items of that rounded size, and one column per
configuration:

    minimise ||x||_1  subject to  A x >= b,  x >= 0.

Two solvers are provided:

* :func:`lin_by_enumeration` enumerates every maximal configuration and runs
  an exact rational simplex - the reference used by tests;
* :func:`approx_solve` runs column generation with the HiGHS simplex on the
  restricted master and exact knapsack pricing.  It stops once weak duality
  certifies the requested ratio, and returns an exact rational solution.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .core import Params, ValidationReport, ceil_fraction, floor_fraction, format_fraction
from .kernels import knapsack_dp

Config = Tuple[Tuple[Fraction, int], ...]

#: Largest knapsack capacity (common denominator of the sizes) for which the
#: pricing problem is solved by dynamic programming; above it a branch and
#: bound over item types is used.
DP_CAPACITY_LIMIT = 200_000
#: Configuration count limit for exhaustive enumeration.
ENUMERATION_LIMIT = 100_000
#: Constant in the bound ||y' - y||_1 <= K (m + alpha) / delta checked for
#: the improvement step (measured, see the test-suite).
IMPROVE_DISTANCE_K = 10
_DUAL_SCALE = 1 << 24
_PRIMAL_SCALE = 1 << 40


# --------------------------------------------------------------------------- configurations
def make_config(counts: Mapping[Fraction, int] | Iterable[Tuple[Fraction, int]]) -> Config:
    """Canonical configuration key from a size -> multiplicity mapping."""
    pairs = counts.items() if isinstance(counts, Mapping) else counts
    merged: Dict[Fraction, int] = {}
    for size, count in pairs:
        if count < 0:
            raise ValueError("negative multiplicity")
        if count:
            size = Fraction(size)
            merged[size] = merged.get(size, 0) + int(count)
    return tuple(sorted(merged.items(), key=lambda kv: -kv[0]))


def config_load(config: Config) -> Fraction:
    return sum((size * count for size, count in config), Fraction(0))


def config_count(config: Config, size: Fraction) -> int:
    for s, c in config:
        if s == size:
            return c
    return 0


def config_add(config: Config, size: Fraction, delta: int = 1) -> Config:
    counts = dict(config)
    counts[size] = counts.get(size, 0) + delta
    if counts[size] < 0:
        raise ValueError(f"configuration has no slot of size {size}")
    return make_config(counts)


def format_config(config: Config) -> str:
    return "{" + ", ".join(f"{format_fraction(s)}:{c}" for s, c in config) + "}"


def _config_order(config: Config):
    return tuple((-s, c) for s, c in config)


# --------------------------------------------------------------------------- LP instance
@dataclass(frozen=True)
class LpInstance:
    """Rows of the configuration LP: distinct rounded sizes and demands."""

    sizes: Tuple[Fraction, ...] = ()
    demand: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.sizes) != len(self.demand):
            raise ValueError("sizes and demand differ in length")
        if list(self.sizes) != sorted(self.sizes, reverse=True) or len(set(self.sizes)) != len(self.sizes):
            raise ValueError("sizes must be distinct and descending")
        # row lookup table (Fraction hashing is slow, so build it once)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.sizes)})

    @property
    def m(self) -> int:
        return len(self.sizes)

    def row(self, size: Fraction) -> int:
        try:
            return self._index[size]
        except KeyError:
            raise ValueError(f"{size} is not a row of the LP") from None

    def rhs(self, values: Optional[Sequence] = None) -> List[Fraction]:
        if values is None:
            return [Fraction(b) for b in self.demand]
        if isinstance(values, Mapping):
            return [Fraction(values.get(s, 0)) for s in self.sizes]
        if len(values) != self.m:
            raise ValueError("right-hand side has the wrong length")
        return [Fraction(v) for v in values]

    def column(self, config: Config) -> List[int]:
        col = [0] * self.m
        for size, count in config:
            i = self._index.get(size)
            if i is not None:
                col[i] = count
        return col

    def coverage(self, x: Mapping[Config, object]) -> List[Fraction]:
        cover = [Fraction(0)] * self.m
        index = self._index
        for config, value in x.items():
            if not value:
                continue
            for size, count in config:
                if size not in index:
                    raise ValueError(f"configuration uses unknown size {size}")
                cover[index[size]] += count * Fraction(value)
        return cover

    def is_feasible(self, x: Mapping[Config, object], rhs: Optional[Sequence] = None) -> bool:
        return all(c >= b for c, b in zip(self.coverage(x), self.rhs(rhs)))

    def pure_config(self, i: int) -> Config:
        size = self.sizes[i]
        return ((size, floor_fraction(1 / size)),)

    def common_denominator(self) -> int:
        d = 1
        for s in self.sizes:
            d = d * s.denominator // math.gcd(d, s.denominator)
        return d


def lp_from_sizes(rounded_sizes: Iterable[Fraction]) -> LpInstance:
    """LP whose rows are the distinct values of ``rounded_sizes`` (a multiset)."""
    counts = Counter(Fraction(s) for s in rounded_sizes)
    sizes = tuple(sorted(counts, reverse=True))
    return LpInstance(sizes, tuple(counts[s] for s in sizes))


def build_lp(rounding) -> LpInstance:
    """LP of a rounding state; groups sharing a rounded size share a row."""
    counts: Counter = Counter()
    for group in rounding.nonempty_groups():
        counts[group.rounded_size] += len(group)
    sizes = tuple(sorted(counts, reverse=True))
    return LpInstance(sizes, tuple(counts[s] for s in sizes))


# --------------------------------------------------------------------------- solution pairs
@dataclass
class SolutionPair:
    """Fractional solution ``x`` and integral solution ``y`` of one LP."""

    x: Dict[Config, Fraction] = field(default_factory=dict)
    y: Dict[Config, int] = field(default_factory=dict)

    def norm_x(self) -> Fraction:
        return sum(self.x.values(), Fraction(0))

    def norm_y(self) -> int:
        return sum(self.y.values())

    def support(self) -> int:
        return sum(1 for v in self.y.values() if v > 0)

    def copy(self) -> "SolutionPair":
        return SolutionPair(dict(self.x), dict(self.y))

    def cleaned(self) -> "SolutionPair":
        return SolutionPair({c: Fraction(v) for c, v in self.x.items() if v},
                            {c: int(v) for c, v in self.y.items() if v})


def check_pair(pair: SolutionPair, lp: LpInstance) -> ValidationReport:
    """Feasibility of both solutions, dominance ``x <= y`` and support nesting."""
    problems: List[str] = []
    sizes = set(lp.sizes)
    for config in set(pair.x) | set(pair.y):
        if config_load(config) > 1:
            problems.append(f"configuration {format_config(config)} overfull")
        for size, _ in config:
            if size not in sizes:
                problems.append(f"configuration {format_config(config)} uses unknown size {size}")
    for config, value in pair.x.items():
        if value < 0:
            problems.append(f"x{format_config(config)} = {value} < 0")
        if value > pair.y.get(config, 0):
            problems.append(f"x{format_config(config)} = {value} > y = {pair.y.get(config, 0)}")
    for config, value in pair.y.items():
        if value < 0 or int(value) != value:
            problems.append(f"y{format_config(config)} = {value} not a non-negative integer")
    if not problems:
        for i, (cover, demand) in enumerate(zip(lp.coverage(pair.y), lp.demand)):
            if cover < demand:
                problems.append(f"A·y row {format_fraction(lp.sizes[i])}: {cover} < {demand}")
        for i, (cover, demand) in enumerate(zip(lp.coverage(pair.x), lp.demand)):
            if cover < demand:
                problems.append(f"A·x row {format_fraction(lp.sizes[i])}: {cover} < {demand}")
    return ValidationReport(not problems, problems)


# --------------------------------------------------------------------------- pricing
def best_config(sizes: Sequence[Fraction], values: Sequence[Fraction]) -> Tuple[Fraction, Config]:
    """Exact pricing: maximise ``sum(values[i] * a[i])`` over configurations."""
    types = [(Fraction(s), Fraction(v)) for s, v in zip(sizes, values) if v > 0]
    if not types:
        return Fraction(0), ()
    den = 1
    for s, _ in types:
        den = den * s.denominator // math.gcd(den, s.denominator)
    vden = 1
    for _, v in types:
        vden = vden * v.denominator // math.gcd(vden, v.denominator)
    weights = [int(s * den) for s, _ in types]
    ivals = [int(v * vden) for _, v in types]
    if den <= DP_CAPACITY_LIMIT:
        best, counts = knapsack_dp(weights, ivals, den)
    else:
        best, counts = _knapsack_bnb(weights, ivals, den)
    config = make_config({types[i][0]: c for i, c in enumerate(counts)})
    return Fraction(best, vden), config


def _knapsack_bnb(weights: Sequence[int], values: Sequence[int], capacity: int) -> Tuple[int, List[int]]:
    """Exact unbounded knapsack by depth-first branch and bound (large capacities)."""
    order = sorted(range(len(weights)), key=lambda i: (-Fraction(values[i], weights[i]), i))
    w = [weights[i] for i in order]
    v = [values[i] for i in order]
    n = len(w)
    best_val = [0]
    best_counts = [[0] * n]
    counts = [0] * n

    def bound(j: int, cap: int, val: int) -> Fraction:
        if j >= n:
            return Fraction(val)
        return val + Fraction(v[j] * cap, w[j])

    def search(j: int, cap: int, val: int) -> None:
        if val > best_val[0]:
            best_val[0] = val
            best_counts[0] = list(counts)
        if j >= n or bound(j, cap, val) <= best_val[0]:
            return
        top = cap // w[j]
        for c in range(top, -1, -1):
            counts[j] = c
            search(j + 1, cap - c * w[j], val + c * v[j])
        counts[j] = 0

    search(0, capacity, 0)
    result = [0] * n
    for pos, i in enumerate(order):
        result[i] = best_counts[0][pos]
    return best_val[0], result


# --------------------------------------------------------------------------- exact simplex
def simplex_exact(columns: Sequence[Sequence[int]], rhs: Sequence[Fraction], basis: Sequence[int]
                  ) -> Tuple[Fraction, List[Fraction], List[Fraction]]:
    """Exact primal simplex for ``min sum(x)`` s.t. ``A x >= rhs, x >= 0``.

    ``columns`` lists the columns of ``A`` (``m`` entries each); ``basis`` names
    ``m`` columns forming a feasible diagonal starting basis (pure
    configurations).  Bland's rule guarantees termination.  Returns the
    optimum, the primal vector and the dual prices.
    """
    m = len(rhs)
    n = len(columns)
    total = n + m  # surplus columns follow the structural ones
    cost = [Fraction(1)] * n + [Fraction(0)] * m
    # initial tableau for a diagonal basis
    tab: List[List[Fraction]] = []
    beta: List[Fraction] = []
    for i in range(m):
        diag = columns[basis[i]][i]
        if diag <= 0:
            raise ValueError("starting basis is not diagonal")
        row = [Fraction(columns[j][i], diag) for j in range(n)]
        row += [Fraction(-1, diag) if r == i else Fraction(0) for r in range(m)]
        tab.append(row)
        beta.append(Fraction(rhs[i]) / diag)
        for r in range(m):
            if r != i and columns[basis[i]][r] != 0:
                raise ValueError("starting basis is not diagonal")
    basic = list(basis)
    while True:
        entering = -1
        for j in range(total):
            if j in basic:
                continue
            red = cost[j] - sum(cost[basic[i]] * tab[i][j] for i in range(m) if tab[i][j])
            if red < 0:
                entering = j
                break
        if entering < 0:
            break
        leave, best_ratio = -1, None
        for i in range(m):
            a = tab[i][entering]
            if a > 0:
                ratio = beta[i] / a
                if best_ratio is None or ratio < best_ratio or (ratio == best_ratio and basic[i] < basic[leave]):
                    leave, best_ratio = i, ratio
        if leave < 0:
            raise RuntimeError("configuration LP unbounded (cannot happen)")
        piv = tab[leave][entering]
        prow = [a / piv for a in tab[leave]]
        pbeta = beta[leave] / piv
        for i in range(m):
            if i == leave:
                continue
            f = tab[i][entering]
            if f:
                tab[i] = [a - f * b for a, b in zip(tab[i], prow)]
                beta[i] -= f * pbeta
        tab[leave] = prow
        beta[leave] = pbeta
        basic[leave] = entering
    x = [Fraction(0)] * n
    for i in range(m):
        if basic[i] < n:
            x[basic[i]] = beta[i]
    duals = []
    for r in range(m):
        j = n + r
        duals.append(cost[j] - sum(cost[basic[i]] * tab[i][j] for i in range(m) if tab[i][j]))
    return sum(x, Fraction(0)), x, duals


def enumerate_configs(sizes: Sequence[Fraction], limit: int = ENUMERATION_LIMIT,
                      maximal: bool = True) -> Optional[List[Config]]:
    """All (maximal) configurations over ``sizes``; ``None`` if more than ``limit``."""
    sizes = sorted((Fraction(s) for s in sizes), reverse=True)
    smallest = sizes[-1] if sizes else None
    out: List[Config] = []
    counts = [0] * len(sizes)

    def rec(i: int, room: Fraction) -> bool:
        if i == len(sizes):
            if any(counts) and (not maximal or room < smallest):
                out.append(make_config({sizes[j]: counts[j] for j in range(len(sizes))}))
                if len(out) > limit:
                    return False
            return True
        top = floor_fraction(room / sizes[i])
        for c in range(top, -1, -1):
            counts[i] = c
            if not rec(i + 1, room - c * sizes[i]):
                counts[i] = 0
                return False
        counts[i] = 0
        return True

    if not sizes:
        return []
    if not rec(0, Fraction(1)):
        return None
    return out


def lin_by_enumeration(lp: LpInstance, rhs: Optional[Sequence] = None,
                       limit: int = ENUMERATION_LIMIT) -> Tuple[Fraction, Dict[Config, Fraction]]:
    """Exact LP optimum over all maximal configurations (reference solver)."""
    b = lp.rhs(rhs)
    if lp.m == 0 or all(v <= 0 for v in b):
        return Fraction(0), {}
    configs = enumerate_configs(lp.sizes, limit)
    if configs is None:
        raise ValueError(f"more than {limit} configurations")
    pure = [lp.pure_config(i) for i in range(lp.m)]
    cols = pure + [c for c in configs if c not in set(pure)]
    matrix = [lp.column(c) for c in cols]
    value, x, _ = simplex_exact(matrix, [max(v, Fraction(0)) for v in b], list(range(lp.m)))
    return value, {cols[j]: v for j, v in enumerate(x) if v}


def exact_lin(lp: LpInstance, rhs: Optional[Sequence] = None,
              max_iter: int = 10_000) -> Tuple[Fraction, Dict[Config, Fraction]]:
    """Exact LP optimum by column generation with an exact simplex master."""
    b = [max(v, Fraction(0)) for v in lp.rhs(rhs)]
    if lp.m == 0 or all(v == 0 for v in b):
        return Fraction(0), {}
    cols = [lp.pure_config(i) for i in range(lp.m)]
    seen = set(cols)
    for _ in range(max_iter):
        value, x, duals = simplex_exact([lp.column(c) for c in cols], b, list(range(lp.m)))
        price, config = best_config(lp.sizes, duals)
        if price <= 1 or config in seen:
            return value, {cols[j]: v for j, v in enumerate(x) if v}
        cols.append(config)
        seen.add(config)
    raise RuntimeError("column generation did not converge")


# --------------------------------------------------------------------------- approximate solver
@dataclass
class SolveResult:
    x: Dict[Config, Fraction]
    value: Fraction
    lower_bound: Fraction
    iterations: int


def _exactify(lp: LpInstance, cols: Sequence[Config], values: Sequence[float],
              rhs: Sequence[Fraction]) -> Dict[Config, Fraction]:
    x: Dict[Config, Fraction] = {}
    for config, v in zip(cols, values):
        if v > 1e-12:
            q = Fraction(int(round(v * _PRIMAL_SCALE)), _PRIMAL_SCALE)
            if q > 0:
                x[config] = x.get(config, Fraction(0)) + q
    return repair_coverage(lp, x, rhs)


def repair_coverage(lp: LpInstance, x: Dict[Config, Fraction], rhs: Sequence[Fraction]) -> Dict[Config, Fraction]:
    """Top up pure configurations until ``A x >= rhs`` holds exactly."""
    x = dict(x)
    cover = lp.coverage(x)
    for i, (c, b) in enumerate(zip(cover, rhs)):
        if c < b:
            pure = lp.pure_config(i)
            x[pure] = x.get(pure, Fraction(0)) + (b - c) / pure[0][1]
    return x


def approx_solve(lp: LpInstance, rhs: Optional[Sequence] = None, ratio: Fraction = Fraction(1),
                 max_iter: int = 500) -> SolveResult:
    """Fractional solution with ``||x||_1 <= ratio * LIN`` (certified).

    Column generation: the restricted master is solved with HiGHS, duals are
    rounded down to dyadic rationals and clipped at zero, and exact pricing
    yields the weak-duality bound ``pi·b / max_C pi·C <= LIN``.  The returned
    ``x`` is exact, feasible and has at most ``m + 1`` non-zero components.
    """
    ratio = Fraction(ratio)
    b = [max(v, Fraction(0)) for v in lp.rhs(rhs)]
    if lp.m == 0 or all(v == 0 for v in b):
        return SolveResult({}, Fraction(0), Fraction(0), 0)
    cols: List[Config] = [lp.pure_config(i) for i in range(lp.m)]
    seen = set(cols)
    b_float = np.array([float(v) for v in b])
    best_lb = Fraction(0)
    best_x: Optional[Dict[Config, Fraction]] = None
    for iteration in range(1, max_iter + 1):
        matrix = np.array([lp.column(c) for c in cols], dtype=float).T
        res = linprog(np.ones(len(cols)), A_ub=-matrix, b_ub=-b_float, bounds=(0, None), method="highs-ds")
        if res.status != 0:
            break
        duals = [Fraction(max(0, math.floor(-d * _DUAL_SCALE)), _DUAL_SCALE) for d in res.ineqlin.marginals]
        price, config = best_config(lp.sizes, duals)
        if price > 0:
            lb = sum((d * v for d, v in zip(duals, b)), Fraction(0)) / max(price, Fraction(1))
            best_lb = max(best_lb, lb)
        x = _exactify(lp, cols, res.x, b)
        value = sum(x.values(), Fraction(0))
        if best_x is None or value < sum(best_x.values(), Fraction(0)):
            best_x = x
        if value <= ratio * best_lb:
            return _finish(lp, best_x, best_lb, iteration)
        if config in seen or price <= 1:
            break
        cols.append(config)
        seen.add(config)
    # floating point stalled: finish with the exact master
    value, x = exact_lin(lp, b)
    return _finish(lp, x, value, max_iter)


def _finish(lp: LpInstance, x: Dict[Config, Fraction], lb: Fraction, iterations: int) -> SolveResult:
    x = reduce_support(lp, x, lp.m + 1)
    return SolveResult(x, sum(x.values(), Fraction(0)), lb, iterations)


# --------------------------------------------------------------------------- support reduction
def _null_vector(matrix: List[List[Fraction]]) -> Optional[List[Fraction]]:
    """A non-zero vector in the null space of ``matrix`` (rows x cols), if any."""
    rows = [list(r) for r in matrix]
    ncols = len(rows[0]) if rows else 0
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    free = [c for c in range(ncols) if c not in pivots]
    if not free:
        return None
    f = free[0]
    z = [Fraction(0)] * ncols
    z[f] = Fraction(1)
    for i, c in enumerate(pivots):
        z[c] = -rows[i][f]
    return z


def reduce_support(lp: LpInstance, x: Mapping[Config, Fraction], target: int,
                   subset: Optional[Sequence[Config]] = None) -> Dict[Config, Fraction]:
    """Move ``x`` along null-space directions of ``[A; 1]`` until at most
    ``target`` components (of ``subset``, default all) are non-zero.

    Coverage ``A x`` and the norm are preserved exactly; pivots follow the
    lexicographic configuration order.
    """
    x = {c: Fraction(v) for c, v in x.items() if v}
    active = sorted(subset if subset is not None else x, key=_config_order)
    active = [c for c in active if x.get(c)]
    while len(active) > target:
        matrix = [[Fraction(config_count(c, s)) for c in active] for s in lp.sizes]
        matrix.append([Fraction(1)] * len(active))
        z = _null_vector(matrix)
        if z is None:
            break
        theta = min(x[c] / -zc for c, zc in zip(active, z) if zc < 0)
        for c, zc in zip(active, z):
            if zc:
                x[c] += theta * zc
        active = [c for c in active if x[c] > 0]
        x = {c: v for c, v in x.items() if v > 0}
    return x


def restricted_fractional(lp: LpInstance, y: Mapping[Config, int]) -> Dict[Config, Fraction]:
    """Best fractional solution using only configurations of ``y`` with ``x <= y``.

    Solved with HiGHS and made exact; the result is feasible, dominated by
    ``y`` and falls back to ``x = y`` if the float optimum cannot be repaired.
    """
    cols = sorted((c for c, v in y.items() if v > 0), key=_config_order)
    b = lp.rhs()
    if not cols or lp.m == 0:
        return {}
    matrix = np.array([lp.column(c) for c in cols], dtype=float).T
    res = linprog(np.ones(len(cols)), A_ub=-matrix, b_ub=-np.array([float(v) for v in b]),
                  bounds=[(0, float(y[c])) for c in cols], method="highs-ds")
    if res.status != 0:
        return {c: Fraction(y[c]) for c in cols}
    x = {}
    for c, v in zip(cols, res.x):
        q = min(Fraction(int(round(v * _PRIMAL_SCALE)), _PRIMAL_SCALE), Fraction(y[c]))
        if q > 0:
            x[c] = q
    # repair deficits by raising components (within y) that cover the row
    cover = lp.coverage(x)
    for i, size in enumerate(lp.sizes):
        deficit = b[i] - cover[i]
        if deficit <= 0:
            continue
        for c in cols:
            k = config_count(c, size)
            if not k:
                continue
            room = Fraction(y[c]) - x.get(c, Fraction(0))
            if room <= 0:
                continue
            step = min(room, deficit / k)
            x[c] = x.get(c, Fraction(0)) + step
            for s2, k2 in c:
                cover[lp.row(s2)] += step * k2
            deficit -= step * k
            if deficit <= 0:
                break
        if deficit > 0:
            return {c: Fraction(y[c]) for c in cols}
    return x


# --------------------------------------------------------------------------- improve
@dataclass
class ImproveResult:
    pair: SolutionPair
    preconditions_ok: bool
    violations: List[str]
    unchanged_fractional: bool
    lower_bound: Fraction
    d_norm: int
    distance: int


def _greedy_d(yhat: Mapping[Config, int], xprime: Mapping[Config, Fraction], target: int) -> Dict[Config, int]:
    """Integral ``0 <= d <= yhat - x'`` with norm ``target`` if possible, else
    maximal; largest slack first, ties in configuration order."""
    slack = []
    for c, v in yhat.items():
        room = floor_fraction(Fraction(v) - xprime.get(c, Fraction(0)))
        if room > 0:
            slack.append((-room, _config_order(c), c, room))
    slack.sort()
    d: Dict[Config, int] = {}
    left = target
    for _, _, c, room in slack:
        if left <= 0:
            break
        take = min(room, left)
        d[c] = take
        left -= take
    return d


def improve(pair: SolutionPair, lp: LpInstance, alpha: int, params: Params) -> ImproveResult:
    """One improvement step on ``(x, y)`` reducing ``||x||_1`` by ``alpha``.

    The fraction ``2 alpha (1/delta + 1) / ||x||`` of ``x`` is re-solved
    approximately (ratio ``1 + delta/2``), the smallest components of ``y``
    are folded into the re-solved part, the re-solved part is reduced to
    ``m + 1`` components, ``y`` is rounded up on the new components and then
    lowered by an integral ``d`` of norm up to ``alpha (1/delta + 1)``.
    Components of ``y`` not used by ``x'`` are kept.
    """
    delta = params.delta
    inv = 1 / delta
    m = lp.m
    violations: List[str] = []
    norm_x = pair.norm_x()
    norm_y = pair.norm_y()
    if norm_x < 2 * alpha * (inv + 1):
        violations.append(f"||x|| = {norm_x} < 2·alpha·(1/delta+1) = {2 * alpha * (inv + 1)}")
    if norm_y < (m + 2) * (inv + 2):
        violations.append(f"||y|| = {norm_y} < (m+2)(1/delta+2) = {(m + 2) * (inv + 2)}")
    check = check_pair(pair, lp)
    violations += check.violations
    b = lp.rhs()
    if norm_x == 0 or not check.ok:
        return ImproveResult(pair.copy(), False, violations, True, Fraction(0), 0, 0)
    # step 1
    scale = min(Fraction(1), 2 * alpha * (inv + 1) / norm_x)
    x_var = {c: scale * v for c, v in pair.x.items()}
    x_fix = {c: v - x_var[c] for c, v in pair.x.items()}
    cover_fix = lp.coverage(x_fix)
    b_var = [max(Fraction(0), bi - ci) for bi, ci in zip(b, cover_fix)]
    # step 2
    solved = approx_solve(lp, b_var, 1 + delta / 2)
    x_hat = solved.x
    norm_fix = sum(x_fix.values(), Fraction(0))
    # step 3
    if norm_fix + solved.value >= norm_x:
        x_prime = {c: v for c, v in pair.x.items() if v}
        y_hat = {c: v for c, v in pair.y.items() if v}
        unchanged = True
    else:
        unchanged = False
        # step 4: smallest components of y whose total stays within the budget
        budget = (m + 2) * (inv + 2)
        order = sorted((c for c, v in pair.y.items() if v > 0), key=lambda c: (pair.y[c], _config_order(c)))
        chosen: List[Config] = []
        total = 0
        for c in order:
            if total + pair.y[c] > budget:
                break
            chosen.append(c)
            total += pair.y[c]
        chosen_set = set(chosen)
        # step 5
        x_bar_fix = {c: v for c, v in x_fix.items() if c not in chosen_set and v}
        y_bar = {c: v for c, v in pair.y.items() if c not in chosen_set and v}
        # step 6
        x_bar: Dict[Config, Fraction] = dict(x_hat)
        for c in chosen:
            v = x_fix.get(c, Fraction(0))
            if v:
                x_bar[c] = x_bar.get(c, Fraction(0)) + v
        x_bar = reduce_support(lp, x_bar, m + 1)
        # step 7
        x_prime = dict(x_bar_fix)
        for c, v in x_bar.items():
            x_prime[c] = x_prime.get(c, Fraction(0)) + v
        x_prime = {c: v for c, v in x_prime.items() if v}
        # step 8
        y_hat = {}
        for c in set(x_prime) | set(y_bar):
            y_hat[c] = max(ceil_fraction(x_prime.get(c, Fraction(0))), y_bar.get(c, 0))
    # step 9
    d = _greedy_d(y_hat, x_prime, int(alpha * (inv + 1)))
    # step 10
    y_prime = {c: v - d.get(c, 0) for c, v in y_hat.items()}
    y_prime = {c: v for c, v in y_prime.items() if v > 0}
    new = SolutionPair(x_prime, y_prime)
    distance = sum(abs(y_prime.get(c, 0) - pair.y.get(c, 0)) for c in set(y_prime) | set(pair.y))
    return ImproveResult(new, not violations, violations, unchanged, solved.lower_bound,
                         sum(d.values()), distance)


# --------------------------------------------------------------------------- reduce components
@dataclass
class ReduceResult:
    pair: SolutionPair
    early_exit: bool
    distance: int


def component_limit(params: Params, m: int, opt_lower: int) -> Fraction:
    """``C = Delta * OPT + m`` evaluated at a lower bound of OPT."""
    return params.Delta * opt_lower + m


def reduce_components(pair: SolutionPair, lp: LpInstance, params: Params) -> ReduceResult:
    """Merge the ``m + 2`` smallest components of ``y`` into at most ``m + 1``.

    Returns the pair unchanged when those components already sum to at least
    ``(1/Delta + 2)(m + 2)``.  Otherwise the matching part of ``x`` is moved
    along null-space directions (norm and coverage preserved), ``y`` is set
    to the ceiling of the new components and lowered by an integral ``d`` of
    norm up to ``m + 1``.
    """
    m = lp.m
    order = sorted((c for c, v in pair.y.items() if v > 0), key=lambda c: (pair.y[c], _config_order(c)))
    chosen = order[:m + 2]
    if len(chosen) < m + 2 or sum(pair.y[c] for c in chosen) >= (1 / params.Delta + 2) * (m + 2):
        return ReduceResult(pair.copy(), True, 0)
    part = {c: pair.x.get(c, Fraction(0)) for c in chosen}
    reduced = reduce_support(lp, part, m + 1)
    x_prime = {c: v for c, v in pair.x.items() if c not in part and v}
    x_prime.update(reduced)
    y_hat = {c: v for c, v in pair.y.items() if c not in part and v}
    for c, v in reduced.items():
        y_hat[c] = ceil_fraction(v)
    d = _greedy_d(y_hat, x_prime, m + 1)
    y_prime = {c: v - d.get(c, 0) for c, v in y_hat.items()}
    y_prime = {c: v for c, v in y_prime.items() if v > 0}
    distance = sum(abs(y_prime.get(c, 0) - pair.y.get(c, 0)) for c in set(y_prime) | set(pair.y))
    return ReduceResult(SolutionPair(x_prime, y_prime), False, distance)


# --------------------------------------------------------------------------- rounding deltas
@dataclass(frozen=True)
class RoundingDelta:
    """Effect of one rounding operation on the LP.

    ``kind`` is ``"insert"`` (a new item of rounded size ``gained``),
    ``"shift"`` (one slot of size ``lost`` leaves the configuration
    ``config`` and a singleton of size ``gained`` is added) or ``"delete"``
    (one slot of size ``lost`` leaves ``config``).
    """

    kind: str
    gained: Optional[Fraction] = None
    lost: Optional[Fraction] = None
    config: Optional[Config] = None


def apply_rounding_delta(pair: SolutionPair, delta: RoundingDelta) -> SolutionPair:
    """Update ``(x, y)`` for one rounding operation, keeping ``x <= y``."""
    x = dict(pair.x)
    y = dict(pair.y)

    def bump(config: Config, amount: int) -> None:
        y[config] = y.get(config, 0) + amount
        x[config] = x.get(config, Fraction(0)) + amount

    def edit(config: Config, size: Fraction) -> None:
        if y.get(config, 0) <= 0:
            raise ValueError(f"configuration {format_config(config)} has y = 0")
        new = config_add(config, size, -1)
        moved_x = min(x.get(config, Fraction(0)), Fraction(1))
        y[config] -= 1
        x[config] = x.get(config, Fraction(0)) - moved_x
        if x[config] > y[config]:
            raise AssertionError("dominance broken by configuration edit")
        if new:
            y[new] = y.get(new, 0) + 1
            x[new] = x.get(new, Fraction(0)) + moved_x

    if delta.kind == "insert":
        bump(make_config({delta.gained: 1}), 1)
    elif delta.kind == "shift":
        edit(delta.config, delta.lost)
        bump(make_config({delta.gained: 1}), 1)
    elif delta.kind == "delete":
        edit(delta.config, delta.lost)
    else:
        raise ValueError(f"unknown delta kind {delta.kind!r}")
    return SolutionPair({c: v for c, v in x.items() if v}, {c: v for c, v in y.items() if v})


def dump_tableau(lp: LpInstance, pair: SolutionPair) -> str:
    """Plain-text listing of ``A``, ``b``, ``x`` and ``y``."""
    configs = sorted(set(pair.x) | set(pair.y), key=_config_order)
    lines = ["sizes: " + " ".join(format_fraction(s) for s in lp.sizes),
             "b:     " + " ".join(str(v) for v in lp.demand)]
    for c in configs:
        col = " ".join(str(v) for v in lp.column(c))
        lines.append(f"[{col}] x={format_fraction(pair.x.get(c, Fraction(0)))} y={pair.y.get(c, 0)}")
    return "\n".join(lines)
