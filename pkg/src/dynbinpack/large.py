"""Dynamic packing of large items (size at least ``epsilon/14``).

The engine keeps three coupled views of the large items:

* a :class:`~dynbinpack.rounding.RoundingState` that groups the items and
  rounds each one up to the largest size of its group;
* concrete bins, each holding items whose *rounded* sizes sum to at most one
  (so true loads are at most one as well);
* the configuration LP of the rounded instance with an integral solution
  ``y`` (the multiset of bin configurations) and a fractional solution ``x``
  with ``x <= y`` - the best fractional solution restricted to the
  configurations ``y`` uses.

Two regimes:

* **offline** (the rounded instance is small compared to the number of
  rounded sizes): new items go first-fit by rounded load into existing bins,
  and a watchdog keeps the bin count within ``(1 + 2 Delta) LB + m``.  When
  the watchdog fails, the least-filled bins are repacked locally;
* **online**: each insertion runs ``improve(2)`` and each deletion
  ``improve(4)`` followed by a component reduction.  Each interval-correcting
  block shift is preceded by ``improve(1)`` (insertions) or ``improve(3)``
  (deletions).

In both regimes the group-size parameter ``k`` tracks the total large size,
and the number of A-groups is steered towards ``floor(frac(kappa) * (A+B))``
by block shifts, which are counted per event.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .core import Item, Packing, Params, ValidationReport, ceil_fraction, floor_fraction, frac_part
from .lp import (Config, LpInstance, SolutionPair, build_lp, check_pair, config_load, exact_lin,
                 improve, make_config, reduce_components, restricted_fractional, _config_order)
from .rounding import (RoundingState, RoundingTrace, k_parameter, kappa, verify_rounding)

ALPHA_INSERT = 2
ALPHA_DELETE = 4
ALPHA_SHIFT_A = 1
ALPHA_SHIFT_B = 3
#: Safety cap on block shifts per event (the analysis bounds them by 11).
MAX_SHIFTS_PER_EVENT = 64


@dataclass
class LargeEventReport:
    """What one large-item event did to the large packing."""

    regime: str = "offline"
    d: int = 0
    renamed: bool = False
    improve_calls: int = 0
    improve_skipped: int = 0
    reduce_calls: int = 0
    repairs: int = 0
    interval_recomputations: int = 0
    interval_ok: bool = True
    changed_bins: Set[int] = field(default_factory=set)
    removed_bins: Set[int] = field(default_factory=set)


def online_thresholds(size_large: Fraction, m: int, params: Params) -> bool:
    """True when the instance is large enough for the online regime."""
    inv = 1 / params.delta
    return size_large >= (m + 2) * (inv + 2) and size_large >= 8 * (inv + 1)


class LargeEngine:
    """Packing of the large items with rounding, LP bookkeeping and bins.

    ``bin_ids`` is an iterator of fresh bin identifiers (shared with the
    caller so that bins of different layers never collide).  ``usable`` is an
    optional predicate telling whether a bin may receive additional large
    items; ``keep_priority`` ranks bins that should preferably be left
    untouched when a new packing is realized (higher is kept first).
    """

    def __init__(self, params: Params, bin_ids: Optional[Iterator[int]] = None,
                 usable: Optional[Callable[[int], bool]] = None,
                 keep_priority: Optional[Callable[[int], int]] = None):
        self.params = params
        self.rounding = RoundingState(params, 1)
        self.items: Dict[int, Item] = {}
        self.bins: Dict[int, List[int]] = {}
        self.bin_of: Dict[int, int] = {}
        self._ids = bin_ids if bin_ids is not None else itertools.count()
        self.usable = usable or (lambda bid: True)
        self.keep_priority = keep_priority or (lambda bid: 0)
        self.size_large = Fraction(0)
        self.last = LargeEventReport()
        self.history: List[LargeEventReport] = []

    # ------------------------------------------------------------------ views
    @property
    def k(self) -> int:
        return self.rounding.k

    @property
    def kappa(self) -> Fraction:
        return kappa(self.size_large, self.params)

    @property
    def frac(self) -> Fraction:
        return frac_part(self.kappa)

    def block_counts(self) -> Tuple[int, int]:
        return self.rounding.block_counts()

    def lp(self) -> LpInstance:
        return build_lp(self.rounding)

    def config_of(self, bid: int) -> Config:
        return make_config(Counter(self.rounding.rounded_size(i) for i in self.bins[bid]))

    def y(self) -> Dict[Config, int]:
        return dict(Counter(self.config_of(b) for b, content in self.bins.items() if content))

    def pair(self) -> SolutionPair:
        y = self.y()
        return SolutionPair(restricted_fractional(self.lp(), y), y)

    def rounded_load(self, bid: int) -> Fraction:
        return sum((self.rounding.rounded_size(i) for i in self.bins[bid]), Fraction(0))

    def true_load(self, bid: int) -> Fraction:
        return sum((self.items[i].size for i in self.bins.get(bid, ())), Fraction(0))

    def bins_used(self) -> int:
        return sum(1 for c in self.bins.values() if c)

    def assignment(self) -> Dict[int, int]:
        return dict(self.bin_of)

    def packing(self) -> Packing:
        return Packing({b: list(c) for b, c in self.bins.items()})

    def lower_bound(self) -> int:
        big = sum(1 for it in self.items.values() if it.size > Fraction(1, 2))
        return max(ceil_fraction(self.size_large), big)

    def online(self) -> bool:
        return online_thresholds(self.size_large, self.lp().m, self.params)

    def interval_target(self) -> Optional[int]:
        """Required number of A-groups, or ``None`` when ``k == 1`` (no B-groups)."""
        if self.k < 2:
            return None
        a, b = self.block_counts()
        return floor_fraction(self.frac * (a + b))

    # ------------------------------------------------------------------ events
    def insert(self, item: Item) -> LargeEventReport:
        if item.id in self.items:
            raise ValueError(f"item {item.id} already packed")
        report = LargeEventReport()
        self.last = report
        self.size_large += item.size
        online = online_thresholds(self.size_large, self.lp().m, self.params)
        report.regime = "online" if online else "offline"
        if online:
            self._improve(ALPHA_INSERT, report)
        self.items[item.id] = item
        trace = self.rounding.insert(item)
        self._place(item.id, report)
        self._settle(trace, report)
        self._interval_loop(report, online, inserting=True)
        if not online:
            self._watchdog(report)
        self.history.append(report)
        return report

    def delete(self, item_id: int) -> LargeEventReport:
        if item_id not in self.items:
            raise KeyError(f"unknown large item {item_id}")
        report = LargeEventReport()
        self.last = report
        item = self.items[item_id]
        self.size_large -= item.size
        online = online_thresholds(self.size_large, self.lp().m, self.params)
        report.regime = "online" if online else "offline"
        if online:
            self._improve(ALPHA_DELETE, report)
        del self.items[item_id]
        bid = self.bin_of.pop(item_id)
        self.bins[bid].remove(item_id)
        report.changed_bins.add(bid)
        if not self.bins[bid]:
            del self.bins[bid]
            report.removed_bins.add(bid)
        trace = self.rounding.delete(item_id)
        self._settle(trace, report)
        if online:
            self._reduce(report)
        self._interval_loop(report, online, inserting=False)
        if not online:
            self._watchdog(report)
        self.history.append(report)
        return report

    # ------------------------------------------------------------------ placement
    def _new_bin(self, report: LargeEventReport) -> int:
        bid = next(self._ids)
        self.bins[bid] = []
        report.changed_bins.add(bid)
        return bid

    def _place(self, item_id: int, report: LargeEventReport, exclude: Iterable[int] = ()) -> int:
        """First fit by rounded load over usable bins (ascending id), else a new bin."""
        rs = self.rounding.rounded_size(item_id)
        skip = set(exclude)
        for bid in sorted(self.bins):
            if bid in skip or not self.bins[bid] or not self.usable(bid):
                continue
            if self.rounded_load(bid) + rs <= 1:
                break
        else:
            bid = self._new_bin(report)
        self.bins[bid].append(item_id)
        self.bin_of[item_id] = bid
        report.changed_bins.add(bid)
        return bid

    def _settle(self, trace: RoundingTrace, report: LargeEventReport) -> None:
        """Repair bins whose rounded load exceeds one after a rounding change.

        Items are evicted (the smallest one that clears the overflow) and placed first-fit
        elsewhere; rounded sizes only grow for items that moved to a group
        of larger items, so only bins holding members of touched groups are
        checked.
        """
        uids = set(trace.created) | {m[1] for m in trace.moves} | {m[2] for m in trace.moves}
        uids |= {r[1] for r in trace.retypes} | {r[2] for r in trace.retypes}
        uids |= {a[1] for a in trace.added}
        suspects: Set[int] = set()
        for uid in uids:
            group = self.rounding.groups.get(uid)
            if group is None:
                continue
            for it in group.items:
                if it.id in self.bin_of:
                    suspects.add(self.bin_of[it.id])
        for bid in sorted(suspects):
            self._fix_bin(bid, report)

    def _fix_bin(self, bid: int, report: LargeEventReport) -> None:
        if bid not in self.bins:
            return
        while self.rounded_load(bid) > 1:
            # cheapest single eviction that clears the overflow, else the largest item
            excess = self.rounded_load(bid) - 1
            rs = self.rounding.rounded_size
            fits = [i for i in self.bins[bid] if rs(i) >= excess]
            if fits:
                victim = min(fits, key=lambda i: (self.items[i].size, i))
            else:
                victim = max(self.bins[bid], key=lambda i: (rs(i), i))
            self.bins[bid].remove(victim)
            report.changed_bins.add(bid)
            self._place(victim, report, exclude=(bid,))

    # ------------------------------------------------------------------ interval loop
    def _interval_loop(self, report: LargeEventReport, online: bool, inserting: bool) -> None:
        new_k = k_parameter(self.size_large, self.params)
        if new_k != self.rounding.k:
            trace = self.rounding.rename(new_k)
            report.renamed = True
            self._settle(trace, report)
        while report.d < MAX_SHIFTS_PER_EVENT:
            target = self.interval_target()
            report.interval_recomputations += 1
            if target is None:
                break
            a, _ = self.block_counts()
            if a == target:
                break
            grow = a < target
            ells = [ell for ell in sorted(self.rounding.categories)
                    if (self.rounding.can_shift_a(ell) if grow else self.rounding.can_shift_b(ell))]
            if not ells:
                break
            if online:
                self._improve(ALPHA_SHIFT_A if grow else ALPHA_SHIFT_B, report)
                # improvement does not change the rounding; re-check applicability
            ell = ells[0]
            trace = self.rounding.shift_a(ell) if grow else self.rounding.shift_b(ell)
            report.d += 1
            self._settle(trace, report)
        target = self.interval_target()
        report.interval_ok = target is None or self.block_counts()[0] == target

    # ------------------------------------------------------------------ LP maintenance
    def _improve(self, alpha: int, report: LargeEventReport) -> None:
        if not self.items:
            return
        lp = self.lp()
        pair = self.pair()
        result = improve(pair, lp, alpha, self.params)
        report.improve_calls += 1
        if not result.preconditions_ok:
            report.improve_skipped += 1
            return
        if result.pair.y != pair.y:
            self.realize(result.pair.y, report)

    def _reduce(self, report: LargeEventReport) -> None:
        if not self.items:
            return
        lp = self.lp()
        pair = self.pair()
        limit = self.params.Delta * self.lower_bound() + lp.m
        rounds = 0
        while pair.support() > limit and rounds < 8:
            result = reduce_components(pair, lp, self.params)
            report.reduce_calls += 1
            rounds += 1
            if result.early_exit:
                break
            self.realize(result.pair.y, report)
            pair = self.pair()

    def realize(self, y_target: Dict[Config, int], report: Optional[LargeEventReport] = None) -> None:
        """Change the bins to match ``y_target`` while moving few items.

        Bins whose configuration is still wanted are kept (preferring high
        ``keep_priority``); every additional configuration reuses the
        dissolved bin with the largest overlap, keeps the overlapping items in
        place and fills the remaining slots with released items of the same
        rounded size (largest true size first).
        """
        report = report if report is not None else LargeEventReport()
        lp = self.lp()
        if not lp.is_feasible(y_target):
            raise ValueError("target configuration multiset does not cover the demand")
        by_config: Dict[Config, List[int]] = {}
        for bid in sorted(self.bins):
            if self.bins[bid]:
                by_config.setdefault(self.config_of(bid), []).append(bid)
        dissolved: List[int] = []
        todo: List[Config] = []
        for config in sorted(set(by_config) | set(y_target), key=_config_order):
            have = sorted(by_config.get(config, []), key=lambda b: (-self.keep_priority(b), b))
            want = y_target.get(config, 0)
            dissolved += have[want:]
            todo += [config] * max(0, want - len(have))
        if not dissolved and not todo:
            return
        todo.sort(key=lambda c: (-config_load(c), _config_order(c)))
        pool: Dict[Fraction, List[int]] = {}
        plans: List[Tuple[int, Config, List[int]]] = []
        free = sorted(dissolved, key=lambda b: (-self.keep_priority(b), b))
        for config in todo:
            best, best_overlap = None, Fraction(0)
            for bid in free:
                have = Counter(self.rounding.rounded_size(i) for i in self.bins[bid])
                overlap = sum((s * min(c, have.get(s, 0)) for s, c in config), Fraction(0))
                if overlap > best_overlap:
                    best, best_overlap = bid, overlap
            kept: List[int] = []
            if best is not None:
                free.remove(best)
                slots = dict(config)
                for i in sorted(self.bins[best], key=lambda i: (-self.items[i].size, i)):
                    rs = self.rounding.rounded_size(i)
                    if slots.get(rs, 0) > 0:
                        slots[rs] -= 1
                        kept.append(i)
                    else:
                        pool.setdefault(rs, []).append(i)
            plans.append((best, config, kept))
        for bid in free:
            for i in self.bins[bid]:
                pool.setdefault(self.rounding.rounded_size(i), []).append(i)
        for rs in pool:
            pool[rs].sort(key=lambda i: (-self.items[i].size, i))
        new_bins: Dict[int, List[int]] = {}
        for bid, config, kept in plans:
            content = list(kept)
            slots = Counter(dict(config))
            for i in kept:
                slots[self.rounding.rounded_size(i)] -= 1
            for rs, count in sorted(slots.items(), key=lambda kv: -kv[0]):
                for _ in range(count):
                    if pool.get(rs):
                        content.append(pool[rs].pop(0))
            if not content:
                continue
            if bid is None:
                bid = next(self._ids)
            new_bins[bid] = content
        if any(pool.values()):
            raise AssertionError("realization left items unplaced")
        for bid in dissolved:
            report.changed_bins.add(bid)
            del self.bins[bid]
        for bid, content in new_bins.items():
            self.bins[bid] = content
            report.changed_bins.add(bid)
            for i in content:
                self.bin_of[i] = bid
        for bid in dissolved:
            if bid not in self.bins:
                report.removed_bins.add(bid)

    # ------------------------------------------------------------------ offline quality
    def bin_bound(self) -> Fraction:
        """``(1 + 2 Delta) LB + m`` with a lower bound ``LB`` on OPT."""
        return (1 + 2 * self.params.Delta) * self.lower_bound() + self.lp().m

    def _watchdog(self, report: LargeEventReport) -> None:
        rounds = 0
        while self.bins_used() > self.bin_bound() and rounds < 4:
            rounds += 1
            if not self._local_repair(report):
                break

    def repair_width(self) -> int:
        """Number of bins repacked by one local repair: ``2 (1/delta + 1)``."""
        return 2 * (self.params.E + 1)

    def _local_repair(self, report: LargeEventReport) -> bool:
        """Repack the least-filled bins first-fit-decreasing (by rounded size)
        into the remaining bins and fresh bins; keep it only if it saves bins."""
        width = self.repair_width()
        order = sorted((b for b in self.bins if self.bins[b]),
                       key=lambda b: (self.rounded_load(b), -self.keep_priority(b), b))
        chosen = order[:width]
        if len(chosen) < 2:
            return False
        items = sorted((i for b in chosen for i in self.bins[b]),
                       key=lambda i: (-self.rounding.rounded_size(i), -self.items[i].size, i))
        loads = {b: self.rounded_load(b) for b in self.bins if self.bins[b] and b not in chosen
                 and self.usable(b)}
        placement: Dict[int, object] = {}
        fresh: List[Fraction] = []
        for i in items:
            rs = self.rounding.rounded_size(i)
            for b in sorted(loads):
                if loads[b] + rs <= 1:
                    loads[b] += rs
                    placement[i] = b
                    break
            else:
                for j, load in enumerate(fresh):
                    if load + rs <= 1:
                        fresh[j] += rs
                        placement[i] = ("fresh", j)
                        break
                else:
                    fresh.append(rs)
                    placement[i] = ("fresh", len(fresh) - 1)
        if len(fresh) >= len(chosen):
            return False
        # reuse the chosen bin ids for the fresh bins to keep items in place
        fresh_ids: Dict[int, int] = {}
        remaining = list(chosen)
        for j in range(len(fresh)):
            members = [i for i, p in placement.items() if p == ("fresh", j)]
            counts = Counter(self.bin_of[i] for i in members if self.bin_of[i] in remaining)
            if counts:
                bid = max(counts, key=lambda b: (counts[b], -b))
            else:
                bid = remaining[0]
            remaining.remove(bid)
            fresh_ids[j] = bid
        for b in chosen:
            self.bins[b] = []
        for i in items:
            p = placement[i]
            bid = fresh_ids[p[1]] if isinstance(p, tuple) else p
            self.bins[bid].append(i)
            self.bin_of[i] = bid
            report.changed_bins.add(bid)
        for b in chosen:
            report.changed_bins.add(b)
            if not self.bins[b]:
                del self.bins[b]
                report.removed_bins.add(b)
        report.repairs += 1
        return True

    # ------------------------------------------------------------------ audit
    def verify(self) -> ValidationReport:
        problems: List[str] = []
        rep = verify_rounding(self.rounding, self.params)
        problems += rep.violations
        if self.rounding.k != k_parameter(self.size_large, self.params):
            problems.append(f"k = {self.rounding.k} but SIZE gives {k_parameter(self.size_large, self.params)}")
        ids = {it.id for it in self.rounding.items()}
        if ids != set(self.items):
            problems.append("rounding and item set differ")
        seen: Set[int] = set()
        for bid, content in self.bins.items():
            if not content:
                problems.append(f"bin {bid} is empty")
            for i in content:
                if i in seen:
                    problems.append(f"item {i} packed twice")
                seen.add(i)
                if self.bin_of.get(i) != bid:
                    problems.append(f"item {i}: index points to {self.bin_of.get(i)} not {bid}")
            if content and self.rounded_load(bid) > 1:
                problems.append(f"bin {bid}: rounded load {self.rounded_load(bid)} > 1")
        if seen != set(self.items):
            problems.append("some large items are not packed")
        if sum((it.size for it in self.items.values()), Fraction(0)) != self.size_large:
            problems.append("SIZE bookkeeping drifted")
        if not problems:
            lp = self.lp()
            problems += check_pair(self.pair(), lp).violations
        return ValidationReport(not problems, problems)


# --------------------------------------------------------------------------- offline construction
def realize_packing(pair: SolutionPair, rounding: RoundingState) -> Packing:
    """Concrete bins for the integral solution ``pair.y`` of ``rounding``'s LP.

    Configurations are expanded in canonical order; each slot of rounded size
    ``r`` takes the largest still unplaced item whose rounded size is ``r``.
    Unused slots stay empty and empty bins are dropped.
    """
    lp = build_lp(rounding)
    if not lp.is_feasible(pair.y):
        raise ValueError("integral solution does not cover the demand")
    pool: Dict[Fraction, List[Item]] = {}
    for g in rounding.nonempty_groups():
        pool.setdefault(g.rounded_size, []).extend(g.items)
    for rs in pool:
        pool[rs].sort(key=lambda it: (-it.size, it.id))
    packing = Packing()
    bid = 0
    for config in sorted(pair.y, key=_config_order):
        for _ in range(pair.y[config]):
            content = []
            for rs, count in config:
                for _ in range(count):
                    if pool.get(rs):
                        content.append(pool[rs].pop(0).id)
            if content:
                packing.bins[bid] = content
                bid += 1
    return packing


def solve_offline(rounding: RoundingState) -> SolutionPair:
    """Exact LP optimum ``x`` and ``y = ceil(x)`` trimmed while feasible."""
    lp = build_lp(rounding)
    _, x = exact_lin(lp)
    y = {c: ceil_fraction(v) for c, v in x.items() if v}
    cover = lp.coverage(y)
    for c in sorted(y, key=lambda c: (-(y[c] - x[c]), _config_order(c))):
        while y[c] > 0 and all(cover[lp.row(s)] - n >= lp.demand[lp.row(s)] for s, n in c):
            y[c] -= 1
            for s, n in c:
                cover[lp.row(s)] -= n
    y = {c: v for c, v in y.items() if v}
    x = restricted_fractional(lp, y)
    return SolutionPair(x, y)


def offline_fallback(items: Iterable[Item], params: Params,
                     bin_ids: Optional[Iterator[int]] = None) -> LargeEngine:
    """A fresh engine for ``items``: canonical rounding, exact LP, realized bins."""
    items = list(items)
    engine = LargeEngine(params, bin_ids)
    size = sum((it.size for it in items), Fraction(0))
    engine.rounding = RoundingState.from_items(items, params, k_parameter(size, params))
    engine.items = {it.id: it for it in items}
    engine.size_large = size
    if not items:
        return engine
    packing = realize_packing(solve_offline(engine.rounding), engine.rounding)
    for content in packing.bins.values():
        bid = next(engine._ids)
        engine.bins[bid] = list(content)
        for i in content:
            engine.bin_of[i] = bid
    return engine
