"""Fully dynamic packing of large and small items together.

Bins holding large items offer their leftover capacity ``c = 1 - (large
load)`` to small items.  The global bin order is

* **left queues** ``Q_1 .. Q_l`` made of bins with large items;
* a **bridge** queue holding exactly one capacity-1 bin (present iff
  ``l >= 1``); cascades that start in ``Q_l`` run through the buffer of
  ``Q_l`` and stop at the bridge;
* **right queues** of capacity-1 bins holding only small items.

Bins with large items but no small items that are not in a left queue form
the **heap**; bins whose capacity is below ``epsilon/14`` are *closed* and
never receive small items.  With ``Lambda = (bins in left queues) + h`` the
potential is

    Phi = sum_{i < l} r_i + ceil(Lambda / E) - l,    r_i = small load / c of bb_i,

and the structure keeps ``h = floor(Phi)`` heap bins.  The fill ratio of the
last left buffer ``bb_l`` tracks the fractional part of ``Phi`` (the *heap
equation* ``|(1 - r_l) - {Phi}| <= s / c(bb_l)``, ``s`` the largest small
item in ``bb_l``), so that a change of ``floor(Phi)`` can always be answered
by turning an almost empty ``bb_l`` into a heap bin or an almost full one
into a normal bin.

Large items are handled by :class:`~dynbinpack.large.LargeEngine`.  After
each large event, a left-queue bin whose large content changed keeps its
small items under its new capacity (overflow is pushed right, new room is
refilled from the right); every other changed bin is stripped of its small
items and put back into the heap.  Short left queues are merged, the heap
size and the heap equation are restored, and the stripped small items are
inserted again.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .core import (Event, Item, Packing, Params, ValidationReport, as_fraction, ceil_fraction,
                   floor_fraction, format_fraction, frac_part, validate_packing)
from .large import LargeEngine, LargeEventReport
from .small import Key, Queue, QueueStructure, SBin, key_size, small_category, structure_violations

LEFT, BRIDGE, RIGHT = "left", "bridge", "right"

_SETTLE_LIMIT = 100_000


@dataclass
class MixedEventReport:
    """Per-event outcome of :class:`MixedEngine`."""

    kind: str
    item_id: int
    size: Fraction
    large: bool
    moved_size: Fraction = Fraction(0)
    moved_large: int = 0
    moved_small: int = 0
    repacked_bins: int = 0
    d: int = 0
    regime: str = ""
    changed_bins: int = 0
    settle_rounds: int = 0
    flags: List[str] = field(default_factory=list)

    @property
    def migration_factor(self) -> Fraction:
        return self.moved_size / self.size if self.size else Fraction(0)


class MixedEngine(QueueStructure):
    """Dynamic bin packing of arbitrary items in ``(0, 1]``."""

    def __init__(self, params: Params):
        super().__init__(params, itertools.count())
        self.large = LargeEngine(params, self._ids, keep_priority=self._keep_priority)
        self.lbins: Dict[int, SBin] = {}
        self.heap: List[SBin] = []
        self.closed: Dict[int, SBin] = {}
        self.flags: List[str] = []
        self.reports: List[MixedEventReport] = []
        self._settle_rounds = 0

    # ------------------------------------------------------------------ regions
    def left_queues(self) -> List[Queue]:
        return [q for q in self.queues if q.kind == LEFT]

    @property
    def ell(self) -> int:
        return sum(1 for q in self.queues if q.kind == LEFT)

    def bridge_queue(self) -> Optional[Queue]:
        for q in self.queues:
            if q.kind == BRIDGE:
                return q
        return None

    def right_queues(self) -> List[Queue]:
        return [q for q in self.queues if q.kind == RIGHT]

    def _last_left(self) -> Optional[Queue]:
        lefts = self.left_queues()
        return lefts[-1] if lefts else None

    def _is_large_bin(self, b: SBin) -> bool:
        return self.lbins.get(b.id) is b

    # ------------------------------------------------------------------ potential
    def Lambda(self) -> int:
        return sum(len(q) for q in self.left_queues()) + len(self.heap)

    def phi(self) -> Fraction:
        lefts = self.left_queues()
        total = sum((q.buffer.fill_ratio() for q in lefts[:-1]), Fraction(0))
        return total + ceil_fraction(Fraction(self.Lambda(), self.E)) - len(lefts)

    def heap_equation(self) -> Optional[Tuple[Fraction, Fraction]]:
        """``((1 - r_l) - {Phi}, s / c(bb_l))`` or ``None`` when ``l = 0``."""
        ql = self._last_left()
        if ql is None:
            return None
        bb = ql.buffer
        gap = (1 - bb.fill_ratio()) - frac_part(self.phi())
        return gap, bb.largest_size() / bb.capacity

    def heap_equation_exempt(self) -> bool:
        """``bb_l`` is too empty but nothing to its right can be pulled in."""
        he = self.heap_equation()
        if he is None or he[0] <= he[1]:
            return False
        bb = self._last_left().buffer
        for b in self._right_of_left():
            if b.keys:
                key = b.smallest_of(b.min_cat)
                return bb.load + key_size(key) > bb.capacity
        return True

    def heap_equation_ok(self) -> bool:
        he = self.heap_equation()
        if he is None:
            return True
        return abs(he[0]) <= he[1] or self.heap_equation_exempt()

    def _right_of_left(self) -> List[SBin]:
        return [b for q in self.queues if q.kind != LEFT for b in q.bins]

    # ------------------------------------------------------------------ hooks
    def _span(self, q: Queue) -> List[SBin]:
        if q.kind == LEFT and q is self._last_left():
            bq = self.bridge_queue()
            return q.bins + bq.bins
        return q.bins

    def _role(self, b: SBin, q: Queue) -> str:
        if q.kind == BRIDGE:
            return "buffer"
        if q.bins[-1] is not b:
            return "normal"
        if q.kind == LEFT and q is self._last_left():
            return "through"
        return "buffer"

    def _length_bounds(self, index: int) -> Tuple[int, int]:
        q = self.queues[index]
        two_e = 2 * self.E
        if q.kind == BRIDGE:
            return 1, 1
        if q.kind == LEFT:
            return (1 if q is self._last_left() else self.E), two_e
        rights = self.right_queues()
        if q is rights[0] or q is rights[-1]:
            return 1, two_e
        return self.E, two_e

    def _same_region(self, a: Queue, b: Queue) -> bool:
        return a.kind == b.kind and a.kind != BRIDGE

    def _drop_buffer(self, b: SBin) -> None:
        if self._is_large_bin(b):
            self.heap.append(b)
        else:
            self._release(b)

    def _keep_priority(self, bid: int) -> int:
        b = self.lbins.get(bid)
        return len(b.keys) if b is not None else 0

    def _bootstrap(self) -> None:
        self.queues.append(Queue([self._new_bin()], RIGHT))

    def _flag(self, message: str) -> None:
        self.flags.append(message)
        if self._log is not None:
            self._log.flags.append(message)

    # ------------------------------------------------------------------ heap
    def _take_heap_bin(self) -> Optional[SBin]:
        """Heap bin with the largest capacity (smallest id on ties)."""
        if not self.heap:
            return None
        best = min(self.heap, key=lambda b: (-b.capacity, b.id))
        self.heap.remove(best)
        return best

    def _heap_bin_or_fallback(self) -> SBin:
        b = self._take_heap_bin()
        if b is None:
            self._m2()
            b = self._take_heap_bin()
        if b is None:
            self._flag("no heap bin available: opened an empty bin in a left queue")
            b = self._new_bin()
        return b

    def _split_filler(self, q: Queue) -> SBin:
        if q.kind == LEFT:
            return self._heap_bin_or_fallback()
        return self._new_bin()

    # ------------------------------------------------------------------ buffer lifecycle
    def _buffer_filled(self, q: Queue, b: SBin, overflow: List[Key]) -> None:
        if q.kind == BRIDGE:
            self._bridge_filled(q, b, overflow)
        elif q.kind == LEFT:
            self._left_buffer_filled(q, b, overflow)
        else:
            super()._buffer_filled(q, b, overflow)

    def _left_buffer_filled(self, q: Queue, b: SBin, overflow: List[Key]) -> None:
        if not self.heap:
            self._m2()
        if q is self._last_left():
            # the queue became the last left queue: its buffer now passes
            # cascades on to the bridge
            if overflow:
                self._push_after(q, b, overflow)
            return
        nb = self._heap_bin_or_fallback()
        q.bins.append(nb)
        if overflow:
            self._receive_at_buffer(nb, overflow)
        self._split_if_long(q)

    def _bridge_filled(self, bq: Queue, b: SBin, overflow: List[Key]) -> None:
        """A filled bridge bin joins the first right queue as its first bin."""
        bq.bins[0] = self._new_bin()
        i = self.queue_index(bq)
        if i + 1 < len(self.queues) and self.queues[i + 1].kind == RIGHT:
            qr = self.queues[i + 1]
        else:
            qr = Queue([], RIGHT)
            self.queues.insert(i + 1, qr)
        qr.bins.insert(0, b)
        if len(qr) == 1:
            QueueStructure._buffer_filled(self, qr, b, overflow)
            return
        if overflow:
            self._push_after(qr, b, overflow)
        self._split_if_long(qr)

    def _buffer_emptied(self, q: Queue) -> bool:
        if q.kind == BRIDGE:
            return self._promote()
        return super()._buffer_emptied(q)

    def _promote(self) -> bool:
        """Replace an empty bridge bin by the first bin of the right region."""
        bq = self.bridge_queue()
        if bq.bins[0].keys:
            return False
        i = self.queue_index(bq)
        if i + 1 >= len(self.queues):
            return False
        qr = self.queues[i + 1]
        self._release(bq.bins[0])
        bq.bins[0] = qr.bins.pop(0)
        if not qr.bins:
            self.queues.pop(i + 1)
        return True

    def _bridge_supply(self) -> Optional[SBin]:
        bq = self.bridge_queue()
        while not bq.bins[0].keys:
            if not self._promote():
                return None
        return bq.bins[0]

    def _pull_one(self, x: SBin) -> bool:
        """Move the smallest item of the bridge's largest category into ``x``."""
        src = self._bridge_supply()
        if src is None:
            return False
        key = src.smallest_of(src.min_cat)
        if x.load + key_size(key) > x.capacity:
            return False
        self._detach(src, key)
        self._attach(x, key)
        return True

    def _push_to_bridge(self, x: SBin) -> None:
        key = self._pop_tail(x)
        self._receive_at_buffer(self.bridge_queue().bins[0], [key])

    # ------------------------------------------------------------------ potential moves
    def _m2(self) -> None:
        """Empty ``bb_l`` into the bridge and turn it into a heap bin."""
        ql = self._last_left()
        if ql is None:
            return
        bb = ql.buffer
        while bb.keys:
            self._push_to_bridge(bb)
        ql.bins.pop()
        self.heap.append(bb)
        if not ql.bins:
            self.queues.remove(ql)
            if self.ell == 0:
                self._drop_bridge(None)

    def _m3(self) -> None:
        """Fill ``bb_l`` from the right, label it normal and open the next
        buffer from the heap (plus a new queue when ``Q_l`` is long)."""
        ql = self._last_left()
        if ql is None:
            first = self._take_heap_bin()
            self.queues.insert(0, Queue([first], LEFT))
            self.queues.insert(1, Queue([self._new_bin()], BRIDGE))
            return
        bb = ql.buffer
        while not bb.filled(self.params):
            if not self._pull_one(bb):
                break
        before = len(ql)
        ql.bins.append(self._take_heap_bin())
        if before >= self.E:
            extra = self._take_heap_bin()
            if extra is None:
                self._flag("heap too small to open a new left queue")
                return
            self.queues.insert(self.queue_index(ql) + 1, Queue([extra], LEFT))
            # Q_l may have reached 2/eps bins through merges
            self._split_if_long(ql)

    def _fix_heap_count(self) -> None:
        for _ in range(_SETTLE_LIMIT):
            target = floor_fraction(self.phi())
            h = len(self.heap)
            if h == target:
                return
            if h < target:
                self._m2()
            else:
                self._m3()
        raise RuntimeError("heap size did not settle")

    def _fix_heap_equation(self) -> None:
        for _ in range(_SETTLE_LIMIT):
            he = self.heap_equation()
            if he is None:
                return
            gap, tol = he
            if abs(gap) <= tol:
                return
            bb = self._last_left().buffer
            if gap < 0:
                self._push_to_bridge(bb)
            elif not self._pull_one(bb):
                return
        raise RuntimeError("heap equation did not settle")

    def _after_op(self) -> None:
        self._settle()

    def _settle(self) -> None:
        """Restore the heap count and then the heap equation, repeating
        until both hold at once; the round count is reported per event."""
        for rounds in range(1, _SETTLE_LIMIT + 1):
            self._fix_heap_count()
            self._fix_heap_equation()
            if len(self.heap) == floor_fraction(self.phi()):
                self._settle_rounds = max(self._settle_rounds, rounds)
                return
        raise RuntimeError("heap count and heap equation did not settle")

    def _drop_bridge(self, pool: Optional[List[Key]]) -> None:
        """Remove the bridge (when no left queue is left); its items are
        re-inserted."""
        bq = self.bridge_queue()
        if bq is None:
            return
        b = bq.bins[0]
        keys = list(b.keys)
        for key in keys:
            self._detach(b, key)
            del self.bin_of[key[2]]
        self.queues.remove(bq)
        self._release(b)
        if pool is not None:
            pool.extend(keys)
        else:
            for key in sorted(keys):
                self.place_new(key)

    # ------------------------------------------------------------------ events
    def insert(self, item: Item) -> MixedEventReport:  # type: ignore[override]
        if item.id in self.items or item.id in self.large.items:
            raise ValueError(f"item {item.id} already present")
        if self.params.is_small(item.size):
            return self._small_event("insert", item)
        return self._large_event("insert", item)

    def delete(self, item_id: int) -> MixedEventReport:  # type: ignore[override]
        if item_id in self.items:
            return self._small_event("delete", self.items[item_id])
        if item_id in self.large.items:
            return self._large_event("delete", self.large.items[item_id])
        raise KeyError(f"unknown item {item_id}")

    def on_event(self, event: Event) -> MixedEventReport:
        if event.kind == "insert":
            return self.insert(Item(event.id, event.size))
        return self.delete(event.id)

    def _small_event(self, kind: str, item: Item) -> MixedEventReport:
        self._settle_rounds = 0
        self.begin(item.id)
        if kind == "insert":
            self._insert(item)
        else:
            self._delete(item.id)
        self._after_op()
        result = self.end()
        report = MixedEventReport(kind, item.id, item.size, False, moved_size=result.moved_size,
                                  moved_small=result.moved_items,
                                  repacked_bins=result.repacked_bins, settle_rounds=self._settle_rounds,
                                  flags=result.flags)
        self.reports.append(report)
        return report

    def _large_event(self, kind: str, item: Item) -> MixedEventReport:
        self._settle_rounds = 0
        self.begin(None)
        before = {b: frozenset(c) for b, c in self.large.bins.items() if c}
        where_before = dict(self.large.bin_of)
        if kind == "insert":
            lrep = self.large.insert(item)
        else:
            lrep = self.large.delete(item.id)
        after = {b: frozenset(c) for b, c in self.large.bins.items() if c}
        changed = sorted(b for b in set(before) | set(after) if before.get(b) != after.get(b))
        pool: List[Key] = []
        resized = self._strip_changed(changed, after, pool)
        self._adjust_queue_lengths(pool)
        for b in resized:
            self._settle_resized(b)
        self._settle()
        for key in sorted(pool):
            self.place_new(key)
            self._after_op()
        result = self.end()
        moved_large = 0
        moved_size = result.moved_size
        touched: Set[int] = set()
        for item_id, old in where_before.items():
            new = self.large.bin_of.get(item_id)
            if new is not None and new != old and item_id != item.id:
                moved_large += 1
                moved_size += self.large.items[item_id].size
                touched.update((old, new))
        report = MixedEventReport(kind, item.id, item.size, True, moved_size=moved_size,
                                  moved_large=moved_large, moved_small=result.moved_items,
                                  repacked_bins=result.repacked_bins + len(touched),
                                  d=lrep.d, regime=lrep.regime, changed_bins=len(changed),
                                  settle_rounds=self._settle_rounds, flags=result.flags)
        self.reports.append(report)
        return report

    def _strip_changed(self, changed: Sequence[int], after: Dict[int, frozenset],
                       pool: List[Key]) -> List[SBin]:
        """Apply the new capacities of bins whose large content changed.

        A bin of a left queue that can still hold small items keeps its
        place and items and is returned for :meth:`_settle_resized`.  Every
        other changed bin loses its small items (into ``pool``) and rejoins
        as a heap (or closed) bin with its new capacity.
        """
        in_left = {b.id for q in self.left_queues() for b in q.bins}
        resized: List[SBin] = []
        for bid in changed:
            if bid in in_left and bid in after:
                cap = 1 - self.large.true_load(bid)
                if cap >= self.params.small_threshold:
                    b = self.lbins[bid]
                    b.capacity = cap
                    resized.append(b)
                    continue
            b = self.lbins.pop(bid, None)
            if b is not None:
                for key in list(b.keys):
                    self._detach(b, key)
                    del self.bin_of[key[2]]
                    pool.append(key)
                self._unlink(b)
            if bid in after:
                cap = 1 - self.large.true_load(bid)
                nb = SBin(bid, cap)
                self.lbins[bid] = nb
                if cap < self.params.small_threshold:
                    self.closed[bid] = nb
                else:
                    self.heap.append(nb)
        if self.ell == 0:
            self._drop_bridge(pool)
        return resized

    def _settle_resized(self, b: SBin) -> None:
        """Restore the queue properties around a left bin whose capacity
        changed: overflow is pushed to the right, a normal bin with new room
        is refilled from the right."""
        if self.lbins.get(b.id) is not b or b in self.heap:
            return
        q = next((q for q in self.left_queues() if any(x is b for x in q.bins)), None)
        if q is None:
            return
        role = self._role(b, q)
        if role == "buffer":
            if b.load > b.capacity or b.filled(self.params):
                self._receive_at_buffer(b, [])
        elif b.load > b.capacity:
            evicted: List[Key] = []
            while b.load > b.capacity:
                evicted.append(self._pop_tail(b))
            self._push_after(q, b, evicted)
        elif role == "normal":
            self._refill([b])

    def _unlink(self, b: SBin) -> None:
        if b.id in self.closed:
            del self.closed[b.id]
            return
        for h in self.heap:
            if h is b:
                self.heap.remove(b)
                return
        for q in self.queues:
            for i, x in enumerate(q.bins):
                if x is b:
                    del q.bins[i]
                    if not q.bins:
                        self.queues.remove(q)
                    return

    def _adjust_queue_lengths(self, pool: List[Key]) -> None:
        """Left queues (other than the last) shorter than ``1/eps`` give
        their buffer to the heap and merge with the next queue; an
        over-long result is split around a heap bin."""
        while True:
            lefts = self.left_queues()
            short = next((q for q in lefts[:-1] if len(q) < self.E), None)
            if short is None:
                return
            bb = short.bins.pop()
            for key in list(bb.keys):
                self._detach(bb, key)
                del self.bin_of[key[2]]
                pool.append(key)
            self.heap.append(bb)
            nxt = lefts[lefts.index(short) + 1]
            merged = short.bins + nxt.bins
            i = self.queue_index(short)
            self.queues.remove(short)
            nxt.bins = merged
            if len(nxt) > 2 * self.E:
                half = len(nxt) // 2
                first = Queue(nxt.bins[:half] + [self._heap_bin_or_fallback()], LEFT)
                nxt.bins = nxt.bins[half:]
                self.queues.insert(self.queue_index(nxt), first)
            del i

    # ------------------------------------------------------------------ views
    def used_bins(self) -> int:  # type: ignore[override]
        small_only = sum(1 for b in self.order() if b.keys and not self._is_large_bin(b))
        return len(self.lbins) + small_only

    def live_items(self) -> List[Item]:
        return list(self.large.items.values()) + list(self.items.values())

    def packing(self) -> Packing:  # type: ignore[override]
        packing = Packing()
        for bid, content in self.large.bins.items():
            if content:
                packing.bins[bid] = list(content)
        for b in self.order():
            if b.keys:
                packing.bins.setdefault(b.id, []).extend(k[2] for k in b.keys)
        return packing

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready state: bins, queues, heap, potential."""
        bins = []
        roles: Dict[int, str] = {}
        for q in self.queues:
            for b in q.bins:
                roles[b.id] = f"{q.kind}:{self._role(b, q)}"
        for b in self.heap:
            roles[b.id] = "heap"
        for bid in self.closed:
            roles[bid] = "closed"
        every: Dict[int, SBin] = dict(self.lbins)
        for b in self.order():
            every[b.id] = b
        for bid in sorted(every):
            b = every[bid]
            bins.append({
                "id": bid,
                "role": roles.get(bid, "?"),
                "capacity": format_fraction(b.capacity),
                "large": sorted(self.large.bins.get(bid, [])),
                "small": [k[2] for k in b.keys],
            })
        he = self.heap_equation()
        ql = self._last_left()
        return {
            "epsilon_inv": self.E,
            "items": {str(it.id): format_fraction(it.size)
                      for it in sorted(self.live_items(), key=lambda it: it.id)},
            "bins": bins,
            "queues": [{"kind": q.kind, "bins": [b.id for b in q.bins]} for q in self.queues],
            "heap": sorted(b.id for b in self.heap),
            "closed": sorted(self.closed),
            "phi": format_fraction(self.phi()),
            "phi_frac": format_fraction(frac_part(self.phi())),
            "r_ell": format_fraction(ql.buffer.fill_ratio()) if ql else None,
            "heap_equation_gap": format_fraction(he[0]) if he else None,
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot(), indent=1, sort_keys=True)

    def dump(self) -> str:
        lines = [super().dump()]
        lines.append("heap: " + " ".join(f"{b.id}(c={format_fraction(b.capacity)})"
                                         for b in sorted(self.heap, key=lambda b: b.id)))
        lines.append("closed: " + " ".join(str(b) for b in sorted(self.closed)))
        lines.append(f"Phi={format_fraction(self.phi())} h={len(self.heap)} l={self.ell}")
        return "\n".join(lines)


# --------------------------------------------------------------------------- audit
def verify_mixed(engine: MixedEngine) -> ValidationReport:
    """Full audit: packing validity, small-item properties, large engine,
    capacities, heap size ``h = floor(Phi)`` and the heap equation."""
    params = engine.params
    problems = structure_violations(engine)
    sizes = {it.id: it.size for it in engine.live_items()}
    problems += validate_packing(engine.packing(), sizes).violations
    problems += [f"large: {v}" for v in engine.large.verify().violations]
    live_large = {b for b, c in engine.large.bins.items() if c}
    if set(engine.lbins) != live_large:
        problems.append("large-bin registry out of sync with the large packing")
    seen: Dict[int, str] = {}
    for q in engine.queues:
        for b in q.bins:
            seen[b.id] = q.kind
            if q.kind == LEFT and not engine._is_large_bin(b):
                problems.append(f"left queue holds bin {b.id} without large items")
            if q.kind != LEFT and b.capacity != 1:
                problems.append(f"{q.kind} bin {b.id} has capacity {format_fraction(b.capacity)}")
    for b in engine.heap:
        if b.id in seen:
            problems.append(f"heap bin {b.id} is also in a queue")
        seen[b.id] = "heap"
        if b.keys:
            problems.append(f"heap bin {b.id} holds small items")
        if b.capacity < params.small_threshold:
            problems.append(f"heap bin {b.id} should be closed")
    for bid, b in engine.closed.items():
        if bid in seen:
            problems.append(f"closed bin {bid} is also elsewhere")
        seen[bid] = "closed"
        if b.keys or b.capacity >= params.small_threshold:
            problems.append(f"closed bin {bid} is inconsistent")
    for bid, b in engine.lbins.items():
        if bid not in seen:
            problems.append(f"large bin {bid} is in no region")
        if b.capacity != 1 - engine.large.true_load(bid):
            problems.append(f"bin {bid}: capacity does not match its large items")
        elif seen.get(bid) == LEFT and b.capacity < params.small_threshold:
            problems.append(f"left bin {bid} has capacity below epsilon/14")
    kinds = [q.kind for q in engine.queues]
    ell = kinds.count(LEFT)
    expect = [LEFT] * ell + ([BRIDGE] if ell else []) + [RIGHT] * (len(kinds) - ell - (1 if ell else 0))
    if kinds != expect:
        problems.append(f"queue regions out of order: {kinds}")
    h, target = len(engine.heap), floor_fraction(engine.phi())
    if h != target:
        problems.append(f"heap holds {h} bins but floor(Phi) = {target}")
    if not engine.heap_equation_ok():
        gap, tol = engine.heap_equation()
        problems.append(f"heap equation violated: gap {format_fraction(gap)}, tolerance {format_fraction(tol)}")
    if engine.flags:
        problems.append(f"{len(engine.flags)} fallback flags raised: {engine.flags[0]}")
    return ValidationReport(not problems, problems)


def verify_snapshot(data: Dict[str, Any]) -> ValidationReport:
    """Check a JSON snapshot on its own: every item packed once, capacities
    equal ``1 - large load``, loads within capacity, small categories ordered
    along the queues and ``|heap| = floor(Phi)``."""
    problems: List[str] = []
    try:
        params = Params(int(data["epsilon_inv"]))
        sizes = {int(k): as_fraction(v) for k, v in data["items"].items()}
        bins = {int(b["id"]): b for b in data["bins"]}
        packing = Packing({bid: list(b["large"]) + list(b["small"]) for bid, b in bins.items()})
        problems += validate_packing(packing, sizes).violations
        caps: Dict[int, Fraction] = {}
        for bid, b in bins.items():
            large_load = sum((sizes.get(i, Fraction(0)) for i in b["large"]), Fraction(0))
            cap = as_fraction(b["capacity"])
            caps[bid] = cap
            if cap != 1 - large_load:
                problems.append(f"bin {bid}: capacity {b['capacity']} != 1 - large load")
            if any(not params.is_small(sizes.get(i, Fraction(1))) for i in b["small"]):
                problems.append(f"bin {bid}: a large item is listed as small")
        prev_cat: Optional[int] = None
        for q in data["queues"]:
            for bid in q["bins"]:
                cats = [small_category(sizes[i], params) for i in bins[bid]["small"] if i in sizes]
                if not cats:
                    continue
                if prev_cat is not None and min(cats) < prev_cat:
                    problems.append(f"bin {bid}: small categories out of order")
                prev_cat = max(cats)
        lefts = [q for q in data["queues"] if q["kind"] == LEFT]
        heap = list(data["heap"])
        lam = sum(len(q["bins"]) for q in lefts) + len(heap)
        phi = Fraction(0)
        for q in lefts[:-1]:
            bb = bins[q["bins"][-1]]
            load = sum((sizes[i] for i in bb["small"]), Fraction(0))
            phi += load / caps[bb["id"]]
        phi += ceil_fraction(Fraction(lam, params.E)) - len(lefts)
        if as_fraction(data["phi"]) != phi:
            problems.append(f"stored Phi {data['phi']} differs from recomputed {format_fraction(phi)}")
        if len(heap) != floor_fraction(phi):
            problems.append(f"heap holds {len(heap)} bins but floor(Phi) = {floor_fraction(phi)}")
        for bid in heap:
            if bins[bid]["small"]:
                problems.append(f"heap bin {bid} holds small items")
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        problems.append(f"malformed snapshot: {exc!r}")
    return ValidationReport(not problems, problems)


__all__ = ["MixedEngine", "MixedEventReport", "verify_mixed", "verify_snapshot", "LEFT", "BRIDGE", "RIGHT"]
