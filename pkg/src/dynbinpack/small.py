"""Small items (size below ``epsilon/14``) packed in queues of filled bins.

Small items are grouped into size categories ``S_j = [eps/2^(j+1), eps/2^j)``.
Bins are arranged in one global left-to-right order that is cut into
*queues*; the last bin of each queue is its *buffer* bin and every other
(*normal*) bin is kept *filled completely*: its free space is below
``eps/2^j`` for the largest category ``S_j`` it holds.  Categories never
decrease from left to right, and every queue except the last one has between
``1/eps`` and ``2/eps`` bins.

An insertion puts the item into the last bin holding its category (or a
larger one) and pushes the smallest items that no longer fit towards the
right, category by category, until the queue's buffer absorbs them.  A
deletion refills the hole by pulling items from the right in the same way.
A buffer that fills up becomes a normal bin and a fresh buffer is opened (a
queue longer than ``2/eps`` is split); a buffer that runs empty is removed
and the neighbouring queue lends a bin or is merged.

:class:`QueueStructure` implements the mechanics for bins of arbitrary
capacity and exposes the buffer lifecycle as overridable hooks; the
small-items-only policy lives in the base class and the mixed setting
overrides the hooks (see :mod:`dynbinpack.mixed`).
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .core import Item, Packing, Params, ValidationReport, ceil_fraction, format_fraction, log2_floor

#: Sort key of a small item inside a bin: (category, -size, id).  The head
#: of a bin holds its largest items, the tail its smallest.
Key = Tuple[int, Fraction, int]


def small_category(size: Fraction, params: Params) -> int:
    """Index ``j`` with ``eps/2^(j+1) <= size < eps/2^j``."""
    size = Fraction(size)
    if not 0 < size < params.small_threshold:
        raise ValueError(f"size {size} is not small for epsilon = 1/{params.E}")
    ratio = params.epsilon / size
    j = log2_floor(ratio)
    # the lower end eps/2^(j+1) belongs to S_j, so exact powers step down
    return j - 1 if Fraction(2) ** j == ratio else j


def category_bound(j: int, params: Params) -> Fraction:
    """Upper end ``eps/2^j`` of category ``S_j``."""
    return params.epsilon / (2 ** j)


def key_size(key: Key) -> Fraction:
    return -key[1]


class SBin:
    """A bin as seen by the small-item layer: capacity left by large items
    plus a sorted list of small-item keys."""

    __slots__ = ("id", "capacity", "keys", "load")

    def __init__(self, bid: int, capacity: Fraction = Fraction(1)):
        self.id = bid
        self.capacity = Fraction(capacity)
        self.keys: List[Key] = []
        self.load = Fraction(0)

    def __repr__(self) -> str:
        return f"SBin({self.id}, cap={format_fraction(self.capacity)}, n={len(self.keys)})"

    # -- contents
    def add(self, key: Key) -> None:
        bisect.insort(self.keys, key)
        self.load += key_size(key)

    def remove(self, key: Key) -> None:
        i = bisect.bisect_left(self.keys, key)
        if i >= len(self.keys) or self.keys[i] != key:
            raise KeyError(key)
        del self.keys[i]
        self.load -= key_size(key)

    def pop_tail(self) -> Key:
        key = self.keys.pop()
        self.load -= key_size(key)
        return key

    @property
    def free(self) -> Fraction:
        return self.capacity - self.load

    @property
    def min_cat(self) -> Optional[int]:
        return self.keys[0][0] if self.keys else None

    @property
    def max_cat(self) -> Optional[int]:
        return self.keys[-1][0] if self.keys else None

    def has_cat(self, cat: int) -> bool:
        i = bisect.bisect_left(self.keys, (cat,))
        return i < len(self.keys) and self.keys[i][0] == cat

    def smallest_of(self, cat: int) -> Optional[Key]:
        """Smallest item of category ``cat`` (the last key of its block)."""
        i = bisect.bisect_left(self.keys, (cat + 1,))
        if i > 0 and self.keys[i - 1][0] == cat:
            return self.keys[i - 1]
        return None

    def largest_size(self) -> Fraction:
        return max((key_size(k) for k in self.keys), default=Fraction(0))

    def filled(self, params: Params) -> bool:
        """Filled completely: free space below ``eps/2^j`` for the largest
        category ``S_j`` present.  Empty bins are never filled."""
        if not self.keys:
            return False
        return self.free < category_bound(self.keys[0][0], params)

    def fill_ratio(self) -> Fraction:
        return self.load / self.capacity if self.capacity else Fraction(0)


class Queue:
    """An ordered run of bins; the last one is the buffer bin."""

    __slots__ = ("bins", "kind")

    def __init__(self, bins: Sequence[SBin], kind: str = "small"):
        self.bins: List[SBin] = list(bins)
        self.kind = kind

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def buffer(self) -> SBin:
        return self.bins[-1]

    def __repr__(self) -> str:
        return f"Queue({self.kind}, {[b.id for b in self.bins]})"


@dataclass
class SmallOpResult:
    """Migration caused by one small-item operation (the trigger excluded)."""

    moved_size: Fraction = Fraction(0)
    moved_items: int = 0
    repacked_bins: int = 0
    opened_bins: int = 0
    released_bins: int = 0
    flags: List[str] = field(default_factory=list)


class _OpLog:
    __slots__ = ("origin", "trigger", "opened", "released", "flags")

    def __init__(self, trigger: Optional[int]):
        self.origin: Dict[int, Optional[int]] = {}
        self.trigger = trigger
        self.opened = 0
        self.released = 0
        self.flags: List[str] = []


class QueueStructure:
    """Queues of bins holding small items, with the small-items-only policy.

    ``bin_ids`` supplies fresh bin identifiers (shared with other layers in
    the mixed setting).
    """

    def __init__(self, params: Params, bin_ids: Optional[Iterator[int]] = None):
        self.params = params
        self.E = params.E
        self.queues: List[Queue] = []
        self.items: Dict[int, Item] = {}
        self.key_of: Dict[int, Key] = {}
        self.bin_of: Dict[int, SBin] = {}
        self._ids = bin_ids if bin_ids is not None else itertools.count()
        self._log: Optional[_OpLog] = None
        self.history: List[SmallOpResult] = []

    # ------------------------------------------------------------------ views
    def order(self) -> List[SBin]:
        """All queue bins in global left-to-right order."""
        return [b for q in self.queues for b in q.bins]

    def queue_of(self, b: SBin) -> Queue:
        for q in self.queues:
            for x in q.bins:
                if x is b:
                    return q
        raise KeyError(f"bin {b.id} is not in a queue")

    def queue_index(self, q: Queue) -> int:
        for i, other in enumerate(self.queues):
            if other is q:
                return i
        raise KeyError("unknown queue")

    def bin_count(self) -> int:
        return sum(len(q) for q in self.queues)

    def used_bins(self) -> int:
        """Bins holding at least one small item."""
        return sum(1 for b in self.order() if b.keys)

    def total_size(self) -> Fraction:
        return sum((it.size for it in self.items.values()), Fraction(0))

    def packing(self) -> Packing:
        packing = Packing()
        for b in self.order():
            if b.keys:
                packing.bins[b.id] = [k[2] for k in b.keys]
                packing.capacities[b.id] = b.capacity
        return packing

    def is_filled(self, b: SBin) -> bool:
        return b.filled(self.params)

    # ------------------------------------------------------------------ roles (hooks)
    def _span(self, q: Queue) -> List[SBin]:
        """Bins a cascade started in ``q`` may touch; the last one stops it."""
        return q.bins

    def _role(self, b: SBin, q: Queue) -> str:
        """``normal`` (kept filled), ``buffer`` (absorbs cascades) or
        ``through`` (a buffer that cascades pass like a normal bin)."""
        return "buffer" if q.bins[-1] is b else "normal"

    def _length_bounds(self, index: int) -> Tuple[int, int]:
        last = index == len(self.queues) - 1
        return (1 if last else self.E, 2 * self.E)

    def _new_bin(self, capacity: Fraction = Fraction(1)) -> SBin:
        if self._log is not None:
            self._log.opened += 1
        return SBin(next(self._ids), capacity)

    def _release(self, b: SBin) -> None:
        if b.keys:
            raise AssertionError(f"releasing non-empty bin {b.id}")
        if self._log is not None:
            self._log.released += 1

    def _entry_bins(self) -> List[SBin]:
        """Bins an arriving item may be routed to, in global order."""
        return self.order()

    def _bootstrap(self) -> None:
        self.queues.append(Queue([self._new_bin()]))

    # ------------------------------------------------------------------ item moves
    def _attach(self, b: SBin, key: Key) -> None:
        b.add(key)
        self.bin_of[key[2]] = b

    def _detach(self, b: SBin, key: Key) -> None:
        b.remove(key)
        self._note(key[2], b)

    def _note(self, item_id: int, b: SBin) -> None:
        if self._log is not None and item_id not in self._log.origin:
            self._log.origin[item_id] = b.id

    def _pop_tail(self, b: SBin) -> Key:
        key = b.pop_tail()
        self._note(key[2], b)
        return key

    # ------------------------------------------------------------------ operations
    def begin(self, trigger: Optional[int] = None) -> None:
        self._log = _OpLog(trigger)

    def end(self) -> SmallOpResult:
        log = self._log
        self._log = None
        result = SmallOpResult(opened_bins=log.opened, released_bins=log.released,
                               flags=list(log.flags))
        touched: Set[int] = set()
        for item_id, origin in log.origin.items():
            if item_id == log.trigger or item_id not in self.bin_of:
                continue
            now = self.bin_of[item_id].id
            if now != origin:
                result.moved_size += self.items[item_id].size
                result.moved_items += 1
                touched.add(origin)
                touched.add(now)
        result.repacked_bins = len(touched)
        return result

    def insert(self, item: Item) -> SmallOpResult:
        """Insert a small item (Insert of the cascade algorithm)."""
        self.begin(item.id)
        self._insert(item)
        self._after_op()
        result = self.end()
        self.history.append(result)
        return result

    def delete(self, item_id: int) -> SmallOpResult:
        """Delete a small item (Delete of the cascade algorithm)."""
        self.begin(item_id)
        self._delete(item_id)
        self._after_op()
        result = self.end()
        self.history.append(result)
        return result

    def _after_op(self) -> None:
        """Hook for policies that restore extra invariants after a cascade."""

    def _insert(self, item: Item) -> None:
        if item.id in self.items:
            raise ValueError(f"item {item.id} already present")
        cat = small_category(item.size, self.params)
        key: Key = (cat, -item.size, item.id)
        self.items[item.id] = item
        self.key_of[item.id] = key
        self.place_new(key)

    def place_new(self, key: Key) -> None:
        """Route a detached item into the structure: into the last bin that
        holds its category or a larger one (the first bin if none does)."""
        if not self.queues:
            self._bootstrap()
        entry = self._entry_bins()
        target = None
        for b in reversed(entry):
            if b.keys and b.min_cat <= key[0]:
                target = b
                break
        if target is None:
            target = entry[0]
        self._push(self.queue_of(target), target, [key])

    def _delete(self, item_id: int) -> None:
        if item_id not in self.items:
            raise KeyError(f"unknown small item {item_id}")
        key = self.key_of.pop(item_id)
        b = self.bin_of.pop(item_id)
        b.remove(key)
        del self.items[item_id]
        self._after_removal(b)

    def _after_removal(self, b: SBin) -> None:
        q = self.queue_of(b)
        role = self._role(b, q)
        if role == "normal":
            self._refill([b])
        elif role == "buffer" and not b.keys:
            self._buffer_emptied(q)

    # ------------------------------------------------------------------ push (insert cascade)
    def _push(self, q: Queue, start: SBin, carry: List[Key]) -> None:
        """Deliver ``carry`` to ``start`` and cascade overflow to the right.

        A receiving bin keeps what fits and evicts its smallest items; each
        evicted item of category ``c`` goes to the last bin of the span that
        holds an item of category at most ``c`` (the next bin if none does).
        The final bin of the span is a buffer and handles overflow itself.
        """
        self._cascade(self._span(q), {start.id: list(carry)})

    def _push_after(self, q: Queue, x: SBin, keys: List[Key]) -> None:
        """Route ``keys`` as if they had just been evicted from ``x``."""
        span = self._span(q)
        p = next(i for i, b in enumerate(span) if b is x)
        pending: Dict[int, List[Key]] = {}
        for key in keys:
            self._route(span, p, key, pending)
        self._cascade(span, pending)

    @staticmethod
    def _route(span: List[SBin], p: int, key: Key, pending: Dict[int, List[Key]]) -> None:
        c = key[0]
        target = p + 1
        for r in range(len(span) - 1, p, -1):
            b = span[r]
            if (b.keys and b.min_cat <= c) or any(k[0] <= c for k in pending.get(b.id, ())):
                target = r
                break
        pending.setdefault(span[target].id, []).append(key)

    def _cascade(self, span: List[SBin], pending: Dict[int, List[Key]]) -> None:
        pos = {b.id: p for p, b in enumerate(span)}
        while pending:
            bid = min(pending, key=lambda i: pos[i])
            keys = pending.pop(bid)
            p = pos[bid]
            x = span[p]
            if p == len(span) - 1:
                self._receive_at_buffer(x, keys)
                continue
            for key in keys:
                self._attach(x, key)
            evicted: List[Key] = []
            while x.load > x.capacity:
                evicted.append(self._pop_tail(x))
            for key in evicted:
                self._route(span, p, key, pending)

    def _receive_at_buffer(self, b: SBin, keys: List[Key]) -> None:
        """A buffer takes ``keys``; if it overflows or is now filled
        completely, the buffer-filled policy runs with the overflow."""
        for key in keys:
            self._attach(b, key)
        overflow: List[Key] = []
        while b.load > b.capacity:
            overflow.append(self._pop_tail(b))
        if overflow or b.filled(self.params):
            self._buffer_filled(self.queue_of(b), b, overflow)

    def _buffer_filled(self, q: Queue, b: SBin, overflow: List[Key]) -> None:
        """Filled buffer becomes normal; a new empty buffer is appended and
        takes the overflow; an over-long queue is split."""
        nb = self._new_bin()
        q.bins.append(nb)
        if overflow:
            self._receive_at_buffer(nb, overflow)
        self._split_if_long(q)

    def _split_if_long(self, q: Queue) -> None:
        while len(q) > 2 * self.E:
            i = self.queue_index(q)
            first = Queue(q.bins[:self.E] + [self._split_filler(q)], q.kind)
            q.bins = q.bins[self.E:]
            self.queues.insert(i, first)

    def _split_filler(self, q: Queue) -> SBin:
        """Empty bin that becomes the buffer of the first half of a split."""
        return self._new_bin()

    # ------------------------------------------------------------------ pull (delete cascade)
    def _refill(self, bins: Iterable[SBin]) -> None:
        """Refill normal bins that lost items, leftmost first."""
        todo: Dict[int, SBin] = {b.id: b for b in bins}
        while todo:
            where: Dict[int, Tuple[int, Queue]] = {}
            p = 0
            for q in self.queues:
                for b in q.bins:
                    where[b.id] = (p, q)
                    p += 1
            for bid in [i for i in todo if i not in where]:
                del todo[bid]
            if not todo:
                break
            bid = min(todo, key=lambda i: where[i][0])
            x = todo.pop(bid)
            q = where[bid][1]
            if self._role(x, q) != "normal":
                continue
            for src in self._fill_bin(x):
                todo[src.id] = src

    def _fill_bin(self, x: SBin) -> List[SBin]:
        """Pull items into normal bin ``x`` until it is filled completely or
        its span has nothing left to give.  Returns normal bins that lost
        items (they need refilling in turn)."""
        losers: List[SBin] = []
        restructured = False
        while not x.filled(self.params):
            q = self.queue_of(x)
            if self._role(x, q) != "normal":
                break
            span = self._span(q)
            p = next(i for i, b in enumerate(span) if b is x)
            source = self._pull_source(span, p)
            if source is None:
                break
            if source == "restructured":
                # a second restructure in a row with no item anywhere to the
                # right of x means there is nothing left to pull
                if restructured and not self._has_supply(x):
                    break
                restructured = True
                continue
            restructured = False
            src, cat = source
            moved = False
            while not x.filled(self.params):
                key = src.smallest_of(cat)
                if key is None or x.load + key_size(key) > x.capacity:
                    break
                self._detach(src, key)
                self._attach(x, key)
                moved = True
            sq = self.queue_of(src)
            role = self._role(src, sq)
            if moved and role == "normal" and src not in losers:
                losers.append(src)
            if role == "buffer" and not src.keys:
                self._buffer_emptied(sq)
            if not moved and src.keys:
                break
        return losers

    def _has_supply(self, x: SBin) -> bool:
        """Whether any bin right of ``x`` (in any later queue) holds an item."""
        seen = False
        for q in self.queues:
            for b in q.bins:
                if seen and b.keys:
                    return True
                seen = seen or b is x
        return False

    def _pull_source(self, span: List[SBin], p: int):
        """Where normal bin ``span[p]`` pulls from: the last bin of the span
        holding its smallest category, else the next bin (its largest
        category).  An exhausted final buffer is handed to the emptied
        policy first."""
        x = span[p]
        if x.keys:
            cat = x.max_cat
            for r in range(len(span) - 1, p, -1):
                if span[r].has_cat(cat):
                    return span[r], cat
        for r in range(p + 1, len(span)):
            if span[r].keys:
                return span[r], span[r].min_cat
        final = span[-1]
        fq = self.queue_of(final)
        if self._role(final, fq) == "buffer" and not final.keys:
            return "restructured" if self._buffer_emptied(fq) else None
        return None

    def _buffer_emptied(self, q: Queue) -> bool:
        """Empty buffer of ``q`` is removed; the queue takes its own last bin,
        borrows the first bin of the next queue, or merges with it.
        Returns whether the structure changed."""
        if q.buffer.keys:
            return False
        i = self.queue_index(q)
        nxt = self.queues[i + 1] if i + 1 < len(self.queues) and self._same_region(q, self.queues[i + 1]) else None
        old_len = len(q)
        empty = q.bins.pop()
        self._drop_buffer(empty)
        if nxt is None:
            if not q.bins:
                self.queues.pop(i)
            return True
        if old_len >= len(nxt) and old_len > self.E:
            pass
        elif len(nxt) > old_len and len(nxt) > self.E:
            q.bins.append(nxt.bins.pop(0))
        else:
            q.bins.extend(nxt.bins)
            self.queues.remove(nxt)
        if not q.bins:
            self.queues.pop(self.queue_index(q))
        return True

    def _same_region(self, a: Queue, b: Queue) -> bool:
        return a.kind == b.kind

    def _drop_buffer(self, b: SBin) -> None:
        self._release(b)

    # ------------------------------------------------------------------ debug dump
    def dump(self) -> str:
        """Queue / bin / category listing (stable, for golden tests)."""
        lines = []
        for i, q in enumerate(self.queues, 1):
            lines.append(f"Q{i} [{q.kind}] len={len(q)}")
            for b in q.bins:
                role = self._role(b, q)
                cats: Dict[int, int] = {}
                for k in b.keys:
                    cats[k[0]] = cats.get(k[0], 0) + 1
                cat_txt = " ".join(f"S{j}x{n}" for j, n in sorted(cats.items())) or "-"
                lines.append(f"  bin {b.id} {role:<7} cap={format_fraction(b.capacity)} "
                             f"load={format_fraction(b.load)} {cat_txt}")
        return "\n".join(lines)


# --------------------------------------------------------------------------- audit
def structure_violations(qs: QueueStructure) -> List[str]:
    """Ordering, filling, queue-length and bookkeeping checks shared by the
    small-only and the mixed structure."""
    params = qs.params
    problems: List[str] = []
    seen: Set[int] = set()
    order = qs.order()
    ids = [b.id for b in order]
    if len(ids) != len(set(ids)):
        problems.append("a bin appears in two queues")
    for q in qs.queues:
        if not q.bins:
            problems.append("empty queue")
    for b in order:
        load = Fraction(0)
        for key in b.keys:
            item_id = key[2]
            if item_id in seen:
                problems.append(f"item {item_id} packed twice")
            seen.add(item_id)
            if qs.bin_of.get(item_id) is not b:
                problems.append(f"item {item_id}: index does not point to bin {b.id}")
            if qs.key_of.get(item_id) != key:
                problems.append(f"item {item_id}: stale key")
            load += key_size(key)
        if load != b.load:
            problems.append(f"bin {b.id}: load bookkeeping drifted")
        if b.load > b.capacity:
            problems.append(f"bin {b.id}: load {format_fraction(b.load)} exceeds capacity "
                            f"{format_fraction(b.capacity)}")
        if b.keys != sorted(b.keys):
            problems.append(f"bin {b.id}: keys out of order")
    extra = set(qs.items) - seen
    if extra:
        problems.append(f"{len(extra)} small items are not in any queue bin")
    # (1) categories never decrease from left to right
    prev: Optional[SBin] = None
    for b in order:
        if not b.keys:
            continue
        if prev is not None and prev.max_cat > b.min_cat:
            problems.append(f"order: bin {prev.id} holds S{prev.max_cat} left of S{b.min_cat} in bin {b.id}")
        prev = b
    # (2) normal bins filled completely (or nothing to their right)
    suffix_items = 0
    has_right: Dict[int, bool] = {}
    for b in reversed(order):
        has_right[b.id] = suffix_items > 0
        suffix_items += len(b.keys)
    for q in qs.queues:
        for b in q.bins:
            if qs._role(b, q) == "normal" and not b.filled(params) and has_right[b.id]:
                problems.append(f"normal bin {b.id} is not filled completely "
                                f"(free {format_fraction(b.free)})")
    # (3) queue lengths
    for i, q in enumerate(qs.queues):
        lo, hi = qs._length_bounds(i)
        if not lo <= len(q) <= hi:
            problems.append(f"queue {i + 1} ({q.kind}) has {len(q)} bins, outside [{lo}, {hi}]")
    return problems


def small_bin_bound(size: Fraction, params: Params) -> Fraction:
    """``(1 + 2 eps) * ceil(SIZE) + 2`` bins."""
    return (1 + 2 * params.epsilon) * ceil_fraction(size) + 2


def verify_small(qs: QueueStructure, params: Optional[Params] = None) -> ValidationReport:
    """Audit properties (ordering, filled normal bins, queue lengths) and the
    bin bound ``(1 + 2 eps) ceil(SIZE) + 2`` of a small-only structure."""
    params = params or qs.params
    problems = structure_violations(qs)
    bins = qs.bin_count()
    bound = small_bin_bound(qs.total_size(), params)
    if bins > bound:
        problems.append(f"{bins} bins exceed (1+2eps)ceil(SIZE)+2 = {format_fraction(bound)}")
    return ValidationReport(not problems, problems)


__all__ = [
    "Key", "QueueStructure", "Queue", "SBin", "SmallOpResult", "category_bound", "key_size",
    "small_bin_bound", "small_category", "structure_violations", "verify_small",
]
