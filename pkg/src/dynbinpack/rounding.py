"""Dynamic grouping of large items into rounding groups ``(ell, X, r)``.

Items of one size category ``ell`` (sizes in ``(2^-(ell+1), 2^-ell]``) are kept
in a total order by ``(size descending, id ascending)``.  Groups are
contiguous slices of that order; the A block comes before the B block and,
within a block, lower positions hold larger items.  Every item is rounded up
to the largest size of its group.

Cardinalities follow the grouping rules:

* A-groups hold ``2^ell * k`` items, except the leftmost one which may hold fewer;
* B-groups hold ``2^ell * (k - 1)`` items, except the rightmost one which may
  hold fewer.

Each operation returns a :class:`RoundingTrace` describing which items changed
group, so that the packing layer can re-home them.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import Item, Params, ValidationReport, format_fraction, log2_floor

A_BLOCK = "A"
B_BLOCK = "B"


def categorize(size: Fraction, params: Params) -> int:
    """Return the unique ``ell`` with ``2^-(ell+1) < size <= 2^-ell``."""
    size = Fraction(size)
    if params.is_small(size):
        raise ValueError(f"size {size} is small (below {params.small_threshold})")
    if not 0 < size <= 1:
        raise ValueError(f"size {size} outside (0, 1]")
    # size <= 2^-ell  <=>  ell <= log2(1/size)
    return log2_floor(1 / size)


def item_key(item: Item) -> Tuple[Fraction, int]:
    return (-item.size, item.id)


class Group:
    """A rounding group: a sorted run of items within one category."""

    __slots__ = ("uid", "ell", "block", "items", "keys")

    def __init__(self, uid: int, ell: int, block: str, items: Optional[List[Item]] = None):
        self.uid = uid
        self.ell = ell
        self.block = block
        self.items: List[Item] = list(items or [])
        self.keys: List[Tuple[Fraction, int]] = [item_key(i) for i in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __repr__(self) -> str:
        return f"Group(uid={self.uid}, ell={self.ell}, block={self.block}, n={len(self.items)})"

    @property
    def largest(self) -> Item:
        return self.items[0]

    @property
    def rounded_size(self) -> Fraction:
        return self.items[0].size

    def pop_largest(self) -> Item:
        self.keys.pop(0)
        return self.items.pop(0)

    def pop_smallest(self) -> Item:
        self.keys.pop()
        return self.items.pop()

    def push_smallest(self, item: Item) -> None:
        key = item_key(item)
        if self.keys and key < self.keys[-1]:
            raise AssertionError("push_smallest would break the group order")
        self.items.append(item)
        self.keys.append(key)

    def push_largest(self, item: Item) -> None:
        key = item_key(item)
        if self.keys and key > self.keys[0]:
            raise AssertionError("push_largest would break the group order")
        self.items.insert(0, item)
        self.keys.insert(0, key)

    def add_sorted(self, item: Item) -> None:
        key = item_key(item)
        pos = bisect.bisect_left(self.keys, key)
        self.keys.insert(pos, key)
        self.items.insert(pos, item)

    def remove(self, item_id: int) -> Item:
        for pos, item in enumerate(self.items):
            if item.id == item_id:
                self.keys.pop(pos)
                return self.items.pop(pos)
        raise KeyError(item_id)


class Category:
    __slots__ = ("ell", "a", "b")

    def __init__(self, ell: int):
        self.ell = ell
        self.a: List[Group] = []
        self.b: List[Group] = []

    def chain(self) -> List[Group]:
        return self.a + self.b

    def count(self) -> int:
        return sum(len(g) for g in self.a) + sum(len(g) for g in self.b)

    def position(self, group: Group) -> Tuple[str, int]:
        if group.block == A_BLOCK:
            return A_BLOCK, self.a.index(group)
        return B_BLOCK, self.b.index(group)


@dataclass
class RoundingTrace:
    """Membership changes produced by one rounding operation.

    ``moves`` are shift-chain transfers of an item to the group on its left
    (or right, for the reverse chain); ``retypes`` are regroupings that do not
    require the item to change bins when its slot can be relabelled; ``trims``
    name groups that lost a member without a replacement, whose vacated slot
    should be dropped from its configuration.
    """

    added: List[Tuple[int, int]] = field(default_factory=list)
    removed: List[Tuple[int, int]] = field(default_factory=list)
    moves: List[Tuple[int, int, int]] = field(default_factory=list)
    retypes: List[Tuple[int, int, int]] = field(default_factory=list)
    trims: List[int] = field(default_factory=list)
    created: List[int] = field(default_factory=list)
    dropped: List[int] = field(default_factory=list)
    shifts: int = 0

    def extend(self, other: "RoundingTrace") -> None:
        self.added += other.added
        self.removed += other.removed
        self.moves += other.moves
        self.retypes += other.retypes
        self.trims += other.trims
        self.created += other.created
        self.dropped += other.dropped
        self.shifts += other.shifts

    def changed_items(self) -> List[int]:
        return [m[0] for m in self.moves] + [r[0] for r in self.retypes]


class RoundingError(RuntimeError):
    pass


class RoundingState:
    """Groups of all large items plus the group-size parameter ``k``."""

    def __init__(self, params: Params, k: int = 1):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.params = params
        self.k = k
        self.categories: Dict[int, Category] = {}
        self.group_of: Dict[int, Group] = {}
        self.groups: Dict[int, Group] = {}
        self._next_uid = 0

    # ------------------------------------------------------------------ basics
    def _new_group(self, ell: int, block: str, items: Sequence[Item] = ()) -> Group:
        group = Group(self._next_uid, ell, block, list(items))
        self._next_uid += 1
        self.groups[group.uid] = group
        for item in group.items:
            self.group_of[item.id] = group
        return group

    def _drop_group(self, group: Group, trace: RoundingTrace) -> None:
        if group.items:
            raise AssertionError("dropping a non-empty group")
        cat = self.categories[group.ell]
        if group.block == A_BLOCK:
            cat.a.remove(group)
        else:
            cat.b.remove(group)
        del self.groups[group.uid]
        trace.dropped.append(group.uid)
        if not cat.a and not cat.b:
            del self.categories[group.ell]

    def unit(self, ell: int) -> int:
        return 1 << ell

    def a_size(self, ell: int) -> int:
        return self.unit(ell) * self.k

    def b_size(self, ell: int) -> int:
        return self.unit(ell) * (self.k - 1)

    def items(self) -> List[Item]:
        return [item for cat in self.categories.values() for g in cat.chain() for item in g.items]

    def total_size(self) -> Fraction:
        return sum((item.size for item in self.items()), Fraction(0))

    def rounded_size(self, item_id: int) -> Fraction:
        try:
            return self.group_of[item_id].rounded_size
        except KeyError:
            raise KeyError(f"unknown item {item_id}") from None

    def key_of(self, group: Group) -> Tuple[int, str, int]:
        block, pos = self.categories[group.ell].position(group)
        return (group.ell, block, pos)

    def group_at(self, ell: int, block: str, pos: int) -> Group:
        cat = self.categories[ell]
        return (cat.a if block == A_BLOCK else cat.b)[pos]

    def ordered_groups(self) -> List[Group]:
        return [g for ell in sorted(self.categories) for g in self.categories[ell].chain()]

    def nonempty_groups(self) -> List[Group]:
        return [g for g in self.ordered_groups() if g.items]

    def block_counts(self) -> Tuple[int, int]:
        a = sum(len(c.a) for c in self.categories.values())
        b = sum(len(c.b) for c in self.categories.values())
        return a, b

    def q(self, ell: int, block: str) -> int:
        cat = self.categories.get(ell)
        if cat is None:
            return -1
        return len(cat.a if block == A_BLOCK else cat.b) - 1

    # ------------------------------------------------------------------ shift
    def shift(self, g1: Group, g2: Group, trace: Optional[RoundingTrace] = None) -> RoundingTrace:
        """Move the largest item of every group from ``g2`` leftwards to ``g1``.

        ``g1`` gains one item, ``g2`` loses one, groups strictly between keep
        their cardinality.  ``g1 == g2`` is a no-op.
        """
        trace = trace if trace is not None else RoundingTrace()
        if g1.ell != g2.ell:
            raise RoundingError("shift across categories")
        chain = self.categories[g1.ell].chain()
        i1, i2 = chain.index(g1), chain.index(g2)
        if i1 > i2:
            raise RoundingError("shift: first group must be left of the second")
        if i1 == i2:
            return trace
        if not g2.items:
            raise RoundingError("shift: source group is empty")
        for j in range(i1 + 1, i2 + 1):
            src, dst = chain[j], chain[j - 1]
            if not src.items:
                raise RoundingError("shift: empty intermediate group")
            mover = src.pop_largest()
            dst.push_smallest(mover)
            self.group_of[mover.id] = dst
            trace.moves.append((mover.id, src.uid, dst.uid))
        trace.trims.append(g2.uid)
        trace.shifts += 1
        return trace

    def _reverse_shift(self, g: Group, trace: RoundingTrace) -> None:
        """Refill ``g`` by moving the smallest item of each group on its left
        one group to the right, ending at the leftmost group of the category."""
        chain = self.categories[g.ell].chain()
        idx = chain.index(g)
        if idx == 0:
            trace.trims.append(g.uid)
            return
        for j in range(idx, 0, -1):
            src, dst = chain[j - 1], chain[j]
            mover = src.pop_smallest()
            dst.push_largest(mover)
            self.group_of[mover.id] = dst
            trace.moves.append((mover.id, src.uid, dst.uid))
        trace.trims.append(chain[0].uid)
        trace.shifts += 1

    # ------------------------------------------------------------------ insert
    def _locate(self, cat: Category, item: Item) -> Group:
        """Leftmost group whose sorted window admits ``item``."""
        key = item_key(item)
        chain = cat.chain()
        for pos, group in enumerate(chain):
            if group.keys and group.keys[-1] > key:
                # the item sorts before the end of this group; if it also sorts
                # before the group's first element and a left group exists, the
                # left group admits it as well and yields a shorter chain.
                if pos > 0 and group.keys[0] > key:
                    return chain[pos - 1]
                return group
        return chain[-1]

    def insert(self, item: Item) -> RoundingTrace:
        trace = RoundingTrace()
        if item.id in self.group_of:
            raise RoundingError(f"item {item.id} already present")
        ell = categorize(item.size, self.params)
        cat = self.categories.get(ell)
        if cat is None:
            cat = self.categories[ell] = Category(ell)
        if not cat.a:
            head = self._new_group(ell, A_BLOCK)
            cat.a.insert(0, head)
            trace.created.append(head.uid)
        if cat.count() == 0:
            target = cat.a[0]
        else:
            target = self._locate(cat, item)
        target.add_sorted(item)
        self.group_of[item.id] = target
        trace.added.append((item.id, target.uid))
        self.shift(cat.a[0], target, trace)
        if target is not cat.a[0]:
            # the inserted item added one member to the target; the shift chain
            # removed one, so no slot is trimmed there.
            trace.trims.remove(target.uid)
        self._fix_head_overflow(cat, trace)
        return trace

    def _fix_head_overflow(self, cat: Category, trace: RoundingTrace) -> None:
        head = cat.a[0]
        limit = self.a_size(cat.ell)
        while len(head) > limit:
            extra = len(head) - limit
            moved = [head.pop_largest() for _ in range(extra)]
            new = self._new_group(cat.ell, A_BLOCK, moved)
            cat.a.insert(0, new)
            trace.created.append(new.uid)
            for it in moved:
                trace.retypes.append((it.id, head.uid, new.uid))
            head = new

    # ------------------------------------------------------------------ delete
    def delete(self, item_id: int) -> RoundingTrace:
        trace = RoundingTrace()
        group = self.group_of.pop(item_id, None)
        if group is None:
            raise KeyError(f"unknown item {item_id}")
        group.remove(item_id)
        trace.removed.append((item_id, group.uid))
        cat = self.categories[group.ell]
        if cat.b:
            terminus = cat.b[-1]
            if group is terminus:
                trace.trims.append(group.uid)
            else:
                self.shift(group, terminus, trace)
        else:
            self._reverse_shift(group, trace)
        for g in list(cat.chain()):
            if not g.items:
                self._drop_group(g, trace)
        return trace

    # ------------------------------------------------------------ shiftA/shiftB
    def can_shift_a(self, ell: int) -> bool:
        cat = self.categories.get(ell)
        if cat is None or not cat.b or self.k < 2:
            return False
        right = sum(len(g) for g in cat.b[1:])
        return right >= self.unit(ell)

    def can_shift_b(self, ell: int) -> bool:
        cat = self.categories.get(ell)
        if cat is None or len(cat.a) < 2 or self.k < 2:
            return False
        return len(cat.a[-1]) == self.a_size(ell)

    def shift_a(self, ell: int) -> RoundingTrace:
        """Grow ``(ell,B,0)`` by ``2^ell`` items and move it to the end of block A."""
        if not self.can_shift_a(ell):
            raise RoundingError(f"shiftA not applicable in category {ell}")
        trace = RoundingTrace()
        cat = self.categories[ell]
        for _ in range(self.unit(ell)):
            self.shift(cat.b[0], cat.b[-1], trace)
            if not cat.b[-1].items:
                self._drop_group(cat.b[-1], trace)
        moved = cat.b.pop(0)
        moved.block = A_BLOCK
        cat.a.append(moved)
        return trace

    def shift_b(self, ell: int) -> RoundingTrace:
        """Shrink the last A-group by ``2^ell`` items and move it to the front of block B."""
        if not self.can_shift_b(ell):
            raise RoundingError(f"shiftB not applicable in category {ell}")
        trace = RoundingTrace()
        cat = self.categories[ell]
        for _ in range(self.unit(ell)):
            self.shift(cat.a[0], cat.a[-1], trace)
        moved = cat.a.pop()
        moved.block = B_BLOCK
        cat.b.insert(0, moved)
        self._fix_head_overflow(cat, trace)
        return trace

    # ------------------------------------------------------------------ rename
    def _regroup(self, cat: Category, items: List[Item], sizes: List[Tuple[str, int]],
                 reuse: List[Group], trace: RoundingTrace) -> List[Group]:
        """Cut ``items`` (already sorted) into consecutive groups of the given
        (block, size) list, reusing group objects where membership overlaps."""
        new_groups: List[Group] = []
        pos = 0
        pool = list(reuse)
        for block, size in sizes:
            chunk = items[pos:pos + size]
            pos += size
            # reuse the old group holding most of this chunk
            best, best_overlap = None, 0
            for g in pool:
                overlap = sum(1 for it in chunk if self.group_of.get(it.id) is g)
                if overlap > best_overlap:
                    best, best_overlap = g, overlap
            if best is None:
                best = self._new_group(cat.ell, block)
                best.items, best.keys = [], []
                trace.created.append(best.uid)
            else:
                pool.remove(best)
            best.block = block
            new_groups.append((best, chunk))
        assert pos == len(items)
        result = []
        for group, chunk in new_groups:
            for it in chunk:
                old = self.group_of.get(it.id)
                if old is not None and old is not group:
                    trace.retypes.append((it.id, old.uid, group.uid))
            result.append(group)
        for group, chunk in new_groups:
            group.items = list(chunk)
            group.keys = [item_key(i) for i in chunk]
            for it in chunk:
                self.group_of[it.id] = group
        for g in pool:
            g.items, g.keys = [], []
            del self.groups[g.uid]
            trace.dropped.append(g.uid)
        return result

    @staticmethod
    def _cut(count: int, full: int, partial_first: bool) -> List[int]:
        if count == 0:
            return []
        if full <= 0:
            raise RoundingError("cannot cut into groups of size 0")
        n_full, rest = divmod(count, full)
        sizes = [full] * n_full
        if rest:
            if partial_first:
                sizes.insert(0, rest)
            else:
                sizes.append(rest)
        return sizes

    def rebuild_category(self, ell: int, trace: RoundingTrace) -> None:
        """Canonical layout for ``k == 1``: only A-groups, leftmost partial."""
        cat = self.categories[ell]
        items = [it for g in cat.chain() for it in g.items]
        old = cat.chain()
        sizes = [(A_BLOCK, s) for s in self._cut(len(items), self.a_size(ell), True)]
        groups = self._regroup(cat, items, sizes, old, trace)
        cat.a = groups
        cat.b = []

    def rename(self, new_k: int) -> RoundingTrace:
        """Adapt all groups to a new parameter ``k`` (block renaming).

        On an increase the former A-groups (except the leftmost) become the new
        B block; on a decrease the former B-groups become A-groups.  Leftover
        groups of the block that should have been empty are regrouped to the
        new cardinalities.
        """
        trace = RoundingTrace()
        old_k = self.k
        if new_k == old_k:
            return trace
        if new_k < 1:
            raise ValueError("k must be at least 1")
        self.k = new_k
        for ell in sorted(self.categories):
            cat = self.categories[ell]
            u = self.unit(ell)
            if new_k == 1 or abs(new_k - old_k) != 1:
                self.rebuild_category(ell, trace)
                continue
            if new_k > old_k:
                head = cat.a[:1]
                keep_b = cat.a[1:]          # full groups of u*old_k = u*(new_k-1)
                leftover = [it for g in cat.b for it in g.items]
                sizes = [(B_BLOCK, s) for s in self._cut(len(leftover), u * (new_k - 1), False)]
                tail = self._regroup(cat, leftover, sizes, list(cat.b), trace) if leftover else []
                for g in keep_b:
                    g.block = B_BLOCK
                cat.a = head
                cat.b = keep_b + tail
            else:
                leftover = [it for g in cat.a for it in g.items]
                full_b = cat.b[:-1] if cat.b else []
                last = cat.b[-1:] if cat.b else []
                # the old last B-group keeps the B role unless it is already full
                if last and len(last[0]) == u * old_k - u:
                    full_b, last = full_b + last, []
                head_sizes = [(A_BLOCK, s) for s in self._cut(len(leftover), u * new_k, True)]
                head = self._regroup(cat, leftover, head_sizes, list(cat.a), trace) if leftover else []
                for g in full_b:
                    g.block = A_BLOCK
                tail_items = [it for g in last for it in g.items]
                tail_sizes = [(B_BLOCK, s) for s in self._cut(len(tail_items), u * (new_k - 1), False)]
                tail = self._regroup(cat, tail_items, tail_sizes, list(last), trace) if tail_items else []
                cat.a = head + full_b
                cat.b = tail
        return trace

    # ------------------------------------------------------------------ build
    @classmethod
    def from_items(cls, items: Iterable[Item], params: Params, k: int = 1) -> "RoundingState":
        """Canonical rounding of ``items``: every category laid out as A-groups
        of ``2^ell * k`` items with the leftmost group partial."""
        state = cls(params, k)
        by_cat: Dict[int, List[Item]] = {}
        for item in items:
            by_cat.setdefault(categorize(item.size, params), []).append(item)
        for ell, members in sorted(by_cat.items()):
            members.sort(key=item_key)
            cat = state.categories[ell] = Category(ell)
            pos = 0
            for size in cls._cut(len(members), state.a_size(ell), True):
                cat.a.append(state._new_group(ell, A_BLOCK, members[pos:pos + size]))
                pos += size
        return state

    # ------------------------------------------------------------------ views
    def dump(self) -> str:
        lines = []
        for ell in sorted(self.categories):
            cat = self.categories[ell]
            for block, groups in ((A_BLOCK, cat.a), (B_BLOCK, cat.b)):
                for r, g in enumerate(groups):
                    sizes = ", ".join(format_fraction(i.size) for i in g.items)
                    lines.append(f"ℓ={ell},X={block},r={r}: [{sizes}]")
        return "\n".join(lines)


def verify_rounding(state: RoundingState, params: Optional[Params] = None) -> ValidationReport:
    """Audit the grouping rules (a)-(d) and the bound on non-empty groups."""
    params = params or state.params
    problems: List[str] = []
    k = state.k
    for ell in sorted(state.categories):
        cat = state.categories[ell]
        lo, hi = Fraction(1, 2 ** (ell + 1)), Fraction(1, 2 ** ell)
        prev_key = None
        for block, groups in ((A_BLOCK, cat.a), (B_BLOCK, cat.b)):
            for r, g in enumerate(groups):
                name = f"({ell},{block},{r})"
                if g.block != block:
                    problems.append(f"{name}: block label {g.block}")
                if not g.items:
                    problems.append(f"{name}: empty group")
                    continue
                for item in g.items:
                    if not (lo < item.size <= hi):
                        problems.append(f"{name}: property (a) item {item.id} size {item.size}")
                    if state.group_of.get(item.id) is not g:
                        problems.append(f"{name}: membership index out of date for item {item.id}")
                if g.keys != sorted(g.keys) or g.keys != [item_key(i) for i in g.items]:
                    problems.append(f"{name}: group not sorted")
                if prev_key is not None and g.keys[0] < prev_key:
                    problems.append(f"{name}: property (b) order violated")
                prev_key = g.keys[-1]
                n = len(g)
                u = 1 << ell
                if block == A_BLOCK:
                    if r == 0 and n > u * k:
                        problems.append(f"{name}: property (c) |g|={n} > {u * k}")
                    if r > 0 and n != u * k:
                        problems.append(f"{name}: property (c) |g|={n} != {u * k}")
                else:
                    last = r == len(groups) - 1
                    if not last and n != u * (k - 1):
                        problems.append(f"{name}: property (d) |g|={n} != {u * (k - 1)}")
                    if last and n > u * (k - 1):
                        problems.append(f"{name}: property (d) |g|={n} > {u * (k - 1)}")
    size_l = state.total_size()
    groups = len(state.nonempty_groups())
    if size_l > params.group_bound_size_condition and groups > params.group_bound:
        problems.append(f"group count {groups} exceeds bound {params.group_bound}")
    return ValidationReport(not problems, problems)


def kappa(size_large: Fraction, params: Params) -> Fraction:
    """``SIZE(I_L) * eps / (2 (floor(log2(1/eps)) + 5))``."""
    return Fraction(size_large) * params.epsilon / (2 * (params.log_inv_eps_floor + 5))


def k_parameter(size_large: Fraction, params: Params) -> int:
    """Group-size parameter used by the rounding: ``max(1, floor(kappa))``."""
    kap = kappa(size_large, params)
    return max(1, kap.numerator // kap.denominator)
