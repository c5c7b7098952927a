"""Exact item, event and packing model shared by every other module.

All sizes, loads and ratios are :class:`fractions.Fraction` values so that
boundary comparisons (category edges, fill ratios, capacity checks) are
decided exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

Rational = Fraction
BinId = Hashable


def as_fraction(value: Union[str, int, Fraction]) -> Fraction:
    """Parse ``"p/q"`` strings, ints or fractions into a reduced fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floating point sizes are not accepted; use 'p/q' strings")
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    """Serialize a fraction as a reduced ``p/q`` string (``p`` for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, order=True)
class Item:
    """A packable item with a unique integer id and an exact size in (0, 1]."""

    id: int
    size: Fraction

    def __post_init__(self) -> None:
        size = as_fraction(self.size)
        object.__setattr__(self, "size", size)
        if not (0 < size <= 1):
            raise ValueError(f"item {self.id}: size {size} outside (0, 1]")


@dataclass(frozen=True)
class Event:
    """One stream step: ``kind`` is ``"insert"`` (with ``size``) or ``"delete"``."""

    kind: str
    id: int
    size: Optional[Fraction] = None

    def __post_init__(self) -> None:
        if self.kind not in ("insert", "delete"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "insert":
            if self.size is None:
                raise ValueError("insert events need a size")
            object.__setattr__(self, "size", as_fraction(self.size))

    @classmethod
    def insert(cls, item_id: int, size: Union[str, Fraction]) -> "Event":
        return cls("insert", item_id, as_fraction(size))

    @classmethod
    def delete(cls, item_id: int) -> "Event":
        return cls("delete", item_id)

    def to_json(self) -> str:
        if self.kind == "insert":
            return json.dumps({"op": "insert", "id": self.id, "size": format_fraction(self.size)})
        return json.dumps({"op": "delete", "id": self.id})

    @classmethod
    def from_json(cls, line: str) -> "Event":
        record = json.loads(line)
        op = record.get("op")
        if op == "insert":
            return cls.insert(int(record["id"]), str(record["size"]))
        if op == "delete":
            return cls.delete(int(record["id"]))
        raise ValueError(f"unknown op {op!r}")


def write_stream(events: Iterable[Event], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(event.to_json() + "\n")


def read_stream(path: str) -> List[Event]:
    with open(path, encoding="utf-8") as handle:
        return [Event.from_json(line) for line in handle if line.strip()]


def check_stream(events: Sequence[Event]) -> None:
    """Raise ``ValueError`` unless ids are fresh on insert and live on delete."""
    live = set()
    seen = set()
    for t, event in enumerate(events):
        if event.kind == "insert":
            if event.id in seen:
                raise ValueError(f"event {t}: id {event.id} inserted twice")
            seen.add(event.id)
            live.add(event.id)
        else:
            if event.id not in live:
                raise ValueError(f"event {t}: delete of non-live id {event.id}")
            live.remove(event.id)


@dataclass(frozen=True)
class Params:
    """Global accuracy parameters derived from the integer ``E = 1/epsilon``.

    ``delta`` equals ``epsilon`` and ``Delta = 2*epsilon + epsilon**2``; items
    below ``epsilon/14`` are small.
    """

    E: int

    def __post_init__(self) -> None:
        if not isinstance(self.E, int) or self.E < 4:
            raise ValueError("E = 1/epsilon must be an integer >= 4")

    @property
    def epsilon(self) -> Fraction:
        return Fraction(1, self.E)

    @property
    def delta(self) -> Fraction:
        return self.epsilon

    @property
    def Delta(self) -> Fraction:
        eps = self.epsilon
        return 2 * eps + eps * eps

    @property
    def small_threshold(self) -> Fraction:
        return self.epsilon / 14

    @property
    def log_inv_eps_floor(self) -> int:
        """floor(log2(1/epsilon)), computed exactly on integers."""
        return self.E.bit_length() - 1

    @property
    def log_inv_eps_ceil(self) -> int:
        return (self.E - 1).bit_length()

    @property
    def max_category(self) -> int:
        """Largest large-item category index: ``floor(log2(14/epsilon))``."""
        return (14 * self.E).bit_length() - 1

    @property
    def group_bound(self) -> Fraction:
        """Upper bound on non-empty rounding groups, ``(8/eps + 2)(log2(1/eps) + 5)``.

        The logarithm is taken exactly when ``1/eps`` is a power of two and
        rounded up otherwise, which keeps the bound valid and rational.
        """
        return (8 * self.E + 2) * (self.log_inv_eps_ceil + 5)

    @property
    def group_bound_size_condition(self) -> Fraction:
        """SIZE of the large items above which the group bound must hold."""
        return Fraction(8 * self.E * (self.log_inv_eps_ceil + 5))

    def is_small(self, size: Fraction) -> bool:
        return size < self.small_threshold


def size_of(items: Iterable[Union[Item, Fraction]]) -> Fraction:
    """Exact total size of an item collection (items or bare sizes)."""
    total = Fraction(0)
    for entry in items:
        total += entry.size if isinstance(entry, Item) else Fraction(entry)
    return total


@dataclass
class Packing:
    """Assignment of items to bins, with optional per-bin capacities.

    ``bins`` maps a bin id to the list of item ids it holds; capacities
    default to 1.
    """

    bins: Dict[BinId, List[int]] = field(default_factory=dict)
    capacities: Dict[BinId, Fraction] = field(default_factory=dict)

    @classmethod
    def from_assignment(cls, assignment: Mapping[int, BinId]) -> "Packing":
        packing = cls()
        for item_id, bin_id in sorted(assignment.items()):
            packing.bins.setdefault(bin_id, []).append(item_id)
        return packing

    def assignment(self) -> Dict[int, BinId]:
        return {item_id: bin_id for bin_id, content in self.bins.items() for item_id in content}

    def capacity(self, bin_id: BinId) -> Fraction:
        return self.capacities.get(bin_id, Fraction(1))

    def used_bins(self) -> int:
        return sum(1 for content in self.bins.values() if content)


@dataclass
class ValidationReport:
    ok: bool
    violations: List[str]

    def __bool__(self) -> bool:
        return self.ok


def validate_packing(packing: Packing, items: Union[Mapping[int, Fraction], Iterable[Item]]) -> ValidationReport:
    """Check that every item is packed exactly once and no bin overflows."""
    if isinstance(items, Mapping):
        sizes = {item_id: Fraction(size) for item_id, size in items.items()}
    else:
        sizes = {item.id: item.size for item in items}
    violations: List[str] = []
    seen: Dict[int, BinId] = {}
    for bin_id, content in packing.bins.items():
        load = Fraction(0)
        for item_id in content:
            if item_id not in sizes:
                violations.append(f"bin {bin_id}: unknown item {item_id}")
                continue
            if item_id in seen:
                violations.append(f"item {item_id} packed twice (bins {seen[item_id]} and {bin_id})")
            seen[item_id] = bin_id
            load += sizes[item_id]
        cap = packing.capacity(bin_id)
        if load > cap:
            violations.append(f"bin {bin_id}: load {format_fraction(load)} > {format_fraction(cap)}")
    for item_id in sizes:
        if item_id not in seen:
            violations.append(f"item {item_id} unpacked")
    return ValidationReport(not violations, violations)


@dataclass(frozen=True)
class MigrationRecord:
    event_size: Fraction
    moved_size: Fraction
    repacked_bins: int
    shifting_moves: int

    @property
    def factor(self) -> Fraction:
        return self.moved_size / self.event_size


@dataclass
class MigrationLedger:
    records: List[MigrationRecord] = field(default_factory=list)

    def total_moved(self) -> Fraction:
        return sum((r.moved_size for r in self.records), Fraction(0))

    def max_factor(self) -> Fraction:
        return max((r.factor for r in self.records), default=Fraction(0))


def diff_packings(before: Mapping[int, BinId], after: Mapping[int, BinId],
                  exclude: Iterable[int] = ()) -> Tuple[List[int], set]:
    """Return the items present in both assignments whose bin changed, and the
    set of bins (old and new) touched by those moves."""
    skip = set(exclude)
    moved = []
    touched = set()
    for item_id, new_bin in after.items():
        if item_id in skip:
            continue
        old_bin = before.get(item_id)
        if old_bin is not None and old_bin != new_bin:
            moved.append(item_id)
            touched.add(("old", old_bin))
            touched.add(("new", new_bin))
    return moved, touched


def record_step(ledger: MigrationLedger, before: Packing, after: Packing, trigger: Item,
                sizes: Optional[Mapping[int, Fraction]] = None) -> MigrationLedger:
    """Append one migration record for a step triggered by ``trigger``.

    Moved size sums items whose bin id differs between the two packings; the
    trigger itself is not counted.  ``sizes`` must cover every moved item
    other than the trigger (defaults to ``{trigger.id: trigger.size}``).
    """
    lookup = dict(sizes or {})
    lookup.setdefault(trigger.id, trigger.size)
    before_map = before.assignment()
    after_map = after.assignment()
    moved, _ = diff_packings(before_map, after_map, exclude=[trigger.id])
    moved_size = sum((lookup[i] for i in moved), Fraction(0))
    repacked = {before_map[i] for i in moved} | {after_map[i] for i in moved}
    ledger.records.append(MigrationRecord(trigger.size, moved_size, len(repacked), len(moved)))
    return ledger


def ceil_fraction(value: Fraction) -> int:
    return -((-value.numerator) // value.denominator)


def floor_fraction(value: Fraction) -> int:
    return value.numerator // value.denominator


def frac_part(value: Fraction) -> Fraction:
    return value - floor_fraction(value)


def log2_floor(value: Fraction) -> int:
    """Exact floor(log2(value)) for a positive rational."""
    if value <= 0:
        raise ValueError("log of non-positive value")
    n, d = value.numerator, value.denominator
    guess = n.bit_length() - d.bit_length()
    # adjust so that 2**guess <= value < 2**(guess+1)
    while Fraction(2) ** guess > value:
        guess -= 1
    while Fraction(2) ** (guess + 1) <= value:
        guess += 1
    return guess


def iter_sizes(items: Iterable[Item]) -> Iterator[Fraction]:
    for item in items:
        yield item.size


__all__ = [
    "Rational", "Item", "Event", "Params", "Packing", "ValidationReport", "MigrationRecord",
    "MigrationLedger", "validate_packing", "record_step", "size_of", "as_fraction",
    "format_fraction", "read_stream", "write_stream", "check_stream", "diff_packings",
    "ceil_fraction", "floor_fraction", "frac_part", "log2_floor",
]
