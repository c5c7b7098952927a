import random
from fractions import Fraction as F

import pytest

from dynbinpack.core import Item, Params
from dynbinpack.small import QueueStructure, category_bound, small_bin_bound, small_category, verify_small

P4 = Params(4)


def fill(qs: QueueStructure, spec, start: int = 0) -> int:
    n = start
    for size, count in spec:
        for _ in range(count):
            qs.insert(Item(n, F(size)))
            n += 1
    return n


def locations(qs: QueueStructure):
    return {i: b.id for i, b in qs.bin_of.items()}


def lengths(qs: QueueStructure):
    return [len(q) for q in qs.queues]


# ---------------------------------------------------------------- categories
@pytest.mark.parametrize("size,j", [("1/57", 3), ("1/64", 3), ("1/65", 4), ("1/100", 4), ("1/128", 4),
                                    ("1/129", 5)])
def test_category_intervals_are_half_open(size, j):
    # S_j = [eps/2^(j+1), eps/2^j)
    assert small_category(F(size), P4) == j
    assert category_bound(j + 1, P4) <= F(size) < category_bound(j, P4)


def test_large_sizes_are_not_small():
    with pytest.raises(ValueError):
        small_category(F(1, 56), P4)


# ---------------------------------------------------------------- insert
def test_first_item_bootstraps_a_queue():
    qs = QueueStructure(P4)
    result = qs.insert(Item(0, F(1, 100)))
    assert lengths(qs) == [1]
    assert qs.bin_of[0] is qs.queues[0].buffer
    assert result.moved_size == 0


def test_insert_of_larger_category_cascades_to_the_right():
    qs = QueueStructure(P4)
    fill(qs, [("1/100", 160), ("1/200", 140)])
    assert qs.dump() == ("Q1 [small] len=3\n"
                         "  bin 0 normal  cap=1 load=1 S4x100\n"
                         "  bin 1 normal  cap=1 load=1 S4x60 S5x80\n"
                         "  bin 2 buffer  cap=1 load=3/10 S5x60")
    before = locations(qs)
    result = qs.insert(Item(999, F(1, 60)))
    moved = {(F(qs.items[i].size), before[i], b) for i, b in locations(qs).items() if i in before and before[i] != b}
    # the S3 item displaces S4 items of bin 0, which displace S5 items of bin 1
    assert moved == {(F(1, 100), 0, 1), (F(1, 200), 1, 2)}
    assert qs.bin_of[999].id == 0
    assert result.moved_size == F(1, 25)
    assert verify_small(qs).ok


def test_insert_without_smaller_items_spills_to_next_bin():
    qs = QueueStructure(P4)
    fill(qs, [("1/60", 60)])
    result = qs.insert(Item(999, F(1, 60)))
    assert qs.bin_of[999].id == 1
    assert result.moved_size == 0
    assert verify_small(qs).ok


# ---------------------------------------------------------------- delete
def test_delete_last_item_empties_structure():
    qs = QueueStructure(P4)
    qs.insert(Item(0, F(1, 100)))
    qs.delete(0)
    assert qs.queues == [] and qs.items == {}
    assert verify_small(qs).ok


def test_delete_pulls_items_from_the_right():
    qs = QueueStructure(P4)
    fill(qs, [("1/100", 160), ("1/200", 140)])
    qs.insert(Item(999, F(1, 60)))
    before = locations(qs)
    qs.delete(999)
    moved = [(i, before[i], b) for i, b in locations(qs).items() if before[i] != b]
    assert len(moved) == 1 and moved[0][1:] == (1, 0)
    assert qs.items[moved[0][0]].size == F(1, 100)
    assert verify_small(qs).ok


def test_delete_unknown_item():
    with pytest.raises(KeyError):
        QueueStructure(P4).delete(5)


# ---------------------------------------------------------------- buffer lifecycle
def test_full_queue_splits_into_equal_halves():
    qs = QueueStructure(P4)
    seen = []
    for i in range(900):
        qs.insert(Item(i, F(1, 100)))
        if not seen or seen[-1] != lengths(qs):
            seen.append(lengths(qs))
    i = seen.index([2 * P4.E])
    assert seen[i + 1] == [5, 5]


def test_emptied_buffer_borrows_then_merges():
    E = P4.E
    qs = QueueStructure(P4)
    fill(qs, [("1/100", 1000)])
    borrowed = merged = False
    for i in range(1000):
        ids = [[b.id for b in q.bins] for q in qs.queues]
        qs.delete(i)
        assert verify_small(qs).ok
        new = [[b.id for b in q.bins] for q in qs.queues]
        if [len(x) for x in ids] == [E, E + 1] and [len(x) for x in new] == [E, E]:
            assert new[0][-1] == ids[1][0]  # the first bin of the next queue moved over
            borrowed = True
        if [len(x) for x in ids] == [E, E] and len(new) == 1:
            assert len(new[0]) == 2 * E - 1
            merged = True
    assert borrowed and merged
    assert qs.queues == []


# ---------------------------------------------------------------- verify
def test_verify_empty_structure():
    assert verify_small(QueueStructure(P4)).ok


def test_verify_flags_underfilled_normal_bin():
    qs = QueueStructure(P4)
    fill(qs, [("1/100", 150)])
    first = qs.queues[0].bins[0]
    for key in first.keys[:2]:  # free space 1/50 >= eps/16
        qs._detach(first, key)
        del qs.bin_of[key[2]], qs.items[key[2]], qs.key_of[key[2]]
    report = verify_small(qs)
    assert not report.ok
    assert any(v.startswith("normal bin 0 is not filled completely") for v in report.violations)


def test_bin_bound_on_many_random_items():
    rng = random.Random(0)
    qs = QueueStructure(P4)
    for i in range(10 ** 4):
        qs.insert(Item(i, F(rng.randint(1, 17857), 10 ** 6)))
    assert qs.bin_count() <= small_bin_bound(qs.total_size(), P4)
    assert verify_small(qs).ok


# ---------------------------------------------------------------- migration
@pytest.mark.parametrize("inv", [4, 7])
def test_moved_size_is_bounded_per_operation(inv):
    params = Params(inv)
    rng = random.Random(inv)
    qs = QueueStructure(params)
    top = int(params.small_threshold * 10 ** 6) - 1
    live, next_id = [], 0
    for _ in range(3000):
        if live and rng.random() < 0.4:
            item_id = live.pop(rng.randrange(len(live)))
            size = qs.items[item_id].size
            result = qs.delete(item_id)
        else:
            size = F(rng.randint(1, top), 10 ** 6)
            result = qs.insert(Item(next_id, size))
            live.append(next_id)
            next_id += 1
        assert result.moved_size <= 14 * params.E * size
    assert verify_small(qs).ok
    assert sorted(qs.items) == sorted(live)
