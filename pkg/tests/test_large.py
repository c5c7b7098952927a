import random
from fractions import Fraction as F

import pytest

from dynbinpack.core import Item, Params, validate_packing
from dynbinpack.large import LargeEngine, offline_fallback, online_thresholds, realize_packing, solve_offline
from dynbinpack.lp import SolutionPair, make_config
from dynbinpack.oracle import exact_opt
from dynbinpack.rounding import RoundingState

P4 = Params(4)


def items_of(*sizes):
    return [Item(i, F(s)) for i, s in enumerate(sizes)]


# ---------------------------------------------------------------- offline construction
@pytest.mark.parametrize("sizes,bins", [(["1/2", "1/2"], 1), (["1/3"] * 5, 2), ([], 0)])
def test_offline_fallback_examples(sizes, bins):
    engine = offline_fallback(items_of(*sizes), P4)
    assert engine.bins_used() == bins
    assert engine.verify().ok


@pytest.mark.parametrize("seed", range(10))
def test_offline_fallback_is_near_optimal(seed):
    rng = random.Random(seed)
    items = [Item(i, F(rng.randint(100, 900), 1000)) for i in range(rng.randint(1, 10))]
    engine = offline_fallback(items, P4)
    assert validate_packing(engine.packing(), items).ok
    opt = exact_opt([it.size for it in items])
    assert engine.bins_used() <= (1 + 2 * P4.Delta) * opt + engine.lp().m


def test_realize_single_configuration():
    items = items_of("1/2", "1/2")
    rounding = RoundingState.from_items(items, P4)
    pair = SolutionPair({make_config({F(1, 2): 2}): F(1)}, {make_config({F(1, 2): 2}): 1})
    assert realize_packing(pair, rounding).bins == {0: [0, 1]}


def test_realize_leaves_slack_slots_empty():
    items = items_of("1/2", "1/2")
    rounding = RoundingState.from_items(items, P4)
    full = make_config({F(1, 2): 2})
    packing = realize_packing(SolutionPair({full: F(3)}, {full: 3}), rounding)
    assert list(packing.bins.values()) == [[0, 1]]


def test_realize_respects_true_sizes():
    rng = random.Random(4)
    items = [Item(i, F(rng.randint(60, 600), 1000)) for i in range(12)]
    rounding = RoundingState.from_items(items, P4)
    packing = realize_packing(solve_offline(rounding), rounding)
    assert validate_packing(packing, items).ok
    for content in packing.bins.values():
        assert sum(rounding.rounded_size(i) for i in content) <= 1


def test_realize_rejects_uncovered_demand():
    rounding = RoundingState.from_items(items_of("1/2", "1/2", "1/2"), P4)
    full = make_config({F(1, 2): 2})
    with pytest.raises(ValueError):
        realize_packing(SolutionPair({full: F(1)}, {full: 1}), rounding)


# ---------------------------------------------------------------- dynamic engine
def test_first_item_takes_offline_path():
    engine = LargeEngine(P4)
    report = engine.insert(Item(0, F(1, 2)))
    assert report.regime == "offline" and engine.bins_used() == 1


def test_delete_only_item():
    engine = LargeEngine(P4)
    engine.insert(Item(0, F(1, 2)))
    report = engine.delete(0)
    assert report.regime == "offline" and engine.bins_used() == 0
    assert engine.verify().ok


def test_online_threshold():
    assert not online_thresholds(F(39), 1, P4)
    assert online_thresholds(F(40), 1, P4)
    assert not online_thresholds(F(40), 5, P4)


def test_growth_switches_regime_and_renames_once_each_way():
    rng = random.Random(1)
    sizes = [F(x, 100) for x in (45, 40, 35, 30, 22)]
    engine = LargeEngine(P4)
    renames = []
    for i in range(330):
        report = engine.insert(Item(i, rng.choice(sizes)))
        if report.renamed:
            renames.append(("up", engine.k))
        if i % 25 == 0:
            assert engine.verify().ok
    assert engine.online and engine.k == 2
    assert renames == [("up", 2)]
    live = list(engine.items)
    rng.shuffle(live)
    for j, item_id in enumerate(live[:40]):
        report = engine.delete(item_id)
        if report.renamed:
            renames.append(("down", engine.k))
        if j % 10 == 0:
            assert engine.verify().ok
    assert renames == [("up", 2), ("down", 1)]
    assert engine.verify().ok
    assert all(h.d <= 11 for h in engine.history)


def test_random_large_stream_bounds():
    rng = random.Random(7)
    engine = LargeEngine(P4)
    live, next_id = [], 0
    for step in range(500):
        if live and rng.random() < 0.3:
            report = engine.delete(live.pop(rng.randrange(len(live))))
        else:
            report = engine.insert(Item(next_id, F(rng.randint(18, 1000), 1000)))
            live.append(next_id)
            next_id += 1
        assert report.d <= 11
        assert engine.bins_used() <= engine.bin_bound()
        if step % 50 == 0:
            assert engine.verify().ok
    assert sorted(engine.items) == sorted(live)
    assert engine.verify().ok
