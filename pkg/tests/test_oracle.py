import random
from fractions import Fraction as F

import pytest

from dynbinpack.core import Event
from dynbinpack.harness import adversary_sizes, gen_firstfit_adversary
from dynbinpack.oracle import (brute_force_opt, exact_opt, first_fit, first_fit_decreasing, l2_bound,
                               lower_bound_suite, opt_lower_bound)


@pytest.mark.parametrize("sizes,opt", [
    (["1/2"] * 4, 2),
    (["6/10", "6/10", "4/10", "4/10"], 2),
    (["7/10", "6/10", "5/10", "4/10", "3/10"], 3),
    ([], 0),
    (["1"], 1),
])
def test_exact_opt_examples(sizes, opt):
    assert exact_opt(sizes) == opt
    assert brute_force_opt(sizes) == opt


def test_exact_opt_size_limit():
    with pytest.raises(ValueError):
        exact_opt(["1/30"] * 21)
    assert exact_opt(["1/30"] * 21, max_n=21) == 1


@pytest.mark.parametrize("seed", range(40))
def test_exact_agrees_with_partition_enumeration(seed):
    rng = random.Random(seed)
    sizes = [F(rng.randint(1, 100), 100) for _ in range(rng.randint(1, 8))]
    assert exact_opt(sizes) == brute_force_opt(sizes)


@pytest.mark.parametrize("seed", range(20))
def test_bounds_are_ordered(seed):
    rng = random.Random(1000 + seed)
    sizes = [F(rng.randint(5, 100), 100) for _ in range(rng.randint(1, 12))]
    bounds = lower_bound_suite(sizes)
    assert bounds["size_lower"].value <= bounds["lp_lower"].value <= bounds["exact"].value
    assert l2_bound(sizes) <= bounds["exact"].value <= first_fit_decreasing(sizes)
    assert opt_lower_bound(sizes) == bounds["exact"].value


def test_bound_suite_examples():
    half = lower_bound_suite(["1/2"] * 4)
    assert half["size_lower"].value == 2 and half["exact"].value == 2
    heavy = lower_bound_suite([F(1, 3) + F(1, 1000)] * 100)
    assert heavy["size_lower"].value == 34
    assert heavy["lp_lower"].value >= 50
    assert "exact" not in heavy
    empty = lower_bound_suite([])
    assert all(b.value == 0 for b in empty.values())


def test_first_fit_hand_simulation():
    stream = [Event.insert(i, s) for i, s in enumerate(["6/10", "7/10", "3/10", "4/10"])]
    trace = first_fit(stream)
    assert trace.used_bins() == 3
    assert trace.bins == [[0, 2], [1], [3]]


def test_first_fit_never_moves_items():
    rng = random.Random(7)
    events, live = [], []
    for i in range(200):
        if live and rng.random() < 0.4:
            events.append(Event.delete(live.pop(rng.randrange(len(live)))))
        else:
            events.append(Event.insert(i, F(rng.randint(1, 100), 100)))
            live.append(i)
    placed = {}
    for t in range(1, len(events) + 1):
        trace = first_fit(events[:t])
        assert trace.moves == 0
        assert all(trace.bin_of[i] == b for i, b in placed.items() if i in trace.bin_of)
        placed = dict(trace.bin_of)


def test_first_fit_on_the_adversary_phases():
    eps, M = F(1, 4), 12
    _, a, b, n_small = adversary_sizes(eps)
    instance = gen_firstfit_adversary(eps, M)
    phase_a = [e for e in instance.events if e.kind == "insert"]
    after_a = first_fit(phase_a)
    assert after_a.used_bins() == M
    for content in after_a.bins:
        sizes = sorted(after_a.sizes[i] for i in content)
        assert sizes.count(b) == 1 and sizes.count(a) == n_small
        assert sum(sizes) == 1
    after_b = first_fit(instance.events)
    assert after_b.used_bins() == M
    assert all(len(content) == 1 and after_b.sizes[content[0]] == b for content in after_b.bins)
