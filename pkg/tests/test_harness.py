from fractions import Fraction as F

import pytest

from dynbinpack.core import check_stream
from dynbinpack.harness import (CSV_COLUMNS, RandomSpec, adversary_sizes, gen_firstfit_adversary, gen_lower_bound,
                                gen_random, lower_bound_sizes, run, run_engine)


# ---------------------------------------------------------------- lower-bound instance
def test_lower_bound_sizes_gamma_one():
    c, a, b = lower_bound_sizes(F(1))
    assert (c, a, b) == (1, F(3, 10), F(2, 5))
    assert 2 * b + a == F(11, 10)
    assert gen_lower_bound(F(1), 3).no_repacking_bound == 1 + F(1, 11)


def test_lower_bound_sizes_gamma_two():
    assert lower_bound_sizes(F(2)) == (2, F(3, 16), F(7, 16))


def test_lower_bound_sizes_rounds_gamma_up():
    assert lower_bound_sizes(F(3, 2))[0] == 2


def test_lower_bound_stream_shape():
    inst = gen_lower_bound(F(1), 5)
    assert len(inst.events) == 2 * 5 + 2 * 5 * 2
    assert [e.size for e in inst.events[:10]] == [F(2, 5)] * 10
    assert all(e.size == F(3, 10) for e in inst.events[10:])
    check_stream(inst.events)


@pytest.mark.parametrize("gamma,M", [(F(0), 1), (F(1), 0)])
def test_lower_bound_rejects_bad_parameters(gamma, M):
    with pytest.raises(ValueError):
        gen_lower_bound(gamma, M)


# ---------------------------------------------------------------- FirstFit adversary
def test_adversary_parameters_for_quarter():
    delta, a, b, n = adversary_sizes(F(1, 4))
    assert (delta, a, b, n) == (F(1, 6328), F(111, 6328), F(2, 113), 56)
    assert b == F(1, 56) - delta and a == F(1, 56) - 2 * delta
    assert (1 - b) / a == n and a < b


@pytest.mark.parametrize("inv,c", [(4, 2), (5, 1), (7, 1), (8, 3)])
def test_adversary_parameters_are_valid(inv, c):
    eps = F(1, inv)
    delta, a, b, n = adversary_sizes(eps, c)
    assert delta > 0 and b == eps / 14 - delta
    assert a == eps / (14 * c) - (delta + c * delta) / c
    assert a * c < b and (1 - b) / a == n


def test_adversary_rejects_non_integral_delta():
    with pytest.raises(ValueError):
        adversary_sizes(F(1, 4), delta=F(1, 7))


def test_adversary_stream_shape():
    inst = gen_firstfit_adversary(F(1, 4), 3)
    inserts = [e for e in inst.events if e.kind == "insert"]
    deletes = [e for e in inst.events if e.kind == "delete"]
    assert len(inserts) == 3 * (1 + inst.per_bin) and len(deletes) == 3 * inst.per_bin
    assert inst.events[:len(inserts)] == inserts
    assert {e.id for e in deletes} == {e.id for e in inserts if e.size == inst.a}
    check_stream(inst.events)


# ---------------------------------------------------------------- random streams
@pytest.mark.parametrize("dist", ["uniform", "bimodal", "small", "large"])
def test_random_streams_are_replayable_and_valid(dist):
    spec = RandomSpec(300, dist, 0.3, seed=11)
    events = gen_random(spec)
    assert events == gen_random(spec)
    assert len(events) == 300
    check_stream(events)
    sizes = [e.size for e in events if e.kind == "insert"]
    if dist == "small":
        assert all(s < F(1, 56) for s in sizes)
    if dist == "large":
        assert all(s >= F(1, 56) for s in sizes)


def test_random_stream_respects_live_cap():
    events = gen_random(RandomSpec(200, "uniform", 0.2, seed=3, max_live=10))
    live = set()
    for e in events:
        (live.add if e.kind == "insert" else live.discard)(e.id)
        assert len(live) <= 10


def test_random_stream_rejects_unknown_distribution():
    with pytest.raises(ValueError):
        gen_random(RandomSpec(10, "normal"))


# ---------------------------------------------------------------- runner
def test_run_is_deterministic():
    events = gen_random(RandomSpec(150, "bimodal", 0.3, seed=5))
    first, second = run(events, verify=True), run(events, verify=True)
    assert first.to_csv() == second.to_csv()
    assert first.final_snapshot == second.final_snapshot
    assert len(first) == len(events)
    assert first.all_ok


def test_csv_schema():
    report = run(gen_random(RandomSpec(20, "uniform", 0.3, seed=1)), verify=True)
    lines = report.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert CSV_COLUMNS == ["t", "event", "size", "bins", "opt_lb", "ratio", "migration", "repacked_bins", "d", "ok"]
    assert len(lines) == 21
    assert all(len(line.split(",")) == len(CSV_COLUMNS) for line in lines)


def test_run_reports_event_index_on_bad_stream():
    from dynbinpack.core import Event
    with pytest.raises(ValueError):
        run([Event.delete(1)])


def test_engine_on_lower_bound_instance_repacks():
    inst = gen_lower_bound(F(1), 4)
    engine = run_engine(inst.events)
    # 2M items of size 2/5 and 4M of size 3/10 fit into 2M bins of one b and two a
    assert engine.used_bins() <= 8 + 2
