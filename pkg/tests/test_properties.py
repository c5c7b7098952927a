from fractions import Fraction as F

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dynbinpack.core import Event, Item, Params, as_fraction, format_fraction
from dynbinpack.mixed import MixedEngine, verify_mixed
from dynbinpack.oracle import exact_opt, first_fit_decreasing, l2_bound
from dynbinpack.rounding import RoundingState, verify_rounding
from dynbinpack.small import QueueStructure, verify_small

P4 = Params(4)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

large_sizes = st.integers(18, 1000).map(lambda k: F(k, 1000))
small_sizes = st.integers(1, 17857).map(lambda k: F(k, 10 ** 6))
any_sizes = st.one_of(large_sizes, small_sizes)


def stream(sizes, ops):
    """Events from (is_delete, pick, size) triples; deletes pick a live id."""
    events, live = [], []
    for i, (is_delete, pick, size) in enumerate(ops):
        if is_delete and live:
            events.append(Event.delete(live.pop(pick % len(live))))
        else:
            events.append(Event.insert(i, size))
            live.append(i)
    return events


def ops_of(sizes):
    return st.lists(st.tuples(st.booleans(), st.integers(0, 10 ** 6), sizes), max_size=60)


@SETTINGS
@given(st.fractions(min_value=F(1, 10 ** 6), max_value=1))
def test_fraction_text_roundtrip(x):
    assert as_fraction(format_fraction(x)) == x


@SETTINGS
@given(ops_of(large_sizes), st.integers(1, 3))
def test_rounding_invariants_under_any_stream(ops, k):
    state = RoundingState(P4, k)
    for event in stream(large_sizes, ops):
        if event.kind == "insert":
            state.insert(Item(event.id, event.size))
        else:
            state.delete(event.id)
        report = verify_rounding(state)
        assert report.ok, report.violations
    for item in state.items():
        assert state.rounded_size(item.id) >= item.size


@SETTINGS
@given(ops_of(small_sizes))
def test_small_structure_invariants_under_any_stream(ops):
    qs = QueueStructure(P4)
    live = set()
    for event in stream(small_sizes, ops):
        if event.kind == "insert":
            result = qs.insert(Item(event.id, event.size))
            live.add(event.id)
            trigger = event.size
        else:
            trigger = qs.items[event.id].size
            result = qs.delete(event.id)
            live.discard(event.id)
        assert result.moved_size <= 14 * P4.E * trigger
        report = verify_small(qs)
        assert report.ok, report.violations
        assert set(qs.items) == live


@SETTINGS
@given(ops_of(any_sizes))
def test_mixed_engine_invariants_under_any_stream(ops):
    engine = MixedEngine(P4)
    for event in stream(any_sizes, ops):
        report = engine.on_event(event)
        assert report.d <= 11
        audit = verify_mixed(engine)
        assert audit.ok, audit.violations


@SETTINGS
@given(st.lists(st.integers(1, 100).map(lambda k: F(k, 100)), max_size=9))
def test_exact_optimum_between_bounds(sizes):
    opt = exact_opt(sizes)
    assert l2_bound(sizes) <= opt <= first_fit_decreasing(sizes)
