"""Stream generators, the experiment runner and the kernel benchmark.

Generators
----------
* :func:`gen_lower_bound` - ``2M`` insertions of items of size ``b``
  followed by ``2M(c+1)`` insertions of size ``a`` with ``c = ceil(gamma)``,
  ``a = (3/2)/(3c+2)`` and ``b = 1/2 - a/3``: a packing that never repacks
  (migration factor ``gamma``) cannot be better than ``1 + 1/(6c+5)`` on it;
* :func:`gen_firstfit_adversary` - ``M`` rounds of one item of size
  ``b = eps/14 - delta`` followed by ``(1-b)/a`` items of size
  ``a = eps/(14c) - (delta + c delta)/c``, then all ``a`` items are deleted.
  FirstFit ends with ``M`` bins holding ``M b`` in total;
* :func:`gen_random` - seeded random streams (uniform grid sizes, bimodal
  small/large mixes, small-only or large-only), each event deleting a
  uniformly chosen live item with probability ``delete_fraction``.

Runner
------
:func:`run` replays a stream through :class:`~dynbinpack.mixed.MixedEngine`
and records, per event, the bin count, the best available lower bound on the
optimum (exact for at most ``oracle_max_n`` live items), their ratio, the
migration factor, the number of repacked bins, the number of block shifts
``d`` and (optionally) the outcome of the full invariant audit.

CSV columns: ``t,event,size,bins,opt_lb,ratio,migration,repacked_bins,d,ok``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import kernels
from .core import Event, Item, Params, check_stream, format_fraction
from .mixed import MixedEngine, verify_mixed
from .oracle import DEFAULT_MAX_N, exact_opt, opt_lower_bound

CSV_COLUMNS = ["t", "event", "size", "bins", "opt_lb", "ratio", "migration", "repacked_bins", "d", "ok"]

DISTRIBUTIONS = ("uniform", "bimodal", "small", "large")

#: largest denominator tried when searching the adversary's gap ``delta``
DELTA_DENOMINATOR_LIMIT = 10 ** 6
# constant of the repacked-bins bound K * E^3 * log2(E), fixed for every n
REPACKED_BINS_K = 1


# --------------------------------------------------------------------------- stream specs
@dataclass(frozen=True)
class LowerBoundSpec:
    gamma: Fraction
    M: int


@dataclass(frozen=True)
class FirstFitAdversarySpec:
    epsilon: Fraction
    M: int
    c: int = 1
    delta_gap: Optional[Fraction] = None


@dataclass(frozen=True)
class RandomSpec:
    n: int
    size_distribution: str = "bimodal"
    delete_fraction: float = 0.3
    seed: int = 0
    epsilon: Fraction = Fraction(1, 4)
    max_live: Optional[int] = None
    grid: int = 1000


@dataclass(frozen=True)
class LowerBoundInstance:
    c: int
    a: Fraction
    b: Fraction
    events: List[Event]

    @property
    def no_repacking_bound(self) -> Fraction:
        """Ratio no packing with migration factor ``gamma`` can beat."""
        return 1 + Fraction(1, 6 * self.c + 5)


@dataclass(frozen=True)
class AdversaryInstance:
    c: int
    delta: Fraction
    a: Fraction
    b: Fraction
    per_bin: int
    events: List[Event]


def lower_bound_sizes(gamma: Fraction) -> Tuple[int, Fraction, Fraction]:
    """``(c, a, b)`` for migration factor ``gamma``; checks ``a c < b`` and ``2b + a > 1``."""
    gamma = Fraction(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    c = math.ceil(gamma)
    a = Fraction(3, 2) / (3 * c + 2)
    b = Fraction(1, 2) - a / 3
    if not a * c < b:
        raise ValueError(f"a*c = {a * c} is not below b = {b}")
    if not 2 * b + a > 1:
        raise ValueError(f"2b + a = {2 * b + a} does not exceed 1")
    return c, a, b


def gen_lower_bound(gamma: Fraction, M: int) -> LowerBoundInstance:
    if M < 1:
        raise ValueError("M must be at least 1")
    c, a, b = lower_bound_sizes(gamma)
    events = [Event.insert(i, b) for i in range(2 * M)]
    events += [Event.insert(2 * M + i, a) for i in range(2 * M * (c + 1))]
    return LowerBoundInstance(c, a, b, events)


def adversary_sizes(epsilon: Fraction, c: int = 1, delta: Optional[Fraction] = None,
                    limit: int = DELTA_DENOMINATOR_LIMIT) -> Tuple[Fraction, Fraction, Fraction, int]:
    """``(delta, a, b, (1-b)/a)`` for the FirstFit adversary.

    Without an explicit ``delta`` the smallest count ``N = (1-b)/a`` is
    searched whose (exactly solved) ``delta`` is positive, has denominator
    at most ``limit`` and keeps ``0 < a`` and ``a c < b``.
    """
    epsilon = Fraction(epsilon)
    if c < 1:
        raise ValueError("c must be a positive integer")
    u = epsilon / 14

    def sizes(d: Fraction) -> Tuple[Fraction, Fraction]:
        return u / c - (d + c * d) / c, u - d

    def valid(d: Fraction) -> Optional[int]:
        a, b = sizes(d)
        if d <= 0 or a <= 0 or not a * c < b:
            return None
        n = (1 - b) / a
        return int(n) if n.denominator == 1 else None

    if delta is not None:
        delta = Fraction(delta)
        n = valid(delta)
        if n is None:
            raise ValueError(f"delta = {delta} does not make (1-b)/a integral")
        a, b = sizes(delta)
        return delta, a, b, n
    # (1-b)/a = N  <=>  delta * (1 + N(1+c)/c) = N u/c - 1 + u
    n_min = math.floor((1 - u) / (u / c))
    for n in range(max(1, n_min), n_min + limit):
        d = (n * u / c - 1 + u) / (1 + Fraction(n * (1 + c), c))
        if d <= 0 or d.denominator > limit:
            continue
        if valid(d) == n:
            a, b = sizes(d)
            return d, a, b, n
    raise ValueError("no valid delta found within the search budget")


def gen_firstfit_adversary(epsilon: Fraction, M: int, c: int = 1,
                           delta_gap: Optional[Fraction] = None) -> AdversaryInstance:
    if M < 1:
        raise ValueError("M must be at least 1")
    delta, a, b, n = adversary_sizes(epsilon, c, delta_gap)
    events: List[Event] = []
    a_ids: List[int] = []
    next_id = 0
    for _ in range(M):
        events.append(Event.insert(next_id, b))
        next_id += 1
        for _ in range(n):
            events.append(Event.insert(next_id, a))
            a_ids.append(next_id)
            next_id += 1
    events += [Event.delete(i) for i in a_ids]
    return AdversaryInstance(c, delta, a, b, n, events)


def _draw_size(rng: random.Random, spec: RandomSpec) -> Fraction:
    grid = spec.grid
    small = Fraction(spec.epsilon) / 14
    dist = spec.size_distribution
    if dist == "bimodal":
        dist = "small" if rng.random() < 0.5 else "large"
    if dist == "uniform":
        return Fraction(rng.randint(1, grid), grid)
    if dist == "small":
        top = math.ceil(small * grid * grid) - 1  # sizes k / grid^2 below eps/14
        return Fraction(rng.randint(1, top), grid * grid)
    if dist == "large":
        low = math.ceil(small * grid)
        return Fraction(rng.randint(max(low, 1), grid), grid)
    raise ValueError(f"unknown size distribution {spec.size_distribution!r}")


def gen_random(spec: RandomSpec) -> List[Event]:
    """Replayable random stream; deletes pick a uniformly random live id."""
    if spec.size_distribution not in DISTRIBUTIONS:
        raise ValueError(f"size_distribution must be one of {DISTRIBUTIONS}")
    if not 0 <= spec.delete_fraction < 1:
        raise ValueError("delete_fraction must lie in [0, 1)")
    rng = random.Random(spec.seed)
    live: List[int] = []
    events: List[Event] = []
    next_id = 0
    for _ in range(spec.n):
        full = spec.max_live is not None and len(live) >= spec.max_live
        if live and (full or rng.random() < spec.delete_fraction):
            item_id = live.pop(rng.randrange(len(live)))
            events.append(Event.delete(item_id))
        else:
            events.append(Event.insert(next_id, _draw_size(rng, spec)))
            live.append(next_id)
            next_id += 1
    return events


# --------------------------------------------------------------------------- runner
@dataclass
class EventRecord:
    t: int
    event: str
    size: Fraction
    bins: int
    opt_lb: int
    ratio: Fraction
    migration: Fraction
    repacked_bins: int
    d: int
    ok: Optional[bool]
    exact: bool = False
    violations: List[str] = field(default_factory=list)

    def csv_row(self) -> List[str]:
        return [str(self.t), self.event, format_fraction(self.size), str(self.bins), str(self.opt_lb),
                format_fraction(self.ratio), format_fraction(self.migration), str(self.repacked_bins),
                str(self.d), "" if self.ok is None else str(int(self.ok))]


@dataclass
class RunReport:
    epsilon_inv: int
    records: List[EventRecord] = field(default_factory=list)
    final_snapshot: Optional[dict] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def max_ratio(self) -> Fraction:
        return max((r.ratio for r in self.records), default=Fraction(1))

    @property
    def max_migration(self) -> Fraction:
        return max((r.migration for r in self.records), default=Fraction(0))

    @property
    def max_repacked(self) -> int:
        return max((r.repacked_bins for r in self.records), default=0)

    @property
    def max_d(self) -> int:
        return max((r.d for r in self.records), default=0)

    @property
    def all_ok(self) -> bool:
        return all(r.ok is not False for r in self.records)

    @property
    def final_bins(self) -> int:
        return self.records[-1].bins if self.records else 0

    def failures(self) -> List[EventRecord]:
        return [r for r in self.records if r.ok is False]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow(r.csv_row())
        return out.getvalue()

    def summary(self) -> Dict[str, object]:
        return {
            "epsilon_inv": self.epsilon_inv,
            "events": len(self.records),
            "final_bins": self.final_bins,
            "max_ratio": format_fraction(self.max_ratio),
            "max_migration": format_fraction(self.max_migration),
            "max_repacked_bins": self.max_repacked,
            "max_d": self.max_d,
            "invariants_ok": self.all_ok,
        }

    def to_json(self) -> str:
        rows = [dict(zip(CSV_COLUMNS, r.csv_row())) for r in self.records]
        return json.dumps({"summary": self.summary(), "events": rows}, indent=1)


def run(events: Sequence[Event], epsilon_inv: int = 4, verify: bool = False,
        oracle_max_n: int = DEFAULT_MAX_N, stop_on_failure: bool = False) -> RunReport:
    """Replay ``events`` through a fresh engine.

    Engine errors are re-raised with the index of the offending event.
    """
    events = list(events)
    check_stream(events)
    params = Params(epsilon_inv)
    engine = MixedEngine(params)
    report = RunReport(epsilon_inv)
    sizes: Dict[int, Fraction] = {}
    for t, event in enumerate(events):
        try:
            rep = engine.on_event(event)
        except Exception as exc:
            raise RuntimeError(f"event {t} ({event.kind} {event.id}) failed: {exc}") from exc
        if event.kind == "insert":
            sizes[event.id] = event.size
        size = sizes[event.id]
        if event.kind == "delete":
            del sizes[event.id]
        live = list(sizes.values())
        exact = len(live) <= oracle_max_n
        opt_lb = exact_opt(live, oracle_max_n) if exact else opt_lower_bound(live, 0)
        bins = engine.used_bins()
        ratio = Fraction(bins, opt_lb) if opt_lb else Fraction(1 if bins == 0 else bins)
        ok: Optional[bool] = None
        violations: List[str] = []
        if verify:
            audit = verify_mixed(engine)
            ok, violations = audit.ok, audit.violations
        report.records.append(EventRecord(t, event.kind, size, bins, opt_lb, ratio, rep.migration_factor,
                                          rep.repacked_bins, rep.d, ok, exact, violations))
        if stop_on_failure and ok is False:
            break
    report.final_snapshot = engine.snapshot()
    return report


def run_engine(events: Iterable[Event], epsilon_inv: int = 4) -> MixedEngine:
    """Replay ``events`` and return the engine (no metrics)."""
    engine = MixedEngine(Params(epsilon_inv))
    for event in events:
        engine.on_event(event)
    return engine


# --------------------------------------------------------------------------- kernel benchmark
@dataclass
class BenchResult:
    kernel: str
    backend: str
    seconds: float
    calls: int


def bench_kernels(repeat: int = 3, seed: int = 0) -> Tuple[List[BenchResult], bool]:
    """Time both kernel backends on the same seeded inputs.

    Returns the timings and whether both backends agreed on every result.
    The compiled backend is skipped when it has not been built.
    """
    rng = random.Random(seed)
    knap = []
    for _ in range(40):
        n = rng.randint(4, 12)
        weights = [rng.randint(5, 200) for _ in range(n)]
        values = [rng.randint(1, 10 ** 6) for _ in range(n)]
        knap.append((weights, values, rng.randint(500, 3000)))
    bnb = []
    for _ in range(25):
        n = rng.randint(8, 14)
        sizes = sorted((rng.randint(10, 70) for _ in range(n)), reverse=True)
        bnb.append((sizes, 100, n))
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    results: List[BenchResult] = []
    answers: Dict[str, List[object]] = {}
    for backend in backends:
        out: List[object] = []
        start = time.perf_counter()
        for _ in range(repeat):
            out = [kernels.knapsack_dp(w, v, cap, backend=backend) for w, v, cap in knap]
        results.append(BenchResult("knapsack_dp", backend, time.perf_counter() - start, repeat * len(knap)))
        answers.setdefault(backend, []).extend(out)
        start = time.perf_counter()
        for _ in range(repeat):
            out = [kernels.bnb_min_bins(s, cap, up, backend=backend) for s, cap, up in bnb]
        results.append(BenchResult("bnb_min_bins", backend, time.perf_counter() - start, repeat * len(bnb)))
        answers[backend].extend(out)
    agree = len({json.dumps(a, default=str) for a in answers.values()}) == 1
    return results, agree


def bench_table(results: Sequence[BenchResult], agree: bool) -> str:
    lines = [f"{'kernel':<14}{'backend':<9}{'calls':>7}{'ms/call':>10}"]
    by_kernel: Dict[str, Dict[str, BenchResult]] = {}
    for r in results:
        lines.append(f"{r.kernel:<14}{r.backend:<9}{r.calls:>7}{1000 * r.seconds / r.calls:>10.3f}")
        by_kernel.setdefault(r.kernel, {})[r.backend] = r
    for kernel, rows in by_kernel.items():
        if "cython" in rows and rows["cython"].seconds > 0:
            lines.append(f"speedup {kernel}: {rows['python'].seconds / rows['cython'].seconds:.1f}x")
    lines.append(f"backends agree: {'yes' if agree else 'NO'}")
    return "\n".join(lines)


__all__ = [
    "AdversaryInstance", "BenchResult", "CSV_COLUMNS", "REPACKED_BINS_K", "DISTRIBUTIONS", "EventRecord",
    "FirstFitAdversarySpec", "LowerBoundInstance", "LowerBoundSpec", "RandomSpec", "RunReport",
    "adversary_sizes", "bench_kernels", "bench_table", "gen_firstfit_adversary", "gen_lower_bound",
    "gen_random", "lower_bound_sizes", "run", "run_engine",
]
