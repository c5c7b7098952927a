"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
repeated in the terminal summary.  The whole file takes five to ten minutes.
"""

import math
import random
from fractions import Fraction as F
from typing import List

import pytest

from dynbinpack.core import Item, Params, ceil_fraction, floor_fraction
from dynbinpack.harness import (DISTRIBUTIONS, REPACKED_BINS_K, RandomSpec, gen_firstfit_adversary,
                                gen_lower_bound, gen_random, lower_bound_sizes, run, run_engine)
from dynbinpack.lp import (IMPROVE_DISTANCE_K, LpInstance, SolutionPair, approx_solve, check_pair, exact_lin,
                           improve, lin_by_enumeration)
from dynbinpack.mixed import MixedEngine, verify_mixed
from dynbinpack.oracle import exact_opt, first_fit
from dynbinpack.rounding import RoundingState, k_parameter

pytestmark = pytest.mark.slow

#: every shift count seen by any suite in this module (criterion 4)
SHIFT_COUNTS: List[int] = []


# ---------------------------------------------------------------- 1. invariant suite
def test_criterion_01_invariant_suite(verdict):
    streams = events = 0
    failures = []
    for i in range(50):
        E = (4, 7)[i % 2]
        delete_fraction = (0.0, 0.3, 0.5)[(i // 2) % 3]
        dist = DISTRIBUTIONS[(i // 6) % len(DISTRIBUTIONS)]
        params = Params(E)
        engine = MixedEngine(params)
        stream = gen_random(RandomSpec(500, dist, delete_fraction, seed=i, epsilon=params.epsilon))
        for t, event in enumerate(stream):
            report = engine.on_event(event)
            SHIFT_COUNTS.append(report.d)
            audit = verify_mixed(engine)  # rounding, small/mixed properties, A·y >= b, x <= y, heap
            problems = list(audit.violations)
            if len(engine.heap) != floor_fraction(engine.phi()):
                problems.append("h != floor(Phi)")
            if problems:
                failures.append(f"stream {i} (E={E}, {dist}, del={delete_fraction}) t={t}: {problems[0]}")
                break
            events += 1
        streams += 1
    verdict(1, "invariant suite", not failures,
            f"{streams} streams, {events} audited events, {len(failures)} failing"
            + (f"; first: {failures[0]}" if failures else ""))


# ---------------------------------------------------------------- 2. approximation vs exact oracle
def test_criterion_02_approximation_vs_exact(verdict):
    checked = 0
    worst = None
    failures = []
    for i in range(24):
        E = (4, 7)[i % 2]
        params = Params(E)
        dist = ("uniform", "large", "bimodal")[i % 3]
        engine = MixedEngine(params)
        live = {}
        for t, event in enumerate(gen_random(RandomSpec(300, dist, 0.4, seed=100 + i,
                                                        epsilon=params.epsilon, max_live=18))):
            report = engine.on_event(event)
            SHIFT_COUNTS.append(report.d)
            if event.kind == "insert":
                live[event.id] = event.size
            else:
                del live[event.id]
            assert len(live) <= 18
            opt = exact_opt(list(live.values()))
            m = engine.large.lp().m
            bound = (1 + 2 * params.Delta) * opt + m + 4
            bins = engine.used_bins()
            checked += 1
            slack = bound - bins
            if worst is None or slack < worst[0]:
                worst = (slack, bins, opt, m, E)
            if bins > bound:
                failures.append(f"stream {i} t={t}: {bins} bins > {bound}")
    slack, bins, opt, m, E = worst
    verdict(2, "bins <= (1+2Delta)OPT + m + 4", not failures,
            f"{checked} events checked, tightest: {bins} bins vs OPT={opt}, m={m}, E={E} (slack {slack})"
            + (f"; first failure: {failures[0]}" if failures else ""))


# ---------------------------------------------------------------- 3. rounding error
def test_criterion_03_rounding_error(verdict):
    rng = random.Random(3)
    params = Params(4)
    needed_plus_one = []
    failures = []
    for case in range(200):
        n = rng.randint(1, 12)
        items = [Item(i, F(rng.randint(18, 1000), 1000)) for i in range(n)]
        size = sum(it.size for it in items)
        state = RoundingState.from_items(items, params, k_parameter(size, params))
        rounded = [state.rounded_size(it.id) for it in items]
        opt = exact_opt([it.size for it in items])
        opt_r = exact_opt(rounded)
        if opt_r > (1 + params.epsilon) * opt + 1:
            failures.append(case)
        elif opt_r > (1 + params.epsilon) * opt:
            needed_plus_one.append((case, opt, opt_r))
    verdict(3, "OPT(rounded) <= (1+eps)OPT + 1", not failures,
            f"200 instances, {len(failures)} failing, {len(needed_plus_one)} needed the +1"
            + (f" (flagged: {needed_plus_one[:5]})" if needed_plus_one else ""))


# ---------------------------------------------------------------- 5. small-item migration
def test_criterion_05_small_item_migration(verdict):
    events = 0
    worst = F(0)
    failures = []
    for i in range(12):
        E = (4, 7)[i % 2]
        params = Params(E)
        stream = gen_random(RandomSpec(1000, "small", (0.2, 0.4, 0.5)[i % 3], seed=200 + i,
                                       epsilon=params.epsilon))
        engine = MixedEngine(params)
        for t, event in enumerate(stream):
            report = engine.on_event(event)
            events += 1
            factor = report.moved_size / report.size
            worst = max(worst, factor / (14 * E))
            if report.moved_size > 14 * E * report.size:
                failures.append(f"stream {i} t={t}: moved {report.moved_size} > 14E * {report.size}")
    verdict(5, "small-only moved size <= (14/eps) s", not failures,
            f"{events} events, worst moved/(14E s) = {float(worst):.3f}"
            + (f"; first failure: {failures[0]}" if failures else ""))


# ---------------------------------------------------------------- 6. n-independence of migration
def test_criterion_06_migration_independent_of_n(verdict):
    E = 4
    cap = REPACKED_BINS_K * E ** 3 * math.log2(E)
    maxima = {}
    repacked = {}
    for n in (200, 2000):
        mig, rep = F(0), 0
        for seed in range(10):
            report = run(gen_random(RandomSpec(n, "bimodal", 0.3, seed=seed, epsilon=F(1, E))), E)
            SHIFT_COUNTS.extend(r.d for r in report.records)
            mig = max(mig, report.max_migration)
            rep = max(rep, report.max_repacked)
        maxima[n], repacked[n] = mig, rep
    lo, hi = sorted((maxima[200], maxima[2000]))
    ratio = hi / lo if lo else F(0) if hi == 0 else None
    ok = ratio is not None and ratio <= 2 and max(repacked.values()) <= cap
    verdict(6, "migration n-independence", ok,
            f"max factor n=200: {float(maxima[200]):.2f}, n=2000: {float(maxima[2000]):.2f} "
            f"(ratio {float(ratio) if ratio is not None else 'inf'}); max repacked bins "
            f"{repacked[200]} / {repacked[2000]} <= {cap:g} (K={REPACKED_BINS_K})")


# ---------------------------------------------------------------- 7. FirstFit degradation
def test_criterion_07_firstfit_degradation(verdict):
    eps, M = F(1, 4), 50
    instance = gen_firstfit_adversary(eps, M)
    b = instance.b
    trace = first_fit(instance.events)
    size = sum(trace.sizes.values(), F(0))
    ff_bins = trace.used_bins()
    ff_ratio = F(ff_bins) / size
    engine = run_engine(instance.events, 4)
    engine_bound = ceil_fraction(M * b) + 2 * 4 + 2
    ok = ff_bins == M and size == M * b and ff_ratio >= F(9, 10) / b and engine.used_bins() <= engine_bound
    verdict(7, "FirstFit adversary", ok,
            f"FirstFit {ff_bins} bins, SIZE = M b = {size}, ratio {float(ff_ratio):.1f} >= 0.9/b = "
            f"{float(F(9, 10) / b):.1f}; engine {engine.used_bins()} bins <= {engine_bound}")


# ---------------------------------------------------------------- 8. lower-bound construction
def test_criterion_08_lower_bound_instance(verdict):
    details = []
    ok = True
    for gamma, M in ((F(1), 20), (F(2), 20), (F(3, 2), 15)):
        c, a, b = lower_bound_sizes(gamma)
        instance = gen_lower_bound(gamma, M)
        exact_checks = a * c < b and 2 * b + a > 1
        params = Params(4)
        engine = MixedEngine(params)
        for event in instance.events:
            SHIFT_COUNTS.append(engine.on_event(event).d)
        opt = 2 * M  # one b-item with c+1 a-items fills a bin exactly
        assert sum(e.size for e in instance.events) == opt
        m = engine.large.lp().m
        ratio = F(engine.used_bins(), opt)
        bound = 1 + 5 * params.epsilon + F(m + 4, 2 * M)
        ok = ok and exact_checks and ratio <= bound
        details.append(f"gamma={gamma}: c={c}, ratio {float(ratio):.3f} <= {float(bound):.3f}"
                       f" (no-repacking bound {float(instance.no_repacking_bound):.3f})")
    verdict(8, "lower-bound construction", ok, "; ".join(details))


# ---------------------------------------------------------------- 9. group-count bound
def test_criterion_09_group_count(verdict):
    params = Params(4)
    threshold = 8 * params.E * (math.ceil(math.log2(params.E)) + 5)
    checked = 0
    worst = 0
    failures = []
    for seed in range(2):
        engine = MixedEngine(params)
        for t, event in enumerate(gen_random(RandomSpec(900, "large", 0.1, seed=300 + seed,
                                                        epsilon=params.epsilon))):
            SHIFT_COUNTS.append(engine.on_event(event).d)
            if engine.large.size_large > threshold:
                groups = len(engine.large.rounding.nonempty_groups())
                checked += 1
                worst = max(worst, groups)
                if groups > params.group_bound:
                    failures.append(f"seed {seed} t={t}: {groups} groups")
    ok = not failures and checked > 0
    verdict(9, "non-empty groups <= 238", ok,
            f"{checked} events with SIZE(I_L) > {threshold}, max {worst} groups <= {params.group_bound}")


# ---------------------------------------------------------------- 10. LP solver contract
def _lp_instance(rng):
    m = rng.randint(1, 4)
    sizes = set()
    while len(sizes) < m:
        sizes.add(F(rng.randint(20, 1000), 1000))
    return LpInstance(tuple(sorted(sizes, reverse=True)), tuple(rng.randint(15, 60) for _ in sizes))


def test_criterion_10_lp_contract(verdict):
    params = Params(4)
    rng = random.Random(10)
    approx_fail = []
    for case in range(100):
        lp = _lp_instance(rng)
        lin, _ = lin_by_enumeration(lp)
        assert exact_lin(lp)[0] == lin
        value = approx_solve(lp, ratio=1 + params.delta / 2).value
        if not lin <= value <= (1 + params.delta / 2) * lin:
            approx_fail.append(case)
    improved = tried = 0
    improve_fail = []
    worst_k = F(0)
    while improved < 100 and tried < 1000:
        tried += 1
        lp = _lp_instance(rng)
        lin, x_opt = lin_by_enumeration(lp)
        mode = tried % 3
        if mode == 0:
            x = {lp.pure_config(i): F(b, lp.pure_config(i)[0][1]) for i, b in enumerate(lp.demand)}
        elif mode == 1:
            x = approx_solve(lp).x
        else:
            x = dict(x_opt)
        pair = SolutionPair(x, {c: ceil_fraction(v) for c, v in x.items()})
        alpha = rng.randint(1, 4)
        result = improve(pair, lp, alpha, params)
        if not result.preconditions_ok:
            continue
        improved += 1
        norm_ok = result.pair.norm_x() <= max(pair.norm_x(), (1 + params.delta) * lin) - alpha
        dist_ok = result.distance <= IMPROVE_DISTANCE_K * (lp.m + alpha) / params.delta
        worst_k = max(worst_k, F(result.distance) * params.delta / (lp.m + alpha))
        if not (norm_ok and dist_ok and check_pair(result.pair, lp).ok):
            improve_fail.append(tried)
    ok = not approx_fail and not improve_fail and improved == 100
    verdict(10, "LP solver contract", ok,
            f"approx within (1+delta/2) on 100/100-{len(approx_fail)}; Improve post-conditions on "
            f"{improved - len(improve_fail)}/{improved} instances, K = {IMPROVE_DISTANCE_K} "
            f"(worst measured {float(worst_k):.2f})")


# ---------------------------------------------------------------- 4. shift budget
def test_criterion_04_shift_budget(verdict):
    # dedicated large-item streams in the online regime, plus every shift
    # count recorded by the suites above
    counts = []
    for seed in range(3):
        report = run(gen_random(RandomSpec(1500, "large", 0.3, seed=400 + seed, epsilon=F(1, 4))), 4)
        counts.extend(r.d for r in report.records)
    counts.extend(SHIFT_COUNTS)
    worst = max(counts)
    verdict(4, "shift count d <= 11", worst <= 11,
            f"{len(counts)} events, max d = {worst}, events with d > 0: {sum(1 for d in counts if d)}")
