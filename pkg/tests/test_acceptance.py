"""Acceptance suite: one test (and one printed pass/fail line) per criterion.

Criteria 2, 3, 4, and 7 share a single batch of 100 counters-only runs;
the engine checks those invariants inline and the tests read its counters.
"""

import time

import pytest

from dissensus.analysis import (
    check_density_trend,
    check_topology_invariance,
    exhaustive_oracle,
)
from dissensus.cli import verify_report
from dissensus.engine import (
    RunConfig,
    Termination,
    random_connected_start,
    run,
)
from dissensus.events import EventKind
from dissensus.traceio import write_trace

RULE_SETS = [("partition", "star"), ("partition", "clique"),
             ("full", "star"), ("full", "clique")]


def conclude(num, label, ok, detail):
    tag = "PASS" if ok else "FAIL"
    print(f"criterion {num} — {label}: {tag} ({detail})")
    assert ok, f"criterion {num} ({label}): {detail}"


# -- criterion 1: the worked two-agent example -----------------------------


def test_criterion_01_golden_trace():
    t0 = time.perf_counter()
    tr = run(RunConfig(b=8, states={1: 4, 2: 6}, edges=[(1, 2)],
                       scheduler="scripted",
                       script=[(1, 2), (1, 2), (1, 3), (1, 4)],
                       dup_rule="full"))
    dt = time.perf_counter() - t0
    kinds = [r.kind for r in tr.event_records()]
    ok = (tr.termination is Termination.CONSENSUS
          and tr.consensus_value == 5
          and kinds == [EventKind.DUPLICATION, EventKind.DEATH]
          and dt < 1.0)
    conclude(1, "golden trace", ok,
             f"consensus value {tr.consensus_value}, events {[k.value for k in kinds]}, {dt:.3f}s")


# -- criteria 2/3/4/7: 100 long seeded runs, counters checked inline -------


@pytest.fixture(scope="module")
def long_runs():
    traces = []
    t0 = time.perf_counter()
    for i in range(100):
        dup_rule, death_rule = RULE_SETS[i % len(RULE_SETS)]
        states, edges = random_connected_start(6, 9, 30, 7, seed=i)
        cfg = RunConfig(b=7, states=states, edges=edges, seed=i,
                        dup_rule=dup_rule, death_rule=death_rule,
                        max_ticks=100_000,
                        record_ticks=False, record_snapshots=False)
        traces.append(run(cfg))
    return traces, time.perf_counter() - t0


def test_criterion_02_conservation(long_runs):
    traces, dt = long_runs
    bad = sum(tr.stats.conservation_violations for tr in traces)
    bad += sum(1 for tr in traces if sum(tr.final_states.values()) != 30)
    ticks = sum(tr.gossip_ticks for tr in traces)
    ok = bad == 0 and dt < 30.0
    conclude(2, "conservation over 100 runs", ok,
             f"{bad} violations over {ticks} ticks, {dt:.1f}s")


def test_criterion_03_agent_count_bounds(long_runs):
    traces, _ = long_runs
    bad = sum(tr.epoch_stats.bounds_violations for tr in traces)
    epochs = sum(tr.epoch_stats.epochs_checked for tr in traces)
    ok = bad == 0 and epochs > 0
    conclude(3, "agent-count bounds", ok, f"{bad} violations over {epochs} epochs")


def test_criterion_04_connectivity(long_runs):
    traces, _ = long_runs
    bad = sum(tr.epoch_stats.connectivity_violations for tr in traces)
    epochs = sum(tr.epoch_stats.epochs_checked for tr in traces)
    ok = bad == 0 and epochs > 0
    conclude(4, "connectivity at every epoch", ok,
             f"{bad} violations over {epochs} epochs")


def test_criterion_07_norm_growth(long_runs):
    traces, _ = long_runs
    bad = sum(tr.stats.norm_gain_violations for tr in traces)
    gains = [tr.stats.min_norm_gain for tr in traces if tr.stats.min_norm_gain is not None]
    steps = sum(tr.stats.transfer_steps for tr in traces)
    ok = bad == 0 and gains and min(gains) >= 4 and steps > 0
    conclude(7, "squared-norm growth >= 4 per transfer", ok,
             f"min gain {min(gains) if gains else None} over {steps} transfers")


# -- criterion 5: shape invariance -----------------------------------------


def ring(n):
    return [(i, i % n + 1) for i in range(1, n + 1)]


def path(n):
    return [(i, i + 1) for i in range(1, n)]


def _shape_run(edges, dup_rule, death_rule, b, states, seed):
    return run(RunConfig(b=b, states=states, edges=edges, dup_rule=dup_rule,
                         death_rule=death_rule, scheduler="random", seed=seed,
                         max_epochs=1_000, max_ticks=1_000_000,
                         record_ticks=False))


def test_criterion_05_topology_invariance():
    t0 = time.perf_counter()
    six = {1: 3, 2: 3, 3: 3, 4: 3, 5: 3, 6: 2}  # chi = 17, no consensus divisor
    failures = []
    epochs = 0
    for seed in range(20):
        for label, edges in (("hole", ring(6)), ("chain", path(6))):
            tr = _shape_run(edges, "partition", "star", 5, six, seed)
            epochs += tr.epochs
            rep = check_topology_invariance(tr, label)
            if not rep.passed():
                failures.append(f"{label} seed {seed}: {rep.first_failure().line()}")
    k4 = {1: 5, 2: 4, 3: 4, 4: 4}  # chi = 17 again
    edges = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    tr = _shape_run(edges, "full", "clique", 6, k4, seed=0)
    epochs += tr.epochs
    rep = check_topology_invariance(tr, "complete")
    if not rep.passed():
        failures.append(f"complete: {rep.first_failure().line()}")
    dt = time.perf_counter() - t0
    ok = not failures and epochs >= 41 * 1_000 and dt < 10.0
    conclude(5, "hole/chain/complete shape invariance", ok,
             f"{len(failures)} failures over {epochs} epochs, {dt:.1f}s; " + "; ".join(failures[:3]))


# -- criterion 6: density under the splitting + single-inheritor rules -----


def test_criterion_06_density_non_increase():
    failures = []
    epochs = 0
    for seed in range(20):
        states, edges = random_connected_start(10, 20, 47, 8, seed=seed)
        tr = run(RunConfig(b=8, states=states, edges=edges, seed=seed,
                           dup_rule="partition", death_rule="star",
                           scheduler="random", max_epochs=1_000,
                           max_ticks=1_000_000, record_ticks=False))
        epochs += tr.epochs
        rep = check_density_trend(tr)
        if not rep.passed():
            failures.append(f"seed {seed}: {rep.first_failure().line()}")
    ok = not failures and epochs >= 20 * 1_000
    conclude(6, "edge/cycle density non-increase", ok,
             f"{len(failures)} failures over {epochs} epochs; " + "; ".join(failures[:3]))


# -- criteria 8/9: exhaustive schedule oracle ------------------------------


@pytest.fixture(scope="module")
def oracle_reports():
    t0 = time.perf_counter()
    configs = [
        RunConfig(b=4, states={1: 3, 2: 2, 3: 2}, edges=[(1, 2), (2, 3), (1, 3)]),
        RunConfig(b=4, states={1: 2, 2: 2, 3: 2, 4: 1},
                  edges=[(1, 2), (2, 3), (3, 4), (1, 4)]),
    ]
    return [exhaustive_oracle(cfg) for cfg in configs], time.perf_counter() - t0


def test_criterion_08_consensus_conditions(oracle_reports):
    reports, dt = oracle_reports
    bad = []
    before = 0
    explored = 0
    for rep in reports:
        explored += rep.explored
        before += rep.consensus_before_first_dup
        bad += [v for v in rep.violations if "consensus" in v]
        if rep.aborted:
            bad.append("state-space budget exceeded")
        for n, v, _ in rep.consensus_configs:
            if 7 % n != 0 or v != 7 // n or v >= 4:
                bad.append(f"inadmissible consensus n={n} v={v}")
    ok = not bad and before == 0 and dt < 60.0
    conclude(8, "consensus divisibility conditions (all schedules)", ok,
             f"{before} pre-duplication consensus, {len(bad)} violations, "
             f"{explored} configurations, {dt:.1f}s")


def test_criterion_09_all_equal_only_at_critical_times(oracle_reports):
    reports, _ = oracle_reports
    bad = [v for rep in reports for v in rep.violations if "all-equal" in v]
    explored = sum(rep.explored for rep in reports)
    conclude(9, "all-equal states only at critical times", not bad,
             f"{len(bad)} violations over {explored} configurations")


# -- criterion 10: byte-identical replay -----------------------------------


def test_criterion_10_determinism(tmp_path):
    states, edges = random_connected_start(6, 9, 30, 7, seed=17)
    mismatches = []
    for label, extra in (("recorded", {}),
                         ("counters-only", {"record_ticks": False,
                                            "record_snapshots": False})):
        cfg = RunConfig(b=7, states=states, edges=edges, seed=17,
                        scheduler="round_robin", max_ticks=20_000, **extra)
        t1, t2 = run(cfg), run(cfg)
        p1, p2 = tmp_path / f"{label}_a.jsonl", tmp_path / f"{label}_b.jsonl"
        write_trace(t1, p1)
        write_trace(t2, p2)
        if p1.read_bytes() != p2.read_bytes():
            mismatches.append(f"{label}: trace bytes differ")
        if verify_report(t1).render() != verify_report(t2).render():
            mismatches.append(f"{label}: reports differ")
    conclude(10, "byte-identical replay", not mismatches, "; ".join(mismatches) or "2 configs x 2 runs")
