"""Checkers for every protocol/engine invariant, plus a brute-force oracle.

The checkers consume finished traces and never mutate anything. The oracle
explores *all* edge-selection sequences of a tiny system (unit transfers),
memoizing configurations up to relabeling, and verifies the same properties
on every path independently of the simulator.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .engine import RunConfig, TickRecord, Trace
from .errors import ConfigError, StateSpaceBudgetError
from .events import CriticalEventRecord, EventKind, split_state
from .graph import Topology, is_connected, norm_edge, relabeled_form


# -- reports ---------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | skipped
    where: str | None = None
    witness: str | None = None

    def line(self) -> str:
        tag = {"pass": "PASS", "fail": "FAIL", "skipped": "SKIP"}[self.status]
        out = f"{tag} {self.name}"
        if self.where:
            out += f" at {self.where}"
        if self.witness:
            out += f" ({self.witness})"
        return out


@dataclass
class InvariantReport:
    """One line per evaluated check; skipped checks stay visibly skipped."""

    results: list[CheckResult] = field(default_factory=list)

    def ok(self, name: str, witness: str | None = None) -> None:
        self.results.append(CheckResult(name, "pass", witness=witness))

    def fail(self, name: str, where: str, witness: str | None = None) -> None:
        self.results.append(CheckResult(name, "fail", where=where, witness=witness))

    def skip(self, name: str, reason: str) -> None:
        self.results.append(CheckResult(name, "skipped", witness=reason))

    def merge(self, other: "InvariantReport") -> None:
        self.results.extend(other.results)

    def passed(self) -> bool:
        return all(r.status != "fail" for r in self.results)

    def first_failure(self) -> CheckResult | None:
        return next((r for r in self.results if r.status == "fail"), None)

    def render(self) -> str:
        return "\n".join(r.line() for r in self.results)


# -- full trace check ------------------------------------------------------


def check_trace(trace: Trace) -> InvariantReport:
    """Evaluate every protocol, event, and loop invariant over one trace."""
    rep = InvariantReport()
    cfg = trace.config
    b = cfg.b
    chi = trace.chi
    has_ticks = any(isinstance(r, TickRecord) for r in trace.records) or cfg.record_ticks

    _check_tick_records(rep, trace, has_ticks)
    _check_snapshots(rep, trace)
    _check_event_steps(rep, trace)

    # terminal consensus conditions
    if trace.consensus_value is not None:
        v = trace.consensus_value
        n = len(trace.final_states)
        alpha, _ = split_state(b, cfg.split)
        if chi % n != 0 or v * n != chi or v >= b:
            rep.fail("consensus-conditions", "termination", f"value {v}, n={n}, chi={chi}")
        elif trace.first_dup_epoch is not None and v < alpha:
            rep.fail("consensus-conditions", "termination", f"value {v} < alpha={alpha}")
        else:
            rep.ok("consensus-conditions", f"value {v} = chi/n")
    else:
        rep.skip("consensus-conditions", "run did not end in consensus")
    return rep


def _check_tick_records(rep: InvariantReport, trace: Trace, has_ticks: bool) -> None:
    cfg = trace.config
    b = cfg.b
    chi = trace.chi
    if not has_ticks:
        # per-tick checks were run inline by the engine; report its counters
        s = trace.stats
        if s.conservation_violations == 0:
            rep.ok("state-sum-per-tick", f"checked inline over {s.gossip_ticks} ticks")
        else:
            rep.fail("state-sum-per-tick", "inline", f"{s.conservation_violations} violations")
        if s.norm_gain_violations == 0 and (s.min_norm_gain is None or s.min_norm_gain >= 4):
            rep.ok("norm-growth-per-step", f"min gain {s.min_norm_gain} over {s.transfer_steps} transfers")
        else:
            rep.fail("norm-growth-per-step", "inline", f"min gain {s.min_norm_gain}")
        rep.skip("delta-bounds", "no per-tick records")
        rep.skip("monotone-extremes", "no per-tick records")
        rep.skip("consensus-only-at-critical-times", "no per-tick records")
        return

    x = dict(cfg.states)
    sum_ok = gain_ok = delta_ok = mono_ok = lemma_ok = True
    cur_min = min(x.values())
    cur_max = max(x.values())
    for rec in trace.records:
        if isinstance(rec, CriticalEventRecord):
            _apply_event_to(x, rec)
            if sum(x.values()) != chi and sum_ok:
                rep.fail("state-sum-per-tick", f"epoch {rec.epoch}", f"sum {sum(x.values())}")
                sum_ok = False
            cur_min = min(x.values())
            cur_max = max(x.values())
            continue
        xi0, xj0 = x[rec.i], x[rec.j]
        d = rec.delta
        if xi0 == xj0:
            if d != 0 and delta_ok:
                rep.fail("delta-bounds", f"tick {rec.tick}", f"delta {d} on equal states")
                delta_ok = False
        else:
            cap = min(min(xi0, xj0), b - max(xi0, xj0))
            if not (1 <= d <= cap) and delta_ok:
                rep.fail("delta-bounds", f"tick {rec.tick}", f"delta {d}, cap {cap}")
                delta_ok = False
            gain = (2 * d * d + 2 * d * abs(xi0 - xj0)) if d else 0
            exact = rec.xi**2 + rec.xj**2 - xi0**2 - xj0**2
            if (gain < 4 or exact != gain) and gain_ok:
                rep.fail("norm-growth-per-step", f"tick {rec.tick}", f"gain {exact}")
                gain_ok = False
        x[rec.i] = rec.xi
        x[rec.j] = rec.xj
        if sum(x.values()) != chi and sum_ok:
            rep.fail("state-sum-per-tick", f"tick {rec.tick}", f"sum {sum(x.values())}")
            sum_ok = False
        lo, hi = min(x.values()), max(x.values())
        if (lo > cur_min or hi < cur_max) and mono_ok:
            rep.fail("monotone-extremes", f"tick {rec.tick}", f"min {cur_min}->{lo}, max {cur_max}->{hi}")
            mono_ok = False
        cur_min, cur_max = min(cur_min, lo), max(cur_max, hi)
        if lo == hi and len(x) > 1 and lo not in (0, b) and lemma_ok:
            # all-equal strictly inside (0, B) can only arise at a critical
            # time; a gossip tick producing it contradicts monotone extremes
            rep.fail("consensus-only-at-critical-times", f"tick {rec.tick}", f"value {lo}")
            lemma_ok = False
    if sum_ok:
        rep.ok("state-sum-per-tick", f"{len(trace.records)} records")
    if gain_ok:
        rep.ok("norm-growth-per-step")
    if delta_ok:
        rep.ok("delta-bounds")
    if mono_ok:
        rep.ok("monotone-extremes")
    if lemma_ok:
        rep.ok("consensus-only-at-critical-times")


def _apply_event_to(x: dict[int, int], rec: CriticalEventRecord) -> None:
    del x[rec.subject]
    if rec.kind is EventKind.DUPLICATION:
        c1, c2 = rec.children
        x[c1] = rec.alpha
        x[c2] = rec.beta


def _check_snapshots(rep: InvariantReport, trace: Trace) -> None:
    cfg = trace.config
    b = cfg.b
    chi = trace.chi
    if not trace.has_full_snapshots():
        # per-epoch checks ran inline in the engine; report its counters
        es = trace.epoch_stats
        tag = f"checked inline over {es.epochs_checked} epochs"
        for name, viol in (
            ("state-sum-per-epoch", es.sum_violations),
            ("connectivity-per-epoch", es.connectivity_violations),
            ("agent-count-bounds", es.bounds_violations),
        ):
            if viol == 0:
                rep.ok(name, tag)
            else:
                rep.fail(name, "inline", f"{viol} violations")
        return
    sum_ok = conn_ok = bounds_ok = True
    for snap in trace.snapshots:
        if snap.epoch == 0 and any(v in (0, b) for v in snap.states.values()):
            continue  # initial thresholds resolve at tick 0; bounds apply after
        if sum(snap.states.values()) != chi and sum_ok:
            rep.fail("state-sum-per-epoch", f"epoch {snap.epoch}", f"sum {sum(snap.states.values())}")
            sum_ok = False
        g = Topology(snap.nodes, snap.edges)
        if not is_connected(g) and conn_ok:
            rep.fail("connectivity-per-epoch", f"epoch {snap.epoch}")
            conn_ok = False
        lower = -(-chi // b)
        before_first_dup = trace.first_dup_epoch is None or snap.epoch < trace.first_dup_epoch
        upper = chi if before_first_dup else chi - b + 2
        if not (lower <= snap.n <= upper) and bounds_ok:
            rep.fail("agent-count-bounds", f"epoch {snap.epoch}", f"n={snap.n} not in [{lower},{upper}]")
            bounds_ok = False
    if sum_ok:
        rep.ok("state-sum-per-epoch", f"{len(trace.snapshots)} epochs")
    if conn_ok:
        rep.ok("connectivity-per-epoch")
    if bounds_ok:
        rep.ok("agent-count-bounds")


def _check_event_steps(rep: InvariantReport, trace: Trace) -> None:
    if not trace.has_full_snapshots():
        es = trace.epoch_stats
        if es.count_step_violations == 0:
            rep.ok("event-agent-count-step", f"checked inline over {es.epochs_checked} epochs")
        else:
            rep.fail("event-agent-count-step", "inline", f"{es.count_step_violations} violations")
        return
    ok = True
    for prev, snap in itertools.pairwise(trace.snapshots):
        if snap.event_kind == "death" and snap.n != prev.n - 1 and ok:
            rep.fail("event-agent-count-step", f"epoch {snap.epoch}", "death must remove one agent")
            ok = False
        if snap.event_kind == "duplication" and snap.n != prev.n + 1 and ok:
            rep.fail("event-agent-count-step", f"epoch {snap.epoch}", "duplication must add one agent")
            ok = False
    if ok:
        rep.ok("event-agent-count-step")


# -- topology invariance ---------------------------------------------------


def check_topology_invariance(trace: Trace, expected: str) -> InvariantReport:
    """Assert one shape flag ("hole", "chain", or "complete") at every epoch."""
    rep = InvariantReport()
    name = f"topology-invariance-{expected}"
    cfg = trace.config
    needed = "full" if expected == "complete" else "partition"
    if cfg.dup_rule != needed:
        rep.skip(name, f"requires the {needed} duplication rule")
        return rep
    if not trace.has_full_snapshots():
        rep.skip(name, "no per-epoch snapshots")
        return rep
    for snap in trace.snapshots:
        flag = getattr(snap.shape, expected)
        if not flag:
            rep.fail(name, f"epoch {snap.epoch}", f"shape {snap.shape}")
            return rep
    rep.ok(name, f"{len(trace.snapshots)} epochs")
    return rep


# -- density trend ---------------------------------------------------------


@dataclass
class DensitySeries:
    """Per agent-count series of (epoch, edge count, cycle count)."""

    warmup_epoch: int
    by_n: dict[int, list[tuple[int, int, int]]]


def density_series(trace: Trace, warmup_epoch: int | None = None) -> DensitySeries:
    t_hat = warmup_epoch if warmup_epoch is not None else (trace.first_dup_epoch or 0)
    by_n: dict[int, list[tuple[int, int, int]]] = {}
    for snap in trace.snapshots:
        if snap.epoch < t_hat:
            continue
        cyc = snap.edge_count - snap.n + 1
        by_n.setdefault(snap.n, []).append((snap.epoch, snap.edge_count, cyc))
    return DensitySeries(warmup_epoch=t_hat, by_n=by_n)


def check_density_trend(trace: Trace, warmup_epoch: int | None = None) -> InvariantReport:
    """Non-increase of edge and cycle counts along equal-agent-count epochs.

    Applies only to runs using the neighbor-splitting duplication rule and
    the single-inheritor star death rule; also checks the per-event edge
    deltas (+1 on duplication, <= -1 on death).
    """
    rep = InvariantReport()
    cfg = trace.config
    if cfg.dup_rule != "partition" or cfg.death_rule != "star":
        rep.skip("density-non-increase", "requires partition duplication + star death rules")
        rep.skip("per-event-edge-delta", "requires partition duplication + star death rules")
        return rep
    if not trace.has_full_snapshots():
        es = trace.epoch_stats
        if not es.density_checked:
            rep.skip("density-non-increase", "no per-epoch snapshots")
            rep.skip("per-event-edge-delta", "no per-epoch snapshots")
            return rep
        tag = f"checked inline over {es.epochs_checked} epochs"
        if trace.first_dup_epoch is None:
            rep.skip("density-non-increase", "no duplication occurred; warm-up epoch undefined")
        elif es.density_violations == 0:
            rep.ok("density-non-increase", tag)
        else:
            rep.fail("density-non-increase", "inline", f"{es.density_violations} violations")
        if es.edge_delta_violations == 0:
            rep.ok("per-event-edge-delta", tag)
        else:
            rep.fail("per-event-edge-delta", "inline", f"{es.edge_delta_violations} violations")
        return rep
    if trace.first_dup_epoch is None and warmup_epoch is None:
        rep.skip("density-non-increase", "no duplication occurred; warm-up epoch undefined")
    else:
        series = density_series(trace, warmup_epoch)
        ok = True
        for n, pts in sorted(series.by_n.items()):
            for (e0, m0, c0), (e1, m1, c1) in itertools.pairwise(pts):
                if m1 > m0 and ok:
                    rep.fail("density-non-increase", f"epoch {e1}", f"n={n}, edges {m0}->{m1}")
                    ok = False
                if c1 > c0 and ok:
                    rep.fail("density-non-increase", f"epoch {e1}", f"n={n}, cycles {c0}->{c1}")
                    ok = False
        if ok:
            rep.ok("density-non-increase", f"warm-up epoch {series.warmup_epoch}")
    ok = True
    for prev, snap in itertools.pairwise(trace.snapshots):
        if snap.event_kind == "duplication" and snap.edge_count != prev.edge_count + 1 and ok:
            rep.fail("per-event-edge-delta", f"epoch {snap.epoch}",
                     f"duplication edges {prev.edge_count}->{snap.edge_count}")
            ok = False
        if snap.event_kind == "death" and snap.edge_count > prev.edge_count - 1 and ok:
            rep.fail("per-event-edge-delta", f"epoch {snap.epoch}",
                     f"death edges {prev.edge_count}->{snap.edge_count}")
            ok = False
        c_prev = prev.edge_count - prev.n + 1
        c_new = snap.edge_count - snap.n + 1
        if snap.event_kind is not None and c_new > c_prev and ok:
            rep.fail("per-event-edge-delta", f"epoch {snap.epoch}", f"cycles {c_prev}->{c_new}")
            ok = False
    if ok:
        rep.ok("per-event-edge-delta")
    return rep


# -- exhaustive oracle -----------------------------------------------------


@dataclass
class OracleReport:
    """Result of exploring every unit-transfer schedule of a small system."""

    explored: int
    consensus_configs: list[tuple[int, int, bool]]  # (n, value, after_first_dup)
    consensus_before_first_dup: int
    violations: list[str]
    aborted: bool

    def passed(self) -> bool:
        return not self.violations and not self.aborted


def _canon(x: dict[int, int], g: Topology) -> tuple:
    """Minimal relabeling of (states, edges); sound for systems this small."""
    if len(x) > 7:
        raise StateSpaceBudgetError(0)
    return relabeled_form(g, x, max_n=7)


def _oracle_resolve(x: dict[int, int], g: Topology, cfg: RunConfig,
                    alpha: int, beta: int, violations: list[str]) -> tuple[dict, Topology, bool]:
    """Deterministic event resolution for the search: deaths then duplications.

    Arbitrary choices are fixed (max-state inheritor, lowest-id half pick)
    so each configuration has exactly one post-event successor.
    """
    from .events import (apply_death, apply_duplication, death_clique_rule,
                         death_star_rule, dup_full_rule, dup_partition_rule)
    from .protocol import SystemState

    b = cfg.b
    chi = sum(x.values())
    x = dict(x)
    g = g.copy()
    had_dup = False
    zeros = [i for i in sorted(x) if x[i] == 0]
    uppers = [i for i in sorted(x) if x[i] == b]
    for agent in zeros:
        st = SystemState(x, g, b)
        nbrs = g.neighbors(agent)
        if cfg.death_rule == "clique":
            patch = death_clique_rule(agent, nbrs)
        else:
            jst = min(nbrs, key=lambda j: (-x[j], j))
            patch = death_star_rule(agent, nbrs, jst)
        st, _ = apply_death(st, agent, patch)
        x, g = st.x, st.g
        if not is_connected(g):
            violations.append(f"disconnected after death of {agent}")
    for agent in uppers:
        st = SystemState(x, g, b)
        nbrs = g.neighbors(agent)
        fresh = max(x) + 1
        children = (fresh, fresh + 1)
        if cfg.dup_rule == "full":
            patch = dup_full_rule(agent, nbrs, children, alpha, beta)
        else:
            picked = frozenset(sorted(nbrs)[: len(nbrs) // 2])
            patch = dup_partition_rule(agent, nbrs, children, alpha, beta, _FixedPick(picked))
        st, _ = apply_duplication(st, agent, patch)
        x, g = st.x, st.g
        had_dup = True
        if not is_connected(g):
            violations.append(f"disconnected after duplication of {agent}")
        if sum(x.values()) < len(x) - 2 + b:
            violations.append(f"post-duplication count bound violated: n={len(x)}")
    if sum(x.values()) != chi:
        violations.append("state total changed across events")
    return x, g, had_dup


class _FixedPick:
    """rng stand-in whose sample() returns a predetermined subset."""

    def __init__(self, picked: frozenset[int]):
        self.picked = sorted(picked)

    def sample(self, population, k):
        assert k == len(self.picked)
        return list(self.picked)


def exhaustive_oracle(cfg: RunConfig, max_depth: int | None = None,
                      budget: int = 1_000_000) -> OracleReport:
    """Explore all edge-selection sequences of a small unit-transfer system.

    Verifies on every path: exact conservation, the >= 4 squared-norm growth
    of each unequal exchange, the agent-count bounds, all-equal states only
    at critical times, and the consensus divisibility conditions. Configs
    are memoized up to relabeling; exceeding `budget` aborts explicitly.
    """
    cfg.validate()
    if cfg.delta != "unit":
        raise ConfigError("the exhaustive oracle requires the unit delta policy")
    b = cfg.b
    chi = cfg.chi
    alpha, beta = split_state(b, cfg.split)
    x0 = dict(cfg.states)
    g0 = Topology(cfg.states, [norm_edge(u, v) for u, v in cfg.edges])

    violations: list[str] = []
    consensus: dict[tuple, tuple[int, int, bool]] = {}
    consensus_before_dup = 0
    visited: set = set()
    aborted = False
    stack: list[tuple[dict, Topology, bool, int]] = [(x0, g0, False, 0)]

    while stack:
        x, g, had_dup, depth = stack.pop()
        key = (_canon(x, g), had_dup)
        if key in visited:
            continue
        visited.add(key)
        if len(visited) > budget:
            aborted = True
            break
        n = len(x)
        lower = -(-chi // b)
        upper = chi - b + 2 if had_dup else chi
        if not (lower <= n <= upper) and not any(v in (0, b) for v in x.values()):
            violations.append(f"agent-count bound violated: n={n} not in [{lower},{upper}]")
        if any(v == 0 or v == b for v in x.values()):
            x2, g2, dup_now = _oracle_resolve(x, g, cfg, alpha, beta, violations)
            if len(x2) >= 1:
                stack.append((x2, g2, had_dup or dup_now, depth + 1))
            continue
        vals = set(x.values())
        if len(vals) == 1:
            v = vals.pop()
            ckey = (n, v, had_dup)
            if ckey not in consensus:
                consensus[ckey] = ckey
                if chi % n != 0 or v * n != chi or v >= b:
                    violations.append(f"consensus at value {v} with n={n} violates divisibility")
                if had_dup and v < alpha:
                    violations.append(f"post-duplication consensus value {v} below alpha={alpha}")
                if not had_dup:
                    consensus_before_dup += 1
            continue  # all further gossip is a no-op
        if n == 1:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        for i, j in g.edges():
            xi, xj = x[i], x[j]
            if xi == xj:
                continue  # no-op self-transition in the configuration graph
            x2 = dict(x)
            if xi > xj:
                x2[i], x2[j] = xi + 1, xj - 1
            else:
                x2[i], x2[j] = xi - 1, xj + 1
            gain = x2[i] ** 2 + x2[j] ** 2 - xi**2 - xj**2
            if gain != 2 + 2 * abs(xi - xj) or gain < 4:
                violations.append(f"norm growth {gain} on states ({xi},{xj})")
            if sum(x2.values()) != chi:
                violations.append("conservation violated by a gossip step")
            v2 = set(x2.values())
            if len(v2) == 1 and not (0 in v2 or b in v2):
                violations.append(f"all-equal mid-interval at value {v2.pop()}")
            stack.append((x2, g, had_dup, depth + 1))

    return OracleReport(
        explored=len(visited),
        consensus_configs=sorted(consensus.values()),
        consensus_before_first_dup=consensus_before_dup,
        violations=violations,
        aborted=aborted,
    )


# -- pie frames ------------------------------------------------------------


def export_pie_frames(trace: Trace, per_tick: bool = False) -> list[tuple[int, list[tuple[int, int, int, Fraction]]]]:
    """Slice angles 360 * x_i / chi per epoch (or per tick), exact rationals.

    Each frame is (index, [(agent, numerator, denominator, degrees)]) with
    agents in canonical id order; angles of one frame sum to exactly 360.
    """
    chi = trace.chi
    frames = []

    def frame(idx: int, states: dict[int, int]):
        slices = [(i, states[i], chi, Fraction(360 * states[i], chi)) for i in sorted(states)]
        return (idx, slices)

    if not per_tick:
        for snap in trace.snapshots:
            frames.append(frame(snap.epoch, snap.states))
        return frames

    x = dict(trace.config.states)
    frames.append(frame(0, x))
    for rec in trace.records:
        if isinstance(rec, TickRecord):
            x[rec.i] = rec.xi
            x[rec.j] = rec.xj
            frames.append(frame(rec.tick, x))
        else:
            _apply_event_to(x, rec)
            frames.append(frame(rec.tick, x))
    return frames


def write_frames_csv(frames, path: str | Path, config_hash: str = "") -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"# config={config_hash}"])
        w.writerow(["index", "agent", "numerator", "denominator", "degrees"])
        for idx, slices in frames:
            for agent, num, den, deg in slices:
                w.writerow([idx, agent, num, den, float(deg)])
