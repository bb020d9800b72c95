"""Quantized gossip dynamics between critical events.

One edge is selected per tick; an integer amount delta flows from the
smaller-state endpoint to the larger one, so neighbor deviation grows.
The transfer cap keeps every state inside [0, B] and makes the 0/B
thresholds reachable exactly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import SchedulingError
from .graph import Edge, Topology, norm_edge
from .streams import DELTA, SCHED, SplitMix


@dataclass
class SystemState:
    """The evolving configuration: integer states on a live topology.

    chi is the conserved total of all states; b the duplication threshold.
    tick counts elementary time steps, epoch counts critical events so far.
    """

    x: dict[int, int]
    g: Topology
    b: int
    tick: int = 0
    epoch: int = 0
    chi: int = field(default=0)

    def __post_init__(self):
        if self.chi == 0:
            self.chi = sum(self.x.values())

    def clone(self) -> "SystemState":
        return SystemState(dict(self.x), self.g.copy(), self.b, self.tick, self.epoch, self.chi)

    def total(self) -> int:
        return sum(self.x.values())


class Threshold(enum.Enum):
    ZERO = "zero"
    UPPER = "upper"


# -- delta selection -------------------------------------------------------


def delta_cap(xi: int, xj: int, b: int) -> int:
    """Largest legal transfer: min(loser state, headroom of the winner).

    Tighter than min(xi, xj) alone so that no state ever leaves [0, B].
    """
    lo, hi = (xi, xj) if xi < xj else (xj, xi)
    return min(lo, b - hi)


@dataclass
class DeltaPolicy:
    """How much to move per exchange: unit, the full cap, or seeded-uniform."""

    kind: str = "unit"  # unit | max | uniform
    rng: SplitMix | None = None

    def __post_init__(self):
        if self.kind not in ("unit", "max", "uniform"):
            raise ValueError(f"unknown delta policy {self.kind!r}")
        if self.kind == "uniform" and self.rng is None:
            self.rng = SplitMix(0, DELTA, 0)


def select_delta(policy: DeltaPolicy, xi: int, xj: int, b: int) -> int:
    """Transfer amount for one exchange; 0 signals equal states (caller skips)."""
    if xi == xj:
        return 0
    cap = delta_cap(xi, xj, b)
    assert cap >= 1, f"no legal transfer for states ({xi},{xj}) with B={b}"
    if policy.kind == "unit":
        return 1
    if policy.kind == "max":
        return cap
    return policy.rng.randint(1, cap)


# -- the elementary update -------------------------------------------------


def gossip_step(s: SystemState, edge: Edge, delta: int) -> SystemState:
    """Apply one competitive exchange along `edge` and advance the tick.

    Equal endpoint states leave everything but the tick unchanged.
    Otherwise the larger state gains delta and the smaller loses it, so the
    pair sum is invariant and all other agents are untouched.
    """
    i, j = edge
    if not s.g.has_edge(i, j):
        raise SchedulingError(f"edge ({i},{j}) is not in the live graph")
    out = s.clone()
    out.tick += 1
    xi, xj = s.x[i], s.x[j]
    if xi == xj:
        return out
    if xi > xj:
        out.x[i], out.x[j] = xi + delta, xj - delta
    else:
        out.x[i], out.x[j] = xi - delta, xj + delta
    for v in (out.x[i], out.x[j]):
        if v < 0 or v > s.b:
            raise AssertionError(f"delta policy bug: state {v} escaped [0,{s.b}]")
    return out


def detect_thresholds(s: SystemState) -> list[tuple[int, Threshold]]:
    """Agents sitting at a threshold, zeros then uppers, each in id order."""
    zeros = [(i, Threshold.ZERO) for i in sorted(s.x) if s.x[i] == 0]
    uppers = [(i, Threshold.UPPER) for i in sorted(s.x) if s.x[i] == s.b]
    return zeros + uppers


def norm_sq_gain(xi: int, xj: int, delta: int) -> int:
    """Exact change of ||x||^2 caused by one exchange on states (xi, xj)."""
    if xi == xj:
        return 0
    return 2 * delta * delta + 2 * delta * abs(xi - xj)


# -- edge scheduling -------------------------------------------------------


class Scheduler:
    """Base: yields one live edge per tick; rebuilt at every critical event."""

    def rebuild(self, g: Topology, epoch: int) -> None:
        raise NotImplementedError

    def next_edge(self) -> Edge:
        raise NotImplementedError


class RoundRobinScheduler(Scheduler):
    """Cycles the live edges in canonical (min, max) lexicographic order.

    Between critical events every edge is selected at least once per |E|
    ticks, which realizes the fairness the protocol assumes.
    """

    def __init__(self):
        self.queue: list[Edge] = []
        self.ptr = 0

    def rebuild(self, g: Topology, epoch: int) -> None:
        self.queue = g.edges()
        self.ptr = 0

    def next_edge(self) -> Edge:
        if not self.queue:
            raise SchedulingError("no edges to schedule")
        e = self.queue[self.ptr]
        self.ptr += 1
        if self.ptr == len(self.queue):
            self.ptr = 0
        return e


class RandomScheduler(Scheduler):
    """Uniform seeded draws over the live edges.

    The stream is re-derived from (seed, epoch) at every rebuild so replay
    is exact and per-epoch draws are insensitive to earlier history length.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.queue: list[Edge] = []
        self.rng = SplitMix(seed, SCHED, 0)

    def rebuild(self, g: Topology, epoch: int) -> None:
        self.queue = g.edges()
        self.rng = SplitMix(self.seed, SCHED, epoch)

    def next_edge(self) -> Edge:
        if not self.queue:
            raise SchedulingError("no edges to schedule")
        return self.queue[self.rng.randrange(len(self.queue))]


class ScriptedScheduler(Scheduler):
    """Plays back an explicit edge sequence, one edge per gossip tick."""

    def __init__(self, script: list[Edge]):
        self.script = [norm_edge(u, v) for u, v in script]
        self.pos = 0

    def rebuild(self, g: Topology, epoch: int) -> None:
        pass

    def exhausted(self) -> bool:
        return self.pos >= len(self.script)

    def next_edge(self) -> Edge:
        if self.exhausted():
            raise SchedulingError("scripted schedule exhausted")
        e = self.script[self.pos]
        self.pos += 1
        return e
