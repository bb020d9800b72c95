"""The discrete-event loop: gossip ticks interleaved with critical events.

A run is strictly sequential and fully determined by its RunConfig; all
randomness flows through streams derived from (seed, purpose, epoch), so
traces replay bitwise and inserting or removing an early event does not
scramble later draws.
"""
from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field, asdict

from .errors import ConfigError, SchedulingError
from .events import (
    CriticalEventRecord,
    apply_death,
    apply_duplication,
    death_clique_rule,
    death_star_rule,
    dup_full_rule,
    dup_partition_rule,
    pick_jstar,
    split_state,
)
from .graph import (
    Edge,
    IdAllocator,
    Topology,
    TopologyShape,
    classify,
    is_connected,
    norm_edge,
    relabeled_form,
)
from .protocol import (
    RandomScheduler,
    RoundRobinScheduler,
    ScriptedScheduler,
    SystemState,
)
from .streams import DELTA, JSTAR, PICK, SplitMix

DELTA_KINDS = ("unit", "max", "uniform")
SCHEDULER_KINDS = ("round_robin", "random", "scripted")
DEATH_RULES = ("star", "clique")
JSTAR_POLICIES = ("max_state", "random")
DUP_RULES = ("partition", "full")

TOOL_VERSION = "0.1.0"


class Termination(enum.Enum):
    CONSENSUS = "consensus"
    MAX_TICKS = "max_ticks"
    MAX_EPOCHS = "max_epochs"
    PERIODIC = "periodic"
    SINGLE_AGENT = "single_agent"


@dataclass
class RunConfig:
    """Everything that determines a run."""

    b: int
    states: dict[int, int]
    edges: list[Edge]
    delta: str = "unit"
    scheduler: str = "round_robin"
    script: list[Edge] | None = None
    death_rule: str = "star"
    jstar: str = "max_state"
    dup_rule: str = "partition"
    split: str | int = "half"
    seed: int = 0
    max_ticks: int = 1_000_000
    max_epochs: int | None = None
    detect_periodicity: bool = False
    record_ticks: bool = True
    record_snapshots: bool = True

    @property
    def chi(self) -> int:
        return sum(self.states.values())

    def validate(self) -> None:
        if self.b < 2:
            raise ConfigError(f"split_state requires B >= 2, got B={self.b}")
        if not self.states:
            raise ConfigError("at least one agent required")
        for i, v in self.states.items():
            if not (0 <= v <= self.b):
                raise ConfigError(f"state of agent {i} is {v}, outside [0, {self.b}]")
        if self.chi < 2:
            raise ConfigError(f"total state must be >= 2, got {self.chi}")
        seen = set()
        for u, v in self.edges:
            e = norm_edge(u, v)
            if e in seen:
                raise ConfigError(f"duplicate edge {e} (simple graph required)")
            seen.add(e)
            for w in e:
                if w not in self.states:
                    raise ConfigError(f"edge {e} references unknown agent {w}")
        g = Topology(self.states, self.edges)
        if not is_connected(g):
            raise ConfigError("initial graph is not connected")
        if self.delta not in DELTA_KINDS:
            raise ConfigError(f"unknown delta policy {self.delta!r}")
        if self.scheduler not in SCHEDULER_KINDS:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if self.scheduler == "scripted" and not self.script:
            raise ConfigError("scripted scheduler requires a script")
        if self.death_rule not in DEATH_RULES:
            raise ConfigError(f"unknown death rule {self.death_rule!r}")
        if self.jstar not in JSTAR_POLICIES:
            raise ConfigError(f"unknown j* policy {self.jstar!r}")
        if self.dup_rule not in DUP_RULES:
            raise ConfigError(f"unknown duplication rule {self.dup_rule!r}")
        split_state(self.b, self.split)  # raises ConfigError when invalid
        if self.max_ticks < 0:
            raise ConfigError("max_ticks must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["states"] = {str(k): v for k, v in sorted(self.states.items())}
        d["edges"] = sorted([list(norm_edge(u, v)) for u, v in self.edges])
        if self.script is not None:
            d["script"] = [list(e) for e in self.script]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["states"] = {int(k): v for k, v in d["states"].items()}
        d["edges"] = [tuple(e) for e in d["edges"]]
        if d.get("script") is not None:
            d["script"] = [tuple(e) for e in d["script"]]
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(slots=True)
class TickRecord:
    """One gossip tick: selected edge, delta, updated endpoint states."""

    tick: int
    i: int
    j: int
    delta: int
    xi: int
    xj: int

    def to_json(self) -> str:
        return json.dumps(
            {"t": "tick", "tick": self.tick, "edge": [self.i, self.j],
             "delta": self.delta, "x": {str(self.i): self.xi, str(self.j): self.xj}},
            sort_keys=True,
        )


@dataclass
class EpochSnapshot:
    """Derived metrics captured at each critical time (and at the start)."""

    epoch: int
    tick: int
    n: int
    edge_count: int
    nodes: list[int]
    edges: list[Edge]
    states: dict[int, int]
    shape: TopologyShape
    event_kind: str | None = None  # kind of the event that opened this epoch

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": "snapshot",
                "epoch": self.epoch,
                "tick": self.tick,
                "n": self.n,
                "edge_count": self.edge_count,
                "nodes": self.nodes,
                "edges": [list(e) for e in self.edges],
                "states": {str(k): v for k, v in sorted(self.states.items())},
                "shape": {"complete": self.shape.complete, "hole": self.shape.hole, "chain": self.shape.chain},
                "event_kind": self.event_kind,
            },
            sort_keys=True,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "EpochSnapshot":
        return cls(
            epoch=d["epoch"],
            tick=d["tick"],
            n=d["n"],
            edge_count=d["edge_count"],
            nodes=d["nodes"],
            edges=[norm_edge(*e) for e in d["edges"]],
            states={int(k): v for k, v in d["states"].items()},
            shape=TopologyShape(**d["shape"]),
            event_kind=d.get("event_kind"),
        )


@dataclass
class TickStats:
    """Per-tick invariant checks run inline by the engine.

    These cover every gossip tick even when per-tick records are not kept:
    exact pair-sum conservation on each update and the quadratic-growth
    lower bound on unequal-state exchanges.
    """

    gossip_ticks: int = 0
    equal_steps: int = 0
    transfer_steps: int = 0
    conservation_violations: int = 0
    norm_gain_violations: int = 0
    min_norm_gain: int | None = None


@dataclass
class EpochStats:
    """Per-epoch invariant checks run inline by the engine.

    Mirrors what the snapshot checkers verify, for runs that do not keep
    per-epoch snapshots: exact state-total conservation, connectivity of
    the live graph after every event, the agent-count bounds, the +1/-1
    agent step per event, and (under the partition + star rules) the
    per-event edge deltas and the per-agent-count density non-increase.
    """

    epochs_checked: int = 0
    sum_violations: int = 0
    connectivity_violations: int = 0
    bounds_violations: int = 0
    count_step_violations: int = 0
    edge_delta_violations: int = 0
    density_violations: int = 0
    consensus_violations: int = 0
    density_checked: bool = False


@dataclass
class Trace:
    """Full replayable result of one run."""

    config: RunConfig
    chi: int
    records: list  # TickRecord | CriticalEventRecord, in order
    snapshots: list[EpochSnapshot]
    termination: Termination
    final_states: dict[int, int]
    final_edges: list[Edge]
    consensus_value: int | None
    first_dup_epoch: int | None
    period: tuple[int, int] | None  # (start epoch, length)
    gossip_ticks: int
    final_tick: int
    epochs: int
    stats: TickStats
    epoch_stats: EpochStats = field(default_factory=EpochStats)

    def has_full_snapshots(self) -> bool:
        """True when one snapshot per epoch (plus the start) was kept."""
        return len(self.snapshots) == self.epochs + 1

    def event_records(self) -> list[CriticalEventRecord]:
        return [r for r in self.records if isinstance(r, CriticalEventRecord)]


def init(cfg: RunConfig) -> SystemState:
    """Validate the configuration and build the initial system state."""
    cfg.validate()
    g = Topology(cfg.states, [norm_edge(u, v) for u, v in cfg.edges])
    return SystemState(x=dict(cfg.states), g=g, b=cfg.b)


def _build_scheduler(cfg: RunConfig):
    if cfg.scheduler == "round_robin":
        return RoundRobinScheduler()
    if cfg.scheduler == "random":
        return RandomScheduler(cfg.seed)
    return ScriptedScheduler(cfg.script)


def run(cfg: RunConfig) -> Trace:
    """Execute the full loop until consensus, periodicity, budget, or n = 1.

    Runs that keep neither per-tick records nor per-epoch snapshots are
    routed to a compiled kernel when one supports the configuration; it
    follows the identical per-purpose random streams, so both execution
    paths produce the same trajectory for the same RunConfig.
    """
    if not cfg.record_ticks and not cfg.record_snapshots:
        from . import fastpath

        if fastpath.supports(cfg):
            return fastpath.run(cfg)
    state = init(cfg)
    b = cfg.b
    x = state.x
    g = state.g
    chi = state.chi
    alloc = IdAllocator()
    alloc.reserve_above(x)
    seed = cfg.seed
    alpha_split, _ = split_state(b, cfg.split)

    scheduler = _build_scheduler(cfg)
    scripted = isinstance(scheduler, ScriptedScheduler)
    round_robin = isinstance(scheduler, RoundRobinScheduler)
    delta_rng = SplitMix(seed, DELTA, 0)

    records: list = []
    snapshots: list[EpochSnapshot] = []
    stats = TickStats()
    epoch_stats = EpochStats()
    tick = 0
    epoch = 0
    gossip_ticks = 0
    ticks_since_event = 0
    first_dup: int | None = None
    period: tuple[int, int] | None = None
    period_seen: dict[tuple, int] = {}
    termination: Termination | None = None
    consensus_value: int | None = None

    def take_snapshot(event_kind: str | None = None) -> None:
        snapshots.append(
            EpochSnapshot(
                epoch=epoch,
                tick=tick,
                n=len(x),
                edge_count=g.edge_count(),
                nodes=g.nodes(),
                edges=g.edges(),
                states=dict(x),
                shape=classify(g),
                event_kind=event_kind,
            )
        )

    def check_epoch_invariants() -> None:
        # sum conservation, connectivity, and the agent-count bounds; any
        # failure here is an engine bug, not a user error
        epoch_stats.epochs_checked += 1
        if sum(x.values()) != chi:
            raise AssertionError(f"state total {sum(x.values())} != chi={chi} at epoch {epoch}")
        if not is_connected(g):
            raise AssertionError(f"graph disconnected at epoch {epoch}")
        lower = -(-chi // b)
        upper = chi if first_dup is None else chi - b + 2
        if not (lower <= len(x) <= upper):
            raise AssertionError(
                f"agent count {len(x)} outside [{lower}, {upper}] at epoch {epoch}"
            )

    def note_epoch_for_periodicity() -> None:
        # recurrence is judged up to renaming: fresh child ids make exact
        # labeled configurations unrepeatable across events by design
        nonlocal period, termination
        if not cfg.detect_periodicity or termination is not None:
            return
        form = relabeled_form(g, x)
        prev = period_seen.get(form)
        if prev is not None:
            period = (prev, epoch - prev)
            termination = Termination.PERIODIC
        else:
            period_seen[form] = epoch

    def resolve_events() -> None:
        """Resolve every pending threshold: deaths first, then duplications.

        Each event is its own epoch; patches are built against the live
        topology at resolution time. The whole batch shares one tick.
        """
        nonlocal x, g, epoch, first_dup
        zeros = [i for i in sorted(x) if x[i] == 0]
        uppers = [i for i in sorted(x) if x[i] == b]
        for agent in zeros:
            st = SystemState(x, g, b, tick, epoch, chi)
            nbrs = g.neighbors(agent)
            if cfg.death_rule == "star":
                jrng = SplitMix(seed, JSTAR, epoch + 1)
                jst = pick_jstar(nbrs, x, cfg.jstar, jrng)
                patch = death_star_rule(agent, nbrs, jst)
            else:
                patch = death_clique_rule(agent, nbrs)
            st, rec = apply_death(st, agent, patch)
            x, g, epoch = st.x, st.g, st.epoch
            records.append(rec)
            g.check_symmetry()
            check_epoch_invariants()
            take_snapshot("death")
            note_epoch_for_periodicity()
        for agent in uppers:
            st = SystemState(x, g, b, tick, epoch, chi)
            children = (alloc.fresh(), alloc.fresh())
            alpha, beta = split_state(b, cfg.split)
            nbrs = g.neighbors(agent)
            if cfg.dup_rule == "partition":
                prng = SplitMix(seed, PICK, epoch + 1)
                patch = dup_partition_rule(agent, nbrs, children, alpha, beta, prng)
            else:
                patch = dup_full_rule(agent, nbrs, children, alpha, beta)
            st, rec = apply_duplication(st, agent, patch)
            x, g, epoch = st.x, st.g, st.epoch
            if first_dup is None:
                first_dup = epoch
            records.append(rec)
            g.check_symmetry()
            check_epoch_invariants()
            take_snapshot("duplication")
            note_epoch_for_periodicity()

    def settle() -> None:
        """Termination checks at a critical time (or at the very start)."""
        nonlocal termination, consensus_value
        if termination is not None:
            return
        n = len(x)
        if n == 1:
            termination = Termination.SINGLE_AGENT
            return
        vals = set(x.values())
        if len(vals) == 1:
            v = vals.pop()
            # all-equal at a threshold would have been resolved as events
            assert chi % n == 0 and v == chi // n and v < b, "consensus conditions violated"
            if first_dup is not None:
                assert v >= alpha_split, "post-duplication consensus below alpha"
            termination = Termination.CONSENSUS
            consensus_value = v

    # -- epoch 0 -----------------------------------------------------------
    g.check_symmetry()
    take_snapshot()
    note_epoch_for_periodicity()
    if any(v == 0 or v == b for v in x.values()):
        resolve_events()
        tick += 1  # the initial events consume tick 0 -> 1
    else:
        check_epoch_invariants()
    settle()
    scheduler.rebuild(g, epoch)
    if cfg.delta == "uniform":
        delta_rng = SplitMix(seed, DELTA, epoch)

    # interval watchdog: with a fair rotation a critical event must occur
    # within |E| * (B * chi / 4 + 1) ticks unless the run is at consensus
    def interval_bound() -> int:
        return g.edge_count() * ((b * chi + 3) // 4 + 2)

    bound = interval_bound()
    record_ticks = cfg.record_ticks
    unit = cfg.delta == "unit"
    maxd = cfg.delta == "max"
    max_ticks = cfg.max_ticks
    max_epochs = cfg.max_epochs

    # -- main loop ---------------------------------------------------------
    while termination is None:
        if gossip_ticks >= max_ticks:
            termination = Termination.MAX_TICKS
            break
        if max_epochs is not None and epoch >= max_epochs:
            termination = Termination.MAX_EPOCHS
            break
        if scripted and scheduler.exhausted():
            termination = Termination.MAX_TICKS
            break
        i, j = scheduler.next_edge()
        if not g.has_edge(i, j):
            raise SchedulingError(f"scheduled edge ({i},{j}) not in live graph at tick {tick}")
        xi = x[i]
        xj = x[j]
        tick += 1
        gossip_ticks += 1
        ticks_since_event += 1
        if xi == xj:
            stats.equal_steps += 1
            if record_ticks:
                records.append(TickRecord(tick, i, j, 0, xi, xj))
            if round_robin and ticks_since_event > bound:
                raise AssertionError(f"no critical event within {bound} ticks of a fair rotation")
            continue
        if xi > xj:
            hi, lo = xi, xj
        else:
            hi, lo = xj, xi
        if unit:
            d = 1
        elif maxd:
            head = b - hi
            d = lo if lo < head else head
        else:
            head = b - hi
            d = delta_rng.randint(1, lo if lo < head else head)
        if xi > xj:
            nxi = xi + d
            nxj = xj - d
        else:
            nxi = xi - d
            nxj = xj + d
        # inline per-tick checks: exact pair-sum conservation and the
        # quadratic divergence lower bound (>= 4 on any unequal exchange)
        if nxi + nxj != xi + xj:
            stats.conservation_violations += 1
        gain = 2 * d * d + 2 * d * (hi - lo)
        if gain < 4:
            stats.norm_gain_violations += 1
        if stats.min_norm_gain is None or gain < stats.min_norm_gain:
            stats.min_norm_gain = gain
        x[i] = nxi
        x[j] = nxj
        stats.transfer_steps += 1
        if record_ticks:
            records.append(TickRecord(tick, i, j, d, nxi, nxj))
        if nxi == 0 or nxj == 0 or nxi == b or nxj == b:
            tick += 1  # the event batch consumes one tick; no gossip there
            resolve_events()
            settle()
            ticks_since_event = 0
            scheduler.rebuild(g, epoch)
            if cfg.delta == "uniform":
                delta_rng = SplitMix(seed, DELTA, epoch)
            bound = interval_bound()
        elif round_robin and ticks_since_event > bound:
            raise AssertionError(f"no critical event within {bound} ticks of a fair rotation")

    stats.gossip_ticks = gossip_ticks
    return Trace(
        config=cfg,
        chi=chi,
        records=records,
        snapshots=snapshots,
        termination=termination,
        final_states=dict(x),
        final_edges=g.edges(),
        consensus_value=consensus_value,
        first_dup_epoch=first_dup,
        period=period,
        gossip_ticks=gossip_ticks,
        final_tick=tick,
        epochs=epoch,
        stats=stats,
        epoch_stats=epoch_stats,
    )


def random_connected_start(
    n_agents: int, n_edges: int, chi: int, b: int, seed: int, first_id: int = 1
) -> tuple[dict[int, int], list[Edge]]:
    """Seeded random connected simple graph with interior states summing to chi.

    States land in [1, B-1]; requires n <= chi <= n * (B - 1) and a feasible
    edge count (n-1 <= n_edges <= n(n-1)/2).
    """
    if not (n_agents <= chi <= n_agents * (b - 1)):
        raise ConfigError(f"chi={chi} infeasible for {n_agents} agents with B={b}")
    if not (n_agents - 1 <= n_edges <= n_agents * (n_agents - 1) // 2):
        raise ConfigError(f"edge count {n_edges} infeasible for {n_agents} agents")
    rng = random.Random(f"start:{seed}")
    ids = list(range(first_id, first_id + n_agents))
    # random spanning tree: attach each new node to a random earlier one
    order = ids[:]
    rng.shuffle(order)
    edges = set()
    for k in range(1, n_agents):
        edges.add(norm_edge(order[k], order[rng.randrange(k)]))
    candidates = [
        (u, v) for a, u in enumerate(ids) for v in ids[a + 1 :] if (u, v) not in edges
    ]
    rng.shuffle(candidates)
    for e in candidates[: n_edges - len(edges)]:
        edges.add(e)
    states = {i: 1 for i in ids}
    for _ in range(chi - n_agents):
        room = [i for i in ids if states[i] < b - 1]
        states[rng.choice(room)] += 1
    return states, sorted(edges)
