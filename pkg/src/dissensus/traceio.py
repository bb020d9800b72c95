"""Versioned newline-delimited trace and snapshot files.

A trace file starts with a comment header carrying the format version,
the config hash, and the tool version, followed by one JSON record per
line: an init record with the full configuration, then tick and event
records in order, then an end record with the final state.
"""
from __future__ import annotations

import json
from pathlib import Path

from dataclasses import asdict

from .engine import (
    EpochSnapshot,
    EpochStats,
    RunConfig,
    TOOL_VERSION,
    Termination,
    TickRecord,
    TickStats,
    Trace,
)
from .errors import TraceParseError
from .events import CriticalEventRecord, EventKind
from .graph import Topology, classify, norm_edge

TRACE_MAGIC = "# dissensus-trace v1"
SNAPSHOT_MAGIC = "# dissensus-snapshots v1"


def write_trace(trace: Trace, path: str | Path) -> None:
    cfg = trace.config
    lines = [f"{TRACE_MAGIC} config={cfg.config_hash()} tool={TOOL_VERSION}"]
    lines.append(json.dumps({"t": "init", "config": cfg.to_dict(), "chi": trace.chi}, sort_keys=True))
    for rec in trace.records:
        lines.append(rec.to_json())
    stats = trace.stats
    lines.append(
        json.dumps(
            {
                "t": "end",
                "termination": trace.termination.value,
                "x": {str(k): v for k, v in sorted(trace.final_states.items())},
                "edges": [list(e) for e in trace.final_edges],
                "consensus_value": trace.consensus_value,
                "first_dup_epoch": trace.first_dup_epoch,
                "period": list(trace.period) if trace.period else None,
                "gossip_ticks": trace.gossip_ticks,
                "final_tick": trace.final_tick,
                "epochs": trace.epochs,
                "stats": {
                    "gossip_ticks": stats.gossip_ticks,
                    "equal_steps": stats.equal_steps,
                    "transfer_steps": stats.transfer_steps,
                    "conservation_violations": stats.conservation_violations,
                    "norm_gain_violations": stats.norm_gain_violations,
                    "min_norm_gain": stats.min_norm_gain,
                },
                "epoch_stats": asdict(trace.epoch_stats),
            },
            sort_keys=True,
        )
    )
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshots(trace: Trace, path: str | Path) -> None:
    cfg = trace.config
    lines = [f"{SNAPSHOT_MAGIC} config={cfg.config_hash()} tool={TOOL_VERSION}"]
    lines += [snap.to_json() for snap in trace.snapshots]
    Path(path).write_text("\n".join(lines) + "\n")


def _rebuild_snapshots(cfg: RunConfig, records: list) -> list[EpochSnapshot]:
    """Reconstruct per-epoch snapshots by replaying the records.

    Recorded states are applied as claimed, so a tampered trace yields
    snapshots reflecting the tampering (which the checkers then flag).
    """
    x = dict(cfg.states)
    g = Topology(cfg.states, [norm_edge(u, v) for u, v in cfg.edges])
    snaps = [_snap(0, 0, x, g, None)]
    for rec in records:
        if isinstance(rec, TickRecord):
            x[rec.i] = rec.xi
            x[rec.j] = rec.xj
        else:
            g.remove_node(rec.subject)
            del x[rec.subject]
            if rec.kind is EventKind.DUPLICATION:
                c1, c2 = rec.children
                g.add_node(c1)
                g.add_node(c2)
                x[c1] = rec.alpha
                x[c2] = rec.beta
            for u, v in rec.eps:
                g.add_edge(u, v)
            snaps.append(_snap(rec.epoch, rec.tick, x, g, rec.kind.value))
    return snaps


def _snap(epoch, tick, x, g, event_kind) -> EpochSnapshot:
    return EpochSnapshot(
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


def read_trace(path: str | Path, snapshots_path: str | Path | None = None) -> Trace:
    """Load a trace file back into a Trace.

    Snapshots come from the sidecar when given, otherwise they are rebuilt
    by replaying the records.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith(TRACE_MAGIC):
        raise TraceParseError("missing or unknown trace header", 1)
    cfg = None
    chi = None
    records: list = []
    end: dict | None = None
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"invalid JSON ({exc.msg})", ln) from exc
        kind = d.get("t")
        if kind == "init":
            cfg = RunConfig.from_dict(d["config"])
            chi = d["chi"]
        elif kind == "tick":
            if cfg is None:
                raise TraceParseError("tick record before init record", ln)
            (i, j) = d["edge"]
            records.append(
                TickRecord(d["tick"], i, j, d["delta"], d["x"][str(i)], d["x"][str(j)])
            )
        elif kind == "event":
            try:
                records.append(CriticalEventRecord.from_dict(d))
            except (KeyError, TypeError) as exc:
                raise TraceParseError(f"malformed event record: {exc}", ln) from exc
        elif kind == "end":
            end = d
        else:
            raise TraceParseError(f"unknown record type {kind!r}", ln)
    if cfg is None:
        raise TraceParseError("no init record found", len(lines))
    if end is None:
        raise TraceParseError("trace truncated: no end record", len(lines))

    if snapshots_path is not None and Path(snapshots_path).exists():
        snapshots = read_snapshots(snapshots_path)
    else:
        snapshots = _rebuild_snapshots(cfg, records)

    s = end["stats"]
    return Trace(
        config=cfg,
        chi=chi,
        records=records,
        snapshots=snapshots,
        termination=Termination(end["termination"]),
        final_states={int(k): v for k, v in end["x"].items()},
        final_edges=[norm_edge(*e) for e in end["edges"]],
        consensus_value=end["consensus_value"],
        first_dup_epoch=end["first_dup_epoch"],
        period=tuple(end["period"]) if end["period"] else None,
        gossip_ticks=end["gossip_ticks"],
        final_tick=end["final_tick"],
        epochs=end["epochs"],
        stats=TickStats(
            gossip_ticks=s["gossip_ticks"],
            equal_steps=s["equal_steps"],
            transfer_steps=s["transfer_steps"],
            conservation_violations=s["conservation_violations"],
            norm_gain_violations=s["norm_gain_violations"],
            min_norm_gain=s["min_norm_gain"],
        ),
        epoch_stats=EpochStats(**end.get("epoch_stats", {})),
    )


def read_snapshots(path: str | Path) -> list[EpochSnapshot]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(SNAPSHOT_MAGIC):
        raise TraceParseError("missing or unknown snapshot header", 1)
    snaps = []
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"invalid JSON ({exc.msg})", ln) from exc
        snaps.append(EpochSnapshot.from_dict(d))
    return snaps


def replay_final_state(cfg: RunConfig, records: list) -> tuple[dict[int, int], list]:
    """Final (states, edges) implied by the records, taking them as claimed."""
    x = dict(cfg.states)
    g = Topology(cfg.states, [norm_edge(u, v) for u, v in cfg.edges])
    for rec in records:
        if isinstance(rec, TickRecord):
            x[rec.i] = rec.xi
            x[rec.j] = rec.xj
        else:
            g.remove_node(rec.subject)
            del x[rec.subject]
            if rec.kind is EventKind.DUPLICATION:
                c1, c2 = rec.children
                g.add_node(c1)
                g.add_node(c2)
                x[c1] = rec.alpha
                x[c2] = rec.beta
            for u, v in rec.eps:
                g.add_edge(u, v)
    return x, g.edges()
