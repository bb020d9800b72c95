"""Operator entry point: run, verify, and sweep experiments.

Exit codes: 0 success, 1 invariant violation, 2 configuration error,
3 internal error.
"""
from __future__ import annotations

import csv
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import engine
from .analysis import (
    CheckResult,
    InvariantReport,
    check_density_trend,
    check_topology_invariance,
    check_trace,
    exhaustive_oracle,
)
from .config import parse_config
from .engine import TOOL_VERSION, Termination, Trace
from .errors import ConfigError, DissensusError, StateSpaceBudgetError, TraceParseError
from .graph import norm_edge
from .traceio import read_trace, replay_final_state, write_snapshots, write_trace

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3

_REASON = {
    Termination.CONSENSUS: "Consensus",
    Termination.MAX_TICKS: "MaxTicks",
    Termination.MAX_EPOCHS: "MaxEpochs",
    Termination.PERIODIC: "Periodic",
    Termination.SINGLE_AGENT: "SingleAgent",
}


def _shape_str(trace: Trace) -> str:
    shape = trace.snapshots[-1].shape
    flags = [f for f in ("complete", "hole", "chain") if getattr(shape, f)]
    return ",".join(flags) if flags else "-"


def summary_line(trace: Trace) -> str:
    n = len(trace.final_states)
    shape = _shape_str(trace)
    if trace.termination is Termination.CONSENSUS:
        return (
            f"Consensus at value {trace.consensus_value} after {trace.epochs} events; "
            f"n={n}, shape={shape}"
        )
    extra = ""
    if trace.termination is Termination.PERIODIC and trace.period:
        extra = f", period {trace.period[1]} from epoch {trace.period[0]}"
    return (
        f"{_REASON[trace.termination]} after {trace.epochs} events, "
        f"{trace.gossip_ticks} ticks; n={n}, shape={shape}{extra}"
    )


def _read_script(path: str) -> list:
    edges = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"script line {ln}: want 'u v', got {line!r}")
        edges.append(norm_edge(int(parts[0]), int(parts[1])))
    return edges


def verify_report(trace: Trace) -> InvariantReport:
    """All applicable checks for one trace, plus replay consistency."""
    rep = check_trace(trace)
    start_shape = trace.snapshots[0].shape
    for flag in ("hole", "chain", "complete"):
        if getattr(start_shape, flag):
            rep.merge(check_topology_invariance(trace, flag))
    rep.merge(check_density_trend(trace))
    if trace.config.record_ticks:
        x, edges = replay_final_state(trace.config, trace.records)
        if x == trace.final_states and edges == trace.final_edges:
            rep.ok("replay-final-state")
        else:
            rep.fail("replay-final-state", "end of trace", "records do not reproduce the recorded final state")
    else:
        rep.skip("replay-final-state", "no per-tick records")
    return rep


@click.group()
@click.version_option(TOOL_VERSION, prog_name="dissensus")
def main():
    """Simulate and verify competitive quantized gossip with death/duplication."""


@main.command("run")
@click.option("--config", "config_path", required=True, help="Experiment spec file.")
@click.option("--out", "out_dir", default=None, help="Output directory (created if missing).")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--max-ticks", type=int, default=None, help="Override the tick budget.")
@click.option("--emit", "emit_raw", default=None, help="Comma list: trace,snapshots,frames,report.")
@click.option("--script", "script_path", default=None, help="Edge schedule file, one 'u v' per line.")
def cmd_run(config_path, out_dir, seed, max_ticks, emit_raw, script_path):
    """Execute one run and write the requested outputs."""
    try:
        spec = parse_config(config_path)
        cfg = spec.base
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if max_ticks is not None:
            cfg = replace(cfg, max_ticks=max_ticks)
        if script_path is not None:
            cfg = replace(cfg, scheduler="scripted", script=_read_script(script_path))
        cfg.validate()
        emit = spec.emit if emit_raw is None else frozenset(emit_raw.replace(",", " ").split())
        out = Path(out_dir if out_dir is not None else spec.out_dir)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        trace = engine.run(cfg)
        out.mkdir(parents=True, exist_ok=True)
        if "trace" in emit:
            write_trace(trace, out / "trace.jsonl")
        if "snapshots" in emit:
            write_snapshots(trace, out / "snapshots.jsonl")
        if "frames" in emit:
            from .analysis import export_pie_frames, write_frames_csv

            write_frames_csv(export_pie_frames(trace), out / "frames.csv", cfg.config_hash())
        if "report" in emit:
            rep = verify_report(trace)
            header = f"# dissensus-report v1 config={cfg.config_hash()} tool={TOOL_VERSION}\n"
            (out / "report.txt").write_text(header + rep.render() + "\n")
    except DissensusError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)
    click.echo(summary_line(trace))
    sys.exit(EXIT_OK)


@main.command("verify")
@click.option("--trace", "trace_path", default=None, help="Trace file to check.")
@click.option("--snapshots", "snapshots_path", default=None, help="Snapshot sidecar for the trace.")
@click.option("--config", "config_path", default=None, help="Spec to run-and-check instead.")
@click.option("--oracle", is_flag=True, help="Exhaustively check all schedules of a small config.")
def cmd_verify(trace_path, snapshots_path, config_path, oracle):
    """Check every invariant of a trace (or of a freshly run config)."""
    if oracle:
        if config_path is None:
            click.echo("configuration error: --oracle requires --config", err=True)
            sys.exit(EXIT_CONFIG)
        try:
            spec = parse_config(config_path)
            report = exhaustive_oracle(spec.base)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except StateSpaceBudgetError as exc:
            click.echo(f"fatal: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)
        click.echo(f"oracle: explored {report.explored} configurations")
        click.echo(f"oracle: consensus configurations {len(report.consensus_configs)}"
                   f" ({report.consensus_before_first_dup} before first duplication)")
        if report.aborted:
            click.echo("fatal: state-space budget exceeded", err=True)
            sys.exit(EXIT_INTERNAL)
        for v in report.violations:
            click.echo(f"FAIL {v}")
        if report.violations:
            sys.exit(EXIT_VIOLATION)
        click.echo("PASS all oracle properties")
        sys.exit(EXIT_OK)

    try:
        if trace_path is not None:
            trace = read_trace(trace_path, snapshots_path)
        elif config_path is not None:
            spec = parse_config(config_path)
            trace = engine.run(spec.base)
        else:
            click.echo("configuration error: give --trace or --config", err=True)
            sys.exit(EXIT_CONFIG)
    except (ConfigError, TraceParseError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DissensusError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)
    rep = verify_report(trace)
    click.echo(rep.render())
    if not rep.passed():
        first = rep.first_failure()
        click.echo(f"first failing invariant: {first.name}", err=True)
        sys.exit(EXIT_VIOLATION)
    sys.exit(EXIT_OK)


@main.command("sweep")
@click.option("--config", "config_path", required=True, help="Spec file with a [sweep] section.")
@click.option("--out", "out_dir", default=None, help="Output directory for the aggregate CSV.")
def cmd_sweep(config_path, out_dir):
    """Run every sweep cell and aggregate one CSV row per cell."""
    try:
        spec = parse_config(config_path)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    out = Path(out_dir if out_dir is not None else spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    worst = EXIT_OK
    rows = []
    for idx, labels, cfg in spec.cells():
        cfg = replace(cfg, record_ticks=False)  # sweeps keep snapshots only
        row = {
            "cell": idx,
            "seed": labels["seed"],
            "b": labels["b"],
            "dup_rule": labels["dup_rule"],
            "death_rule": labels["death_rule"],
        }
        try:
            trace = engine.run(cfg)
            n = len(trace.final_states)
            row.update(
                termination=_REASON[trace.termination],
                epochs=trace.epochs,
                first_dup_epoch=trace.first_dup_epoch if trace.first_dup_epoch is not None else "",
                final_n=n,
                final_edges=len(trace.final_edges),
                final_cycles=len(trace.final_edges) - n + 1,
                consensus_value=trace.consensus_value if trace.consensus_value is not None else "",
                shape=_shape_str(trace),
                error="",
            )
        except (DissensusError, AssertionError) as exc:
            row.update(
                termination="Error", epochs="", first_dup_epoch="", final_n="",
                final_edges="", final_cycles="", consensus_value="", shape="",
                error=str(exc),
            )
            worst = EXIT_INTERNAL
        rows.append(row)
    csv_path = out / "sweep.csv"
    fields = ["cell", "seed", "b", "dup_rule", "death_rule", "termination", "epochs",
              "first_dup_epoch", "final_n", "final_edges", "final_cycles",
              "consensus_value", "shape", "error"]
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"# dissensus-sweep v1 config={spec.base.config_hash()} tool={TOOL_VERSION}\n")
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"{len(rows)} cells -> {csv_path}")
    sys.exit(worst)


if __name__ == "__main__":
    main()
