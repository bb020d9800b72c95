"""Experiment configuration files: flat INI-style sections, fully validated.

A spec file has a [run] section mirroring RunConfig, an optional [output]
section, and an optional [sweep] section whose axes (seeds, B values, rule
sets) expand into a grid of runs. Every expanded cell is validated at parse
time; errors name the offending key.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .engine import RunConfig
from .errors import ConfigError
from .graph import Edge

RUN_KEYS = {
    "b", "states", "edges", "delta", "scheduler", "death_rule", "jstar",
    "dup_rule", "split", "seed", "max_ticks", "max_epochs", "periodicity",
    "record_ticks", "record_snapshots",
}
OUTPUT_KEYS = {"dir", "emit"}
SWEEP_KEYS = {"seeds", "b_values", "rule_sets"}
EMIT_FLAGS = {"trace", "snapshots", "frames", "report"}


@dataclass
class ExperimentSpec:
    """A base run plus optional output settings and sweep axes."""

    base: RunConfig
    out_dir: str = "out"
    emit: frozenset[str] = frozenset({"trace", "report"})
    sweep_seeds: list[int] | None = None
    sweep_b: list[int] | None = None
    sweep_rules: list[tuple[str, str]] | None = None  # (dup_rule, death_rule)
    source: str | None = None

    def has_sweep(self) -> bool:
        return any(ax is not None for ax in (self.sweep_seeds, self.sweep_b, self.sweep_rules))

    def cells(self) -> list[tuple[int, dict, RunConfig]]:
        """Expand the sweep grid into (index, axis labels, RunConfig) cells."""
        seeds = self.sweep_seeds if self.sweep_seeds is not None else [self.base.seed]
        bs = self.sweep_b if self.sweep_b is not None else [self.base.b]
        rules = self.sweep_rules if self.sweep_rules is not None else [
            (self.base.dup_rule, self.base.death_rule)
        ]
        out = []
        idx = 0
        for dup_rule, death_rule in rules:
            for b in bs:
                for seed in seeds:
                    cfg = RunConfig(
                        b=b,
                        states=dict(self.base.states),
                        edges=list(self.base.edges),
                        delta=self.base.delta,
                        scheduler=self.base.scheduler,
                        script=self.base.script,
                        death_rule=death_rule,
                        jstar=self.base.jstar,
                        dup_rule=dup_rule,
                        split=self.base.split,
                        seed=seed,
                        max_ticks=self.base.max_ticks,
                        max_epochs=self.base.max_epochs,
                        detect_periodicity=self.base.detect_periodicity,
                        record_ticks=self.base.record_ticks,
                        record_snapshots=self.base.record_snapshots,
                    )
                    labels = {"seed": seed, "b": b, "dup_rule": dup_rule, "death_rule": death_rule}
                    out.append((idx, labels, cfg))
                    idx += 1
        return out


def _parse_states(raw: str, key: str) -> dict[int, int]:
    states = {}
    for tok in raw.replace(",", " ").split():
        try:
            i, v = tok.split(":")
            states[int(i)] = int(v)
        except ValueError:
            raise ConfigError(f"{key}: malformed state token {tok!r} (want id:value)")
    if not states:
        raise ConfigError(f"{key}: no states given")
    return states


def _parse_edges(raw: str, key: str) -> list[Edge]:
    edges = []
    for tok in raw.replace(",", " ").split():
        try:
            u, v = tok.split("-")
            edges.append((int(u), int(v)))
        except ValueError:
            raise ConfigError(f"{key}: malformed edge token {tok!r} (want u-v)")
    return edges


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}")


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_int_list(raw: str, key: str) -> list[int]:
    """Comma list of integers; 'a..b' expands to the inclusive range."""
    out = []
    for tok in raw.replace(",", " ").split():
        if ".." in tok:
            lo, hi = tok.split("..")
            out.extend(range(_parse_int(lo, key), _parse_int(hi, key) + 1))
        else:
            out.append(_parse_int(tok, key))
    if not out:
        raise ConfigError(f"{key}: empty list")
    return out


def parse_config(path: str | Path) -> ExperimentSpec:
    """Read and fully validate an experiment spec file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    for section in parser.sections():
        if section not in ("run", "output", "sweep"):
            raise ConfigError(f"unknown section [{section}]")
    if "run" not in parser:
        raise ConfigError("missing required section [run]")

    run = parser["run"]
    for key in run:
        if key not in RUN_KEYS:
            raise ConfigError(f"run.{key}: unknown key")
    if "b" not in run or "states" not in run:
        raise ConfigError("run.b and run.states are required")

    split_raw = run.get("split", "half")
    split: str | int = "half" if split_raw == "half" else _parse_int(split_raw, "run.split")
    max_epochs_raw = run.get("max_epochs", "").strip()
    cfg = RunConfig(
        b=_parse_int(run["b"], "run.b"),
        states=_parse_states(run["states"], "run.states"),
        edges=_parse_edges(run.get("edges", ""), "run.edges"),
        delta=run.get("delta", "unit"),
        scheduler=run.get("scheduler", "round_robin"),
        death_rule=run.get("death_rule", "star"),
        jstar=run.get("jstar", "max_state"),
        dup_rule=run.get("dup_rule", "partition"),
        split=split,
        seed=_parse_int(run.get("seed", "0"), "run.seed"),
        max_ticks=_parse_int(run.get("max_ticks", "1000000"), "run.max_ticks"),
        max_epochs=_parse_int(max_epochs_raw, "run.max_epochs") if max_epochs_raw else None,
        detect_periodicity=_parse_bool(run.get("periodicity", "false"), "run.periodicity"),
        record_ticks=_parse_bool(run.get("record_ticks", "true"), "run.record_ticks"),
        record_snapshots=_parse_bool(run.get("record_snapshots", "true"), "run.record_snapshots"),
    )

    out_dir = "out"
    emit = frozenset({"trace", "report"})
    if "output" in parser:
        sec = parser["output"]
        for key in sec:
            if key not in OUTPUT_KEYS:
                raise ConfigError(f"output.{key}: unknown key")
        out_dir = sec.get("dir", out_dir)
        if "emit" in sec:
            flags = {t for t in sec["emit"].replace(",", " ").split()}
            bad = flags - EMIT_FLAGS
            if bad:
                raise ConfigError(f"output.emit: unknown flags {sorted(bad)}")
            emit = frozenset(flags)

    sweep_seeds = sweep_b = sweep_rules = None
    if "sweep" in parser:
        sec = parser["sweep"]
        for key in sec:
            if key not in SWEEP_KEYS:
                raise ConfigError(f"sweep.{key}: unknown key")
        if "seeds" in sec:
            sweep_seeds = _parse_int_list(sec["seeds"], "sweep.seeds")
        if "b_values" in sec:
            sweep_b = _parse_int_list(sec["b_values"], "sweep.b_values")
        if "rule_sets" in sec:
            sweep_rules = []
            for tok in sec["rule_sets"].split(","):
                tok = tok.strip()
                if not tok:
                    continue
                try:
                    dup_rule, death_rule = tok.split("+")
                except ValueError:
                    raise ConfigError(f"sweep.rule_sets: malformed entry {tok!r} (want dup+death)")
                sweep_rules.append((dup_rule.strip(), death_rule.strip()))
            if not sweep_rules:
                raise ConfigError("sweep.rule_sets: empty list")

    spec = ExperimentSpec(
        base=cfg,
        out_dir=out_dir,
        emit=emit,
        sweep_seeds=sweep_seeds,
        sweep_b=sweep_b,
        sweep_rules=sweep_rules,
        source=str(path),
    )
    # validate the base and every sweep cell up front
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"run: {exc}")
    for idx, labels, cell in spec.cells():
        try:
            cell.validate()
        except ConfigError as exc:
            raise ConfigError(f"sweep cell {idx} ({labels}): {exc}")
    return spec
