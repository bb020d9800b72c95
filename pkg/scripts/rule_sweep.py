#!/usr/bin/env python3
"""Sweep every rule set over a seed range and summarize the outcomes.

Writes out/sweep/sweep.csv (one row per cell) via the CLI sweep command
and prints a termination-by-rule-set table.
"""
import argparse
import csv
import subprocess
import sys
from collections import Counter
from pathlib import Path

SPEC = """\
[run]
b = {b}
states = {states}
edges = {edges}
scheduler = random
max_ticks = {max_ticks}

[output]
dir = {out}

[sweep]
seeds = 0..{last_seed}
rule_sets = partition+star, partition+clique, full+star, full+clique
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10, help="number of seeds per rule set")
    ap.add_argument("--max-ticks", type=int, default=20_000)
    ap.add_argument("--out", type=Path, default=Path("out/sweep"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    spec_path = args.out / "sweep.ini"
    spec_path.write_text(SPEC.format(
        b=6,
        states="1:3 2:5 3:4 4:2 5:4",
        edges="1-2 2-3 3-4 4-5 1-5 2-5",
        max_ticks=args.max_ticks,
        out=args.out,
        last_seed=args.seeds - 1,
    ))
    subprocess.run([sys.executable, "-m", "dissensus.cli", "sweep",
                    "--config", str(spec_path)], check=True)

    by_rules = Counter()
    with open(args.out / "sweep.csv") as fh:
        next(fh)  # provenance comment
        for row in csv.DictReader(fh):
            by_rules[(row["dup_rule"], row["death_rule"], row["termination"])] += 1
    print(f"{'dup_rule':<10} {'death_rule':<10} {'termination':<12} runs")
    for (dup, death, term), n in sorted(by_rules.items()):
        print(f"{dup:<10} {death:<10} {term:<12} {n}")


if __name__ == "__main__":
    main()
