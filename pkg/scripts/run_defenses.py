"""Evaluate the configured defense policies against the trained attack and write defense_report.csv.

    python3 scripts/run_defenses.py [--config configs/desk.json] [--out results/defenses]
"""
import argparse
from pathlib import Path

from qsnoop.harness import ExperimentConfig, export_report, run_defenses


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/desk.json")
    ap.add_argument("--out", default="results/defenses")
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    reports = run_defenses(cfg)
    export_report(reports, Path(args.out), cfg)
    for r in reports:
        print(f"{r.policy:<22} acc {r.undefended_accuracy:.3f} -> {r.defended_accuracy:.3f}  "
              f"+cx {r.added_cx:<4} +1q {r.added_single_qubit:<5} makespan +{r.makespan_delta} dt")


if __name__ == "__main__":
    main()
