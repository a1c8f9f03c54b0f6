"""Run the resolution, hidden-width and fuzz sweeps on one config and export the curve tables.

    python3 scripts/run_sweeps.py [--config configs/desk.json] [--out results/sweeps]
"""
import argparse
import json
import time
from pathlib import Path

from qsnoop.harness import ExperimentConfig, SWEEP_AXES, base_traces, export_report, sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/sweeps")
    ap.add_argument("--axes", default=",".join(SWEEP_AXES))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces, _, _ = base_traces(cfg)
    results = []
    for axis in args.axes.split(","):
        t0 = time.perf_counter()
        res = sweep(cfg, axis, workers=args.workers, traces=traces)
        results.append(res)
        (out / f"sweep_{axis}.json").write_text(json.dumps(res.to_dict(), indent=1, sort_keys=True) + "\n")
        print(f"{axis}: {time.perf_counter() - t0:.0f}s")
        for row in res.rows():
            print(f"  {row['value']:>6}  acc={row['accuracy']:.3f}  it90={row['iterations_to_90']}")
    export_report(results, out, cfg)


if __name__ == "__main__":
    main()
