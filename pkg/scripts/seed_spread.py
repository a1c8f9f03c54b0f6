"""Fuzz-0 desk accuracy across config seeds, with and without the per-bucket node features.

The second column trains on the three node summaries only (active, degree, total), which
isolates how much the temporal block helps or hurts at this dataset size.

    python3 scripts/seed_spread.py [--config configs/desk.json] [--seeds 0,1,2,3]
"""
import argparse

import numpy as np

from qsnoop.encoder import CircuitGraph
from qsnoop.harness import ExperimentConfig, base_traces, make_dataset, train_eval


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/desk.json")
    ap.add_argument("--seeds", default="0,1,2,3")
    args = ap.parse_args()
    base = ExperimentConfig.load(args.config)
    full, summary = [], []
    for seed in (int(s) for s in args.seeds.split(",")):
        cfg = base.with_(seed=seed)
        d = make_dataset(cfg, base_traces(cfg)[0])
        full.append(train_eval(cfg, d)[1].accuracy)
        g3 = [CircuitGraph(g.node_features[:, :3], g.edges, g.weights, g.label) for g in d.graphs]
        summary.append(train_eval(cfg, d.with_graphs(g3))[1].accuracy)
        print(f"seed {seed:>4}  full {full[-1]:.3f}  summary-only {summary[-1]:.3f}", flush=True)
    print(f"mean       full {np.mean(full):.3f}  summary-only {np.mean(summary):.3f}")


if __name__ == "__main__":
    main()
