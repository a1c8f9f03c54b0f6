"""Zero count vs concurrent CX count per snoop qubit on lagos7 (victim qubits 0-2).

Bucket k of the probe schedule holds k back-to-back CX on one victim edge; the script prints
the mean zero count per bucket and the Pearson r of every snoop qubit.

    python3 scripts/correlation_demo.py [--edge 0,1] [--shots 10000] [--dd]
"""
import argparse

from qsnoop.sidechannel import (
    CgdConfig, correlation_report, cx_count_sweep, default_model, partition_tenants, simulate_cgd,
)
from qsnoop.traces import oracle_trace
from qsnoop.transpiler import build_coupling_map


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--edge", default="0,1")
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--max-k", type=int, default=8)
    ap.add_argument("--dd", action="store_true")
    args = ap.parse_args()
    part = partition_tenants(build_coupling_map("lagos7"), {0, 1, 2})
    model = default_model(part)
    edge = tuple(int(q) for q in args.edge.split(","))
    s, w = cx_count_sweep(part, edge, args.max_k)
    zt = simulate_cgd(s, part, model, CgdConfig(args.shots, w, dd_enabled=args.dd))
    r = correlation_report(zt, oracle_trace(s, w), pool="repetition")
    print("snoop  class        r      " + " ".join(f"k={k:<5}" for k in range(zt.n_buckets)))
    for i, q in enumerate(zt.snoop_qubits):
        print(f"{q:>5}  {model.sensitivity[q]:<11} {r[q]:+.3f}  " + " ".join(f"{v:7.0f}" for v in zt.zero_mean[i]))


if __name__ == "__main__":
    main()
