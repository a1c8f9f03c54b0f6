"""Command-line entry point: `qsnoop <subcommand> ...`."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmarks import FAMILIES, generate_benchmark
from .encoder import Dataset, build_dataset
from .gcn import GcnModel, evaluate, fit
from .harness import (
    SWEEP_AXES, ExperimentConfig, SweepResult, StageError, export_report, metrics_record, run_defenses,
    run_pipeline, sweep, write_provenance,
)
from .qasm import emit_qasm, parse_qasm
from .traces import CnotTrace, fuzz_trace, oracle_trace
from .transpiler import (
    LAYOUT_METHODS, OPT_LEVELS, ROUTING_METHODS, SCHEDULE_METHODS, TimedSchedule, build_coupling_map, transpile,
    transpile_variants,
)


def _config(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config) if args.config else ExperimentConfig()


def _emit(obj):
    print(json.dumps(obj, indent=1, sort_keys=True))


def cmd_gen(args):
    c = generate_benchmark(args.family, args.qubits, args.seed, native=not args.logical)
    text = emit_qasm(c)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_transpile(args):
    c = parse_qasm(Path(args.qasm).read_text())
    cmap = build_coupling_map(args.device)
    out = Path(args.out)
    if args.variants:
        out.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(transpile_variants(c, cmap, args.seed)):
            (out / f"variant{i:02d}_{s.provenance.layout}_{s.provenance.routing}.sched").write_text(s.to_text())
        return
    s = transpile(c, cmap, args.layout, args.routing, args.opt, args.scheduling, args.seed)
    out.write_text(s.to_text())


def cmd_trace(args):
    s = TimedSchedule.from_text(Path(args.schedule).read_text())
    t = oracle_trace(s, args.bucket or s.durations.cx, args.label)
    t = fuzz_trace(t, args.fuzz, args.seed)
    Path(args.out).write_text(t.to_text()) if args.out else sys.stdout.write(t.to_text())


def cmd_encode(args):
    traces = [CnotTrace.from_text(Path(p).read_text()) for p in args.traces]
    d = build_dataset(traces, args.resolution, args.split, args.seed)
    d.save(args.out)
    _emit({"graphs": len(d.graphs), "classes": d.class_names, "features": d.n_features})


def cmd_train(args):
    cfg = _config(args)
    d = Dataset.load(args.dataset)
    model, met = fit(d, cfg.train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.npz")
    (out / "curve.csv").write_text(met.curve_table())
    (out / "metrics.json").write_text(json.dumps(metrics_record(met), indent=1, sort_keys=True) + "\n")
    write_provenance(out, cfg, ["model.npz", "curve.csv", "metrics.json"])
    _emit(metrics_record(met))


def cmd_eval(args):
    d = Dataset.load(args.dataset)
    _emit(metrics_record(evaluate(GcnModel.load(args.model), d)))


def cmd_attack(args):
    res = run_pipeline(_config(args), args.out)
    _emit(dict(metrics_record(res.metrics), config_hash=res.config_hash))


def cmd_sweep(args):
    cfg = _config(args)
    values = [float(v) if args.axis != "hidden" else int(v) for v in args.values.split(",")] if args.values else None
    res = sweep(cfg, args.axis, values, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep_{args.axis}.json").write_text(json.dumps(res.to_dict(), indent=1, sort_keys=True) + "\n")
    export_report([res], out, cfg)
    _emit([{k: r[k] for k in ("value", "accuracy", "iterations_to_90")} for r in res.rows()])


def cmd_defend(args):
    cfg = _config(args)
    reports = run_defenses(cfg)
    export_report(reports, args.out, cfg)
    _emit([r.row() for r in reports])


def cmd_report(args):
    src = Path(args.results)
    sweeps = [SweepResult.from_dict(json.loads(p.read_text())) for p in sorted(src.glob("sweep_*.json"))]
    paths = export_report(sweeps, args.out or src)
    _emit([str(p) for p in paths])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsnoop", description="Crosstalk side-channel attack lab.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="emit a benchmark circuit as OpenQASM 2.0")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("qubits", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--logical", action="store_true", help="keep h/cp/ccx instead of lowering to native gates")
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("transpile", help="transpile a QASM file to a timed schedule")
    t.add_argument("qasm")
    t.add_argument("--device", default="guadalupe16")
    t.add_argument("--layout", choices=LAYOUT_METHODS, default="sabre")
    t.add_argument("--routing", choices=ROUTING_METHODS, default="sabre")
    t.add_argument("--opt", choices=OPT_LEVELS, default="O3lite")
    t.add_argument("--scheduling", choices=SCHEDULE_METHODS, default="alap")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--variants", action="store_true", help="write all 16 variants into the --out directory")
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_transpile)

    tr = sub.add_parser("trace", help="exact (optionally fuzzed) CX trace of a schedule")
    tr.add_argument("schedule")
    tr.add_argument("--bucket", type=int, help="bucket duration in dt (default: one CX)")
    tr.add_argument("--label")
    tr.add_argument("--fuzz", type=float, default=0.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out")
    tr.set_defaults(fn=cmd_trace)

    e = sub.add_parser("encode", help="encode labelled traces into a graph dataset")
    e.add_argument("traces", nargs="+")
    e.add_argument("--resolution", type=float, default=1.0)
    e.add_argument("--split", type=float, default=0.8)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_encode)

    tn = sub.add_parser("train", help="train the GCN on a saved dataset")
    tn.add_argument("dataset")
    tn.add_argument("--config")
    tn.add_argument("--out", required=True)
    tn.set_defaults(fn=cmd_train)

    ev = sub.add_parser("eval", help="score a checkpoint on a dataset's test split")
    ev.add_argument("dataset")
    ev.add_argument("model")
    ev.set_defaults(fn=cmd_eval)

    a = sub.add_parser("attack", help="run the end-to-end pipeline from a config")
    a.add_argument("--config")
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_attack)

    s = sub.add_parser("sweep", help="sweep one axis and export its curve tables")
    s.add_argument("axis", choices=SWEEP_AXES)
    s.add_argument("--config")
    s.add_argument("--values", help="comma-separated axis values (default: full documented range)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_sweep)

    d = sub.add_parser("defend", help="evaluate the config's defense policies")
    d.add_argument("--config")
    d.add_argument("--out", required=True)
    d.set_defaults(fn=cmd_defend)

    r = sub.add_parser("report", help="re-export CSV tables from saved sweep results")
    r.add_argument("results")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except StageError as e:
        print(f"qsnoop {args.command}: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"qsnoop {args.command}: [{args.command}] {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
