"""End-to-end attack pipeline, parameter sweeps, and report export."""
from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .benchmarks import generate_benchmark
from .circuit import Circuit, Gate
from .defenses import DefensePolicy, DefenseReport, evaluate_defense
from .encoder import Dataset, build_dataset
from .gcn import GcnModel, Metrics, TrainConfig, fit, iterations_to_fraction, iterations_to_plateau
from .inference import calibrate, estimate_trace, hash_seed
from .sidechannel import CgdConfig, default_model, partition_tenants, simulate_cgd
from .traces import CnotTrace, fuzz_trace, oracle_trace
from .transpiler import CouplingMap, ScheduledGate, TimedSchedule, build_coupling_map, transpile_variants

MODES = ("oracle", "simulated")
SWEEP_AXES = ("resolution", "hidden", "fuzz")
DEFAULT_SWEEP_VALUES = {
    "resolution": [float(r) for r in range(1, 16)],
    "hidden": [8, 16, 32, 64],
    "fuzz": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
}
# ten (family, qubits) classes at 8-12 qubits
DESK_BENCHMARKS = (
    ("ghz", 8), ("dj", 9), ("graphstate", 10), ("qft", 8), ("adder", 10),
    ("twolocal", 8), ("qpe", 9), ("random", 12), ("qft", 12), ("ghz", 12),
)


class HarnessError(ValueError):
    pass


class NoRuns(HarnessError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; `cause` holds the original exception."""

    def __init__(self, stage: str, seed: int, cause: BaseException):
        super().__init__(f"[{stage}] seed={seed}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.seed = seed
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "desk10x16"
    device: str = "guadalupe16"
    benchmarks: tuple[tuple[str, int], ...] = DESK_BENCHMARKS
    variants: str = "cross16"
    mode: str = "oracle"
    resolution: float = 1.0
    fuzz: float = 0.0
    fuzz_levels: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    split_fraction: float = 0.8
    train: TrainConfig = TrainConfig()
    # simulated mode
    victim_qubits: tuple[int, ...] | None = None
    snoop_qubits: tuple[int, ...] | None = None
    confine: bool = True
    crosstalk: dict = field(default_factory=dict)
    shots: int = 2000
    repetitions: int = 3
    dd_enabled: bool = False
    defenses: tuple[DefensePolicy, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise HarnessError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.variants != "cross16":
            raise HarnessError("only the 'cross16' variant policy is available")
        if not self.benchmarks:
            raise HarnessError("no benchmarks configured")
        if self.mode == "simulated" and not self.victim_qubits:
            raise HarnessError("simulated mode needs victim_qubits")
        build_coupling_map(self.device)

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["benchmarks"] = [list(b) for b in self.benchmarks]
        d["fuzz_levels"] = list(self.fuzz_levels)
        d["train"] = asdict(self.train)
        d["defenses"] = [asdict(p) for p in self.defenses]
        for k in ("victim_qubits", "snoop_qubits"):
            d[k] = list(d[k]) if d[k] is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise HarnessError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        if "benchmarks" in d:
            d["benchmarks"] = tuple((str(f), int(n)) for f, n in d["benchmarks"])
        if "fuzz_levels" in d:
            d["fuzz_levels"] = tuple(float(x) for x in d["fuzz_levels"])
        if "train" in d and not isinstance(d["train"], TrainConfig):
            d["train"] = TrainConfig(**d["train"])
        if "defenses" in d:
            d["defenses"] = tuple(p if isinstance(p, DefensePolicy) else DefensePolicy(**p) for p in d["defenses"])
        for k in ("victim_qubits", "snoop_qubits"):
            if d.get(k) is not None:
                d[k] = tuple(int(q) for q in d[k])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        """Git blob hash of the canonical JSON."""
        body = self.canonical_json().encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()

    def with_(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)

    def class_names(self) -> list[str]:
        return [f"{f}_n{n}" for f, n in self.benchmarks]


# ---------------------------------------------------------------------------
# stages


def _stage(name: str, seed: int):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if ev is not None and not isinstance(ev, StageError) and isinstance(ev, Exception):
                raise StageError(name, seed, ev) from ev
            return False
    return _Ctx()


def generate_circuits(cfg: ExperimentConfig) -> list[tuple[str, Circuit]]:
    with _stage("gen", cfg.seed):
        return [(lab, generate_benchmark(f, n, seed=hash_seed(cfg.seed, i) % 2**31))
                for i, ((f, n), lab) in enumerate(zip(cfg.benchmarks, cfg.class_names()))]


def relabel_schedule(s: TimedSchedule, old: Sequence[int], cmap: CouplingMap) -> TimedSchedule:
    """Move a schedule built on a sub-map (qubit i = old[i]) onto the full device."""
    gates = tuple(ScheduledGate(Gate(sg.gate.kind, tuple(old[q] for q in sg.gate.qubits), sg.gate.param),
                                sg.start, sg.duration) for sg in s.gates)
    perm = list(range(cmap.n_physical))
    for i, p in enumerate(s.permutation):
        perm[old[i]] = old[p]
    return TimedSchedule(cmap, gates, s.total_duration, s.provenance, s.durations,
                         tuple(old[q] for q in s.layout), tuple(perm), s.name, s.family, dict(s.meta))


def transpile_all(cfg: ExperimentConfig, circuits) -> dict[str, list[TimedSchedule]]:
    cmap = build_coupling_map(cfg.device)
    out = {}
    with _stage("transpile", cfg.seed):
        for i, (lab, c) in enumerate(circuits):
            seed = hash_seed(cfg.seed, i, 1) % 2**31
            if cfg.mode == "simulated" and cfg.confine:
                sub, old = cmap.subgraph(cfg.victim_qubits)
                out[lab] = [relabel_schedule(s, old, cmap) for s in transpile_variants(c, sub, seed)]
            else:
                out[lab] = transpile_variants(c, cmap, seed)
    return out


def oracle_traces(cfg: ExperimentConfig, variants: dict[str, list[TimedSchedule]]) -> list[CnotTrace]:
    with _stage("trace", cfg.seed):
        return [oracle_trace(s, s.durations.cx, lab) for lab in cfg.class_names() for s in variants[lab]]


def simulated_traces(cfg: ExperimentConfig, variants: dict[str, list[TimedSchedule]]) -> list[CnotTrace]:
    """Run the snoop protocol against every schedule and infer CX traces from zero counts."""
    cmap = build_coupling_map(cfg.device)
    with _stage("partition", cfg.seed):
        part = partition_tenants(cmap, cfg.victim_qubits, cfg.snoop_qubits)
        model = default_model(part, **cfg.crosstalk)
    cx = next(iter(variants.values()))[0].durations.cx
    with _stage("calibrate", cfg.seed):
        cal = calibrate(part, model, CgdConfig(cfg.shots, cx, cfg.repetitions, cfg.dd_enabled, cfg.seed), max_k=1,
                        cx_duration=cx)
    out = []
    idx = 0
    for lab in cfg.class_names():
        for s in variants[lab]:
            seed = hash_seed(cfg.seed, idx, 2)
            with _stage("simulate", seed):
                zc = simulate_cgd(s, part, model, CgdConfig(cfg.shots, cx, cfg.repetitions, cfg.dd_enabled, seed))
            with _stage("infer", seed):
                out.append(estimate_trace(zc, cal, part, cx, lab))
            idx += 1
    return out


def apply_fuzz(cfg: ExperimentConfig, traces: Sequence[CnotTrace], level: float) -> list[CnotTrace]:
    with _stage("fuzz", cfg.seed):
        return [fuzz_trace(t, level, hash_seed(cfg.seed, i, 3)) for i, t in enumerate(traces)]


def base_traces(cfg: ExperimentConfig) -> tuple[list[CnotTrace], dict[str, list[TimedSchedule]], list]:
    circuits = generate_circuits(cfg)
    variants = transpile_all(cfg, circuits)
    traces = oracle_traces(cfg, variants) if cfg.mode == "oracle" else simulated_traces(cfg, variants)
    return traces, variants, circuits


def make_dataset(cfg: ExperimentConfig, traces: Sequence[CnotTrace], resolution: float | None = None,
                 fuzz: float | None = None) -> Dataset:
    traces = apply_fuzz(cfg, traces, cfg.fuzz if fuzz is None else fuzz)
    with _stage("encode", cfg.seed):
        d = build_dataset(traces, cfg.resolution if resolution is None else resolution, cfg.split_fraction,
                          cfg.seed, class_names=cfg.class_names())
    d.meta.update(mode=cfg.mode, config_hash=cfg.content_hash())
    return d


def train_eval(cfg: ExperimentConfig, d: Dataset, train: TrainConfig | None = None) -> tuple[GcnModel, Metrics]:
    with _stage("train", cfg.seed):
        return fit(d, train or cfg.train)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineResult:
    metrics: Metrics
    dataset: Dataset
    model: GcnModel
    config_hash: str
    outputs: dict = field(default_factory=dict)


def metrics_record(m: Metrics) -> dict:
    return {
        "accuracy": m.accuracy, "precision": m.precision, "recall": m.recall,
        "confusion": m.confusion.tolist(),
        "iterations_to_90": iterations_to_fraction(m.iterations, m.test_acc_curve) if m.iterations else None,
        "iterations_to_plateau": iterations_to_plateau(m.iterations, m.train_acc_curve) if m.iterations else None,
        "final_loss": m.loss_curve[-1] if m.loss_curve else None,
    }


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_provenance(out: Path, cfg: ExperimentConfig, files: Sequence[str]):
    prov_path = out / "provenance.json"
    prov = json.loads(prov_path.read_text()) if prov_path.exists() else {"files": {}}
    prov["config_hash"] = cfg.content_hash()
    prov["config"] = cfg.to_dict()
    for f in files:
        prov["files"][f] = cfg.content_hash()
    _write_json(prov_path, prov)


def run_pipeline(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> PipelineResult:
    """circuits -> 16 variants each -> traces -> graphs -> GCN -> test metrics."""
    traces, _, _ = base_traces(cfg)
    d = make_dataset(cfg, traces)
    model, met = train_eval(cfg, d)
    res = PipelineResult(met, d, model, cfg.content_hash())
    if out_dir is not None:
        out = Path(out_dir)
        with _stage("write", cfg.seed):
            out.mkdir(parents=True, exist_ok=True)
            d.save(out / "dataset")
            model.save(out / "model.npz")
            rec = dict(metrics_record(met), config_hash=cfg.content_hash(), mode=cfg.mode, name=cfg.name)
            _write_json(out / "metrics.json", rec)
            (out / "curve.csv").write_text(met.curve_table())
            write_provenance(out, cfg, ["metrics.json", "curve.csv", "model.npz", "dataset"])
        res.outputs = {"dir": str(out)}
    return res


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    axis: str
    values: list
    metrics: list[Metrics]
    runtimes: list[float]
    dataset: str
    seed: int
    config_hash: str

    def rows(self) -> list[dict]:
        return [dict(value=v, **metrics_record(m)) for v, m in zip(self.values, self.metrics)]

    def to_dict(self) -> dict:
        return {
            "axis": self.axis, "dataset": self.dataset, "seed": self.seed, "config_hash": self.config_hash,
            "points": [dict(r, curve={"iterations": m.iterations, "loss": m.loss_curve,
                                      "train_acc": m.train_acc_curve, "test_acc": m.test_acc_curve})
                       for r, m in zip(self.rows(), self.metrics)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        mets = []
        for p in d["points"]:
            m = Metrics(p["accuracy"], p["precision"], p["recall"], np.array(p["confusion"]))
            c = p["curve"]
            m.iterations, m.loss_curve, m.train_acc_curve, m.test_acc_curve = (
                c["iterations"], c["loss"], c["train_acc"], c["test_acc"])
            mets.append(m)
        return cls(d["axis"], [p["value"] for p in d["points"]], mets, [0.0] * len(mets), d["dataset"], d["seed"],
                   d["config_hash"])


def _point(args):
    cfg, d, train = args
    t0 = time.perf_counter()
    _, m = train_eval(cfg, d, train)
    return m, time.perf_counter() - t0


def sweep(cfg: ExperimentConfig, axis: str, values: Sequence | None = None, workers: int = 1,
          traces: Sequence[CnotTrace] | None = None) -> SweepResult:
    """One training run per axis value; traces are shared across points."""
    if axis not in SWEEP_AXES:
        raise HarnessError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    values = list(DEFAULT_SWEEP_VALUES[axis] if values is None else values)
    if not values:
        raise NoRuns("empty sweep")
    lo, hi = {"resolution": (1, 15), "hidden": (1, 4096), "fuzz": (0.0, 0.5)}[axis]
    if any(not lo <= v <= hi for v in values):
        raise HarnessError(f"{axis} values {values} outside [{lo}, {hi}]")
    if traces is None:
        traces, _, _ = base_traces(cfg)
    jobs = []
    for v in values:
        if axis == "resolution":
            jobs.append((cfg, make_dataset(cfg, traces, resolution=float(v)), cfg.train))
        elif axis == "fuzz":
            jobs.append((cfg, make_dataset(cfg, traces, fuzz=float(v)), cfg.train))
        else:
            d = jobs[0][1] if jobs else make_dataset(cfg, traces)
            jobs.append((cfg, d, TrainConfig(**dict(asdict(cfg.train), hidden=int(v)))))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_point, jobs))
    else:
        results = [_point(j) for j in jobs]
    return SweepResult(axis, values, [r[0] for r in results], [r[1] for r in results], cfg.name, cfg.seed,
                       cfg.content_hash())


def run_defenses(cfg: ExperimentConfig, policies: Sequence[DefensePolicy] | None = None) -> list[DefenseReport]:
    policies = list(cfg.defenses if policies is None else policies)
    if not policies:
        raise NoRuns("no defense policies configured")
    circuits = generate_circuits(cfg)
    variants = transpile_all(cfg, circuits)
    cmap = build_coupling_map(cfg.device)
    out = []
    for p in policies:
        with _stage(f"defend:{p.label()}", cfg.seed):
            out.append(evaluate_defense(circuits, cmap, p, cfg.train, cfg.resolution, cfg.split_fraction,
                                        cfg.seed, variants))
    return out


# ---------------------------------------------------------------------------
# export

FIG_FILES = {"resolution": "fig9_resolution.csv", "hidden": "fig10_hidden.csv", "fuzz": "fig11_fuzz.csv"}
FIG_KEYS = {"resolution": "resolution", "hidden": "hidden", "fuzz": "fuzz_level"}
DEFENSE_COLUMNS = ["policy", "undefended_accuracy", "defended_accuracy", "accuracy_delta",
                   "added_single_qubit", "added_cx", "makespan_delta", "n_test"]


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def export_report(results: Sequence[SweepResult | DefenseReport], out_dir: str | Path,
                  cfg: ExperimentConfig | None = None) -> list[Path]:
    """One CSV per figure analog (plus per-iteration curves) and defense_report.csv."""
    results = list(results)
    if not results:
        raise NoRuns("nothing to export")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise HarnessError(f"cannot create {out}: {e}") from e
    written = []

    def write(name, header, rows):
        path = out / name
        try:
            with open(path, "w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(header)
                for r in rows:
                    w.writerow([_fmt(x) for x in r])
        except OSError as e:
            raise HarnessError(f"cannot write {path}: {e}") from e
        written.append(path)

    sweeps = [r for r in results if isinstance(r, SweepResult)]
    defenses = [r for r in results if isinstance(r, DefenseReport)]
    for axis in SWEEP_AXES:
        group = [s for s in sweeps if s.axis == axis]
        if not group:
            continue
        key = FIG_KEYS[axis]
        rows, curves = [], []
        for s in group:
            for v, m in zip(s.values, s.metrics):
                if axis == "fuzz":
                    rows.append([v, s.dataset, m.accuracy, m.precision, m.recall, s.seed])
                else:
                    it90 = iterations_to_fraction(m.iterations, m.test_acc_curve)
                    plateau = iterations_to_plateau(m.iterations, m.train_acc_curve)
                    rows.append([v, s.dataset, m.accuracy, m.precision, m.recall, it90, plateau,
                                 m.loss_curve[-1], s.seed])
                for it, lo, tr, te in zip(m.iterations, m.loss_curve, m.train_acc_curve, m.test_acc_curve):
                    curves.append([v, s.dataset, it, lo, tr, te, s.seed])
        if axis == "fuzz":
            header = ["fuzz_level", "dataset", "accuracy", "precision", "recall", "seed"]
        else:
            header = [key, "dataset", "accuracy", "precision", "recall", "iterations_to_90", "iterations_to_plateau",
                      "final_loss", "seed"]
        write(FIG_FILES[axis], header, rows)
        write(FIG_FILES[axis].replace(".csv", "_curves.csv"),
              [key, "dataset", "iteration", "loss", "train_acc", "test_acc", "seed"], curves)
    if defenses:
        write("defense_report.csv", DEFENSE_COLUMNS, [[r.row()[c] for c in DEFENSE_COLUMNS] for r in defenses])
    if cfg is not None:
        write_provenance(out, cfg, [p.name for p in written])
    return written
