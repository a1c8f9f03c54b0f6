import csv
import json
from pathlib import Path

import numpy as np
import pytest

from qsnoop.defenses import DefensePolicy
from qsnoop.gcn import TrainConfig
from qsnoop.harness import (
    DESK_BENCHMARKS, ExperimentConfig, HarnessError, NoRuns, StageError, SweepResult, base_traces, export_report,
    make_dataset, run_defenses, run_pipeline, sweep,
)
from qsnoop.sidechannel import ThreatModelViolation

ROOT = Path(__file__).resolve().parents[1]
TINY = ExperimentConfig(
    name="tiny", device="line(5)", benchmarks=(("ghz", 4), ("qft", 4), ("graphstate", 5), ("adder", 4)),
    split_fraction=0.75, train=TrainConfig(iterations=30, hidden=8, eval_every=5),
)


@pytest.fixture(scope="module")
def tiny_traces():
    return base_traces(TINY)[0]


# -- config


def test_config_roundtrip_and_hash():
    cfg = TINY.with_(defenses=(DefensePolicy("dummy_pairs", 2),), victim_qubits=(0, 1, 2), mode="simulated")
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    assert back.content_hash() == cfg.content_hash()
    assert len(cfg.content_hash()) == 40
    assert cfg.with_(seed=1).content_hash() != cfg.content_hash()


def test_config_files_load():
    desk = ExperimentConfig.load(ROOT / "configs" / "desk.json")
    assert desk.benchmarks == DESK_BENCHMARKS and desk.device == "guadalupe16"
    assert any(p.kind == "ensemble_remap" and p.ensemble_size == 4 for p in desk.defenses)
    sim = ExperimentConfig.load(ROOT / "configs" / "simulated_demo.json")
    assert sim.mode == "simulated" and sim.victim_qubits


def test_config_errors():
    with pytest.raises(HarnessError):
        ExperimentConfig.from_dict({"name": "x", "colour": "blue"})
    with pytest.raises(HarnessError):
        ExperimentConfig(mode="hardware")
    with pytest.raises(HarnessError):
        ExperimentConfig(mode="simulated")
    with pytest.raises(HarnessError):
        ExperimentConfig(variants="all")
    with pytest.raises(ValueError):
        ExperimentConfig(device="nowhere9")


# -- pipeline


def test_pipeline_outputs_and_byte_identical_rerun(tmp_path):
    a = run_pipeline(TINY, tmp_path / "a")
    b = run_pipeline(TINY, tmp_path / "b")
    for name in ("metrics.json", "curve.csv", "provenance.json", "dataset/manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a.model.param_bytes() == b.model.param_bytes()
    rec = json.loads((tmp_path / "a" / "metrics.json").read_text())
    assert rec["config_hash"] == TINY.content_hash()
    prov = json.loads((tmp_path / "a" / "provenance.json").read_text())
    assert set(prov["files"].values()) == {TINY.content_hash()}
    assert len(a.dataset.graphs) == 4 * 16


def test_stage_error_carries_stage_and_seed():
    bad = TINY.with_(benchmarks=[["ghz", 9]])  # does not fit on line(5)
    with pytest.raises(StageError) as e:
        run_pipeline(bad)
    assert e.value.stage == "transpile" and e.value.seed == 0
    assert "[transpile]" in str(e.value)


def test_simulated_mode_runs_and_is_reproducible():
    cfg = TINY.with_(device="lagos7", benchmarks=[["ghz", 3], ["qft", 3]], mode="simulated",
                     victim_qubits=[0, 1, 2, 3], shots=300, repetitions=1)
    t1, variants, _ = base_traces(cfg)
    t2, _, _ = base_traces(cfg)
    assert [t.to_text() for t in t1] == [t.to_text() for t in t2]
    assert all(t.provenance == "inferred" for t in t1)
    for scheds in variants.values():
        for s in scheds:
            assert {q for sg in s.cx_events() for q in sg.gate.qubits} <= {0, 1, 2, 3}


def test_threat_model_violation_is_reported():
    cfg = TINY.with_(device="lagos7", benchmarks=[["ghz", 5], ["qft", 5]], mode="simulated",
                     victim_qubits=[0, 1, 2], confine=False, shots=100, repetitions=1)
    with pytest.raises(StageError) as e:
        base_traces(cfg)
    assert e.value.stage == "simulate"
    assert isinstance(e.value.cause, ThreatModelViolation)


# -- sweeps and export


def test_sweep_validation(tiny_traces):
    with pytest.raises(HarnessError):
        sweep(TINY, "depth", [1], traces=tiny_traces)
    with pytest.raises(HarnessError):
        sweep(TINY, "resolution", [0.5], traces=tiny_traces)
    with pytest.raises(HarnessError):
        sweep(TINY, "fuzz", [0.7], traces=tiny_traces)
    with pytest.raises(NoRuns):
        sweep(TINY, "hidden", [], traces=tiny_traces)


def test_sweep_export_schema_and_idempotence(tmp_path, tiny_traces):
    res = [sweep(TINY, "fuzz", [0.0, 0.2], traces=tiny_traces),
           sweep(TINY, "resolution", [1.0, 3.0], traces=tiny_traces),
           sweep(TINY, "hidden", [4, 8], traces=tiny_traces)]
    assert all(len(r.metrics) == len(r.values) for r in res)
    paths = export_report(res, tmp_path, TINY)
    names = {p.name for p in paths}
    assert {"fig9_resolution.csv", "fig10_hidden.csv", "fig11_fuzz.csv"} <= names
    header = (tmp_path / "fig11_fuzz.csv").read_text().splitlines()[0]
    assert header == "fuzz_level,dataset,accuracy,precision,recall,seed"
    with open(tmp_path / "fig9_resolution.csv") as f:
        rows = list(csv.DictReader(f))
    assert [float(r["resolution"]) for r in rows] == [1.0, 3.0]
    assert {"iterations_to_90", "iterations_to_plateau"} <= set(rows[0])
    before = {p.name: p.read_bytes() for p in paths}
    again = export_report(res, tmp_path, TINY)
    assert {p.name: p.read_bytes() for p in again} == before
    # JSON round trip re-exports the same tables
    back = [SweepResult.from_dict(json.loads(json.dumps(r.to_dict()))) for r in res]
    export_report(back, tmp_path / "re")
    for name in ("fig9_resolution.csv", "fig10_hidden.csv", "fig11_fuzz.csv"):
        assert (tmp_path / "re" / name).read_bytes() == before[name]


def test_export_nothing_raises(tmp_path):
    with pytest.raises(NoRuns):
        export_report([], tmp_path)


def test_fuzz_points_use_distinct_datasets(tiny_traces):
    d0 = make_dataset(TINY, tiny_traces, fuzz=0.0)
    d3 = make_dataset(TINY, tiny_traces, fuzz=0.3)
    assert any(not np.array_equal(a.node_features, b.node_features) for a, b in zip(d0.graphs, d3.graphs))
    assert np.array_equal(d0.test_idx, d3.test_idx)


def test_defense_run_and_report(tmp_path):
    cfg = TINY.with_(defenses=[{"kind": "pad_retime", "budget": 0}, {"kind": "dummy_pairs", "budget": 1}])
    reports = run_defenses(cfg)
    assert reports[0].accuracy_delta == 0.0
    assert reports[1].added_cx == 2 * reports[1].n_test
    export_report(reports, tmp_path)
    lines = (tmp_path / "defense_report.csv").read_text().splitlines()
    assert lines[0].startswith("policy,undefended_accuracy,defended_accuracy,accuracy_delta")
    assert len(lines) == 3
    with pytest.raises(NoRuns):
        run_defenses(TINY)
