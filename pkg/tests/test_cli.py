import json

import pytest

from qsnoop.cli import main
from qsnoop.gcn import TrainConfig
from qsnoop.harness import ExperimentConfig
from qsnoop.qasm import parse_qasm

TINY = ExperimentConfig(
    name="tiny", device="line(5)", benchmarks=(("ghz", 4), ("qft", 4), ("graphstate", 5)),
    split_fraction=0.75, train=TrainConfig(iterations=20, hidden=8, eval_every=5),
)


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY.to_dict()))
    return p


def test_gen_emits_qasm(capsys):
    assert main(["gen", "ghz", "4"]) == 0
    c = parse_qasm(capsys.readouterr().out)
    assert c.n_qubits == 4 and c.count("cx") == 3


def test_stepwise_chain(tmp_path, capsys, cfg_path):
    traces = []
    for fam in ("ghz", "qft"):
        q = tmp_path / f"{fam}.qasm"
        assert main(["gen", fam, "4", "--out", str(q)]) == 0
        vdir = tmp_path / f"{fam}_variants"
        assert main(["transpile", str(q), "--device", "line(5)", "--variants", "--out", str(vdir)]) == 0
        scheds = sorted(vdir.glob("*.sched"))
        assert len(scheds) == 16
        for s in scheds[:4]:
            t = tmp_path / f"{s.stem}_{fam}.trace"
            assert main(["trace", str(s), "--label", fam, "--out", str(t)]) == 0
            traces.append(str(t))
    ds = tmp_path / "ds"
    assert main(["encode", *traces, "--split", "0.5", "--out", str(ds)]) == 0
    capsys.readouterr()
    assert main(["train", str(ds), "--config", str(cfg_path), "--out", str(tmp_path / "run")]) == 0
    trained = json.loads(capsys.readouterr().out)
    assert main(["eval", str(ds), str(tmp_path / "run" / "model.npz")]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] == trained["accuracy"]
    assert (tmp_path / "run" / "provenance.json").exists()


def test_single_transpile_and_fuzzed_trace(tmp_path, capsys):
    q = tmp_path / "c.qasm"
    main(["gen", "adder", "4", "--out", str(q)])
    s = tmp_path / "c.sched"
    assert main(["transpile", str(q), "--device", "line(5)", "--layout", "dense", "--routing", "basic",
                 "--scheduling", "asap", "--out", str(s)]) == 0
    assert main(["trace", str(s), "--bucket", "360", "--fuzz", "0.2", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "# bucket_duration=360" in out and ",fuzzed" in out


def test_attack_sweep_report_defend(tmp_path, capsys, cfg_path):
    assert main(["attack", "--config", str(cfg_path), "--out", str(tmp_path / "atk")]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["config_hash"] == TINY.content_hash()
    assert main(["sweep", "fuzz", "--config", str(cfg_path), "--values", "0,0.3", "--out", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "fig11_fuzz.csv").exists()
    (tmp_path / "sw" / "fig11_fuzz.csv").unlink()
    assert main(["report", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "fig11_fuzz.csv").exists()
    d = TINY.with_(defenses=[{"kind": "dummy_pairs", "budget": 1}])
    p = tmp_path / "def.json"
    p.write_text(json.dumps(d.to_dict()))
    assert main(["defend", "--config", str(p), "--out", str(tmp_path / "def")]) == 0
    assert (tmp_path / "def" / "defense_report.csv").exists()


def test_error_exit_codes(tmp_path, capsys):
    assert main(["transpile", str(tmp_path / "missing.qasm"), "--out", str(tmp_path / "x")]) == 1
    assert "[transpile]" in capsys.readouterr().err
    bad = TINY.with_(benchmarks=[["ghz", 9], ["qft", 9]])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad.to_dict()))
    assert main(["attack", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "[transpile]" in err and "seed=0" in err
    with pytest.raises(SystemExit):
        main(["sweep", "depth", "--out", str(tmp_path)])
