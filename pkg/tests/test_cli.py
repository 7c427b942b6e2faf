import csv
import json
import os

import numpy as np
import pytest

from seqrefine.checkpoint import load_checkpoint
from seqrefine.cli import main
from seqrefine.corpus import build_graphs, load_log, save_graphs


def files_in(root):
    out = {}
    for dirpath, _, names in os.walk(root):
        for n in names:
            p = os.path.join(dirpath, n)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


@pytest.fixture
def workspace(tmp_path):
    log = tmp_path / "log.tsv"
    assert main(["generate", str(log), "--users", "15", "--items", "20", "--noise", "0.2",
                 "--intervals", "4", "--events", "3", "--seed", "1"]) == 0

    def write(name="run.cfg", **extra):
        lines = {"dataset": "log.tsv", "T": 3, "d": 8, "n_heads": 2, "max_seq": 5,
                 "epochs": 3, "out": str(tmp_path / "out"), "min_sim": 0.5}
        lines.update(extra)
        path = tmp_path / name
        path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
        return str(path)

    return tmp_path, write


def test_full_pipeline(workspace, capsys):
    root, write = workspace
    cfg = write()
    out = root / "out"
    assert main(["preprocess", "--config", cfg]) == 0
    report = json.loads((out / "refinement_report.json").read_text())
    assert {"initial_interactions", "noisy_interactions", "augmented_interactions"} <= set(report)
    assert (out / "config.txt").exists() and (out / "refinement.png").exists()

    assert main(["train", "--config", cfg]) == 0
    for name in ("checkpoint.bin", "checkpoint.json", "training_log.json", "loss_curve.png",
                 "metrics.json", "metrics.txt"):
        assert (out / name).exists(), name
    assert len(json.loads((out / "training_log.json").read_text())) == 3
    trained = json.loads((out / "metrics.json").read_text())

    assert main(["evaluate", "--config", cfg, "--checkpoint", str(out / "checkpoint.bin"),
                 "--topn", "5,10,20"]) == 0
    evaluated = json.loads((out / "eval_metrics.json").read_text())
    assert set(evaluated) == {"HR@5", "NDCG@5", "HR@10", "NDCG@10", "HR@20", "NDCG@20", "users"}
    for k in ("HR@10", "NDCG@10"):
        assert evaluated[k] == trained[k]
        assert 0 <= evaluated[k] <= 1
    assert "HR@10" in capsys.readouterr().out


def test_out_flag_redirects_outputs(workspace):
    root, write = workspace
    assert main(["preprocess", "--config", write(), "--out", str(root / "elsewhere")]) == 0
    assert (root / "elsewhere" / "graphs").exists()
    assert not (root / "out").exists()


def test_disable_refine_writes_corpus_graphs(workspace):
    root, write = workspace
    assert main(["preprocess", "--config", write(disable_refine="true")]) == 0
    save_graphs(build_graphs(load_log(str(root / "log.tsv")), 4), str(root / "direct"))
    assert files_in(root / "out" / "graphs") == files_in(root / "direct")
    assert json.loads((root / "out" / "refinement_report.json").read_text())["refined"] is False


def test_commands_are_idempotent(workspace):
    root, write = workspace
    cfg = write()
    snapshots = []
    for _ in range(2):
        assert main(["preprocess", "--config", cfg]) == 0
        assert main(["train", "--config", cfg]) == 0
        files = files_in(root / "out")
        # wall-clock fields and rendered figures are the only non-deterministic outputs
        for name in [n for n in files if n.endswith(".png")]:
            del files[name]
        report = json.loads(files.pop("refinement_report.json"))
        report.pop("execution_time_s")
        history = json.loads(files.pop("training_log.json"))
        for h in history:
            h.pop("wall_time")
        snapshots.append((files, report, history))
    assert snapshots[0] == snapshots[1]


def test_sweep_writes_one_row_per_value(workspace):
    root, write = workspace
    cfg = write(epochs=1)
    assert main(["sweep", "--config", cfg, "--axis", "beta", "--values", "0.3,0.5,0.7"]) == 0
    with open(root / "out" / "sweep_beta.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["beta"]) for r in rows] == [0.3, 0.5, 0.7]
    for r in rows:
        assert 0 <= float(r["HR@10"]) <= 1 and 0 <= float(r["NDCG@10"]) <= 1
    assert (root / "out" / "sweep_beta.png").exists()


def test_min_sim_sweep(workspace):
    root, write = workspace
    assert main(["sweep", "--config", write(epochs=1), "--axis", "min_sim", "--values", "0.5,0.7,0.8"]) == 0
    with open(root / "out" / "sweep_min_sim.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 3


def test_fixed_gate_zero_checkpoint_evaluates(workspace):
    root, write = workspace
    cfg = write(fixed_gate_value=0.0, epochs=1)
    assert main(["preprocess", "--config", cfg]) == 0
    assert main(["train", "--config", cfg]) == 0
    tensors, meta = load_checkpoint(str(root / "out" / "checkpoint"))
    assert meta["T"] == 3
    assert all(np.all(np.isfinite(v)) for v in tensors.values())


def test_exit_codes(workspace, tmp_path):
    root, write = workspace
    assert main(["preprocess", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["preprocess", "--config", write("bad.cfg", colour="red")]) == 2
    assert main(["preprocess", "--config", write("bad2.cfg", d=30, n_heads=4)]) == 2
    # training before preprocessing: prerequisite artifacts are missing
    assert main(["train", "--config", write()]) == 3
    assert main(["preprocess", "--config", write("nodata.cfg", dataset="absent.tsv")]) == 3
    cfg = write()
    assert main(["preprocess", "--config", cfg]) == 0
    assert main(["evaluate", "--config", cfg, "--checkpoint", str(root / "none.bin")]) == 3


def test_divergence_exit_code(workspace):
    _, write = workspace
    cfg = write(lr="inf")
    assert main(["preprocess", "--config", cfg]) == 0
    with np.errstate(all="ignore"):
        assert main(["train", "--config", cfg]) == 4


def test_thread_env_validation(workspace, monkeypatch):
    _, write = workspace
    monkeypatch.setenv("SEQREFINE_THREADS", "zero")
    assert main(["preprocess", "--config", write()]) == 2
    monkeypatch.setenv("SEQREFINE_THREADS", "1")
    assert main(["preprocess", "--config", write()]) == 0


def test_unknown_sweep_axis_rejected(workspace):
    _, write = workspace
    with pytest.raises(SystemExit):
        main(["sweep", "--config", write(), "--axis", "gamma", "--values", "1"])
