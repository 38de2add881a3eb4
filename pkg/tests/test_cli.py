import json
import subprocess
import sys

import numpy as np
import pytest

from aretrim.cli import main
from aretrim.core import Gmm, load_dataset, load_gmm, load_mask, save_dataset, save_gmm
from aretrim.synth import sample_gmm

TWO = Gmm.from_arrays([0.5, 0.5], [[0.0, 0.0], [8.0, 0.0]], np.ones((2, 2)))
FAR = Gmm.from_arrays([1.0], [[0.0, 40.0]], [[1.0, 1.0]])


@pytest.fixture
def model_file(tmp_path):
    p = tmp_path / "truth.json"
    save_gmm(TWO, p)
    return p


def test_synth(tmp_path, model_file, capsys):
    out = tmp_path / "d.csv"
    argv = ["synth", "--model", str(model_file), "--n", "200", "--seed", "4", "--out", str(out),
            "--contaminate", "rate=0.05,mode=point_mass,scale=10"]
    assert main(argv) == 0
    assert "T=200 d=2 outliers=10" in capsys.readouterr().out
    first = out.read_bytes()
    assert load_mask(f"{out}.mask").sum() == 10
    assert main(argv) == 0
    assert out.read_bytes() == first
    assert main(["synth", "--model", str(model_file), "--n", "50", "--out", str(tmp_path / "c.bin")]) == 0
    assert load_dataset(tmp_path / "c.bin").T == 50


@pytest.mark.parametrize("spec", ["rate=1.0", "rate=1.5,mode=point_mass", "mode=blob", "rate"])
def test_synth_bad_contamination(tmp_path, model_file, capsys, spec):
    code = main(["synth", "--model", str(model_file), "--n", "10", "--out", str(tmp_path / "x.csv"),
                 "--contaminate", spec])
    assert code == 2
    assert "--contaminate" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_train_reduction_and_report(tmp_path):
    data, _ = sample_gmm(TWO, 300, 0)
    save_dataset(data, tmp_path / "d.csv")
    base = ["train", "--data", str(tmp_path / "d.csv"), "--k", "2", "--seed", "3"]
    assert main(base + ["--method", "conventional", "--out", str(tmp_path / "c.json")]) == 0
    assert main(base + ["--method", "are-trim", "--tau", "1.0", "--out", str(tmp_path / "a.json")]) == 0
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "a.json").read_bytes()
    assert main(base + ["--metric", "mahalanobis", "--out", str(tmp_path / "m.json"),
                        "--report", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["tau"] == 0.92 and rep["nu_theoretical"]["mahalanobis"] == 4.0
    assert {"retained_fraction", "mu_hat", "sigma_hat", "ll_trace"} <= rep.keys()
    assert main(base + ["--out", str(tmp_path / "e.json"), "--report", str(tmp_path / "e_r.json")]) == 0
    assert json.loads((tmp_path / "e_r.json").read_text())["tau"] == 0.96


def test_train_usage_errors(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "m.json")]) == 2
    assert "--data" in capsys.readouterr().err
    data, _ = sample_gmm(TWO, 20, 0)
    save_dataset(data, tmp_path / "d.csv")
    assert main(["train", "--data", str(tmp_path / "d.csv"), "--tau", "0", "--out", str(tmp_path / "m.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", str(tmp_path / "d.csv"), "--method", "magic", "--out", "x"])
    assert exc.value.code == 2


def test_train_runtime_failure(tmp_path):
    data, _ = sample_gmm(TWO, 5, 0)
    save_dataset(data, tmp_path / "d.csv")
    assert main(["train", "--data", str(tmp_path / "d.csv"), "--k", "32", "--out", str(tmp_path / "m.json")]) == 1
    (tmp_path / "bad.csv").write_text("1,2\n3\n")
    assert main(["train", "--data", str(tmp_path / "bad.csv"), "--k", "1", "--out", str(tmp_path / "m.json")]) == 1


def test_classify(tmp_path, capsys):
    mdir = tmp_path / "models"
    mdir.mkdir()
    save_gmm(TWO, mdir / "near.json")
    save_gmm(FAR, mdir / "far.json")
    a, _ = sample_gmm(TWO, 12, 1)
    b, _ = sample_gmm(FAR, 12, 2)
    test = np.vstack([a.samples, b.samples])
    from aretrim.core import Dataset
    save_dataset(Dataset(test), tmp_path / "t.csv")
    (tmp_path / "t.csv.labels").write_text("near\n" * 3 + "far\n" * 3)
    argv = ["classify", "--models", str(mdir), "--test", str(tmp_path / "t.csv"), "--chunk-len", "4",
            "--out", str(tmp_path / "p.csv")]
    assert main(argv) == 0
    assert "accuracy=1.0000 over 6 chunks" in capsys.readouterr().out
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "chunk_index,predicted,true_label,log_likelihood"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["near"] * 3 + ["far"] * 3
    empty = tmp_path / "empty"
    empty.mkdir()
    argv[2] = str(empty)
    assert main(argv) == 2


def test_dispersion(tmp_path, model_file):
    from aretrim.core import Dataset
    save_dataset(Dataset(np.vstack([TWO.means, TWO.means + 1.0])), tmp_path / "d.csv")
    assert main(["dispersion", "--data", str(tmp_path / "d.csv"), "--model", str(model_file),
                 "--metric", "mahalanobis", "--out", str(tmp_path / "o.csv")]) == 0
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0].startswith("# metric=mahalanobis") and "tau=0.92" in lines[0]
    rows = [ln.split(",") for ln in lines if not ln.startswith("#")][1:]
    assert float(rows[0][2]) == 0.0 and float(rows[1][2]) == 0.0
    assert all(0 <= float(r[3]) <= 1 for r in rows)
    save_dataset(Dataset(np.zeros((3, 3)) + np.arange(3)[:, None]), tmp_path / "d3.csv")
    assert main(["dispersion", "--data", str(tmp_path / "d3.csv"), "--model", str(model_file),
                 "--out", str(tmp_path / "o3.csv")]) == 1


def test_bench(tmp_path, capsys):
    spec = {"num_classes": 2, "dim": 3, "samples_per_class": 100, "test_chunks_per_class": 4,
            "chunk_len": 3, "k": 2, "tau_grid": [1.0, 0.9], "seeds": [0],
            "contamination": {"rate": 0.05, "mode": "uniform_box", "scale": 5}}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert main(["bench", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "r.csv")]) == 0
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("method,metric,tau,seed,accuracy") and len(lines) == 4
    spec["tau_grid"] = [0.9, 2.0]
    (tmp_path / "bad.json").write_text(json.dumps(spec))
    assert main(["bench", "--spec", str(tmp_path / "bad.json"), "--out", str(tmp_path / "r2.csv")]) == 2
    assert "tau_grid[1]" in capsys.readouterr().err


def test_verify(capsys):
    assert main(["verify", "--suite", "chi2", "--trials", "20000"]) == 0
    assert "[PASS]" in capsys.readouterr().out
    assert main(["verify", "--suite", "breakdown", "--trials", "10"]) == 0
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "nope"])
    assert exc.value.code == 2


def test_verify_reports_failures_with_exit_1(capsys):
    # the chi(200) normal surrogate misses the 1% pdf bound by a hair
    assert main(["verify", "--suite", "normal-approx", "--trials", "20000"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] chi(200)" in out and "[PASS] chi2(640)" in out


def test_help_lists_defaults():
    proc = subprocess.run([sys.executable, "-m", "aretrim", "train", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    text = " ".join(proc.stdout.split())
    for snippet in ("(default: 32)", "0.96 for euclidean", "0.92 for mahalanobis", "(default: 0.01)",
                    "(default: 0.05)", "(default: are-trim)"):
        assert snippet in text
