import json
import subprocess
import sys

import pytest

from keyspace.cli import main
from keyspace.harness import read_csv


@pytest.fixture()
def workdir(tmp_path, lee_path):
    assert main(["train", str(lee_path), "-o", str(tmp_path / "model.json"), "--alphabet", "modern"]) == 0
    assert main(["encrypt", str(lee_path), "-L", "200", "--seed", "3", "--alphabet", "modern",
                 "-o", str(tmp_path / "cipher.json")]) == 0
    return tmp_path


def test_normalize(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_text("Jove, vidi!", encoding="utf-8")
    assert main(["normalize", str(src)]) == 0
    assert capsys.readouterr().out == "IOUEUIDI\n"
    assert main(["normalize", str(src), "--alphabet", "modern", "-o", str(tmp_path / "o.txt")]) == 0
    assert (tmp_path / "o.txt").read_text() == "JOVEVIDI\n"


def test_train_and_encrypt(workdir):
    model = json.loads((workdir / "model.json").read_text())
    assert model["n"] == 3 and set(model["tables"]) == {"1", "2", "3"}
    inst = json.loads((workdir / "cipher.json").read_text())
    assert len(inst["ciphertext"]) == 200 and inst["seed"] == 3


def test_estimate(workdir, capsys):
    code = main(["estimate", "--cipher", str(workdir / "cipher.json"), "--model", str(workdir / "model.json"),
                 "--samples", "500", "--tau", "0.5,0.9", "--out", str(workdir / "est")])
    assert code == 0
    comment, rows = read_csv(workdir / "est" / "pgood.csv")
    assert comment.startswith("# keyspace version=")
    assert [r["tau"] for r in rows] == ["0.5", "0.9"]
    assert "tau=0.9" in capsys.readouterr().out


@pytest.mark.parametrize("method", ["hill_climb", "anneal"])
def test_search(workdir, method):
    args = ["search", "--cipher", str(workdir / "cipher.json"), "--model", str(workdir / "model.json"),
            "--method", method, "--out", str(workdir / method)]
    if method == "hill_climb":
        args += ["--restarts", "2"]
    assert main(args) == 0
    _, rows = read_csv(workdir / method / "search_runs.csv")
    assert rows[0]["method"] == method and len(rows[0]["key"]) == 26


def test_qubo(workdir):
    dump = workdir / "q.json"
    assert main(["qubo", "--cipher", str(workdir / "cipher.json"), "--model", str(workdir / "model.json"),
                 "--sweeps", "3", "--dump-problem", str(dump), "--out", str(workdir / "q")]) == 0
    assert json.loads(dump.read_text())["size"] == 26
    _, trace = read_csv(workdir / "q" / "qubo_trace.csv")
    assert len(trace) == 3


def test_sweep(tmp_path, lee_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "corpora": [str(lee_path)], "alphabet": {"symbols": "AEINT"}, "lengths": [50],
        "taus": [0.9, 0.98], "n_samples": 200, "methods": ["hill_climb"], "hill_climb": {"restarts": 1},
    }))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "r"), "--seed", "4"]) == 0
    comment, _ = read_csv(tmp_path / "r" / "pgood.csv")
    assert comment.endswith("seed=4")


def test_exit_codes(tmp_path, workdir):
    # usage errors
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["sweep"]) == 1
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["sweep", "--config", str(bad)]) == 1
    assert main(["train", str(workdir / "cipher.json"), "-o", str(tmp_path / "m.json"), "--order", "5"]) == 1
    # data errors
    assert main(["normalize", str(tmp_path / "nope.txt")]) == 2
    assert main(["encrypt", str(bad), "-L", "100"]) == 2
    other = tmp_path / "hist.json"
    assert main(["train", str(bad), "-o", str(other)]) == 0
    assert main(["estimate", "--cipher", str(workdir / "cipher.json"), "--model", str(other)]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "keyspace", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("keyspace ")
