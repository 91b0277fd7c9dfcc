import json
import subprocess
import sys

import pytest

from anomq.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_RESOURCE, main


@pytest.fixture
def data(tmp_path):
    (tmp_path / "g.tsv").write_text("0\t1\n1\t2\n0\t2\n2\t3\n3\t4\n4\t5\n", encoding="utf-8")
    (tmp_path / "p.csv").write_text(
        "vertex,pvalue\n0,0.01\n1,0.02\n2,0.03\n3,0.6\n4,0.7\n5,0.8\n", encoding="utf-8")
    rows = ["vertex,t0,t1,t2,t3"] + [f"{v},1,1,1,{9 if v < 3 else 1}" for v in range(6)]
    (tmp_path / "a.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return tmp_path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_query_pvalues(data, capsys):
    code, out = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out.out)
    assert doc["schema"] == "anomq/v1"
    assert doc["vertices"] == [0, 1, 2] and doc["ged"] == 0 and doc["statistic"] == "BJ"


@pytest.mark.parametrize("stat", ["ebp", "kull", "hc"])
def test_query_attrs(data, capsys, stat):
    code, out = run(["query", "--graph", data / "g.tsv", "--attrs", data / "a.csv",
                     "--stat", stat, "--out", data / "r.json"], capsys)
    assert code == EXIT_OK and out.out == ""
    doc = json.loads((data / "r.json").read_text(encoding="utf-8"))
    assert doc["feasible"]


def test_query_infeasible(data, capsys):
    # a perfect matching has max degree 1, below every vertex degree of a ring
    (data / "g.tsv").write_text("0\t1\n2\t3\n4\t5\n", encoding="utf-8")
    code, out = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv"], capsys)
    assert code == EXIT_INFEASIBLE
    assert json.loads(out.out)["feasible"] is False


def test_query_bigger_than_graph(data, capsys):
    code, out = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv",
                     "--query", "line(9)"], capsys)
    assert code == EXIT_INFEASIBLE and "infeasible" in out.err


@pytest.mark.parametrize("fix", [
    lambda d: (d / "g.tsv").write_text("0\tx\n"),
    lambda d: (d / "p.csv").write_text("vertex,pvalue\n0,0.5\n"),
    lambda d: (d / "p.csv").unlink(),
])
def test_query_input_errors(data, capsys, fix):
    fix(data)
    code, out = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv"], capsys)
    assert code == EXIT_INPUT and "input error" in out.err


def test_parametric_needs_attrs(data, capsys):
    code, _ = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv",
                   "--stat", "ebp"], capsys)
    assert code == EXIT_INPUT


def test_bad_query_spec(data, capsys):
    code, _ = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv",
                   "--query", "ring(2)"], capsys)
    assert code == EXIT_INPUT


def test_query_from_json_file(data, capsys):
    (data / "q.json").write_text(json.dumps({"edges": [[0, 1], [1, 2], [2, 0]]}))
    code, out = run(["query", "--graph", data / "g.tsv", "--pvalues", data / "p.csv",
                     "--query", data / "q.json"], capsys)
    assert code == EXIT_OK and json.loads(out.out)["vertices"] == [0, 1, 2]


def test_oracle(data, capsys):
    code, out = run(["oracle", "--graph", data / "g.tsv", "--pvalues", data / "p.csv"], capsys)
    assert code == EXIT_OK
    assert json.loads(out.out)["vertices"] == [0, 1, 2]


def test_oracle_too_large(tmp_path, capsys):
    (tmp_path / "g.tsv").write_text("".join(f"{i}\t{i + 1}\n" for i in range(20)))
    (tmp_path / "p.csv").write_text("vertex,pvalue\n" + "".join(f"{i},0.5\n" for i in range(21)))
    code, out = run(["oracle", "--graph", tmp_path / "g.tsv", "--pvalues", tmp_path / "p.csv"], capsys)
    assert code == EXIT_RESOURCE and "resource" in out.err


def test_simulate_then_query(tmp_path, capsys):
    code, _ = run(["simulate", "--n", 100, "--shape", "line(4)", "--seed", 3,
                   "--out-dir", tmp_path / "ds"], capsys)
    assert code == EXIT_OK
    cfg = json.loads((tmp_path / "ds" / "config.json").read_text())
    truth = json.loads((tmp_path / "ds" / "truth.json").read_text())
    assert cfg["schema"] == "anomq/v1" and cfg["n"] == 100
    code, out = run(["query", "--graph", tmp_path / "ds" / "graph.tsv",
                     "--pvalues", tmp_path / "ds" / "pvalues.csv", "--query", "line(4)"], capsys)
    assert code == EXIT_OK
    assert json.loads(out.out)["vertices"] == truth["planted_vertices"]


def test_simulate_bad_config(tmp_path, capsys):
    code, _ = run(["simulate", "--sparsity", 0, "--out-dir", tmp_path], capsys)
    assert code == EXIT_INPUT


def test_eval(tmp_path, capsys):
    spec = {"dataset": {"n": 50}, "queries": ["ring(3)"], "noise_levels": [5, 20], "trials": 2,
            "record_timing": False}
    (tmp_path / "exp.json").write_text(json.dumps(spec))
    code, _ = run(["eval", "--spec", tmp_path / "exp.json", "--out", tmp_path / "res"], capsys)
    assert code == EXIT_OK
    lines = (tmp_path / "res.csv").read_text().splitlines()
    assert lines[0].startswith("query,statistic,noise,trial,precision") and len(lines) == 5
    assert json.loads((tmp_path / "res.json").read_text())["schema"] == "anomq/v1"


def test_eval_stdout_and_bad_spec(tmp_path, capsys):
    (tmp_path / "exp.json").write_text(json.dumps({"dataset": {"n": 30}, "queries": ["ring(3)"],
                                                   "noise_levels": [0], "trials": 1}))
    code, out = run(["eval", "--spec", tmp_path / "exp.json"], capsys)
    assert code == EXIT_OK and len(json.loads(out.out)["rows"]) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert run(["eval", "--spec", tmp_path / "bad.json"], capsys)[0] == EXIT_INPUT
    (tmp_path / "bad.json").write_text(json.dumps({"trials": 0}))
    assert run(["eval", "--spec", tmp_path / "bad.json"], capsys)[0] == EXIT_INPUT


def test_bench(capsys):
    code, out = run(["bench", "--sizes", "100,1e3", "--repeats", 1], capsys)
    assert code == EXIT_OK
    doc = json.loads(out.out)
    assert [r["n"] for r in doc["rows"]] == [100, 1000] and doc["slope"] is not None


def test_bench_unsorted(capsys):
    assert run(["bench", "--sizes", "1000,100"], capsys)[0] == EXIT_INPUT


def test_module_entry_point(data):
    proc = subprocess.run([sys.executable, "-m", "anomq", "query", "--graph", str(data / "g.tsv"),
                           "--pvalues", str(data / "p.csv")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["vertices"] == [0, 1, 2]
