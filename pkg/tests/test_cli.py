import csv
import io
import json
import subprocess
import sys

import pytest

from maxload import cli
from maxload.errors import InvariantViolation
from maxload.model import Instance, load_instance, save_instance
from maxload.oracle import expected_max_load
from maxload.static_opt import exact_solve


@pytest.fixture
def write(tmp_path):
    def _write(weights, T, name="inst.json"):
        path = tmp_path / name
        save_instance(Instance(T=T, weights=weights), path)
        return str(path)

    return _write


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_singleton(capsys, write):
    code, out, _ = run(capsys, "eval", "--instance", write([0.4], 7), "--assortment", "1")
    assert code == 0 and float(out) == pytest.approx(7 * 0.4 / 1.4, rel=1e-11)


def test_eval_uniform_and_bitwise(capsys, write):
    path = write([1.0] * 3, 2)
    assert run(capsys, "eval", "--instance", path, "--assortment", "1,2,3")[1] == "1.125\n"
    path = write([0.3, 0.8, 1.7], 5)
    out = run(capsys, "eval", "--instance", path, "--assortment", "1,3")[1]
    assert out == format(expected_max_load(load_instance(path), [1, 3]), ".12g") + "\n"


def test_solve_static_methods(capsys, write, data_dir):
    doc = json.loads(run(capsys, "solve-static", "--instance", write([2.0], 3), "--method", "weight-ordered")[1])
    assert doc["assortment"] == [1]
    doc = json.loads(run(capsys, "solve-static", "--instance", write([1.0] * 10, 2), "--method", "exact")[1])
    assert doc["size"] == 3 and doc["value"] == 1.125
    small = str(data_dir / "small.json")
    exact = json.loads(run(capsys, "solve-static", "--instance", small, "--method", "exact")[1])
    ptas = json.loads(run(capsys, "solve-static", "--instance", small, "--method", "ptas", "--epsilon", "0.5")[1])
    assert ptas["epsilon"] == 0.5
    assert ptas["value"] >= (1 - 0.5) * exact["value"]


def test_solve_dynamic_exact(capsys, write):
    doc = json.loads(run(capsys, "solve-dynamic", "--instance", write([0.4], 7), "--method", "exact")[1])
    assert doc["value"] == pytest.approx(7 * 0.4 / 1.4, rel=1e-11)
    doc = json.loads(run(capsys, "solve-dynamic", "--instance", write([1.0] * 3, 2))[1])
    assert doc["value"] == 1.3125 and doc["policy"]["kind"] == "exact"


def test_solve_dynamic_truncated_reproduces_exact(capsys, data_dir):
    path = str(data_dir / "powers.json")
    exact = json.loads(run(capsys, "solve-dynamic", "--instance", path, "--method", "exact")[1])["value"]
    doc = json.loads(
        run(capsys, "solve-dynamic", "--instance", path, "--method", "truncated",
            "--override-tau", "10", "--reps", "200000", "--seed", "3")[1]
    )
    assert doc["mode"] == "truncated" and doc["params"]["tau_overridden"]
    assert doc["rounded_value"] == pytest.approx(exact, abs=1e-9)
    est = doc["estimate"]
    assert abs(est["mean"] - exact) <= 4 * est["stderr"]
    assert doc["policy"]["kind"] == "truncated"


def test_gap(capsys, write):
    doc = json.loads(run(capsys, "gap", "--instance", write([0.5], 4))[1])
    assert doc["r_I"] == 0 and doc["ratio"] == 1
    doc = json.loads(run(capsys, "gap", "--instance", write([1.0] * 3, 2))[1])
    assert doc["r_I"] == 14.29 and 1 <= doc["ratio"] <= 4


def test_gen(capsys, tmp_path):
    out = tmp_path / "g.json"
    assert run(capsys, "gen", "--n", "4", "--T", "3", "--mu", "0.5", "--seed", "2", "--out", str(out))[0] == 0
    inst = load_instance(out)
    assert inst.n == 4 and inst.T == 3
    again = json.loads(run(capsys, "gen", "--n", "4", "--T", "3", "--mu", "0.5", "--seed", "2")[1])
    assert again["weights"] == list(inst.weights)


def test_sweep_single_cell(capsys):
    code, out, _ = run(capsys, "sweep", "--param", "T", "--grid", "3", "--n", "4", "--mu", "0.3", "--reps", "1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert rows[0]["status"] == "ok" and rows[0]["min"] == rows[0]["max"]
    assert out.splitlines()[0] == ",".join(cli.SWEEP_FIELDS)


def test_sweep_deterministic_and_ordered(capsys, tmp_path):
    args = ["sweep", "--param", "mu", "--grid", "0.1,0.5", "--n", "5", "--T", "3", "--reps", "6", "--seed", "11"]
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    assert a == b
    for row in csv.DictReader(io.StringIO(a)):
        vals = [float(row[k]) for k in ("min", "q1", "median", "q3", "max")]
        assert vals == sorted(vals)
    out = tmp_path / "s.json"
    run(capsys, *args, "--format", "json", "--out", str(out))
    cells = json.loads(out.read_text())
    assert [c["value"] for c in cells] == [0.1, 0.5]


def test_sweep_parallel_matches_serial(capsys):
    args = ["sweep", "--grid", "2,4", "--n", "5", "--mu", "0.4", "--reps", "4", "--seed", "1"]
    assert run(capsys, *args)[1] == run(capsys, *args, "--jobs", "2")[1]


def test_sweep_gap_method(capsys):
    out = run(capsys, "sweep", "--grid", "2", "--n", "3", "--mu", "1", "--sigma", "0", "--reps", "2", "--method", "gap")[1]
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["mean"]) == pytest.approx(100 / 7, abs=1e-6)


def test_sweep_marks_capped_cells(capsys):
    out = run(capsys, "sweep", "--grid", "2", "--n", "17", "--mu", "0.5", "--reps", "1")[1]
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["status"] == "skipped" and "cap" in row["reason"]


def test_exit_codes(capsys, write, tmp_path, monkeypatch):
    assert run(capsys, "eval", "--instance", str(tmp_path / "missing.json"), "--assortment", "1")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "T": 2, "weights": [0]}')
    code, _, err = run(capsys, "eval", "--instance", str(bad), "--assortment", "1")
    assert code == 2 and "weights" in err
    assert run(capsys, "eval", "--instance", write([1.0], 2), "--assortment", "3")[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["eval", "--assortment", "x"])
    assert exc.value.code == 2
    big = write([0.1 * (i + 1) for i in range(12)], 12)
    code, _, err = run(capsys, "solve-dynamic", "--instance", big)
    assert code == 3 and "truncated" in err

    def boom(*a, **k):
        raise InvariantViolation("ratio outside [1, 4]")

    monkeypatch.setattr(cli, "adaptivity_gap", boom)
    assert run(capsys, "gap", "--instance", write([1.0], 2))[0] == 4


def test_module_entry_point(tmp_path):
    path = tmp_path / "i.json"
    save_instance(Instance(T=2, weights=[1.0] * 3), path)
    out = subprocess.run(
        [sys.executable, "-m", "maxload", "eval", "--instance", str(path), "--assortment", "1,2,3"],
        capture_output=True, text=True, check=True,
    )
    assert out.stdout == "1.125\n"
