import csv
import io
import json

import pytest
from click.testing import CliRunner

from pollbatch.builtins import builtin_model, model_b
from pollbatch.cli import main
from pollbatch.experiments import analyze, models_abc


def invoke(*args):
    return CliRunner().invoke(main, list(args))


def rows(result):
    return list(csv.reader(io.StringIO(result.output)))


def test_solve_sym():
    r = invoke("solve", "--model", "sym2", "--discipline", "ex")
    assert r.exit_code == 0
    table = rows(r)
    assert table[0] == ["quantity", "key", "value"]
    assert ["E(T)", "all", "6"] in table


def test_solve_model_b_all_disciplines():
    values = {}
    for d in ("ex", "lg", "gg"):
        r = invoke("solve", "--model", "model_b", "--discipline", d)
        assert r.exit_code == 0
        values[d] = float(next(v for q, k, v in rows(r)[1:] if q == "E(T)"))
    assert min(values, key=values.get) == "ex"
    assert values["gg"] == pytest.approx(analyze(model_b(discipline="gg")).mean_T, rel=1e-11)


def test_twelve_significant_digits():
    r = invoke("solve", "--model", "model_a", "--discipline", "lg")
    value = next(v for q, k, v in rows(r)[1:] if q == "E(T)")
    assert len(value.replace(".", "").lstrip("0")) <= 12
    assert float(value) == pytest.approx(analyze(builtin_model("model_a"), "lg").mean_T, rel=1e-11)


def test_exit_codes(tmp_path):
    empty = model_b().to_dict()
    empty["batch"] = []
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(empty), encoding="utf-8")
    assert invoke("solve", "--model", str(path)).exit_code == 2

    hot = model_b().to_dict()
    hot["lambda"] = 1.5
    path = tmp_path / "hot.json"
    path.write_text(json.dumps(hot), encoding="utf-8")
    assert invoke("solve", "--model", str(path)).exit_code == 3

    assert invoke("solve", "--model", "nosuch").exit_code == 2
    assert invoke("solve", "--model", "sym2", "--discipline", "fifo").exit_code == 2
    assert invoke("lst", "--model", "sym2", "--omega", "a,b").exit_code == 2
    assert invoke("experiment", "models-abc", "--rho-grid", "0.5,1.2").exit_code == 2


def test_lst_command():
    r = invoke("lst", "--model", "sym2", "--discipline", "gg", "--omega", "0,0.5")
    assert r.exit_code == 0
    table = rows(r)
    assert table[1] == ["0", "1"]
    assert 0 < float(table[2][1]) < 1


def test_simulate_command(tmp_path):
    out = tmp_path / "sim.csv"
    trace = tmp_path / "trace.csv"
    args = ["simulate", "--model", "sym2", "--discipline", "ex", "--reps", "3", "--batches", "5000",
            "--seed", "11", "--output", str(out), "--trace", str(trace)]
    r = invoke(*args)
    assert r.exit_code == 0
    first = out.read_text(encoding="utf-8")
    assert first.splitlines()[0] == "quantity,key,mean,half_width"
    assert trace.exists()
    invoke(*args)
    assert out.read_text(encoding="utf-8") == first


def test_experiment_sym2():
    r = invoke("experiment", "sym2", "--lambda", "0.4", "--b-grid", "1,0.25,2,4", "--s-grid", "1,4,0.1")
    assert r.exit_code == 0
    table = {(row[1], row[2]): row for row in rows(r)[1:]}
    assert table[("1", "1")][5:8] == ["6", "6.33333333333", "7.38095238095"]
    assert table[("1", "1")][11] == "ex"
    assert table[("0.25", "4")][11] == "ex"
    assert table[("2", "0.1")][11] in {"lg", "gg", "lg|gg"}
    assert table[("4", "1")][4] == "unstable"
    assert all(row[12] in ("0", "") for row in table.values())


def test_experiment_models_abc_matches_library():
    r = invoke("experiment", "models-abc", "--rho-grid", "0.3,0.6")
    assert r.exit_code == 0
    table = rows(r)
    assert table[0] == ["model", "rho", "lambda", "T_ex", "T_lg", "T_gg", "argmin"]
    lib = models_abc([0.3, 0.6])
    assert len(table) == 1 + len(lib)
    for row, ref in zip(table[1:], lib):
        assert row[0] == ref.model and row[6] == ref.argmin
        assert float(row[3]) == pytest.approx(list(ref.mean_T.values())[0], rel=1e-11)
