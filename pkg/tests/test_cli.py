import csv
import json

import pytest

from ma_radial.cli import (
    EXIT_INVALID,
    EXIT_OK,
    EXIT_PROPERTY_FAILED,
    EXIT_UNDETERMINED,
    ProblemFileError,
    main,
    parse_lambda_grid,
    parse_problem,
)
from ma_radial.sweep import SweepError, read_report


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


CONST = {"N": 1, "lambda": 2, "f": {"family": "constant", "params": {"c": 1}}, "g": {"family": "constant"}}
LINEAR = {"N": 1, "lambda": 1, "f": {"family": "linear"}, "g": {"expr": "x"}}


def test_solve_constant(tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert main(["solve", write(tmp_path, "p.json", CONST), "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert len(data["solutions"]) == 1
    assert data["solutions"][0]["norm"] == pytest.approx(2.0, abs=1e-6)
    assert len(data["solutions"][0]["v1"]) == len(data["nodes"])
    assert "1 nontrivial solution" in capsys.readouterr().out


def test_solve_machine_output(tmp_path, capsys):
    out = tmp_path / "sol.csv"
    code = main(["solve", write(tmp_path, "p.json", CONST), "--out", str(out), "--format", "csv", "--grid", "64"])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["solutions"][0]["norm"] == pytest.approx(2.0, abs=1e-6)
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 65 and rows[0]["r"] == "0.0"


def test_solve_linear_empty_is_success(tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert main(["solve", write(tmp_path, "p.json", LINEAR), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["solutions"] == []


def test_solve_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["solve", write(tmp_path, "p.json", CONST), "--grid", "32"]) == EXIT_OK
    files = list((tmp_path / "out").glob("solve-*.json"))
    assert len(files) == 1


def test_malformed_json_reports_position(tmp_path, capsys):
    path = write(tmp_path, "bad.json", '{"N": 1,\n  "f": }')
    assert main(["solve", path]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "line 2" in err and "column 8" in err


@pytest.mark.parametrize(
    "data, match",
    [
        ({**CONST, "mu": 1}, "unknown key"),
        ({**CONST, "N": 0}, "'N'"),
        ({**CONST, "lambda": -1}, "'lambda'"),
        ({**CONST, "f": {"family": "cubic"}}, "unknown family"),
        ({**CONST, "f": {"expr": "x^^2"}}, "offset 2"),
        ({**CONST, "f": {"expr": "x", "family": "linear"}}, "exactly one"),
        ({**CONST, "f": {"family": "linear", "limits": {"q1": "zero"}}}, "q0"),
        ({**CONST, "grid": {"intervals": 10}}, "multiple of 4"),
        ({**CONST, "solver": {"speed": 3}}, "unknown solver option"),
        ({**CONST, "solver": {"damping": 3}}, "damping"),
        ([1, 2], "JSON object"),
    ],
)
def test_problem_validation(data, match):
    with pytest.raises(ProblemFileError, match=match):
        parse_problem(data)


def test_problem_with_limits_and_solver():
    prob = parse_problem({**LINEAR, "f": {"expr": "x", "limits": {"q0": 1, "qinf": "inf"}},
                          "solver": {"seed_radii": [1, 2], "alpha_box": [[0.1, 1], [0.1, 1]]},
                          "grid": {"intervals": 64}})
    assert prob.family.f.declared_limits["qinf"].kind == "inf"
    assert prob.cfg.seed_radii == (1.0, 2.0)
    assert prob.grid.M == 64


def test_classify_tables(tmp_path, capsys):
    sq = {"N": 1, "f": {"expr": "x^2"}, "g": {"family": "power", "params": {"p": 2}}}
    assert main(["classify", write(tmp_path, "sq.json", sq)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "T1a" in out and "exists for all lambda>0" in out

    assert main(["classify", write(tmp_path, "lin.json", LINEAR), "--format", "json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["windows"]["T2e"]["hi"] == pytest.approx(0.5, rel=1e-8)
    assert data["windows"]["T2f"]["lo"] == pytest.approx(32.0, rel=1e-8)


def test_classify_undetermined(tmp_path, capsys):
    osc = {"N": 1, "f": {"expr": "x*(2+sin(log(x)))"}, "g": {"family": "linear"}}
    assert main(["classify", write(tmp_path, "osc.json", osc)]) == EXIT_UNDETERMINED
    assert "undetermined" in capsys.readouterr().err


def test_sweep_with_bisect(tmp_path, capsys):
    out = tmp_path / "lin.csv"
    code = main(["sweep", write(tmp_path, "lin.json", LINEAR), "--lambda-grid", "1,2,3", "--bisect",
                 "--out", str(out)])
    assert code == EXIT_OK
    assert out.read_text().splitlines()[0] == "lambda,count,norms"
    rows = list(csv.DictReader((tmp_path / "lin-thresholds.csv").open()))
    assert len(rows) == 1
    assert float(rows[0]["lambda_star"]) == pytest.approx(2.4674, abs=1e-3)


def test_sweep_constant_json(tmp_path, capsys):
    out = tmp_path / "c.json"
    code = main(["sweep", write(tmp_path, "c.json", CONST), "--lambda-grid", "0.5,1", "--out", str(out),
                 "--format", "json"])
    assert code == EXIT_OK
    assert read_report(out).counts == [1, 1]
    assert json.loads(capsys.readouterr().out)["output"] == str(out)


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", write(tmp_path, "c.json", CONST), "--lambda-grid", ""]) == EXIT_INVALID
    assert main(["sweep", write(tmp_path, "c.json", CONST), "--lambda-grid", "lin:1:2:0"]) == EXIT_INVALID


def test_lambda_grid_specs():
    assert parse_lambda_grid("1, 2,3") == [1.0, 2.0, 3.0]
    assert parse_lambda_grid("lin:1:2:3") == [1.0, 1.5, 2.0]
    assert parse_lambda_grid("geom:1:100:3") == pytest.approx([1.0, 10.0, 100.0])
    for bad in ("", "a,b", "geom:0:1:3", "lin:1:2"):
        with pytest.raises(SweepError):
            parse_lambda_grid(bad)


def test_verify_lemmas(capsys):
    assert main(["verify", "--suite", "lemmas", "--trials", "100", "--seed", "7", "--format", "json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    cone = next(p for p in data["properties"] if p["name"] == "cone preservation")
    assert cone["passed"] and cone["worst_margin"] >= 0


def test_verify_rejects_zero_trials(capsys):
    assert main(["verify", "--suite", "operator", "--trials", "0"]) == EXIT_INVALID


def test_verify_failure_exit_code(monkeypatch, capsys):
    import ma_radial.cli as cli
    from ma_radial.verify import PropertyResult

    bad = PropertyResult("always fails", 0.0)
    bad.record(1.0)
    monkeypatch.setattr(cli, "run_suite", lambda *a: [bad])
    assert main(["verify", "--suite", "operator", "--trials", "1"]) == EXIT_PROPERTY_FAILED


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2


def test_solve_exit_3_when_nothing_converges(tmp_path, monkeypatch, capsys):
    import ma_radial.cli as cli
    from ma_radial.solver import SolutionSet

    monkeypatch.setattr(cli, "multi_start", lambda *a: SolutionSet([], [{"converged": False}]))
    code = main(["solve", write(tmp_path, "p.json", CONST), "--out", str(tmp_path / "s.json")])
    assert code == 3
    assert "no seed converged" in capsys.readouterr().err
