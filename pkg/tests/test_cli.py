import json
import re

import pytest

from drsmooth import cli, persist, report
from drsmooth.coordinator import run
from drsmooth.oracle import solve_central
from drsmooth.scenario import AlgoParams, generate_scenario

from conftest import FIXTURES


def call(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def scenario_file(tmp_path, capsys):
    path = tmp_path / "s.json"
    code, out, _ = call(capsys, "generate", "--seed", 4, "--households", 3, "--slots", 6, "--appliances", 2,
                        "--out", path)
    assert code == 0 and "3 households" in out
    return path


def test_generate_matches_library(scenario_file):
    assert persist.load_scenario(scenario_file) == generate_scenario(4, 3, 6, 2)


def test_run_twice_identical(tmp_path, capsys, scenario_file):
    outs = []
    for i in range(2):
        t, c = tmp_path / f"t{i}.json", tmp_path / f"t{i}.csv"
        assert call(capsys, "run", "--scenario", scenario_file, "--trace-out", t, "--maxiter", 30)[0] == 0
        assert call(capsys, "run", "--scenario", scenario_file, "--trace-out", c, "--maxiter", 30)[0] == 0
        outs.append((t.read_bytes(), c.read_bytes()))
    assert outs[0] == outs[1]


def test_run_matches_library(tmp_path, capsys, scenario_file):
    params = tmp_path / "p.json"
    persist.save_params(AlgoParams(maxiter=20, mu_hat_min=0.002), params)
    t, sol = tmp_path / "t.json", tmp_path / "sol.json"
    code, out, _ = call(capsys, "run", "--scenario", scenario_file, "--params", params, "--trace-out", t,
                        "--solution-out", sol)
    assert code == 0
    lib = run(generate_scenario(4, 3, 6, 2), AlgoParams(maxiter=20, mu_hat_min=0.002))
    assert persist.load_trace(t) == lib
    assert f"P_r^J {report.fmt(lib.best_primal)}" in out
    assert json.loads(sol.read_text()) == persist.solution_to_dict(lib)


def test_workers_env_and_flag(tmp_path, capsys, scenario_file, monkeypatch):
    t = tmp_path / "t.json"
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    call(capsys, "run", "--scenario", scenario_file, "--trace-out", t, "--maxiter", 3)
    assert persist.load_trace(t).params.worker_count == 3
    call(capsys, "run", "--scenario", scenario_file, "--trace-out", t, "--maxiter", 3, "--workers", 2)
    assert persist.load_trace(t).params.worker_count == 2
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    code, _, err = call(capsys, "run", "--scenario", scenario_file, "--maxiter", 3)
    assert code == cli.EXIT_ERROR and cli.WORKERS_ENV in err


def test_oracle_and_gap(tmp_path, capsys, scenario_file):
    o, t = tmp_path / "o.json", tmp_path / "t.json"
    code, out, _ = call(capsys, "oracle", "--scenario", scenario_file, "--out", o)
    p_star = solve_central(generate_scenario(4, 3, 6, 2)).optimal_cost
    assert code == 0 and f"P* {report.fmt(p_star)}" in out
    call(capsys, "run", "--scenario", scenario_file, "--trace-out", t, "--maxiter", 50)
    code, out, _ = call(capsys, "gap", "--trace", t, "--oracle", o)
    assert code == 0
    expected = report.gap_report(persist.load_trace(t), p_star).lines()
    assert out.splitlines() == expected


@pytest.mark.slow
def test_gap_on_desk_golden_scenario(tmp_path, capsys):
    s = FIXTURES / "desk_seed3_I8_T12_A3.json"
    o, t = tmp_path / "o.json", tmp_path / "t.json"
    assert call(capsys, "oracle", "--scenario", s, "--out", o)[0] == 0
    assert call(capsys, "run", "--scenario", s, "--trace-out", t)[0] == 0
    code, out, _ = call(capsys, "gap", "--trace", t, "--oracle", o)
    gap = float(re.search(r"gap_percent (\S+)", out).group(1))
    assert code == 0 and gap <= 5.0


def test_plot_from_csv_and_json(tmp_path, capsys):
    s = FIXTURES / "scenario_seed1_I2_T4_A1.json"
    t, c, svg = tmp_path / "t.json", tmp_path / "t.csv", tmp_path / "p.svg"
    call(capsys, "run", "--scenario", s, "--trace-out", c, "--maxiter", 1000)
    assert call(capsys, "plot", "--trace", c, "--out", svg)[0] == 0
    text = svg.read_text()
    assert text.count("<polyline") == 2
    assert [len(p.split()) for p in re.findall(r'points="([^"]*)"', text)] == [1000, 1000]
    call(capsys, "run", "--scenario", s, "--trace-out", t, "--maxiter", 10)
    assert call(capsys, "plot", "--trace", t, "--out", svg)[0] == 0


def test_exit_codes(tmp_path, capsys, scenario_file):
    code, _, err = call(capsys, "run", "--scenario", tmp_path / "missing.json")
    assert code == cli.EXIT_MISSING and err.startswith("drsmooth: error:")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "drsmooth.scenario", "version": 7}))
    assert call(capsys, "run", "--scenario", bad)[0] == cli.EXIT_SCHEMA
    bad.write_text("[1, 2]")
    assert call(capsys, "oracle", "--scenario", bad)[0] == cli.EXIT_SCHEMA
    assert call(capsys, "oracle", "--scenario", scenario_file, "--cap", 2)[0] == cli.EXIT_CAP
    assert call(capsys, "frobnicate")[0] == cli.EXIT_USAGE
    assert call(capsys, "run")[0] == cli.EXIT_USAGE
    codes = [cli.EXIT_OK, cli.EXIT_ERROR, cli.EXIT_USAGE, cli.EXIT_MISSING, cli.EXIT_SCHEMA, cli.EXIT_CAP,
             cli.EXIT_INFEASIBLE, cli.EXIT_NONFINITE]
    assert len(set(codes)) == len(codes)


def test_infeasible_exit_code(tmp_path, capsys):
    doc = persist.scenario_to_dict(generate_scenario(1, 2, 4, 1))
    doc["cost"]["y_max"] = [0.5] * 4
    s = tmp_path / "s.json"
    s.write_text(json.dumps(doc))
    assert call(capsys, "oracle", "--scenario", s)[0] == cli.EXIT_INFEASIBLE


def test_help_documents_exit_codes(capsys):
    code, out, _ = call(capsys, "--help")
    assert code == 0
    for n in range(8):
        assert re.search(rf"^\s+{n}\s+\S", out, re.M)
    assert cli.WORKERS_ENV in out
