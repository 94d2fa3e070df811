import json

import pytest

import app.cli as cli


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch, settings):
    monkeypatch.setattr(cli, "get_settings", lambda: settings)


def test_weyl_lists_relevant_elements(capsys):
    assert cli.main(["weyl", "--n", "3", "--relevant"]) == cli.EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert [entry["label"] for entry in payload] == ["e", "w(1,2)", "w(2,1)", "w_G3"]
    assert payload[-1]["matrix"] == [[0, 0, 1], [0, 1, 0], [1, 0, 0]]


def test_sum_prints_report(capsys):
    assert cli.main(["sum", "--n", "2", "--p", "3", "--a", "1"]) == cli.EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["cell_size"] == 3
    assert payload["magnitude"] == pytest.approx(3.0)
    assert payload["bound"] == pytest.approx(27.0)


def test_sum_writes_to_file(tmp_path):
    out = tmp_path / "sum.json"
    assert cli.main(["sum", "--n", "2", "--p", "3", "--a", "2", "--nu", "1/3", "--out", str(out)]) == cli.EXIT_OK
    assert json.loads(out.read_text(encoding="utf-8"))["params"]["nu"] == ["1/3"]


def test_sum_rejects_composite_modulus():
    assert cli.main(["sum", "--n", "2", "--p", "4", "--a", "1"]) == cli.EXIT_CONFIG


def test_fast_path_needs_rank_four():
    assert cli.main(["sum", "--n", "2", "--p", "3", "--a", "1", "--fast-gl4"]) == cli.EXIT_CONFIG


def test_orbital_with_oracle(capsys):
    assert cli.main(["orbital", "--n", "3", "--p", "2", "--torus", "1,0,-1:1,1,1", "--oracle"]) == cli.EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["dr_value"] == "3"
    assert payload["bruteforce"] == 3


def test_orbital_checks_torus_length():
    assert cli.main(["orbital", "--n", "2", "--p", "2", "--torus", "1,0,-1"]) == cli.EXIT_CONFIG


def test_germ_command(capsys):
    assert cli.main(["germ", "--n", "2", "--p", "3", "--a", "1"]) == cli.EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["normalization"] == "1/3"
    assert payload["composition"] == [2]


def test_check_writes_reports(tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"p": [3], "ell": [1, 2]}), encoding="utf-8")
    out = tmp_path / "out" / "weil.json"
    assert cli.main(["check", "weil", "--grid", str(grid), "--out", str(out)]) == cli.EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["total"] == 2
    assert out.exists()
    assert out.with_suffix(".csv").exists()


def test_check_without_grid_file(tmp_path):
    assert cli.main(["check", "weil", "--grid", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_budget_overflow_exit_code(monkeypatch, tight_settings):
    monkeypatch.setattr(cli, "get_settings", lambda: tight_settings)
    assert cli.main(["sum", "--n", "2", "--p", "3", "--a", "1"]) == cli.EXIT_BUDGET
