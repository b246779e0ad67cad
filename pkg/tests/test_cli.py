import json
from pathlib import Path

import pytest

from metabne.cli import check_annotations, main

GAMES = Path(__file__).resolve().parent.parent / "games"


def run(tmp_path, *argv):
    out = tmp_path / "out.txt"
    code = main(list(argv) + ["--out", str(out)])
    return code, out.read_text()


def records(text):
    return [json.loads(line) for line in text.splitlines()]


@pytest.mark.parametrize("path", sorted(GAMES.glob("*.*")), ids=lambda p: p.name)
def test_shipped_files_meet_their_annotations(path):
    results = check_annotations(path)
    assert results, "file carries no annotations"
    bad = [r for r in results if not r[1]]
    assert not bad, bad


def test_solve_bne_pd(tmp_path):
    code, text = run(tmp_path, "solve-bne", str(GAMES / "prisoners_dilemma.json"), "--format", "records")
    assert code == 0
    eqs = [r for r in records(text) if r["record"] == "equilibrium"]
    assert len(eqs) == 1 and eqs[0]["profile"]["row"]["-"]["D"] == 1.0


def test_solve_bne_battle_of_sexes_lists_three(tmp_path):
    code, text = run(tmp_path, "solve-bne", str(GAMES / "battle_of_the_sexes.json"), "--format", "records")
    assert code == 0
    assert sum(r["record"] == "equilibrium" for r in records(text)) == 3


@pytest.mark.parametrize("method", ["br", "logit"])
def test_solve_bne_iterative_matching_pennies(tmp_path, method):
    code, text = run(tmp_path, "solve-bne", str(GAMES / "matching_pennies.json"), "--method", method,
                     "--format", "records")
    assert code == 0
    eq = next(r for r in records(text) if r["record"] == "equilibrium")
    row = eq["profile"]["row"]["-"]
    assert abs(row["H"] - 0.5) < 1e-6


def test_solve_meta_singleton_notes_reduction(tmp_path):
    code, text = run(tmp_path, "solve-meta", str(GAMES / "prisoners_dilemma.json"))
    assert code == 0 and "classical" in text


def test_solve_meta_uniqueness_violation(tmp_path):
    code, text = run(tmp_path, "solve-meta", str(GAMES / "pd_or_bos_meta.json"), "--format", "records")
    assert code == 3
    err = next(r for r in records(text) if r["record"] == "error")
    assert err["transformation"] == "bos" and len(err["equilibria"]) == 3


@pytest.mark.parametrize("name, code", [
    ("prisoners_dilemma.json", 0),
    ("unperturbed_coordination.json", 3),
    ("eight_agents.json", 5),
])
def test_audit_exit_codes(tmp_path, name, code):
    assert run(tmp_path, "audit", str(GAMES / name))[0] == code


def test_schema_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"players": []}')
    code, text = run(tmp_path, "solve-bne", str(bad), "--format", "records")
    assert code == 2 and records(text)[-1]["kind"] == "SchemaError"
    bad.write_text("{oops")
    code, text = run(tmp_path, "solve-bne", str(bad))
    assert code == 2 and "line 1" in text


def test_example_subsidy_reports_verdict(tmp_path):
    code, text = run(tmp_path, "example", "subsidy", "--format", "records")
    assert code == 0
    recs = records(text)
    claim = next(r for r in recs if r["record"] == "claim")
    assert claim["status"] == "checked" and claim["weak_pass"] == claim["weak_total"]
    assert any(r["record"] == "meta_equilibrium" for r in recs)


def test_example_override(tmp_path):
    code, text = run(tmp_path, "example", "subsidy", "--set", "s_bar=0.5", "--set", "kappa=[[0,1],[0,1]]",
                     "--format", "records")
    assert code == 0
    params = next(r for r in records(text) if r["record"] == "params")
    assert params["s_bar"] == 0.5
    assert run(tmp_path, "example", "subsidy", "--set", "nope=1")[0] == 2
    assert run(tmp_path, "example", "subsidy", "--set", "q=2")[0] == 2


def test_sweep_with_csv(tmp_path):
    csv_path = tmp_path / "rows.csv"
    code, text = run(tmp_path, "sweep", "subsidy", "--instances", "3", "--csv", str(csv_path),
                     "--format", "records")
    assert code == 0
    summary = next(r for r in records(text) if r["record"] == "summary")
    assert summary["instances"] == 3 and summary["pass_rate"] == 1.0
    assert csv_path.read_text().startswith("instance")


def test_sweep_symmetric_cyber_passes_with_equality(tmp_path):
    code, text = run(tmp_path, "sweep", "cyber", "--instances", "2", "--symmetric-types", "--format", "records")
    assert code == 0
    summary = next(r for r in records(text) if r["record"] == "summary")
    assert summary["weak_pass_instances"] == summary["solved"]


@pytest.mark.parametrize("argv", [
    ["solve-bne", str(GAMES / "battle_of_the_sexes.json"), "--method", "logit", "--seed", "3"],
    ["solve-meta", str(GAMES / "cyber_default.json"), "--method", "br", "--seed", "5"],
    ["sweep", "platform", "--instances", "2", "--seed", "9"],
])
def test_records_are_byte_identical(tmp_path, argv):
    a = run(tmp_path, *argv, "--format", "records")
    b = run(tmp_path, *argv, "--format", "records")
    assert a == b
