"""CLI end to end: exit codes, printed evaluations, piped sessions, file round trips."""

import io
import json
from pathlib import Path

import pytest

from querylearn.cli import main, _parse_grid

DATA = Path(__file__).parent / "data"
TOY1 = str(DATA / "toy1.yaml")
TOY2 = str(DATA / "toy2.yaml")
TOY3 = str(DATA / "toy3.yaml")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_build_reports_both_evaluations(capsys):
    code, out, _ = run(capsys, "build", "--problem", TOY1, "--strategy", "gisa")
    assert code == 0
    assert "4 objects, 3 queries (2 object groups" in out
    assert "E[K] by formula    1.000000" in out
    assert "E[K] by traversal  1.000000" in out
    assert "entropy bound      0.811278" in out
    assert "seed=none" in out


def test_build_object_identification_golden(capsys):
    code, out, _ = run(capsys, "build", "--problem", TOY1, "--strategy", "gbs")
    assert code == 0
    assert "E[K] by formula    2.000000" in out
    assert "overall rho        0.500000" in out
    assert "balance bound      2.000000" in out


def test_build_group_query_golden(capsys):
    code, out, _ = run(capsys, "build", "--problem", TOY2, "--strategy", "gqsa")
    assert code == 0
    assert "E[K] by formula    1.666667" in out


def test_build_writes_a_tree_document(capsys, tmp_path):
    out_path = tmp_path / "tree.json"
    code, out, _ = run(capsys, "build", "--problem", TOY1, "--strategy", "gisa",
                       "--out", str(out_path))
    assert code == 0
    assert f"tree written to {out_path}" in out
    doc = json.loads(out_path.read_text())
    assert doc["format"] == "decision-tree"
    assert doc["root"]["query"] == "q2"


def test_missing_problem_file(capsys):
    code, _, err = run(capsys, "build", "--problem", "/nonexistent.yaml",
                       "--strategy", "gbs")
    assert code == 2
    assert "error:" in err


def test_malformed_problem_document(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("objects: [a, b]\nqueries: [q1]\nmatrix: [[0], [0], [1]]\n")
    code, _, err = run(capsys, "build", "--problem", str(bad), "--strategy", "gbs")
    assert code == 2
    assert "error:" in err


def test_generate_group_needs_parameters(capsys, tmp_path):
    code, _, err = run(capsys, "generate", "--mode", "group",
                       "--out", str(tmp_path / "x.yaml"))
    assert code == 2
    assert "needs --gamma-w/--gamma-b or --d1/--d2" in err


def test_generate_then_build(capsys, tmp_path):
    out = tmp_path / "gen.yaml"
    code, msg, _ = run(capsys, "generate", "--mode", "group",
                       "--queries", "16", "--group-sizes", "5,4,3",
                       "--d1", "0.3", "--d2", "0.2", "--seed", "9",
                       "--out", str(out))
    assert code == 0
    assert "wrote 12x16 problem" in msg
    assert "seed=9" in msg
    code, out_text, _ = run(capsys, "build", "--problem", str(out), "--strategy", "gisa")
    assert code == 0
    assert "E[K] by formula" in out_text


def test_generate_query_group_mode(capsys, tmp_path):
    out = tmp_path / "qg.yaml"
    code, msg, _ = run(capsys, "generate", "--mode", "query-group",
                       "--objects", "10", "--group-sizes", "4,3",
                       "--gamma-max", "0.9", "--ensure", "distinct",
                       "--seed", "2", "--out", str(out))
    assert code == 0
    assert "wrote 10x7 problem" in msg
    code, out_text, _ = run(capsys, "build", "--problem", str(out), "--strategy", "gqsa")
    assert code == 0


def test_parse_grid():
    assert _parse_grid("d1=0.2,0.5;d2=0.1") == {"d1": [0.2, 0.5], "d2": [0.1]}
    assert _parse_grid("gamma-max=0.7,0.9") == {"gamma-max": [0.7, 0.9]}
    assert _parse_grid(None) == {}


def test_sweep_group_to_stdout(capsys):
    code, out, _ = run(capsys, "sweep", "--mode", "group",
                       "--grid", "d1=0.2;d2=0.1", "--runs", "2", "--seed", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("sweep,cell,strategy,runs,mean_ek")
    assert len(lines) == 3
    assert "group-identification" in lines[1]


def test_sweep_query_group_to_file(capsys, tmp_path):
    out = tmp_path / "qg.csv"
    code, msg, _ = run(capsys, "sweep", "--mode", "query-group",
                       "--grid", "gamma-max=0.9", "--runs", "1", "--seed", "3",
                       "--objects", "30", "--objects-per-run", "4",
                       "--out", str(out))
    assert code == 0
    assert "wrote 5 rows" in msg
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 6
    assert any(",min-max," in ln for ln in lines)


def test_noise_sim_csv(capsys):
    code, out, _ = run(capsys, "noise-sim", "--problem", TOY3,
                       "--nu", "0,1", "--runs", "5", "--seed", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("cell,strategy,trials,mean_queries")
    assert len(lines) == 5  # 2 cells x 2 strategies


def _pipe(monkeypatch, text):
    monkeypatch.setattr("sys.stdin", io.StringIO(text))


def test_session_identifies_with_bare_digits(capsys, monkeypatch, tmp_path):
    transcript = tmp_path / "t.json"
    _pipe(monkeypatch, "0\n1\n")
    code, out, _ = run(capsys, "session", "--problem", TOY1, "--strategy", "gbs",
                       "--out", str(transcript))
    assert code == 0
    assert "[1] ask q1" in out
    assert "[2] ask q3" in out
    assert "identified: {'object': 'theta1'}" in out

    code, out, _ = run(capsys, "replay", "--problem", TOY1,
                       "--transcript", str(transcript))
    assert code == 0
    assert "replayed 2 steps: status=identified outcome={'object': 'theta1'}" in out


def test_session_quit_reports_posterior(capsys, monkeypatch):
    _pipe(monkeypatch, "quit\n")
    code, out, _ = run(capsys, "session", "--problem", TOY1, "--strategy", "gbs")
    assert code == 1
    assert "stopped early; most likely:" in out


def test_session_rejects_offlist_queries_then_recovers(capsys, monkeypatch):
    _pipe(monkeypatch, "q2 1\nq1 yes\nq2 no\n")
    code, out, _ = run(capsys, "session", "--problem", TOY1, "--strategy", "gbs")
    assert code == 0
    assert "not among the suggested" in out
    assert "identified: {'object': 'theta4'}" in out


def test_session_handles_eof(capsys, monkeypatch):
    _pipe(monkeypatch, "")
    code, out, _ = run(capsys, "session", "--problem", TOY1, "--strategy", "gbs")
    assert code == 1
    assert "input closed" in out


def test_session_group_suggestions(capsys, monkeypatch):
    _pipe(monkeypatch, "q1 0\n")
    code, out, _ = run(capsys, "session", "--problem", TOY2, "--strategy", "gqsa")
    assert code == 0
    assert "ask one of group 1: q1 (p=0.500), q2 (p=0.500)" in out
    assert "identified: {'object': 'theta1'}" in out


def test_noisy_session_needs_noise_block(capsys, monkeypatch):
    _pipe(monkeypatch, "0\n")
    code, _, err = run(capsys, "session", "--problem", TOY1, "--strategy", "noisy-gisa")
    assert code == 2
    assert "needs a noise block" in err


def test_noisy_session_runs(capsys, monkeypatch):
    _pipe(monkeypatch, "1\n")
    code, out, _ = run(capsys, "session", "--problem", TOY3, "--strategy", "noisy-gisa")
    assert code == 0
    assert "[1] ask q1" in out
    assert "identified: {'object': 'theta2'}" in out


def test_replay_rejects_a_tampered_transcript(capsys, monkeypatch, tmp_path):
    transcript = tmp_path / "t.json"
    _pipe(monkeypatch, "0\n1\n")
    code, _, _ = run(capsys, "session", "--problem", TOY1, "--strategy", "gbs",
                     "--out", str(transcript))
    assert code == 0
    doc = json.loads(transcript.read_text())
    doc["outcome"] = {"object": "theta2"}
    transcript.write_text(json.dumps(doc))
    code, _, err = run(capsys, "replay", "--problem", TOY1,
                       "--transcript", str(transcript))
    assert code == 2
    assert "outcome" in err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "querylearn" in capsys.readouterr().out
