import csv

import pytest

from msrsim import graph as G
from msrsim.cli import EXIT_CAP, EXIT_INPUT, EXIT_INVARIANT, EXIT_OK, EXIT_REFUTED, main


def edge_file(tmp_path, g, name="g.txt"):
    p = tmp_path / name
    G.write_edge_list(g, p)
    return str(p)


def test_run_preset_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "prop1_attack_f1", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "verdict: no convergence" in text
    assert "groups: " in text
    for f in ("trace.csv", "metrics.csv", "positions.svg", "velocities.svg"):
        assert (out / f).stat().st_size > 0
    rows = list(csv.reader(open(out / "trace.csv")))
    assert rows[0] == ["k", "vehicle", "x", "v", "u", "updated", "retained"]
    assert len(rows) == 1 + 2001 * 7
    assert (out / "positions.svg").read_text().startswith("<svg")


def test_run_converging(tmp_path, capsys):
    assert main(["run", "setting1_success", "--out", str(tmp_path)]) == EXIT_OK
    assert "verdict: converged at step" in capsys.readouterr().out


def test_run_empty_horizon(tmp_path, capsys):
    src = tmp_path / "z.scn"
    src.write_text(
        "n: 2\nf: 0\nT: 0.1\nr: 0\ngraph: {edges: [[0, 1], [1, 0]]}\n"
        "alpha: [1, 1]\nx0: [0, 1]\nv0: [0, 0]\nhorizon: 0\n"
    )
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "verdict: none (empty horizon)" in capsys.readouterr().out


def test_run_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.scn")]) == EXIT_INPUT
    bad = tmp_path / "b.scn"
    bad.write_text("n: 2\nwat: 1\n")
    assert main(["run", str(bad)]) == EXIT_INPUT
    assert f"{bad}:2:1" in capsys.readouterr().err
    inv = tmp_path / "i.scn"
    inv.write_text(
        "n: 2\nf: 0\nT: 0.1\nr: 0\ngraph: {edges: [[0, 1], [1, 0]]}\n"
        "alpha: [1, 1]\nx0: [0]\nv0: [0, 0]\nhorizon: 3\n"
    )
    assert main(["run", str(inv)]) == EXIT_INVARIANT


def test_check_robustness(tmp_path, capsys):
    k4 = edge_file(tmp_path, G.complete(4))
    assert main(["check-robustness", k4, "2", "2"]) == EXIT_OK
    assert "certified: (2, 2)-robust" in capsys.readouterr().out
    assert main(["check-robustness", k4, "3"]) == EXIT_REFUTED
    out = capsys.readouterr().out
    assert "refuted" in out and "witness: V1 = " in out
    assert main(["check-robustness", k4, "--max"]) == EXIT_OK
    assert "top: (2, 3)" in capsys.readouterr().out


def test_check_robustness_cap(tmp_path, capsys):
    p = edge_file(tmp_path, G.complete(14))
    assert main(["check-robustness", p, "2"]) == EXIT_CAP
    assert "refused" in capsys.readouterr().err
    assert main(["check-robustness", p, "1", "--cap", "14"]) == EXIT_OK


def test_check_robustness_bad_input(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3\n0 7\n")
    assert main(["check-robustness", str(p), "1"]) == EXIT_INPUT
    assert main(["check-robustness", edge_file(tmp_path, G.complete(3))]) == EXIT_INPUT


def test_generate(tmp_path, capsys):
    out = tmp_path / "c.txt"
    assert main(["generate", "counterexample", "--f", "1", "--out", str(out)]) == EXIT_OK
    assert G.read_edge_list(out) == G.counterexample(1)
    capsys.readouterr()
    assert main(["generate", "complete", "--n", "3"]) == EXIT_OK
    assert G.parse_edge_list(capsys.readouterr().out) == G.complete(3)
    assert main(["generate", "random", "--n", "5", "--seed", "3", "--out", str(out)]) == EXIT_OK
    assert G.read_edge_list(out) == G.random_digraph(5, 0.5, 3)
    assert main(["generate", "complete"]) == EXIT_INPUT


def test_presets(capsys):
    assert main(["presets", "list"]) == EXIT_OK
    assert "setting1_fail" in capsys.readouterr().out.split()
    assert main(["presets", "show", "prop1_attack_f1"]) == EXIT_OK
    assert "alternating" in capsys.readouterr().out
    assert main(["presets", "path", "nope"]) == EXIT_INPUT


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2
