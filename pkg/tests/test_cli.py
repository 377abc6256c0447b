import json

import numpy as np
import pytest

from gamebush import fixtures, subgames
from gamebush.cli import main
from gamebush.model import save_bundle
from gamebush.solver import verify_myopic
from gamebush.spanning import (
    graph_correspondence,
    interval_pair,
    make_correspondence,
    save_correspondence,
)
from gamebush.strategies import MixedProfile


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def ex2_path(tmp_path):
    p = tmp_path / "ex2.json"
    save_bundle(fixtures.ex2(), p)
    return str(p)


@pytest.fixture()
def stage_path(tmp_path):
    bundle = fixtures.ex1()
    lattice = subgames.enumerate_subgame_sets(bundle.bush)
    proper = [
        t
        for t in lattice.sets
        if not t.degenerate and len(t.vertices) < len(bundle.bush.vertices)
    ]
    stage = subgames.restrict(bundle, max(proper, key=lambda t: len(t.vertices)))
    p = tmp_path / "stage.json"
    save_bundle(stage, p)
    return str(p)


def test_validate_reports_a_clean_bundle(capsys, ex2_path):
    code, out, err = run(capsys, "validate", "--input", ex2_path)
    assert code == 0
    report = json.loads(out)
    assert report["ok"] is True
    assert report["perfect_recall"] is True
    assert report["players"] == ["1", "2"]


def test_validate_rejects_a_broken_bundle(capsys, tmp_path):
    data = {
        "players": ["1"],
        "vertices": ["r", "a"],
        "arrows": [["r", "a"]],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r"],
                    "actions": ["l", "h"],
                    "move": {"r": {"l": "a", "h": "a"}},
                }
            ]
        },
        "root_partitions": {"1": [["r"]]},
        "terminal_partitions": {"1": [["a"]]},
        "continuations": [{"class": ["a"], "kind": "constant", "values": {"1": [0.0]}}],
    }
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(data))
    code, out, err = run(capsys, "validate", "--input", str(p))
    assert code == 1
    report = json.loads(err)
    assert report["violations"]


def test_missing_input_and_bad_flags(capsys, ex2_path, tmp_path):
    code, _, err = run(capsys, "solve", "--input", str(tmp_path / "nope.json"))
    assert code == 1
    code, _, err = run(capsys, "solve", "--input", ex2_path, "--mesh", "1")
    assert code == 1
    code, _, err = run(capsys, "solve", "--input", ex2_path, "--q", "0.5,0.5")
    assert code == 1  # ex2 has a single root


def test_solve_output_reverifies_and_is_deterministic(capsys, ex2_path):
    code, out1, _ = run(capsys, "solve", "--input", ex2_path, "--seed", "7")
    assert code == 0
    code, out2, _ = run(capsys, "solve", "--input", ex2_path, "--seed", "7")
    assert out1 == out2
    report = json.loads(out1)
    bundle = fixtures.ex2()
    assert report["equilibria"]
    for eq in report["equilibria"]:
        sigma = MixedProfile({k: np.array(v) for k, v in eq["profile"].items()})
        cert = verify_myopic(bundle, None, sigma, tol=1e-6)
        assert cert.residual <= 1e-6
        assert eq["residual"] <= 1e-9


def test_solve_csv_has_full_precision(capsys, stage_path):
    code, out, _ = run(
        capsys, "solve", "--input", stage_path, "--q", "0.3,0.7", "--format", "csv"
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("q_")
    assert len(lines) > 1
    cells = lines[1].split(",")
    floats = [c for c in cells if "." in c or "e" in c]
    assert any(len(c.replace("-", "").replace(".", "").lstrip("0")) > 10 for c in floats)
    # round-trip through float is loss-free at 17 significant digits
    for c in floats:
        assert f"{float(c):.17g}" == c


def test_solve_exits_two_when_no_plan_exists(capsys, tmp_path):
    data = {
        "players": ["1"],
        "vertices": ["r", "a", "b"],
        "arrows": [["r", "a"], ["r", "b"]],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r"],
                    "actions": ["l", "h"],
                    "move": {"r": {"l": "a", "h": "b"}},
                }
            ]
        },
        "root_partitions": {"1": [["r"]]},
        "terminal_partitions": {"1": [["a", "b"]]},
        "continuations": [
            {"class": ["a", "b"], "kind": "samples", "mesh": 1, "points": []}
        ],
    }
    p = tmp_path / "gaps.json"
    p.write_text(json.dumps(data))
    code, out, _ = run(capsys, "solve", "--input", str(p))
    assert code == 2
    report = json.loads(out)
    assert report["equilibria"] == []


def test_subgames_lists_the_lattice(capsys, ex2_path):
    code, out, _ = run(capsys, "subgames", "--input", ex2_path)
    assert code == 0
    report = json.loads(out)
    assert len(report["lattice"]["sets"]) == 11
    chain = report["solvable"]
    assert chain[0] == [] and sorted(chain[-1]) == sorted(
        fixtures.ex2().bush.vertices
    )


def test_sweep_writes_table_files(capsys, stage_path, tmp_path):
    out_dir = tmp_path / "sweepout"
    code, out, _ = run(
        capsys,
        "sweep",
        "--input",
        stage_path,
        "--mesh",
        "4",
        "--out-dir",
        str(out_dir),
    )
    assert code == 0
    report = json.loads(out)
    assert report["points"] == 5 and report["empty_points"] == 0
    csv_text = (out_dir / "sweep.csv").read_text()
    assert csv_text.splitlines()[0].startswith("q_")
    table = json.loads((out_dir / "sweep.json").read_text())
    assert len(table["points"]) == 5


def test_perfect_filters_ex2(capsys, ex2_path):
    code, out, _ = run(capsys, "perfect", "--input", ex2_path)
    assert code == 0
    report = json.loads(out)
    eqs = report["results"][0]["equilibria"]
    # only equilibria passing every subgame check are emitted: exactly one
    assert len(eqs) == 1
    assert eqs[0]["all_perfect"] is True
    payoffs = eqs[0]["certificate"]["payoffs"]
    assert np.allclose([payoffs["1"], payoffs["2"]], [2.0, 1.0], atol=1e-6)
    assert eqs[0]["statuses"]
    assert all(st["verdict"] == "true" for st in eqs[0]["statuses"].values())


def test_span_verb_reports_both_ways(capsys, tmp_path):
    pair = interval_pair(segments=4)
    good = graph_correspondence(pair, [v[0] for v in pair.vertices])
    gp = tmp_path / "good.json"
    save_correspondence(good, gp)
    code, out, _ = run(capsys, "span", "--input", str(gp))
    assert code == 0
    report = json.loads(out)
    assert report["spanning"] is True
    assert report["witness"]
    assert report["pair"]["dimension"] == 1

    bad = make_correspondence(
        pair,
        good.labels,
        [s for s in good.simplices if good.image(s) != (2, 3)],
    )
    bp = tmp_path / "bad.json"
    save_correspondence(bad, bp)
    code, out, _ = run(capsys, "span", "--input", str(bp))
    assert code == 0
    report = json.loads(out)
    assert report["spanning"] is False and report["witness"] is None


def test_example_reports(capsys):
    code, out, _ = run(capsys, "example", "ex2")
    assert code == 0
    report = json.loads(out)
    assert report["checks_pass"] is True

    code, out, _ = run(capsys, "example", "ex3")
    assert code == 0
    report = json.loads(out)
    assert report["checks_pass"] is True
    assert report["normal_form_equivalent_to_ex2"] is True

    code, out, _ = run(capsys, "example", "ex1", "--mesh", "4", "--s", "0.1")
    assert code == 0
    report = json.loads(out)
    assert report["checks_pass"] is True
    assert abs(report["committed"]["p_star_closed_form"] - 0.5118845843) <= 1e-9
    assert report["subgame_grid"]["max_residual"] <= 1e-9
