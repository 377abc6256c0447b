import json

import numpy as np
import pytest

from gamebush import fixtures
from gamebush.model import (
    BundleValidationError,
    bundle_from_dict,
    bundle_to_dict,
    load_bundle,
    meet_partition,
    save_bundle,
    validate_bush,
)
from gamebush.payoff_models import (
    FIBER_CAP,
    FunctionModel,
    NoPlanError,
    SampledGraphModel,
)


def _tiny_data(**overrides):
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
        "terminal_partitions": {"1": [["a"], ["b"]]},
        "continuations": [
            {"class": ["a"], "kind": "constant", "payoffs": {"1": 1.0}},
            {"class": ["b"], "kind": "constant", "payoffs": {"1": 0.0}},
        ],
    }
    data.update(overrides)
    return data


def test_fixture_bundles_validate():
    for name in fixtures.fixture_names():
        bundle = fixtures.fixture(name)
        assert validate_bush(bundle.bush) == []


def test_validation_catches_broken_bijection():
    data = _tiny_data()
    data["info_partitions"]["1"][0]["move"]["r"]["h"] = "a"  # two actions, one child
    with pytest.raises(BundleValidationError) as err:
        bundle_from_dict(data)
    assert any("biject" in str(v) or "move" in str(v) for v in err.value.violations)


def test_validation_catches_bad_partition_cover():
    data = _tiny_data(terminal_partitions={"1": [["a"]]})  # b missing
    with pytest.raises(BundleValidationError):
        bundle_from_dict(data)


def test_validation_catches_bad_nature_total():
    data = _tiny_data(nature={"r": {"a": 0.5, "b": 0.2}}, info_partitions={"1": []})
    data["continuations"] = [
        {"class": ["a"], "kind": "constant", "payoffs": {"1": 1.0}},
        {"class": ["b"], "kind": "constant", "payoffs": {"1": 0.0}},
    ]
    with pytest.raises(BundleValidationError) as err:
        bundle_from_dict(data)
    assert any(v.code == "nature-total" for v in err.value.violations)


def test_validation_catches_cycle():
    data = _tiny_data()
    data["arrows"].append(["a", "r"])
    with pytest.raises(BundleValidationError) as err:
        bundle_from_dict(data)
    assert any(v.code == "cycle" for v in err.value.violations)


def test_missing_continuation_reported():
    data = _tiny_data()
    data["continuations"] = data["continuations"][:1]
    with pytest.raises(BundleValidationError) as err:
        bundle_from_dict(data)
    assert any(v.code == "missing-continuation" for v in err.value.violations)


def test_roundtrip_through_json(tmp_path):
    for name in fixtures.fixture_names():
        bundle = fixtures.fixture(name)
        path = tmp_path / f"{name}.gb.json"
        save_bundle(bundle, path)
        again = load_bundle(path)
        assert again.bush.vertices == bundle.bush.vertices
        assert again.bush.arrows == bundle.bush.arrows
        assert bundle_to_dict(again) == bundle_to_dict(bundle)
        # text form is stable json
        text = path.read_text()
        json.loads(text)


def test_meet_partition_pools_common_knowledge():
    ex3 = fixtures.ex3()
    blocks = {frozenset(b) for b in ex3.meet.blocks}
    assert blocks == {frozenset({"Xa", "Ya"}), frozenset({"Xp", "Yp"})}
    ex1 = fixtures.ex1()
    assert all(len(b) == 1 for b in ex1.meet.blocks)


def test_meet_partition_overlap_chain():
    # player 1 pools {a,b}, player 2 pools {b,c}: the meet must chain to {a,b,c}
    data = {
        "players": ["1", "2"],
        "vertices": ["r", "a", "b", "c"],
        "arrows": [["r", "a"], ["r", "b"], ["r", "c"]],
        "nature": {"r": {"a": 0.25, "b": 0.5, "c": 0.25}},
        "info_partitions": {"1": [], "2": []},
        "root_partitions": {"1": [["r"]], "2": [["r"]]},
        "terminal_partitions": {
            "1": [["a", "b"], ["c"]],
            "2": [["a"], ["b", "c"]],
        },
        "continuations": [
            {
                "class": ["a", "b", "c"],
                "kind": "function",
                "name": "constant-table",
                "params": {"table": {"1": [1, 2, 3], "2": [0, 0, 0]}},
            }
        ],
    }
    bundle = bundle_from_dict(data)
    assert [set(b) for b in bundle.meet.blocks] == [{"a", "b", "c"}]


def test_constant_model_fiber_and_table():
    ex2 = fixtures.ex2()
    model = ex2.models[0]
    w = np.array([1.0])
    fib = model.fiber(w)
    assert len(fib) == 1
    assert fib[0].shape == (2, 1)


def test_function_model_constant_table():
    m = FunctionModel(("1", "2"), ("a", "b"), "constant-table", {"table": {"1": [1, 2], "2": [3, 4]}})
    fib = m.fiber(np.array([0.25, 0.75]))
    assert len(fib) == 1
    assert np.allclose(fib[0], [[1, 2], [3, 4]])


def test_ex1_subgame_value_matches_stage_closed_forms():
    # stage equilibrium values as a function of the conditional (p, 1-p):
    # player 2 earns 1+8p-8p^2, player 3 the negative, player 1 the
    # commitment integrand split per state.
    s = 0.1
    m = FunctionModel(("1", "2", "3"), ("x", "y"), "ex1-subgame-value", {"s": s})
    for p in (0.0, 0.25, 0.5, 0.8, 1.0):
        (table,) = m.fiber(np.array([p, 1 - p]))
        v1 = p * table[0, 0] + (1 - p) * table[0, 1]
        f = (1 + s) * (1 - p) * p * p + (1 - p) ** 2 * p
        assert abs(v1 - f) <= 1e-12
        v2 = p * table[1, 0] + (1 - p) * table[1, 1]
        assert abs(v2 - (1 + 8 * p - 8 * p * p)) <= 1e-12
        assert np.allclose(table[2], -table[1])


def _sampled(samples, mesh=2):
    return SampledGraphModel(("1",), ("a", "b"), mesh, samples)


def test_sampled_model_interpolates_on_grid_cells():
    # values 0 at (2,0), 1 at (1,1), 4 at (0,2); PL in between
    m = _sampled(
        {
            (2, 0): [[[0.0, 0.0]]],
            (1, 1): [[[1.0, 1.0]]],
            (0, 2): [[[4.0, 4.0]]],
        }
    )
    (t,) = m.fiber(np.array([0.75, 0.25]))
    assert np.allclose(t, 0.5)
    (t,) = m.fiber(np.array([0.25, 0.75]))
    assert np.allclose(t, 2.5)
    (t,) = m.fiber(np.array([0.5, 0.5]))
    assert np.allclose(t, 1.0)


def test_sampled_model_empty_cell_gives_empty_fiber():
    m = _sampled({(2, 0): [[[0.0, 0.0]]], (0, 2): [[[4.0, 4.0]]]})
    # interior cells touch the missing midpoint sample: empty fiber
    assert m.fiber(np.array([0.75, 0.25])) == []
    # corners remain available
    assert len(m.fiber(np.array([1.0, 0.0]))) == 1


def test_sampled_model_multivalued_combinations_capped():
    # 7 branches at each endpoint would give 49 cell combinations; the cap
    # keeps the fiber bounded
    tables = [[[float(i), float(i)]] for i in range(7)]
    m = SampledGraphModel(("1",), ("a", "b"), 1, {(1, 0): tables, (0, 1): tables})
    fib = m.fiber(np.array([0.5, 0.5]))
    assert 0 < len(fib) <= FIBER_CAP


def test_sampled_model_membership():
    m = _sampled(
        {
            (2, 0): [[[0.0, 0.0]]],
            (1, 1): [[[1.0, 1.0]]],
            (0, 2): [[[4.0, 4.0]]],
        }
    )
    w = np.array([0.75, 0.25])
    assert m.contains(w, np.array([[0.5, 0.5]]))
    assert not m.contains(w, np.array([[0.7, 0.7]]))


def test_no_plan_error_carries_context():
    err = NoPlanError(("a", "b"), np.array([0.5, 0.5]))
    assert "a" in str(err) or "0.5" in str(err)
