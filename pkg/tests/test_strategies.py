import numpy as np
import pytest

from gamebush import fixtures, subgames
from gamebush.payoff_models import NoPlanError
from gamebush.strategies import (
    MixedProfile,
    as_q,
    behaviour_to_mixed,
    compiled,
    enumerate_pure,
    expected_payoffs,
    make_plan,
    mixed_to_behaviour,
    pure_profile,
    reach,
    regularization_lambda,
    uniform_profile,
)


def stage_bundle(s=0.1):
    bundle = fixtures.ex1(s=s)
    lattice = subgames.enumerate_subgame_sets(bundle.bush)
    proper = [
        t
        for t in lattice.sets
        if not t.degenerate and len(t.vertices) < len(bundle.bush.vertices)
    ]
    stage = max(proper, key=lambda t: len(t.vertices))
    return subgames.restrict(bundle, stage)


def test_enumerate_pure_counts():
    ex1 = fixtures.ex1()
    assert len(enumerate_pure(ex1.bush, "1")) == 2
    assert len(enumerate_pure(ex1.bush, "2")) == 2
    assert len(enumerate_pure(ex1.bush, "3")) == 2
    factor = fixtures.ex1_factor()
    # players without decisions get the single empty strategy
    assert [st.choices for st in enumerate_pure(factor.bush, "2")] == [()]


def test_as_q_forms():
    ex2 = fixtures.ex2()
    assert np.allclose(as_q(ex2, None), [1.0])
    stage = stage_bundle()
    roots = compiled(stage).roots
    assert roots == ("x", "y")
    assert np.allclose(as_q(stage, {"x": 0.3, "y": 0.7}), [0.3, 0.7])
    assert np.allclose(as_q(stage, [0.25, 0.75]), [0.25, 0.75])
    with pytest.raises(ValueError):
        as_q(stage, [0.5, 0.6])
    with pytest.raises(ValueError):
        as_q(stage, [-0.1, 1.1])


def test_reach_hand_computed_on_ex1():
    ex1 = fixtures.ex1()
    comp = compiled(ex1)
    sigma = MixedProfile(
        {
            "1": np.array([0.5, 0.5]),
            "2": np.array([0.25, 0.75]),
            "3": np.array([1.0, 0.0]),
        }
    )
    rr = reach(ex1, None, sigma)
    probs = dict(zip(comp.terminals, rr.terminal_probs))
    # strategies line up with action order (X,Y), (L,R), (l,r)
    assert abs(probs["xLl"] - 0.5 * 0.25 * 1.0) <= 1e-12
    assert abs(probs["xRl"] - 0.5 * 0.75 * 1.0) <= 1e-12
    assert abs(probs["yLr"] - 0.0) <= 1e-12
    assert abs(sum(probs.values()) - 1.0) <= 1e-12


def test_reach_respects_q_on_multi_root():
    stage = stage_bundle()
    sigma = uniform_profile(stage)
    rr = reach(stage, {"x": 0.2, "y": 0.8}, sigma)
    comp = compiled(stage)
    x_mass = sum(
        rr.terminal_probs[i] for i, t in enumerate(comp.terminals) if t.startswith("x")
    )
    assert abs(x_mass - 0.2) <= 1e-12


def test_kuhn_roundtrip_preserves_reach():
    rng = np.random.default_rng(7)
    for name in ("ex1", "ex2", "ex3"):
        bundle = fixtures.fixture(name)
        comp = compiled(bundle)
        for _ in range(25):
            sigma = MixedProfile(
                {
                    p: rng.dirichlet(np.ones(len(comp.strategies[p])))
                    for p in comp.players
                }
            )
            beh = mixed_to_behaviour(bundle.bush, sigma)
            assert beh.recall_warning == ()
            back = behaviour_to_mixed(bundle.bush, beh)
            r1 = reach(bundle, None, sigma).terminal_probs
            r2 = reach(bundle, None, back).terminal_probs
            assert np.max(np.abs(r1 - r2)) <= 1e-10


def test_kuhn_roundtrip_on_multi_root_grid():
    stage = stage_bundle()
    comp = compiled(stage)
    rng = np.random.default_rng(8)
    for k in range(5):
        q = {"x": k / 4, "y": 1 - k / 4}
        for _ in range(5):
            sigma = MixedProfile(
                {
                    p: rng.dirichlet(np.ones(len(comp.strategies[p])))
                    for p in comp.players
                }
            )
            back = behaviour_to_mixed(stage.bush, mixed_to_behaviour(stage.bush, sigma))
            r1 = reach(stage, q, sigma).terminal_probs
            r2 = reach(stage, q, back).terminal_probs
            assert np.max(np.abs(r1 - r2)) <= 1e-10


def test_regularization_lambda_exact_and_continuous():
    eps = 1e-3
    assert regularization_lambda(2 * eps, eps) == 1.0
    assert regularization_lambda(eps, eps) == 0.0
    assert regularization_lambda(1.5 * eps, eps) == 0.5
    assert regularization_lambda(0.0, eps) == 0.0
    assert regularization_lambda(1.0, eps) == 1.0
    delta = eps * 1e-13  # small enough that the 1/eps ramp moves < 1e-12
    for brk in (eps, 2 * eps):
        at = regularization_lambda(brk, eps)
        assert abs(regularization_lambda(brk - delta, eps) - at) <= 1e-12
        assert abs(regularization_lambda(brk + delta, eps) - at) <= 1e-12


def test_plan_freezes_payoffs_for_pure_profiles():
    ex2 = fixtures.ex2()
    prof = pure_profile(ex2, {"1": 1, "2": 1})  # A then p
    plan = make_plan(ex2, None, prof)
    pays = expected_payoffs(ex2, plan)
    assert np.allclose(pays, [2.0, 1.0])
    prof = pure_profile(ex2, {"1": 0, "2": 0})  # P (player 2 unreached)
    plan = make_plan(ex2, None, prof)
    assert np.allclose(expected_payoffs(ex2, plan), [1.0, 2.0])


def test_plan_uses_witness_when_class_unreached():
    factor = fixtures.ex1_factor()
    prof = pure_profile(factor, {"1": 0, "2": 0, "3": 0})
    plan = make_plan(factor, None, prof)
    # the single class is always reached here, so no witness is needed
    assert plan.conditionals[0] is not None
    assert np.allclose(plan.conditionals[0], [1.0, 0.0])


def test_plan_raises_on_empty_fiber():
    from gamebush.model import bundle_from_dict

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
            {
                "class": ["a", "b"],
                "kind": "samples",
                "mesh": 1,
                "points": [{"w": [1, 0], "values": [{"1": [1.0, 0.0]}]}],
            }
        ],
    }
    bundle = bundle_from_dict(data)
    sigma = MixedProfile({"1": np.array([0.5, 0.5])})
    with pytest.raises(NoPlanError):
        make_plan(bundle, None, sigma)


def test_mixed_profile_validation():
    with pytest.raises(ValueError):
        MixedProfile({"1": np.array([0.5, 0.6])})
    prof = MixedProfile({"1": np.array([2.0, 1.0])}, normalize=True)
    assert np.allclose(prof["1"], [2 / 3, 1 / 3])
    with pytest.raises(ValueError):
        prof["1"][0] = 0.0  # frozen
