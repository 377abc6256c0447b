"""Canonical example bundles.

ex1 is a three-player tree: player 1 commits to one of two states, players 2
and 3 then play a 2x2 zero-sum stage without observing the state.  ex1_factor
is its one-player quotient: the two states become a single terminal class
whose continuation returns the stage equilibrium values as a function of the
conditional state distribution.  ex2 is a two-move threat game with a proper
subtree for player 2; ex3 pools player 2's information (and end knowledge)
across both states so that only the two-root subgame bundle remains.  ex2 and
ex3 share one normal form but differ in their subgame structure.
"""

from __future__ import annotations

import json
from importlib import resources

from .model import GameBundle, bundle_from_dict

__all__ = [
    "ex1",
    "ex1_factor",
    "ex2",
    "ex3",
    "fixture",
    "fixture_names",
    "data_path",
    "write_data_files",
]


def _singletons(terminals):
    return [[t] for t in terminals]


def ex1(s: float = 0.1) -> GameBundle:
    """Three-player commitment tree with a hidden-state zero-sum stage.

    Player 1 picks state x or y; players 2 (L/R) and 3 (l/r) move without
    seeing it.  Payoffs: the 2/3 stage is zero-sum with 9 on the two
    "matching" corners; player 1 gets 1+s at (x,R,l), 1 at (y,L,r), else 0.
    """
    terminals = ["xLl", "xLr", "xRl", "xRr", "yLl", "yLr", "yRl", "yRr"]
    pay1 = {"xRl": 1.0 + s, "yLr": 1.0}
    pay2 = {"xLl": 9.0, "yRr": 9.0}
    data = {
        "players": ["1", "2", "3"],
        "vertices": ["r1", "x", "y", "xL", "xR", "yL", "yR"] + terminals,
        "arrows": [
            ["r1", "x"],
            ["r1", "y"],
            ["x", "xL"],
            ["x", "xR"],
            ["y", "yL"],
            ["y", "yR"],
            ["xL", "xLl"],
            ["xL", "xLr"],
            ["xR", "xRl"],
            ["xR", "xRr"],
            ["yL", "yLl"],
            ["yL", "yLr"],
            ["yR", "yRl"],
            ["yR", "yRr"],
        ],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r1"],
                    "actions": ["X", "Y"],
                    "move": {"r1": {"X": "x", "Y": "y"}},
                }
            ],
            "2": [
                {
                    "nodes": ["x", "y"],
                    "actions": ["L", "R"],
                    "move": {
                        "x": {"L": "xL", "R": "xR"},
                        "y": {"L": "yL", "R": "yR"},
                    },
                }
            ],
            "3": [
                {
                    "nodes": ["xL", "xR", "yL", "yR"],
                    "actions": ["l", "r"],
                    "move": {
                        "xL": {"l": "xLl", "r": "xLr"},
                        "xR": {"l": "xRl", "r": "xRr"},
                        "yL": {"l": "yLl", "r": "yLr"},
                        "yR": {"l": "yRl", "r": "yRr"},
                    },
                }
            ],
        },
        "root_partitions": {p: [["r1"]] for p in "123"},
        "terminal_partitions": {p: _singletons(terminals) for p in "123"},
        "continuations": [
            {
                "class": [t],
                "kind": "constant",
                "payoffs": {
                    "1": pay1.get(t, 0.0),
                    "2": pay2.get(t, 1.0),
                    "3": -pay2.get(t, 1.0),
                },
            }
            for t in terminals
        ],
    }
    return bundle_from_dict(data)


def ex1_factor(s: float = 0.1) -> GameBundle:
    """One-player quotient of ex1: committing to a state distribution.

    The states x and y are terminals forming a single class whose
    continuation is the stage equilibrium value function.  Players 2 and 3
    remain as moveless participants so the value tables stay three-rowed.
    """
    data = {
        "players": ["1", "2", "3"],
        "vertices": ["r1", "x", "y"],
        "arrows": [["r1", "x"], ["r1", "y"]],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r1"],
                    "actions": ["X", "Y"],
                    "move": {"r1": {"X": "x", "Y": "y"}},
                }
            ],
            "2": [],
            "3": [],
        },
        "root_partitions": {p: [["r1"]] for p in "123"},
        "terminal_partitions": {p: [["x", "y"]] for p in "123"},
        "continuations": [
            {
                "class": ["x", "y"],
                "kind": "function",
                "name": "ex1-subgame-value",
                "params": {"s": s},
            }
        ],
    }
    return bundle_from_dict(data)


def ex2() -> GameBundle:
    """Two-player threat game: P ends at X with (1,2); A moves to Y where
    player 2 picks a for (0,0) or p for (2,1).  Y starts a proper subtree."""
    data = {
        "players": ["1", "2"],
        "vertices": ["r", "X", "Y", "Ya", "Yp"],
        "arrows": [["r", "X"], ["r", "Y"], ["Y", "Ya"], ["Y", "Yp"]],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r"],
                    "actions": ["P", "A"],
                    "move": {"r": {"P": "X", "A": "Y"}},
                }
            ],
            "2": [
                {
                    "nodes": ["Y"],
                    "actions": ["a", "p"],
                    "move": {"Y": {"a": "Ya", "p": "Yp"}},
                }
            ],
        },
        "root_partitions": {"1": [["r"]], "2": [["r"]]},
        "terminal_partitions": {
            "1": _singletons(["X", "Ya", "Yp"]),
            "2": _singletons(["X", "Ya", "Yp"]),
        },
        "continuations": [
            {"class": ["X"], "kind": "constant", "payoffs": {"1": 1.0, "2": 2.0}},
            {"class": ["Ya"], "kind": "constant", "payoffs": {"1": 0.0, "2": 0.0}},
            {"class": ["Yp"], "kind": "constant", "payoffs": {"1": 2.0, "2": 1.0}},
        ],
    }
    return bundle_from_dict(data)


def ex3() -> GameBundle:
    """ex2 with player 2 moving unobserved in both states.

    Player 2 has one information set {X, Y} and cannot tell the resulting
    terminals apart beyond their own action, so the meet pools {Xa, Ya} and
    {Xp, Yp}.  Values from state X are action independent; the normal form
    equals ex2's.  The only nondegenerate proper subgame has roots {X, Y}.
    """
    data = {
        "players": ["1", "2"],
        "vertices": ["r", "X", "Y", "Xa", "Xp", "Ya", "Yp"],
        "arrows": [
            ["r", "X"],
            ["r", "Y"],
            ["X", "Xa"],
            ["X", "Xp"],
            ["Y", "Ya"],
            ["Y", "Yp"],
        ],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r"],
                    "actions": ["P", "A"],
                    "move": {"r": {"P": "X", "A": "Y"}},
                }
            ],
            "2": [
                {
                    "nodes": ["X", "Y"],
                    "actions": ["a", "p"],
                    "move": {
                        "X": {"a": "Xa", "p": "Xp"},
                        "Y": {"a": "Ya", "p": "Yp"},
                    },
                }
            ],
        },
        "root_partitions": {"1": [["r"]], "2": [["r"]]},
        "terminal_partitions": {
            "1": _singletons(["Xa", "Xp", "Ya", "Yp"]),
            "2": [["Xa", "Ya"], ["Xp", "Yp"]],
        },
        "continuations": [
            {
                "class": ["Xa", "Ya"],
                "kind": "function",
                "name": "constant-table",
                "params": {"table": {"1": [1.0, 0.0], "2": [2.0, 0.0]}},
            },
            {
                "class": ["Xp", "Yp"],
                "kind": "function",
                "name": "constant-table",
                "params": {"table": {"1": [1.0, 2.0], "2": [2.0, 1.0]}},
            },
        ],
    }
    return bundle_from_dict(data)


_FIXTURES = {
    "ex1": ex1,
    "ex1_factor": ex1_factor,
    "ex2": ex2,
    "ex3": ex3,
}


def fixture_names() -> tuple[str, ...]:
    return tuple(_FIXTURES)


def fixture(name: str, **params) -> GameBundle:
    if name not in _FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; have {sorted(_FIXTURES)}")
    return _FIXTURES[name](**params)


def data_path(name: str):
    """Path to the shipped JSON file of a fixture."""
    return resources.files("gamebush").joinpath("data", f"{name}.gb.json")


def write_data_files(out_dir) -> list[str]:
    """Regenerate the shipped fixture files (default parameters)."""
    from .model import bundle_to_dict
    import os

    written = []
    for name in ("ex1", "ex2", "ex3"):
        path = os.path.join(str(out_dir), f"{name}.gb.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(bundle_to_dict(_FIXTURES[name]()), fh, indent=2)
            fh.write("\n")
        written.append(path)
    return written
