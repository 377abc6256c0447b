"""Continuation payoff models attached to terminal classes.

A continuation for a class C with members (t_1 .. t_m) describes a subset of
Delta(C) x R^{N x m}: pairs of a distribution over the class members and a
payoff table (one value per player per member).  Three kinds are supported:

* ``constant``  - a single pair (delta_t, table); the usual game-tree payoff
  when C is a singleton.
* ``function``  - the graph of a registered evaluator w -> table, continuous
  and single valued on all of Delta(C).
* ``samples``   - a finite graph sample on the barycentric grid of Delta(C)
  at some mesh 1/k, interpolated piecewise linearly over the Kuhn
  triangulation of the grid.  Grid points may carry several tables
  (set-valued graphs) or none (declared empty region).

Fibers are reported as finite candidate lists; selectors pick one entry
deterministically.  Every model carries a payoff bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np

MEMBERSHIP_TOL = 1e-6
# candidate lists are capped so set-valued sampled graphs cannot explode
FIBER_CAP = 64


class NoPlanError(RuntimeError):
    """Raised when a required continuation fiber is empty."""

    def __init__(self, class_members, w, detail=""):
        self.class_members = tuple(class_members)
        self.w = None if w is None else np.asarray(w, dtype=float)
        msg = f"empty continuation fiber for class {self.class_members}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


# ---------------------------------------------------------------------------
# barycentric grid utilities


def grid_compositions(k: int, m: int) -> list[tuple[int, ...]]:
    """All m-part compositions of k, lexicographic.  Grid of Delta^{m-1}."""
    if m == 1:
        return [(k,)]
    out = []

    def rec(prefix, rest, slots):
        if slots == 1:
            out.append(prefix + (rest,))
            return
        for v in range(rest + 1):
            rec(prefix + (v,), rest - v, slots - 1)

    rec((), k, m)
    return out


def barycentric_cell(w: np.ndarray, k: int) -> list[tuple[tuple[int, ...], float]]:
    """Containing Kuhn cell of the mesh-1/k grid with barycentric weights.

    Works in cumulative coordinates t_j = sum_{i<=j} k*w_i, where the grid
    triangulation is the standard Freudenthal one and cells never leave the
    order polytope 0 <= t_1 <= ... <= t_{m-1} <= k.  Returns pairs of an
    integer composition (grid point) and its weight; zero-weight vertices
    are dropped.
    """
    w = np.asarray(w, dtype=float)
    m = w.size
    if abs(float(w.sum()) - 1.0) > 1e-7 or float(w.min()) < -1e-9:
        raise ValueError(f"not a distribution: {w!r}")
    if m == 1:
        return [((k,), 1.0)]
    y = np.clip(w, 0.0, 1.0) * k
    t = np.minimum(np.maximum(np.cumsum(y)[:-1], 0.0), float(k))
    c = np.floor(t).astype(np.int64)
    f = t - c
    order = np.argsort(-f, kind="stable")
    verts = [c.copy()]
    for j in order:
        nxt = verts[-1].copy()
        nxt[j] += 1
        verts.append(nxt)
    lams = np.empty(m)
    fs = f[order]
    lams[0] = 1.0 - fs[0]
    for i in range(1, m - 1):
        lams[i] = fs[i - 1] - fs[i]
    lams[m - 1] = fs[m - 2]
    out = []
    for vert, lam in zip(verts, lams):
        if lam <= 1e-12:
            continue
        comp = np.empty(m, dtype=np.int64)
        comp[0] = vert[0]
        for j in range(1, m - 1):
            comp[j] = vert[j] - vert[j - 1]
        comp[m - 1] = k - vert[m - 2]
        if comp.min() < 0 or comp.max() > k:
            raise ValueError(f"interpolation cell left the grid at w={w!r}")
        out.append((tuple(int(v) for v in comp), float(lam)))
    total = sum(lam for _, lam in out)
    return [(cmp_, lam / total) for cmp_, lam in out]


# ---------------------------------------------------------------------------
# builtin function evaluators

_BUILTINS: dict[str, type] = {}


def register_builtin(name: str):
    def deco(cls):
        _BUILTINS[name] = cls
        cls.name = name
        return cls

    return deco


def builtin_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILTINS))


@register_builtin("constant-table")
class ConstantTableEvaluator:
    """Payoff table independent of the conditional distribution."""

    def __init__(self, params, players, members):
        table = params["table"]
        self.table = np.array(
            [[float(table[p][i]) for i in range(len(members))] for p in players]
        )

    def __call__(self, w):
        return self.table

    def bound(self):
        return float(np.max(np.abs(self.table))) + 1.0


@register_builtin("ex1-subgame-value")
class Ex1SubgameValueEvaluator:
    """Equilibrium value of the two-by-two zero-sum stage of the ex1 fixture.

    Members must be the two state nodes in (x, y) order.  With p the weight
    on x, the stage equilibrium mixes both matrix players at 1 - p, giving
    the mover (1+s)(1-p)p from x and (1-p)p from y, and the matrix payoff
    1 + 8(1-p)^2 from x, 1 + 8p^2 from y to the maximizer.
    """

    def __init__(self, params, players, members):
        if len(members) != 2:
            raise ValueError("ex1-subgame-value needs a two-member class")
        if len(players) != 3:
            raise ValueError("ex1-subgame-value needs three players")
        self.s = float(params["s"])

    def __call__(self, w):
        p = float(w[0])
        one = np.array([(1.0 + self.s) * (1.0 - p) * p, (1.0 - p) * p])
        two = np.array([1.0 + 8.0 * (1.0 - p) ** 2, 1.0 + 8.0 * p * p])
        return np.stack([one, two, -two])

    def bound(self):
        return 10.0 + self.s


# ---------------------------------------------------------------------------
# models


class PayoffModel:
    kind = "abstract"

    def __init__(self, players, members):
        self.players = tuple(players)
        self.members = tuple(members)

    @property
    def nplayers(self):
        return len(self.players)

    @property
    def size(self):
        return len(self.members)

    def fiber(self, w) -> list[np.ndarray]:
        raise NotImplementedError

    def bound(self) -> float:
        raise NotImplementedError

    def constant_table(self):
        """The table when the model is w-independent, else None."""
        return None

    def distance(self, w, y) -> float:
        cands = self.fiber(w)
        if not cands:
            return float("inf")
        y = np.asarray(y, dtype=float)
        return min(float(np.linalg.norm(y - c)) for c in cands)

    def contains(self, w, y, tol=MEMBERSHIP_TOL) -> bool:
        return self.distance(w, y) <= tol

    def witness_near(self, w) -> np.ndarray:
        """A distribution with non-empty fiber, as close to w as available."""
        w = np.asarray(w, dtype=float)
        if self.fiber(w):
            return w
        raise NoPlanError(self.members, w)

    def barycenter(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def to_json(self) -> dict:
        raise NotImplementedError


class ConstantPointModel(PayoffModel):
    """A single (delta_t, table) pair."""

    kind = "constant"

    def __init__(self, players, members, point: str, table: np.ndarray):
        super().__init__(players, members)
        if point not in self.members:
            raise ValueError(f"point {point!r} not a class member")
        self.point = point
        self.table = np.asarray(table, dtype=float).reshape(
            (len(self.players), len(self.members))
        )
        self._delta = np.zeros(self.size)
        self._delta[self.members.index(point)] = 1.0

    def fiber(self, w):
        w = np.asarray(w, dtype=float)
        if float(np.max(np.abs(w - self._delta))) <= 1e-9:
            return [self.table]
        return []

    def bound(self):
        return float(np.max(np.abs(self.table))) + 1.0

    def constant_table(self):
        # single-member classes have only one admissible conditional, so the
        # table is effectively unconditional; larger classes are point-pinned
        if self.size == 1:
            return self.table
        return None

    def witness_near(self, w):
        return self._delta.copy()

    def to_json(self):
        if self.size == 1:
            payoffs = {p: float(self.table[i, 0]) for i, p in enumerate(self.players)}
        else:
            payoffs = {
                p: {t: float(self.table[i, j]) for j, t in enumerate(self.members)}
                for i, p in enumerate(self.players)
            }
        return {
            "class": list(self.members),
            "kind": "constant",
            "point": self.point,
            "payoffs": payoffs,
        }


class FunctionModel(PayoffModel):
    """Graph of a registered continuous evaluator, single valued everywhere."""

    kind = "function"

    def __init__(self, players, members, name: str, params: dict | None = None):
        super().__init__(players, members)
        if name not in _BUILTINS:
            raise ValueError(f"unknown continuation function {name!r}")
        self.name = name
        self.params = dict(params or {})
        self._eval = _BUILTINS[name](self.params, self.players, self.members)

    def fiber(self, w):
        w = np.asarray(w, dtype=float)
        return [np.asarray(self._eval(w), dtype=float)]

    def bound(self):
        return float(self._eval.bound())

    def constant_table(self):
        if isinstance(self._eval, ConstantTableEvaluator):
            return self._eval.table
        return None

    def witness_near(self, w):
        return np.asarray(w, dtype=float)

    def to_json(self):
        return {
            "class": list(self.members),
            "kind": "function",
            "name": self.name,
            "params": dict(self.params),
        }


class SampledGraphModel(PayoffModel):
    """Finite graph sample on the mesh-1/k grid of Delta(C), PL interpolated.

    ``samples`` maps integer grid compositions to lists of tables.  Grid
    points without an entry are declared empty; a query whose interpolation
    cell touches an empty point has an empty fiber there.
    """

    kind = "samples"

    def __init__(self, players, members, mesh: int, samples: dict):
        super().__init__(players, members)
        self.mesh = int(mesh)
        if self.mesh < 1:
            raise ValueError("mesh must be a positive integer")
        self.samples: dict[tuple[int, ...], list[np.ndarray]] = {}
        shape = (len(self.players), len(self.members))
        for comp, tables in samples.items():
            comp = tuple(int(v) for v in comp)
            if len(comp) != self.size or sum(comp) != self.mesh or min(comp) < 0:
                raise ValueError(f"bad grid point {comp!r} for mesh {self.mesh}")
            entry = [np.asarray(t, dtype=float).reshape(shape) for t in tables]
            if entry:
                self.samples[comp] = entry

    def fiber(self, w):
        cell = barycentric_cell(w, self.mesh)
        lists = []
        for comp, lam in cell:
            tables = self.samples.get(comp)
            if not tables:
                return []
            lists.append((tables, lam))
        combos = []
        for choice in iter_product(*(range(len(ts)) for ts, _ in lists)):
            y = np.zeros((self.nplayers, self.size))
            for (tables, lam), idx in zip(lists, choice):
                y += lam * tables[idx]
            combos.append(y)
            if len(combos) >= FIBER_CAP:
                break
        # dedupe near-identical candidates, keeping first-seen order
        out = []
        for y in combos:
            if all(float(np.max(np.abs(y - z))) > 1e-12 for z in out):
                out.append(y)
        return out

    def bound(self):
        top = 0.0
        for tables in self.samples.values():
            for t in tables:
                top = max(top, float(np.max(np.abs(t))))
        return top + 1.0

    def witness_near(self, w):
        w = np.asarray(w, dtype=float)
        if self.fiber(w):
            return w
        if not self.samples:
            raise NoPlanError(self.members, w, "sampled graph is empty")
        best = min(
            self.samples,
            key=lambda comp: float(
                np.linalg.norm(np.asarray(comp, dtype=float) / self.mesh - w)
            ),
        )
        return np.asarray(best, dtype=float) / self.mesh

    def to_json(self):
        points = []
        for comp in sorted(self.samples):
            points.append(
                {
                    "w": list(comp),
                    "values": [
                        {
                            p: [float(t[i, j]) for j in range(self.size)]
                            for i, p in enumerate(self.players)
                        }
                        for t in self.samples[comp]
                    ],
                }
            )
        return {
            "class": list(self.members),
            "kind": "samples",
            "mesh": self.mesh,
            "points": points,
        }


# ---------------------------------------------------------------------------
# selectors


@dataclass(frozen=True)
class Selector:
    """Deterministic choice among fiber candidates.

    ``first`` keeps the first candidate, ``nearest`` the one of smallest
    norm distance to the candidate list's own centroid (a stable tie break
    for set-valued graphs), and ``index:k`` the k-th candidate modulo the
    fiber size.
    """

    name: str = "first"

    def choose(self, candidates: list[np.ndarray], w) -> int:
        if not candidates:
            raise ValueError("empty candidate list")
        if self.name == "first":
            return 0
        if self.name == "nearest":
            centroid = np.mean(np.stack(candidates), axis=0)
            dists = [float(np.linalg.norm(c - centroid)) for c in candidates]
            return int(np.argmin(dists))
        if self.name.startswith("index:"):
            return int(self.name.split(":", 1)[1]) % len(candidates)
        raise ValueError(f"unknown selector {self.name!r}")


def parse_model(entry: dict, players) -> PayoffModel:
    members = tuple(entry["class"])
    kind = entry["kind"]
    if kind == "constant":
        payoffs = entry["payoffs"]
        if len(members) == 1:
            point = entry.get("point", members[0])
            table = np.array([[float(payoffs[p])] for p in players])
        else:
            point = entry["point"]
            table = np.array(
                [[float(payoffs[p][t]) for t in members] for p in players]
            )
        return ConstantPointModel(players, members, point, table)
    if kind == "function":
        return FunctionModel(players, members, entry["name"], entry.get("params"))
    if kind == "samples":
        samples = {}
        for pt in entry["points"]:
            comp = tuple(int(v) for v in pt["w"])
            tables = [
                np.array([[float(val[p][j]) for j in range(len(members))] for p in players])
                for val in pt["values"]
            ]
            samples[comp] = tables
        return SampledGraphModel(players, members, entry["mesh"], samples)
    raise ValueError(f"unknown continuation kind {kind!r}")
