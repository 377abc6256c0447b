"""Multi-root game forms (bushes) and their payoff-carrying bundles.

A bush is a finite directed forest with several roots: every non-root
vertex has exactly one incoming arrow, every non-terminal at least two
outgoing ones, so each terminal is reached by a unique path from a unique
root.  Non-terminal vertices are either nature nodes carrying a strictly
positive distribution over their children, or decision nodes of exactly one
player.  Each player's decision nodes are partitioned into information sets
whose members look alike (same action set, with an explicit bijection from
actions to children at every member).  Each player also carries a partition
of the roots (what they can distinguish about where play started) and one
of the terminals (what they can distinguish about where it ended).

The terminal classes of the bundle are the blocks of the meet of all the
players' terminal partitions: the finest partition coarser than each of
them, i.e. the connected components of the block overlap graph.  Every
class carries a continuation payoff model (see payoff_models).

Everything here is immutable after construction; validation never mutates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .payoff_models import PayoffModel, parse_model

__all__ = [
    "GameBush",
    "GameBundle",
    "MeetPartition",
    "Violation",
    "BundleValidationError",
    "InfoSet",
    "validate_bush",
    "meet_partition",
    "load_bundle",
    "save_bundle",
    "bundle_from_dict",
    "bundle_to_dict",
]


@dataclass(frozen=True)
class InfoSet:
    player: str
    index: int
    nodes: tuple[str, ...]
    actions: tuple[str, ...]
    move: dict  # node -> action -> child

    @property
    def label(self) -> str:
        return f"{self.player}:{self.index}"


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    vertices: tuple[str, ...] = ()

    def __str__(self):
        where = f" [{', '.join(self.vertices)}]" if self.vertices else ""
        return f"{self.code}: {self.message}{where}"


class BundleValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} validation failure(s):\n{lines}")


class GameBush:
    """Immutable multi-root game form.

    Construction resolves the derived structure (children, parents, roots,
    terminals, paths) and raises ValueError only on references to unknown
    ids; semantic problems are reported by validate_bush instead.
    """

    def __init__(
        self,
        players,
        vertices,
        arrows,
        nature,
        info,
        root_partition,
        terminal_partition,
    ):
        self.players: tuple[str, ...] = tuple(players)
        self.vertices: tuple[str, ...] = tuple(vertices)
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        for u, v in arrows:
            if u not in vset or v not in vset:
                raise ValueError(f"arrow ({u!r}, {v!r}) references unknown vertex")
        self.arrows: tuple[tuple[str, str], ...] = tuple(
            (str(u), str(v)) for u, v in arrows
        )

        self._children: dict[str, list[str]] = {v: [] for v in self.vertices}
        self._parent: dict[str, str | None] = {v: None for v in self.vertices}
        self._indeg: dict[str, int] = {v: 0 for v in self.vertices}
        for u, v in self.arrows:
            self._children[u].append(v)
            self._indeg[v] += 1
            if self._parent[v] is None:
                self._parent[v] = u

        self.roots: tuple[str, ...] = tuple(
            v for v in self.vertices if self._indeg[v] == 0
        )
        self.terminals: tuple[str, ...] = tuple(
            v for v in self.vertices if not self._children[v]
        )

        self.nature: dict[str, dict[str, Fraction | float]] = {}
        for v, dist in dict(nature).items():
            if v not in vset:
                raise ValueError(f"nature node {v!r} unknown")
            self.nature[v] = {str(c): p for c, p in dist.items()}

        self.info: dict[str, tuple[InfoSet, ...]] = {}
        for p in self.players:
            blocks = []
            for idx, blk in enumerate(info.get(p, ())):
                if isinstance(blk, InfoSet):
                    blocks.append(blk)
                    continue
                nodes = tuple(blk["nodes"])
                actions = tuple(blk["actions"])
                move = {n: dict(blk["move"][n]) for n in nodes if n in blk["move"]}
                blocks.append(InfoSet(p, idx, nodes, actions, move))
            self.info[p] = tuple(blocks)

        self.root_partition = {
            p: tuple(tuple(b) for b in root_partition.get(p, ()))
            for p in self.players
        }
        self.terminal_partition = {
            p: tuple(tuple(b) for b in terminal_partition.get(p, ()))
            for p in self.players
        }

        self._owner: dict[str, tuple[str, InfoSet] | None] = {
            v: None for v in self.vertices
        }
        for p in self.players:
            for blk in self.info[p]:
                for n in blk.nodes:
                    if n in self._owner and self._owner[n] is None:
                        self._owner[n] = (p, blk)

    # -- structure access ---------------------------------------------------

    def children(self, v: str) -> tuple[str, ...]:
        return tuple(self._children[v])

    def parent(self, v: str) -> str | None:
        return self._parent[v]

    def is_terminal(self, v: str) -> bool:
        return not self._children[v]

    def owner(self, v: str) -> str | None:
        """The player moving at v, None for nature nodes and terminals."""
        ow = self._owner[v]
        return ow[0] if ow else None

    def info_set_of(self, v: str) -> InfoSet | None:
        ow = self._owner[v]
        return ow[1] if ow else None

    def path_to(self, v: str) -> tuple[str, ...]:
        """Vertices from the root down to v inclusive."""
        out = [v]
        seen = {v}
        while True:
            u = self._parent[out[-1]]
            if u is None:
                break
            if u in seen:  # cycle guard; validate_bush reports it properly
                break
            seen.add(u)
            out.append(u)
        return tuple(reversed(out))

    def root_of(self, v: str) -> str:
        return self.path_to(v)[0]

    def action_to(self, v: str) -> tuple[str, str, str] | None:
        """(player-or-None, info label-or-'nature', action/child) entering v."""
        u = self._parent[v]
        if u is None:
            return None
        ow = self._owner[u]
        if ow is None:
            return (None, "nature", v)
        p, blk = ow
        for a in blk.actions:
            if blk.move.get(u, {}).get(a) == v:
                return (p, blk.label, a)
        return (p, blk.label, v)

    def nature_weight(self, t: str) -> float:
        """Product of nature probabilities along the path to t."""
        w = 1.0
        path = self.path_to(t)
        for i in range(len(path) - 1):
            u, v = path[i], path[i + 1]
            if u in self.nature:
                w *= float(self.nature[u][v])
        return w

    def decision_nodes(self, player: str) -> tuple[str, ...]:
        return tuple(n for blk in self.info[player] for n in blk.nodes)

    def __repr__(self):
        return (
            f"GameBush({len(self.vertices)} vertices, {len(self.roots)} roots, "
            f"{len(self.terminals)} terminals, players={list(self.players)})"
        )


# ---------------------------------------------------------------------------
# validation


def validate_bush(bush: GameBush) -> list[Violation]:
    """All structural violations, empty when the bush is well formed."""
    out: list[Violation] = []
    vset = set(bush.vertices)

    seen_arrows = set()
    for u, v in bush.arrows:
        if u == v:
            out.append(Violation("self-loop", "arrow from a vertex to itself", (u,)))
        if (u, v) in seen_arrows:
            out.append(Violation("duplicate-arrow", "arrow listed twice", (u, v)))
        seen_arrows.add((u, v))

    # single incoming arrow everywhere except roots
    for v in bush.vertices:
        if bush._indeg[v] > 1:
            out.append(
                Violation(
                    "multiple-incoming",
                    f"vertex has {bush._indeg[v]} incoming arrows, expected at most 1",
                    (v,),
                )
            )

    # acyclicity via Kahn peeling
    indeg = dict(bush._indeg)
    stack = [v for v in bush.vertices if indeg[v] == 0]
    peeled = 0
    while stack:
        u = stack.pop()
        peeled += 1
        for c in bush._children[u]:
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    if peeled != len(bush.vertices):
        cyc = tuple(v for v in bush.vertices if indeg[v] > 0)
        out.append(Violation("cycle", "arrow cycle detected", cyc))

    # out-degree 0 or >= 2
    for v in bush.vertices:
        if len(bush._children[v]) == 1:
            out.append(
                Violation(
                    "single-choice",
                    "non-terminal vertex with a single outgoing arrow",
                    (v,),
                )
            )

    terminals = set(bush.terminals)
    roots = set(bush.roots)

    # information sets
    claimed: dict[str, str] = {}
    for p in bush.players:
        for blk in bush.info[p]:
            for n in blk.nodes:
                if n not in vset:
                    out.append(
                        Violation("unknown-node", f"info set of {p} lists unknown node", (n,))
                    )
                    continue
                if n in claimed:
                    out.append(
                        Violation(
                            "node-reassigned",
                            f"node in info sets of both {claimed[n]} and {p}",
                            (n,),
                        )
                    )
                claimed[n] = p
                if n in terminals:
                    code = (
                        "root-terminal-in-info-set" if n in roots else "terminal-in-info-set"
                    )
                    out.append(
                        Violation(code, f"terminal vertex appears in an info set of {p}", (n,))
                    )
                    continue
                kids = set(bush._children[n])
                if len(kids) != len(blk.actions):
                    out.append(
                        Violation(
                            "action-arity",
                            f"node has {len(kids)} children but the info set has "
                            f"{len(blk.actions)} actions",
                            (n,),
                        )
                    )
                    continue
                mv = blk.move.get(n)
                if mv is None:
                    out.append(
                        Violation("missing-move", "no action bijection stored for node", (n,))
                    )
                    continue
                if set(mv.keys()) != set(blk.actions) or set(mv.values()) != kids:
                    out.append(
                        Violation(
                            "move-not-bijective",
                            "stored action map is not a bijection onto the children",
                            (n,),
                        )
                    )
            if n_dup := len(blk.nodes) - len(set(blk.nodes)):
                out.append(
                    Violation(
                        "block-duplicate",
                        f"info set of {p} repeats {n_dup} node(s)",
                        tuple(blk.nodes),
                    )
                )

    # nature nodes: exactly the unclaimed non-terminals, positive dists
    unclaimed = {v for v in bush.vertices if v not in terminals and v not in claimed}
    for v in sorted(unclaimed):
        if v not in bush.nature:
            out.append(
                Violation(
                    "untyped-vertex",
                    "non-terminal vertex is neither a decision node nor a nature node",
                    (v,),
                )
            )
    for v, dist in bush.nature.items():
        if v in claimed:
            out.append(
                Violation("nature-clash", f"nature node also in an info set of {claimed[v]}", (v,))
            )
        if v in terminals:
            out.append(Violation("nature-terminal", "terminal vertex has a nature distribution", (v,)))
            continue
        kids = set(bush._children[v])
        if set(dist.keys()) != kids:
            out.append(
                Violation(
                    "nature-support",
                    "distribution keys do not match the children",
                    (v,),
                )
            )
            continue
        exact = all(isinstance(p, (Fraction, int)) for p in dist.values())
        total = sum(Fraction(p) if exact else float(p) for p in dist.values())
        ok_total = total == 1 if exact else abs(float(total) - 1.0) <= 1e-12
        if not ok_total:
            out.append(Violation("nature-total", f"probabilities sum to {total}", (v,)))
        if any((p <= 0) for p in dist.values()):
            out.append(
                Violation("nature-zero", "nature probabilities must be strictly positive", (v,))
            )

    # root and terminal partitions partition R and T per player
    def check_partition(kind, got, universe):
        for p in bush.players:
            flat = [v for b in got[p] for v in b]
            if sorted(flat) != sorted(universe):
                out.append(
                    Violation(
                        f"{kind}-partition",
                        f"partition of player {p} does not partition the {kind}s",
                        tuple(sorted(set(flat) ^ set(universe))),
                    )
                )

    check_partition("root", bush.root_partition, list(bush.roots))
    check_partition("terminal", bush.terminal_partition, list(bush.terminals))

    return out


# ---------------------------------------------------------------------------
# meet of the terminal partitions


@dataclass(frozen=True)
class MeetPartition:
    """Finest partition coarser than every player's terminal partition."""

    blocks: tuple[tuple[str, ...], ...]
    block_of: dict = field(repr=False, hash=False, compare=False, default_factory=dict)

    def __len__(self):
        return len(self.blocks)

    def index_of(self, terminal: str) -> int:
        return self.block_of[terminal]


def meet_partition(bush: GameBush) -> MeetPartition:
    """Connected components of the overlap graph of all terminal blocks."""
    order = {t: i for i, t in enumerate(bush.terminals)}
    parent = list(range(len(bush.terminals)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for p in bush.players:
        for blk in bush.terminal_partition[p]:
            idx = [order[t] for t in blk]
            for a, b in zip(idx, idx[1:]):
                union(a, b)

    groups: dict[int, list[str]] = {}
    for t, i in order.items():
        groups.setdefault(find(i), []).append(t)
    blocks = tuple(
        tuple(sorted(g, key=order.get)) for _, g in sorted(groups.items())
    )
    block_of = {}
    for bi, blk in enumerate(blocks):
        for t in blk:
            block_of[t] = bi
    return MeetPartition(blocks, block_of)


# ---------------------------------------------------------------------------
# bundles


class GameBundle:
    """A bush together with one continuation payoff model per meet class."""

    def __init__(self, bush: GameBush, continuations):
        self.bush = bush
        meet = meet_partition(bush)
        self.meet = meet
        self.models: tuple[PayoffModel, ...] = tuple(
            self._align(meet, list(continuations))
        )

    def _align(self, meet, models):
        by_members = {}
        for m in models:
            by_members[frozenset(m.members)] = m
        out = []
        for blk in meet.blocks:
            key = frozenset(blk)
            if key not in by_members:
                raise BundleValidationError(
                    [
                        Violation(
                            "missing-continuation",
                            "no continuation model for a terminal class",
                            blk,
                        )
                    ]
                )
            model = by_members.pop(key)
            if tuple(model.members) != blk:
                # reorder table columns to the canonical member order
                raise BundleValidationError(
                    [
                        Violation(
                            "class-order",
                            f"continuation lists {model.members}, expected {blk}",
                            blk,
                        )
                    ]
                )
            out.append(model)
        if by_members:
            extra = [tuple(k) for k in by_members]
            raise BundleValidationError(
                [
                    Violation(
                        "extra-continuation",
                        f"continuations given for non-classes {extra}",
                    )
                ]
            )
        return out

    @property
    def players(self):
        return self.bush.players

    @property
    def classes(self):
        return self.meet.blocks

    def model_of(self, class_index: int) -> PayoffModel:
        return self.models[class_index]

    def payoff_bound(self) -> float:
        return max((m.bound() for m in self.models), default=1.0)

    def __repr__(self):
        return f"GameBundle({self.bush!r}, {len(self.models)} classes)"


# ---------------------------------------------------------------------------
# json i/o


def _parse_prob(x):
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    return float(x)


def bundle_from_dict(data: dict, check: bool = True) -> GameBundle:
    players = [str(p) for p in data["players"]]
    nature = {
        v: {c: _parse_prob(p) for c, p in dist.items()}
        for v, dist in data.get("nature", {}).items()
    }
    bush = GameBush(
        players=players,
        vertices=[str(v) for v in data["vertices"]],
        arrows=[tuple(a) for a in data["arrows"]],
        nature=nature,
        info={p: data.get("info_partitions", {}).get(p, []) for p in players},
        root_partition={p: data.get("root_partitions", {}).get(p, []) for p in players},
        terminal_partition={
            p: data.get("terminal_partitions", {}).get(p, []) for p in players
        },
    )
    if check:
        violations = validate_bush(bush)
        if violations:
            raise BundleValidationError(violations)
    models = [parse_model(entry, tuple(players)) for entry in data.get("continuations", [])]
    return GameBundle(bush, models)


def bundle_to_dict(bundle: GameBundle) -> dict:
    bush = bundle.bush

    def prob_json(p):
        if isinstance(p, Fraction):
            return int(p) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"
        return p

    return {
        "players": list(bush.players),
        "vertices": list(bush.vertices),
        "arrows": [list(a) for a in bush.arrows],
        "nature": {
            v: {c: prob_json(p) for c, p in dist.items()}
            for v, dist in bush.nature.items()
        },
        "info_partitions": {
            p: [
                {
                    "nodes": list(blk.nodes),
                    "actions": list(blk.actions),
                    "move": {n: dict(mv) for n, mv in blk.move.items()},
                }
                for blk in bush.info[p]
            ]
            for p in bush.players
        },
        "root_partitions": {
            p: [list(b) for b in bush.root_partition[p]] for p in bush.players
        },
        "terminal_partitions": {
            p: [list(b) for b in bush.terminal_partition[p]] for p in bush.players
        },
        "continuations": [m.to_json() for m in bundle.models],
    }


def load_bundle(path, check: bool = True) -> GameBundle:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return bundle_from_dict(data, check=check)


def save_bundle(bundle: GameBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle_to_dict(bundle), fh, indent=2, sort_keys=False)
        fh.write("\n")
