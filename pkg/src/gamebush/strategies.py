"""Strategies, reach probabilities, and plans.

A pure strategy of a player fixes one action per information set.  Mixed
profiles put one distribution per player on their pure strategies; reach
probabilities multiply the root weight, the nature weights along the path,
and for every player the total mixed weight of the pure strategies that are
consistent with the path.  Everything reduces to per-player 0/1 consistency
matrices over (pure strategy, terminal), so the hot paths are matrix
products.

A plan freezes the payoff side of a profile: it evaluates each terminal
class's continuation model at the conditional distribution induced by
(q, sigma) (or at a stored witness distribution when the class is not
reached) and keeps the chosen table.  Action values for a deviating player
replace that player's transition behaviour but never the frozen table; the
conditionals are still the ones of the undeviated profile.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from weakref import WeakKeyDictionary

import numpy as np

from .model import GameBundle, GameBush
from .payoff_models import NoPlanError, Selector

__all__ = [
    "PureStrategy",
    "MixedProfile",
    "BehaviourProfile",
    "ReachReport",
    "Plan",
    "enumerate_pure",
    "uniform_profile",
    "pure_profile",
    "reach",
    "mixed_to_behaviour",
    "behaviour_to_mixed",
    "make_plan",
    "action_values",
    "expected_payoffs",
    "own_history",
    "NoPlanError",
]

PURE_CAP = 10**6
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class PureStrategy:
    """One action per information set, in the player's partition order."""

    player: str
    choices: tuple[str, ...]

    def choice(self, block_index: int) -> str:
        return self.choices[block_index]


class MixedProfile:
    """Per-player distributions over the enumerated pure strategies."""

    def __init__(self, dists: dict[str, np.ndarray], normalize: bool = False):
        self.dists: dict[str, np.ndarray] = {}
        for p, d in dists.items():
            arr = np.asarray(d, dtype=float).copy()
            if normalize:
                arr = np.maximum(arr, 0.0)
                arr /= arr.sum()
            if arr.size and (abs(float(arr.sum()) - 1.0) > SIMPLEX_TOL or float(arr.min()) < -SIMPLEX_TOL):
                raise ValueError(f"not a distribution for player {p}: {arr!r}")
            arr.setflags(write=False)
            self.dists[p] = arr

    def __getitem__(self, player: str) -> np.ndarray:
        return self.dists[player]

    def players(self):
        return tuple(self.dists)

    def copy(self) -> "MixedProfile":
        return MixedProfile({p: d.copy() for p, d in self.dists.items()})

    def __repr__(self):
        parts = ", ".join(f"{p}: {np.round(d, 6)}" for p, d in self.dists.items())
        return f"MixedProfile({parts})"


@dataclass
class BehaviourProfile:
    """One distribution over actions per information set.

    ``recall_warning`` lists (player, block index) pairs where the defining
    conditional was ambiguous because the player lacks perfect recall; the
    translation is still produced but outcome equivalence is not promised.
    """

    dists: dict[str, tuple[np.ndarray, ...]]
    recall_warning: tuple[tuple[str, int], ...] = ()


@dataclass
class ReachReport:
    """Reach probabilities of (q, sigma) aggregated by terminal class."""

    q: np.ndarray
    terminal_probs: np.ndarray
    class_probs: np.ndarray
    conditionals: list  # per class: ndarray over members, or None if unreached

    def class_prob(self, ci: int) -> float:
        return float(self.class_probs[ci])

    def conditional(self, ci: int):
        return self.conditionals[ci]


# ---------------------------------------------------------------------------
# compiled view


class _Compiled:
    """Arrays shared by reach, plans and the solver; built once per bundle."""

    def __init__(self, bundle: GameBundle):
        bush = bundle.bush
        self.bundle = bundle
        self.players = bush.players
        self.terminals = bush.terminals
        self.tindex = {t: i for i, t in enumerate(self.terminals)}
        self.roots = bush.roots
        rindex = {r: i for i, r in enumerate(self.roots)}
        T = len(self.terminals)
        self.root_of = np.array(
            [rindex[bush.root_of(t)] for t in self.terminals], dtype=np.int64
        )
        self.nat = np.array([bush.nature_weight(t) for t in self.terminals])

        # per-terminal area constraints (block, action) per player
        self.constraints: dict[str, list[list[tuple[int, int]]]] = {}
        blocks_of = {
            p: {blk.label: bi for bi, blk in enumerate(bush.info[p])}
            for p in bush.players
        }
        act_index = {
            p: [
                {a: ai for ai, a in enumerate(blk.actions)}
                for blk in bush.info[p]
            ]
            for p in bush.players
        }
        for p in bush.players:
            self.constraints[p] = [[] for _ in range(T)]
        for ti, t in enumerate(self.terminals):
            path = bush.path_to(t)
            for i in range(len(path) - 1):
                u, v = path[i], path[i + 1]
                ow = bush.owner(u)
                if ow is None:
                    continue
                blk = bush.info_set_of(u)
                bi = blocks_of[ow][blk.label]
                action = None
                for a, child in blk.move.get(u, {}).items():
                    if child == v:
                        action = a
                        break
                if action is None:
                    continue
                self.constraints[ow][ti].append((bi, act_index[ow][bi][action]))

        # pure strategies and consistency matrices
        self.strategies: dict[str, list[PureStrategy]] = {}
        self.choice_mats: dict[str, np.ndarray] = {}
        self.M: dict[str, np.ndarray] = {}
        for p in bush.players:
            strategies = enumerate_pure(bush, p)
            self.strategies[p] = strategies
            blocks = bush.info[p]
            if blocks:
                choice = np.array(
                    [
                        [act_index[p][bi][s.choices[bi]] for bi in range(len(blocks))]
                        for s in strategies
                    ],
                    dtype=np.int64,
                )
            else:
                choice = np.zeros((1, 0), dtype=np.int64)
            self.choice_mats[p] = choice
            M = np.ones((len(strategies), T))
            for ti in range(T):
                for bi, ai in self.constraints[p][ti]:
                    M[choice[:, bi] != ai, ti] = 0.0
            self.M[p] = M

        self.class_members_idx = [
            np.array([self.tindex[t] for t in blk], dtype=np.int64)
            for blk in bundle.meet.blocks
        ]
        self.class_of = np.empty(T, dtype=np.int64)
        for ci, idx in enumerate(self.class_members_idx):
            self.class_of[idx] = ci

    # packed views used by the solver kernels
    def pack(self, sigma: MixedProfile):
        xs = [np.asarray(sigma[p], dtype=float) for p in self.players]
        offsets = np.zeros(len(xs) + 1, dtype=np.int64)
        for i, x in enumerate(xs):
            offsets[i + 1] = offsets[i] + x.size
        return np.concatenate(xs) if xs else np.zeros(0), offsets

    def unpack(self, x: np.ndarray, offsets: np.ndarray) -> MixedProfile:
        dists = {}
        for i, p in enumerate(self.players):
            dists[p] = x[offsets[i] : offsets[i + 1]].copy()
        return MixedProfile(dists)

    def m_stack(self):
        return np.concatenate([self.M[p] for p in self.players], axis=0)


_COMPILED: "WeakKeyDictionary[GameBundle, _Compiled]" = WeakKeyDictionary()


def compiled(bundle: GameBundle) -> _Compiled:
    comp = _COMPILED.get(bundle)
    if comp is None:
        comp = _Compiled(bundle)
        _COMPILED[bundle] = comp
    return comp


# ---------------------------------------------------------------------------
# enumeration and profiles


def enumerate_pure(bush: GameBush, player: str, cap: int = PURE_CAP) -> list[PureStrategy]:
    """All pure strategies of the player, lexicographic in partition order.

    Players without information sets get the single empty strategy.  Raises
    if the product of action counts exceeds the cap.
    """
    blocks = bush.info[player]
    count = 1
    for blk in blocks:
        count *= max(len(blk.actions), 1)
        if count > cap:
            raise ValueError(
                f"player {player} has more than {cap} pure strategies"
            )
    combos = itertools.product(*(blk.actions for blk in blocks))
    return [PureStrategy(player, tuple(c)) for c in combos]


def uniform_profile(bundle: GameBundle) -> MixedProfile:
    comp = compiled(bundle)
    return MixedProfile(
        {p: np.full(len(comp.strategies[p]), 1.0 / len(comp.strategies[p])) for p in comp.players}
    )


def pure_profile(bundle: GameBundle, picks: dict[str, int]) -> MixedProfile:
    """Point mass profile; picks maps player to a pure-strategy index."""
    comp = compiled(bundle)
    dists = {}
    for p in comp.players:
        d = np.zeros(len(comp.strategies[p]))
        d[picks[p]] = 1.0
        dists[p] = d
    return MixedProfile(dists)


def as_q(bundle: GameBundle, q) -> np.ndarray:
    comp = compiled(bundle)
    if q is None:
        if len(comp.roots) != 1:
            raise ValueError("q required for a multi-root bundle")
        return np.array([1.0])
    if isinstance(q, dict):
        arr = np.array([float(q.get(r, 0.0)) for r in comp.roots])
    else:
        arr = np.asarray(q, dtype=float)
    if arr.shape != (len(comp.roots),):
        raise ValueError(f"q must have one weight per root {comp.roots}")
    if abs(float(arr.sum()) - 1.0) > 1e-9 or float(arr.min()) < -1e-12:
        raise ValueError(f"q is not a distribution: {arr!r}")
    return np.maximum(arr, 0.0)


# ---------------------------------------------------------------------------
# reach


def reach(bundle: GameBundle, q, sigma: MixedProfile) -> ReachReport:
    comp = compiled(bundle)
    qv = as_q(bundle, q)
    w = qv[comp.root_of] * comp.nat
    for p in comp.players:
        w = w * (sigma[p] @ comp.M[p])
    class_probs = np.zeros(len(comp.class_members_idx))
    conditionals = []
    for ci, idx in enumerate(comp.class_members_idx):
        mass = w[idx]
        tot = float(mass.sum())
        class_probs[ci] = tot
        conditionals.append(mass / tot if tot > 0.0 else None)
    return ReachReport(qv, w, class_probs, conditionals)


# ---------------------------------------------------------------------------
# behaviour translations


def own_history(bush: GameBush, player: str, v: str) -> tuple[tuple[int, int], ...]:
    """(block index, action index) pairs of the player's own moves above v."""
    blocks_of = {blk.label: bi for bi, blk in enumerate(bush.info[player])}
    out = []
    path = bush.path_to(v)
    for i in range(len(path) - 1):
        u, nxt = path[i], path[i + 1]
        if bush.owner(u) != player:
            continue
        blk = bush.info_set_of(u)
        for ai, a in enumerate(blk.actions):
            if blk.move.get(u, {}).get(a) == nxt:
                out.append((blocks_of[blk.label], ai))
                break
    return tuple(out)


def mixed_to_behaviour(bush: GameBush, sigma: MixedProfile) -> BehaviourProfile:
    """Kuhn translation: action weights conditional on the own history.

    At blocks whose members disagree about the own history (no perfect
    recall) the marginal over all pure strategies is used instead and the
    block is listed in ``recall_warning``.
    """
    dists: dict[str, tuple[np.ndarray, ...]] = {}
    warnings: list[tuple[str, int]] = []
    for p, blocks in bush.info.items():
        if p not in sigma.dists:
            continue
        strategies = enumerate_pure(bush, p)
        choice = {
            s: {bi: s.choices[bi] for bi in range(len(blocks))} for s in strategies
        }
        weights = sigma[p]
        per_block = []
        for bi, blk in enumerate(blocks):
            hists = {own_history(bush, p, n) for n in blk.nodes}
            consistent = np.ones(len(strategies), dtype=bool)
            if len(hists) == 1:
                hist = next(iter(hists))
                for s_i, s in enumerate(strategies):
                    for hb, ha in hist:
                        if blocks[hb].actions.index(s.choices[hb]) != ha:
                            consistent[s_i] = False
                            break
            else:
                warnings.append((p, bi))
            dist = np.zeros(len(blk.actions))
            denom = float(weights[consistent].sum())
            if denom > 0.0:
                for s_i, s in enumerate(strategies):
                    if consistent[s_i]:
                        dist[blk.actions.index(choice[s][bi])] += weights[s_i]
                dist /= denom
            else:
                dist[:] = 1.0 / len(blk.actions)
            per_block.append(dist)
        dists[p] = tuple(per_block)
    return BehaviourProfile(dists, tuple(warnings))


def behaviour_to_mixed(bush: GameBush, beh: BehaviourProfile) -> MixedProfile:
    """Product translation: sigma(s) = prod over blocks of b(block, s(block))."""
    dists = {}
    for p, per_block in beh.dists.items():
        strategies = enumerate_pure(bush, p)
        blocks = bush.info[p]
        weights = np.ones(len(strategies))
        for s_i, s in enumerate(strategies):
            for bi, blk in enumerate(blocks):
                weights[s_i] *= per_block[bi][blk.actions.index(s.choices[bi])]
        dists[p] = weights
    return MixedProfile(dists)


# ---------------------------------------------------------------------------
# plans


@dataclass
class Plan:
    """A frozen payoff table for (q, sigma), one value per player-terminal.

    ``witnesses`` records the distribution at which an unreached class's
    model was evaluated; ``choices`` the fiber candidate index used per
    class; ``lambdas`` the regularization weights, when any.
    """

    q: np.ndarray
    sigma: MixedProfile
    y: np.ndarray
    conditionals: list
    witnesses: dict = field(default_factory=dict)
    choices: dict = field(default_factory=dict)
    lambdas: np.ndarray | None = None
    selector: str = "first"

    def payoff_table(self, bundle: GameBundle, ci: int) -> np.ndarray:
        comp = compiled(bundle)
        return self.y[:, comp.class_members_idx[ci]]


def regularization_lambda(prob: float, epsilon: float) -> float:
    """1 above 2*epsilon, 0 below epsilon, linear in between."""
    if prob >= 2.0 * epsilon:
        return 1.0
    if prob <= epsilon:
        return 0.0
    return (prob - epsilon) / epsilon


def make_plan(
    bundle: GameBundle,
    q,
    sigma: MixedProfile,
    selector: Selector | str = "first",
    regularization=None,
    branch: dict | None = None,
) -> Plan:
    """Evaluate every class's continuation and freeze the payoff table.

    ``branch`` overrides the selector with explicit fiber candidate indices
    per class index (used by the solver to sweep set-valued graphs).
    ``regularization`` is a RegularizationConfig-like object with fields
    ``epsilon`` and ``bound``; classes reached below epsilon take the
    constant bound table and need no continuation evaluation.
    """
    if isinstance(selector, str):
        selector = Selector(selector)
    comp = compiled(bundle)
    rr = reach(bundle, q, sigma)
    nplayers = len(comp.players)
    y = np.zeros((nplayers, len(comp.terminals)))
    witnesses: dict[int, np.ndarray] = {}
    choices: dict[int, int] = {}
    lambdas = None
    if regularization is not None:
        lambdas = np.ones(len(bundle.models))
    for ci, model in enumerate(bundle.models):
        idx = comp.class_members_idx[ci]
        prob = rr.class_prob(ci)
        lam = 1.0
        if regularization is not None:
            lam = regularization_lambda(prob, regularization.epsilon)
            lambdas[ci] = lam
        table = None
        if lam > 0.0:
            if rr.conditionals[ci] is not None:
                w = rr.conditionals[ci]
            else:
                w = model.witness_near(model.barycenter())
                witnesses[ci] = w
            cands = model.fiber(w)
            if not cands:
                raise NoPlanError(model.members, w)
            if branch and ci in branch:
                pick = branch[ci] % len(cands)
            else:
                pick = selector.choose(cands, w)
            choices[ci] = pick
            table = cands[pick]
        if regularization is not None:
            blend = np.full((nplayers, idx.size), float(regularization.bound))
            if lam > 0.0:
                blend = lam * table + (1.0 - lam) * blend
            y[:, idx] = blend
        else:
            y[:, idx] = table
    return Plan(
        q=rr.q,
        sigma=sigma.copy(),
        y=y,
        conditionals=rr.conditionals,
        witnesses=witnesses,
        choices=choices,
        lambdas=lambdas,
        selector=selector.name,
    )


def action_values(bundle: GameBundle, plan: Plan) -> dict[str, np.ndarray]:
    """f^n(s) per player: expected frozen payoff when n deviates to s.

    The deviator's consistency factor is replaced by the pure strategy's
    row; all other players, the root distribution, nature, and the frozen
    table stay as in the plan.
    """
    comp = compiled(bundle)
    base = plan.q[comp.root_of] * comp.nat
    cons = {p: plan.sigma[p] @ comp.M[p] for p in comp.players}
    out = {}
    for ni, p in enumerate(comp.players):
        others = base.copy()
        for pj in comp.players:
            if pj != p:
                others = others * cons[pj]
        out[p] = comp.M[p] @ (others * plan.y[ni])
    return out


def expected_payoffs(bundle: GameBundle, plan: Plan) -> np.ndarray:
    """Expected frozen payoff per player under the plan's own profile."""
    comp = compiled(bundle)
    w = plan.q[comp.root_of] * comp.nat
    for p in comp.players:
        w = w * (plan.sigma[p] @ comp.M[p])
    return plan.y @ w
