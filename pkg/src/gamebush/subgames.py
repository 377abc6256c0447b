"""Subgame sets, factor games, perfect recall, composition.

A subgame set S is a vertex subset closed under arrows (play cannot leave)
and saturated for every information and terminal partition block (each
block lies inside S or misses it).  Restriction keeps the play inside S
with new roots R' (entry points) and inherited partitions; the factor game
replaces S by its entry points, now terminals, whose classes carry
continuation payoff models.  The family of subgame sets is a lattice:
unions and intersections of subgame sets are subgame sets, so the whole
family is generated by the per-vertex atom closures.

Composition glues an equilibrium of the factor game to an equilibrium of
the restricted game at the induced entry distribution.  Under perfect
recall the result is an equilibrium of the full game; the verification is
re-run rather than assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from weakref import WeakKeyDictionary

import numpy as np

from .model import GameBundle, GameBush, Violation, meet_partition
from .payoff_models import NoPlanError, SampledGraphModel, grid_compositions
from .strategies import MixedProfile, Plan, compiled, own_history, reach

__all__ = [
    "SubgameSet",
    "SubgameLattice",
    "FactorShape",
    "SPerfectStatus",
    "is_subgame_set",
    "closure",
    "enumerate_subgame_sets",
    "restrict",
    "factor_shape",
    "factor",
    "has_perfect_recall",
    "is_s_perfect",
    "compose",
    "is_solvable",
]


# ---------------------------------------------------------------------------
# detection


def is_subgame_set(bush: GameBush, S) -> tuple[bool, list[Violation]]:
    """Closure plus saturation check; returns (verdict, violations)."""
    s = set(S)
    bad = []
    unknown = s - set(bush.vertices)
    if unknown:
        bad.append(Violation("unknown-node", "not vertices", tuple(sorted(unknown))))
        s -= unknown
    for v in s:
        for c in bush.children(v):
            if c not in s:
                bad.append(Violation("closure", f"arrow {v}->{c} leaves the set", (v, c)))
    for p in bush.players:
        for blk in bush.info[p]:
            inside = [n for n in blk.nodes if n in s]
            if inside and len(inside) != len(blk.nodes):
                bad.append(
                    Violation(
                        "saturation",
                        f"information set {blk.label} is split",
                        tuple(blk.nodes),
                    )
                )
        for qb in bush.terminal_partition[p]:
            inside = [t for t in qb if t in s]
            if inside and len(inside) != len(qb):
                bad.append(
                    Violation(
                        "saturation",
                        f"terminal block of player {p} is split",
                        tuple(qb),
                    )
                )
    return (not bad, bad)


def closure(bush: GameBush, seed) -> frozenset:
    """Smallest subgame set containing the seed vertices.

    Alternates arrow closure with partition saturation until fixpoint.
    """
    s = set(seed)
    blocks = [set(blk.nodes) for p in bush.players for blk in bush.info[p]]
    blocks += [set(qb) for p in bush.players for qb in bush.terminal_partition[p]]
    changed = True
    while changed:
        changed = False
        stack = list(s)
        while stack:
            v = stack.pop()
            for c in bush.children(v):
                if c not in s:
                    s.add(c)
                    stack.append(c)
        for blk in blocks:
            if not blk.issubset(s) and blk & s:
                s |= blk
                changed = True
    return frozenset(s)


# ---------------------------------------------------------------------------
# derived structure of a subgame set


@dataclass(frozen=True)
class SubgameSet:
    vertices: tuple
    roots: tuple  # R'
    terminals: tuple  # T' = T cap S
    rprime_parts: dict  # player -> tuple of R' blocks
    qprime_parts: dict  # player -> tuple of Q' blocks
    degenerate: bool

    def to_json(self):
        return {
            "vertices": list(self.vertices),
            "roots": list(self.roots),
            "degenerate": self.degenerate,
        }


def _last_block_key(bush: GameBush, player: str, v: str):
    """Identity of the last information set of the player on the path to v.

    The path includes v itself; with no such set the key falls back to the
    player's root partition member of the path's origin.
    """
    path = bush.path_to(v)
    labels = {}
    for bi, blk in enumerate(bush.info[player]):
        for n in blk.nodes:
            labels[n] = bi
    for u in reversed(path):
        if u in labels:
            return ("info", labels[u])
    root = path[0]
    for bi, blk in enumerate(bush.root_partition[player]):
        if root in blk:
            return ("root", bi)
    return ("root", -1)


def analyze(bush: GameBush, S) -> SubgameSet:
    """Compute the derived fields (R', T', partitions) of a subgame set."""
    ok, bad = is_subgame_set(bush, S)
    if not ok:
        raise ValueError("not a subgame set: " + "; ".join(str(v) for v in bad))
    s = set(S)
    verts = tuple(v for v in bush.vertices if v in s)
    roots_set = set(bush.roots)
    rprime = tuple(
        v for v in verts if v in roots_set or bush.parent(v) not in s
    )
    tprime = tuple(t for t in bush.terminals if t in s)
    rparts = {}
    qparts = {}
    for p in bush.players:
        groups: dict = {}
        for u in rprime:
            groups.setdefault(_last_block_key(bush, p, u), []).append(u)
        rparts[p] = tuple(tuple(g) for g in groups.values())
        qparts[p] = tuple(
            tuple(qb) for qb in bush.terminal_partition[p] if set(qb) <= s
        )
    return SubgameSet(
        vertices=verts,
        roots=rprime,
        terminals=tprime,
        rprime_parts=rparts,
        qprime_parts=qparts,
        degenerate=set(verts) <= set(bush.terminals),
    )


# ---------------------------------------------------------------------------
# lattice enumeration


@dataclass
class SubgameLattice:
    sets: list  # SubgameSet, sorted by (size, vertex order)
    _edges: list | None = field(default=None, repr=False)

    def __iter__(self):
        return iter(self.sets)

    def edges(self):
        """Cover relations (i, j) with sets[i] immediately below sets[j]."""
        if self._edges is None:
            fs = [frozenset(s.vertices) for s in self.sets]
            out = []
            for j, big in enumerate(fs):
                for i, small in enumerate(fs):
                    if small < big and not any(
                        small < mid < big for mid in fs
                    ):
                        out.append((i, j))
            self._edges = out
        return self._edges

    def to_json(self):
        return {
            "sets": [s.to_json() for s in self.sets],
            "edges": [list(e) for e in self.edges()],
        }


_LATTICE_CACHE: "WeakKeyDictionary[GameBush, SubgameLattice]" = WeakKeyDictionary()


def enumerate_subgame_sets(bush: GameBush, cap: int = 4096) -> SubgameLattice:
    """All unions of the per-vertex atom closures, including the empty set.

    Unions of subgame sets are subgame sets, so the atom closures generate
    the whole lattice.  Raises when the family would exceed the cap.
    """
    cached = _LATTICE_CACHE.get(bush)
    if cached is not None:
        return cached
    atoms = []
    seen = set()
    for v in bush.vertices:
        a = closure(bush, [v])
        if a not in seen:
            seen.add(a)
            atoms.append(a)
    family = {frozenset()}
    frontier = [frozenset()]
    while frontier:
        cur = frontier.pop()
        for a in atoms:
            nxt = cur | a
            if nxt not in family:
                if len(family) >= cap:
                    raise ValueError(
                        f"subgame-set family exceeds cap {cap}; raise the cap"
                    )
                family.add(nxt)
                frontier.append(nxt)
    order = {v: i for i, v in enumerate(bush.vertices)}
    members = sorted(family, key=lambda f: (len(f), sorted(order[v] for v in f)))
    sets = [analyze(bush, f) if f else _empty_set() for f in members]
    lattice = SubgameLattice(sets)
    _LATTICE_CACHE[bush] = lattice
    return lattice


def _empty_set() -> SubgameSet:
    return SubgameSet((), (), (), {}, {}, True)


# ---------------------------------------------------------------------------
# restriction and factor


def _as_vertices(S):
    if isinstance(S, SubgameSet):
        return set(S.vertices)
    return set(S)


def restrict(bundle: GameBundle, S) -> GameBundle:
    """The subgame bundle on S, with entry points as roots.

    Information sets, nature weights and terminal blocks inside S are kept
    verbatim; the root partitions are the induced R'_n groupings; terminal
    classes inside S keep their original continuation models.
    """
    bush = bundle.bush
    info = analyze(bush, _as_vertices(S)) if not isinstance(S, SubgameSet) else S
    s = set(info.vertices)
    verts = [v for v in bush.vertices if v in s]
    arrows = [(u, v) for u, v in bush.arrows if u in s and v in s]
    nature = {v: dict(d) for v, d in bush.nature.items() if v in s}
    new_info = {
        p: [blk for blk in bush.info[p] if set(blk.nodes) <= s]
        for p in bush.players
    }
    new_bush = GameBush(
        players=bush.players,
        vertices=verts,
        arrows=arrows,
        nature=nature,
        info=new_info,
        root_partition=info.rprime_parts,
        terminal_partition=info.qprime_parts,
    )
    keep = set(info.terminals)
    models = [m for m in bundle.models if set(m.members) <= keep]
    return GameBundle(new_bush, models)


@dataclass(frozen=True)
class FactorShape:
    """Vertex/partition layout of the factor game, before models exist."""

    vertices: tuple
    arrows: tuple
    nature: dict
    info: dict
    root_partition: dict
    terminal_partition: dict
    new_classes: tuple  # meet classes contained in R', canonical order
    rprime: tuple

    def build_bush(self, players) -> GameBush:
        return GameBush(
            players=players,
            vertices=self.vertices,
            arrows=self.arrows,
            nature=self.nature,
            info=self.info,
            root_partition=self.root_partition,
            terminal_partition=self.terminal_partition,
        )


def factor_shape(bundle: GameBundle, S) -> FactorShape:
    bush = bundle.bush
    info = analyze(bush, _as_vertices(S)) if not isinstance(S, SubgameSet) else S
    s = set(info.vertices)
    rprime = info.roots
    keep = (set(bush.vertices) - s) | set(rprime)
    verts = tuple(v for v in bush.vertices if v in keep)
    arrows = tuple((u, v) for u, v in bush.arrows if u in keep and u not in s and v in keep)
    nature = {v: dict(d) for v, d in bush.nature.items() if v in keep and v not in s}
    new_info = {
        p: [blk for blk in bush.info[p] if not (set(blk.nodes) & s)]
        for p in bush.players
    }
    tparts = {}
    for p in bush.players:
        old = [tuple(qb) for qb in bush.terminal_partition[p] if not (set(qb) & s)]
        tparts[p] = tuple(old) + tuple(info.rprime_parts[p])
    shape = FactorShape(
        vertices=verts,
        arrows=arrows,
        nature=nature,
        info=new_info,
        root_partition=dict(bush.root_partition),
        terminal_partition=tparts,
        new_classes=(),
        rprime=rprime,
    )
    test_bush = shape.build_bush(bush.players)
    meet = meet_partition(test_bush)
    rset = set(rprime)
    new_classes = tuple(blk for blk in meet.blocks if set(blk) <= rset)
    return FactorShape(
        vertices=shape.vertices,
        arrows=shape.arrows,
        nature=shape.nature,
        info=shape.info,
        root_partition=shape.root_partition,
        terminal_partition=shape.terminal_partition,
        new_classes=new_classes,
        rprime=rprime,
    )


def factor(bundle: GameBundle, S, continuations) -> GameBundle:
    """The factor bundle with S collapsed to its entry points.

    ``continuations``: a model per new entry class, as a list aligned with
    factor_shape(...).new_classes or a dict keyed by frozenset of members.
    Old terminal classes outside S keep their original models.
    """
    bush = bundle.bush
    shape = factor_shape(bundle, S)
    new_bush = shape.build_bush(bush.players)
    if isinstance(continuations, dict):
        lookup = {frozenset(k): m for k, m in continuations.items()}
        new_models = []
        for blk in shape.new_classes:
            key = frozenset(blk)
            if key not in lookup:
                raise ValueError(f"missing continuation model for entry class {blk}")
            new_models.append(lookup[key])
    else:
        new_models = list(continuations)
        if len(new_models) != len(shape.new_classes):
            raise ValueError(
                f"expected {len(shape.new_classes)} continuation models, "
                f"got {len(new_models)}"
            )
    s = set(_as_vertices(S))
    old = [m for m in bundle.models if not (set(m.members) & s)]
    return GameBundle(new_bush, old + new_models)


# ---------------------------------------------------------------------------
# perfect recall


def has_perfect_recall(bush: GameBush) -> tuple[bool, tuple | None]:
    """Experience-sequence equality and no-repetition per information set.

    A player's experience at v is the root-partition member of v's origin
    followed by the (information set, own action) pairs above v.  Returns
    (True, None) or (False, (player, block label)).
    """
    for p in bush.players:
        root_block = {}
        for bi, blk in enumerate(bush.root_partition[p]):
            for r in blk:
                root_block[r] = bi
        for wi, blk in enumerate(bush.info[p]):
            seqs = set()
            for v in blk.nodes:
                hist = own_history(bush, p, v)
                blocks_seen = [h[0] for h in hist]
                if len(set(blocks_seen)) != len(blocks_seen) or wi in blocks_seen:
                    return False, (p, blk.label)
                origin = bush.root_of(v)
                seqs.add((root_block.get(origin, -1), hist))
            if len(seqs) > 1:
                return False, (p, blk.label)
    return True, None


# ---------------------------------------------------------------------------
# S-perfectness


@dataclass(frozen=True)
class SPerfectStatus:
    verdict: str  # "true" | "false" | "unresolved"
    residual: float
    q_prime: np.ndarray | None
    detail: str = ""

    def __bool__(self):
        return self.verdict == "true"


def _restrict_profile(bundle: GameBundle, sub_bundle: GameBundle, sigma: MixedProfile):
    """Marginal of the profile onto the subgame's strategy space."""
    comp = compiled(bundle)
    sub_comp = compiled(sub_bundle)
    bush, sub_bush = bundle.bush, sub_bundle.bush
    dists = {}
    for p in bush.players:
        keep = [
            i
            for i, blk in enumerate(bush.info[p])
            if any(sb.label == blk.label for sb in sub_bush.info[p])
        ]
        index = {st.choices: k for k, st in enumerate(sub_comp.strategies[p])}
        out = np.zeros(len(sub_comp.strategies[p]))
        for k, st in enumerate(comp.strategies[p]):
            proj = tuple(st.choices[i] for i in keep)
            out[index[proj]] += sigma[p][k]
        dists[p] = out
    return MixedProfile(dists, normalize=True)


def _entry_distribution(bundle: GameBundle, q, sigma: MixedProfile, info: SubgameSet):
    """(reach probability of S, conditional over R') under (q, sigma)."""
    comp = compiled(bundle)
    bush = bundle.bush
    qv = np.asarray(q, dtype=float)
    w = qv[comp.root_of] * comp.nat
    for p in comp.players:
        w = w * (sigma[p] @ comp.M[p])
    s = set(info.vertices)
    entry_of = {}
    for t in info.terminals:
        for u in bush.path_to(t):
            if u in s:
                entry_of[t] = u
                break
    mass = np.zeros(len(info.roots))
    rindex = {u: i for i, u in enumerate(info.roots)}
    for t in info.terminals:
        mass[rindex[entry_of[t]]] += w[comp.tindex[t]]
    total = float(mass.sum())
    if total <= 0.0:
        return 0.0, None
    return total, mass / total


def _branch_list(sub_bundle: GameBundle, cap: int):
    multi = []
    for ci, model in enumerate(sub_bundle.models):
        if isinstance(model, SampledGraphModel):
            k = max((len(ts) for ts in model.samples.values()), default=1)
            if k > 1:
                multi.append((ci, min(k, cap)))
    if not multi:
        return [None], True
    combos = list(
        itertools.islice(
            itertools.product(*(range(k) for _, k in multi)), cap + 1
        )
    )
    complete = len(combos) <= cap
    out = [
        {ci: pick for (ci, _), pick in zip(multi, combo)}
        for combo in combos[:cap]
    ]
    return out, complete


def _restricted_plan_from_full(bundle, sub_bundle, plan: Plan, q_prime, sigma_sub):
    """Carry the full plan's frozen values down to the subgame's terminals."""
    comp = compiled(bundle)
    sub_comp = compiled(sub_bundle)
    y = np.zeros((len(sub_comp.players), len(sub_comp.terminals)))
    for j, t in enumerate(sub_comp.terminals):
        y[:, j] = plan.y[:, comp.tindex[t]]
    rep = reach(sub_bundle, q_prime, sigma_sub)
    return Plan(
        q=np.asarray(q_prime, dtype=float),
        sigma=sigma_sub,
        y=y,
        conditionals=list(rep.conditionals),
        selector="restricted",
    )


def _residual_of(sub_bundle, q_prime, sigma_sub, tol, plan=None, branch=None):
    from .solver import verify_myopic

    try:
        cert = verify_myopic(sub_bundle, q_prime, sigma_sub, plan=plan, tol=tol, branch=branch)
    except NoPlanError:
        return None
    return cert.residual


def is_s_perfect(
    bundle: GameBundle,
    S,
    q,
    sigma: MixedProfile,
    plan: Plan,
    tol: float = 1e-9,
    mesh: int = 16,
    branch_cap: int = 64,
) -> SPerfectStatus:
    """Does the restricted pair form an m-equilibrium of the subgame?

    With positive reach the root distribution is the induced conditional on
    R'.  With zero reach any distribution is allowed; the existential is
    discharged by a grid search over Delta(R') plus the plan's witness, and
    an exhausted grid on two or more entry points stays "unresolved".
    """
    bush = bundle.bush
    info = analyze(bush, _as_vertices(S)) if not isinstance(S, SubgameSet) else S
    if not info.vertices or set(info.vertices) == set(bush.vertices):
        return SPerfectStatus("true", 0.0, None, "trivial set")
    if info.degenerate:
        return SPerfectStatus("true", 0.0, None, "degenerate set, no decisions")
    sub_bundle = restrict(bundle, info)
    sigma_sub = _restrict_profile(bundle, sub_bundle, sigma)
    prob, cond = _entry_distribution(bundle, plan.q, sigma, info)
    branches, complete = _branch_list(sub_bundle, branch_cap)

    def best_at(q_prime, with_full_plan):
        best = None
        if with_full_plan:
            rp = _restricted_plan_from_full(bundle, sub_bundle, plan, q_prime, sigma_sub)
            r = _residual_of(sub_bundle, q_prime, sigma_sub, tol, plan=rp)
            if r is not None:
                best = r
        for br in branches:
            r = _residual_of(sub_bundle, q_prime, sigma_sub, tol, branch=br)
            if r is not None and (best is None or r < best):
                best = r
            if best is not None and best <= tol:
                break
        return best

    if prob > tol:
        r = best_at(cond, with_full_plan=True)
        if r is not None and r <= tol:
            return SPerfectStatus("true", r, cond)
        if complete:
            return SPerfectStatus(
                "false", np.inf if r is None else r, cond, "fails at the induced conditional"
            )
        return SPerfectStatus("unresolved", np.inf if r is None else r, cond, "branch cap hit")

    # zero reach: existential over Delta(R')
    grid = grid_compositions(mesh, len(info.roots))
    candidates = [np.asarray(pt, dtype=float) / mesh for pt in grid]
    best = None
    best_q = None
    for q_prime in candidates:
        r = best_at(q_prime, with_full_plan=False)
        if r is not None and (best is None or r < best):
            best, best_q = r, q_prime
        if best is not None and best <= tol:
            return SPerfectStatus("true", best, best_q, "zero reach, witness found")
    if len(info.roots) == 1 and complete:
        return SPerfectStatus(
            "false", np.inf if best is None else best, best_q, "single entry point exhausted"
        )
    return SPerfectStatus(
        "unresolved",
        np.inf if best is None else best,
        best_q,
        f"zero reach, no witness at resolution 1/{mesh}",
    )


# ---------------------------------------------------------------------------
# composition (factor x subgame -> full)


def compose(
    bundle: GameBundle,
    S,
    fac_bundle: GameBundle,
    factor_plan: Plan,
    sub_bundle: GameBundle,
    subgame_plan: Plan,
    tol: float = 1e-9,
):
    """Glue a factor equilibrium onto a subgame equilibrium.

    Returns (sigma, plan) on the full bundle.  Requires perfect recall and,
    when the factor profile reaches S, agreement between the subgame plan's
    root distribution and the induced conditional on R'.
    """
    bush = bundle.bush
    ok, witness = has_perfect_recall(bush)
    if not ok:
        raise ValueError(f"perfect recall fails at {witness}; composition is unsound")
    info = analyze(bush, _as_vertices(S)) if not isinstance(S, SubgameSet) else S
    comp = compiled(bundle)
    fac_comp = compiled(fac_bundle)
    sub_comp = compiled(sub_bundle)
    s = set(info.vertices)

    # induced conditional of the factor profile over the entry points
    mass = np.zeros(len(info.roots))
    w = factor_plan.q[fac_comp.root_of] * fac_comp.nat
    for p in fac_comp.players:
        w = w * (factor_plan.sigma[p] @ fac_comp.M[p])
    for i, u in enumerate(info.roots):
        mass[i] = w[fac_comp.tindex[u]]
    prob = float(mass.sum())
    if prob > tol:
        cond = mass / prob
        gap = float(np.max(np.abs(cond - np.asarray(subgame_plan.q, dtype=float))))
        if gap > max(tol, 1e-7):
            raise ValueError(
                f"subgame root distribution differs from the induced conditional by {gap:.3g}"
            )

    dists = {}
    for p in bush.players:
        fac_pos = [
            i for i, blk in enumerate(bush.info[p]) if not (set(blk.nodes) & s)
        ]
        sub_pos = [i for i, blk in enumerate(bush.info[p]) if set(blk.nodes) <= s]
        fac_index = {st.choices: k for k, st in enumerate(fac_comp.strategies[p])}
        sub_index = {st.choices: k for k, st in enumerate(sub_comp.strategies[p])}
        out = np.zeros(len(comp.strategies[p]))
        for k, st in enumerate(comp.strategies[p]):
            fk = fac_index[tuple(st.choices[i] for i in fac_pos)]
            sk = sub_index[tuple(st.choices[i] for i in sub_pos)]
            out[k] = factor_plan.sigma[p][fk] * subgame_plan.sigma[p][sk]
        dists[p] = out
    sigma = MixedProfile(dists, normalize=True)

    # stitched frozen table: factor values outside S, subgame values inside
    y = np.zeros((len(comp.players), len(comp.terminals)))
    for j, t in enumerate(comp.terminals):
        if t in s:
            y[:, j] = subgame_plan.y[:, sub_comp.tindex[t]]
        else:
            y[:, j] = factor_plan.y[:, fac_comp.tindex[t]]
    qv = np.asarray(factor_plan.q, dtype=float)
    rep = reach(bundle, qv, sigma)
    plan = Plan(
        q=qv,
        sigma=sigma,
        y=y,
        conditionals=list(rep.conditionals),
        witnesses={},
        choices={},
        selector="composed",
    )
    return sigma, plan


# ---------------------------------------------------------------------------
# solvability


def _layer_ok(bush: GameBush, layer: set) -> bool:
    """No player owns two decision nodes of the layer on one path."""
    nodes = [v for v in layer if bush.owner(v) is not None]
    for v in nodes:
        p = bush.owner(v)
        path = bush.path_to(v)
        for u in path[:-1]:
            if u in layer and bush.owner(u) == p:
                return False
    return True


def is_solvable(bush: GameBush, cap: int = 4096):
    """A chain of subgame sets whose factors ask each player at most once.

    Returns the chain as a list of vertex frozensets (empty set first, all
    vertices last) or None.  Degenerate all-terminal sets are skipped as
    chain elements; they cannot help separate decisions.
    """
    lattice = enumerate_subgame_sets(bush, cap=cap)
    all_v = frozenset(bush.vertices)
    stages = [frozenset(s.vertices) for s in lattice.sets if not s.degenerate]
    if all_v not in stages:
        stages.append(all_v)
    stages = sorted(set(stages) | {frozenset()}, key=len)
    dead = set()

    def extend(cur):
        if cur == all_v:
            return [cur]
        if cur in dead:
            return None
        for nxt in stages:
            if cur < nxt and _layer_ok(bush, set(nxt - cur)):
                tail = extend(nxt)
                if tail is not None:
                    return [cur] + tail
        dead.add(cur)
        return None

    return extend(frozenset())
