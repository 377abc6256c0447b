"""Shared test utilities: independent oracles and seeded instance generators.

Everything here is deliberately written from the definitions, not by calling
back into the package code it is used to check.
"""

import itertools

import numpy as np

from gamebush.model import bundle_from_dict
from gamebush.spanning import (
    graph_correspondence,
    make_correspondence,
    union_correspondences,
)


# ---------------------------------------------------------------------------
# bimatrix games


def bimatrix_bundle(A, B):
    """A two-player one-shot bundle: row mover, then unobserving column mover."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    m, n = A.shape
    rows = [f"a{i}" for i in range(m)]
    terms = [f"t{i}_{j}" for i in range(m) for j in range(n)]
    data = {
        "players": ["1", "2"],
        "vertices": ["r"] + rows + terms,
        "arrows": [["r", v] for v in rows]
        + [[f"a{i}", f"t{i}_{j}"] for i in range(m) for j in range(n)],
        "nature": {},
        "info_partitions": {
            "1": [
                {
                    "nodes": ["r"],
                    "actions": [f"r{i}" for i in range(m)],
                    "move": {"r": {f"r{i}": f"a{i}" for i in range(m)}},
                }
            ],
            "2": [
                {
                    "nodes": rows,
                    "actions": [f"c{j}" for j in range(n)],
                    "move": {
                        f"a{i}": {f"c{j}": f"t{i}_{j}" for j in range(n)}
                        for i in range(m)
                    },
                }
            ],
        },
        "root_partitions": {"1": [["r"]], "2": [["r"]]},
        "terminal_partitions": {"1": [[t] for t in terms], "2": [[t] for t in terms]},
        "continuations": [
            {
                "class": [f"t{i}_{j}"],
                "kind": "constant",
                "payoffs": {"1": float(A[i, j]), "2": float(B[i, j])},
            }
            for i in range(m)
            for j in range(n)
        ],
    }
    return bundle_from_dict(data)


def _supports(n):
    for r in range(1, n + 1):
        yield from itertools.combinations(range(n), r)


def _support_solution(P, rows, cols):
    """Distribution y on ``cols`` equalizing P[rows] @ y, or None.

    Solves the linear system with an equal-payoff unknown and checks
    consistency; verification against the full game happens in the caller.
    """
    k = len(cols)
    eqs = np.zeros((len(rows) + 1, k + 1))
    rhs = np.zeros(len(rows) + 1)
    for r, i in enumerate(rows):
        eqs[r, :k] = P[i, cols]
        eqs[r, k] = -1.0
    eqs[-1, :k] = 1.0
    rhs[-1] = 1.0
    sol, *_ = np.linalg.lstsq(eqs, rhs, rcond=None)
    if np.max(np.abs(eqs @ sol - rhs)) > 1e-7:
        return None
    y = sol[:k]
    if y.min() < -1e-9:
        return None
    y = np.clip(y, 0.0, None)
    s = y.sum()
    if s <= 0:
        return None
    return y / s


def nash_oracle_bimatrix(A, B, tol=1e-7):
    """All Nash equilibria of (A, B) found by support enumeration.

    Returns a list of (x, y) arrays.  Each candidate is re-verified
    directly against the best-response conditions, so the enumeration
    method cannot let a non-equilibrium through.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    m, n = A.shape
    out = []
    seen = set()
    for S1 in _supports(m):
        for S2 in _supports(n):
            y = _support_solution(A, list(S1), list(S2))
            x = _support_solution(B.T, list(S2), list(S1))
            if x is None or y is None:
                continue
            xf = np.zeros(m)
            xf[list(S1)] = x
            yf = np.zeros(n)
            yf[list(S2)] = y
            u = A @ yf
            v = B.T @ xf
            if u[list(S1)].min() < u.max() - tol:
                continue
            if v[list(S2)].min() < v.max() - tol:
                continue
            key = (tuple(np.round(xf, 6)), tuple(np.round(yf, 6)))
            if key in seen:
                continue
            seen.add(key)
            out.append((xf, yf))
    return out


def is_nash_bimatrix(A, B, x, y, tol=1e-6):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = A @ y
    v = B.T @ x
    return float(x @ u) >= u.max() - tol and float(y @ v) >= v.max() - tol


# ---------------------------------------------------------------------------
# random bushes


def random_tree_bush(rng, max_vertices=14, nplayers=2, p_nature=0.15):
    """A random perfect-information tree bundle with constant payoffs.

    Singleton information sets everywhere, so perfect recall holds by
    construction and every union of complete subtrees is a subgame set.
    """
    players = [str(i + 1) for i in range(nplayers)]
    counter = itertools.count()
    root = f"v{next(counter)}"
    vertices = [root]
    arrows = []
    nature = {}
    owners = {}
    frontier = [(root, 0)]
    while frontier:
        v, depth = frontier.pop(0)
        budget = max_vertices - len(vertices)
        if budget < 2 or (depth > 0 and rng.random() < 0.25 + 0.2 * depth):
            continue
        k = int(min(budget, rng.integers(2, 4)))
        kids = [f"v{next(counter)}" for _ in range(k)]
        vertices.extend(kids)
        arrows.extend([v, c] for c in kids)
        if rng.random() < p_nature:
            w = rng.dirichlet(np.ones(k))
            nature[v] = {c: float(p) for c, p in zip(kids, w)}
        else:
            owners[v] = players[int(rng.integers(nplayers))]
        frontier.extend((c, depth + 1) for c in kids)

    children = {v: [] for v in vertices}
    for u, c in arrows:
        children[u].append(c)
    terminals = [v for v in vertices if not children[v]]
    info = {p: [] for p in players}
    for v, p in owners.items():
        kids = children[v]
        info[p].append(
            {
                "nodes": [v],
                "actions": [f"{v}:{i}" for i in range(len(kids))],
                "move": {v: {f"{v}:{i}": c for i, c in enumerate(kids)}},
            }
        )
    data = {
        "players": players,
        "vertices": vertices,
        "arrows": arrows,
        "nature": nature,
        "info_partitions": info,
        "root_partitions": {p: [[root]] for p in players},
        "terminal_partitions": {p: [[t] for t in terminals] for p in players},
        "continuations": [
            {
                "class": [t],
                "kind": "constant",
                "payoffs": {p: float(rng.uniform(-2, 2)) for p in players},
            }
            for t in terminals
        ],
    }
    return bundle_from_dict(data)


def random_pooled_bush(rng, max_states=4, multi_root=False):
    """A two-stage bush where player 2 moves without observing the state.

    Stage one: a root mover (player 1) or bare roots pick among states;
    stage two: player 2's information blocks pool random groups of states.
    Pooled blocks force whole groups into any subgame set, which is what
    the lattice code has to get right.
    """
    k = int(rng.integers(2, max_states + 1))
    states = [f"s{i}" for i in range(k)]
    vertices = []
    arrows = []
    if multi_root:
        roots = states
        info1 = []
    else:
        roots = ["r"]
        vertices.append("r")
        arrows += [["r", s] for s in states]
        info1 = [
            {
                "nodes": ["r"],
                "actions": [f"go{i}" for i in range(k)],
                "move": {"r": {f"go{i}": s for i, s in enumerate(states)}},
            }
        ]
    vertices.extend(states)

    # random partition of states into pooled player-2 blocks
    nblocks = int(rng.integers(1, k + 1))
    assign = [int(rng.integers(nblocks)) for _ in range(k)]
    groups = {}
    for si, g in enumerate(assign):
        groups.setdefault(g, []).append(states[si])
    info2 = []
    terminals = []
    for g, nodes in sorted(groups.items()):
        acts = ["u", "d"]
        move = {}
        for s in nodes:
            move[s] = {}
            for a in acts:
                t = f"{s}{a}"
                terminals.append(t)
                vertices.append(t)
                arrows.append([s, t])
                move[s][a] = t
        info2.append({"nodes": nodes, "actions": acts, "move": move})

    players = ["1", "2"]
    data = {
        "players": players,
        "vertices": vertices,
        "arrows": arrows,
        "nature": {},
        "info_partitions": {"1": info1, "2": info2},
        "root_partitions": {p: [list(roots)] for p in players},
        "terminal_partitions": {p: [[t] for t in terminals] for p in players},
        "continuations": [
            {
                "class": [t],
                "kind": "constant",
                "payoffs": {p: float(rng.uniform(-2, 2)) for p in players},
            }
            for t in terminals
        ],
    }
    return bundle_from_dict(data)


def brute_force_subgame_sets(bush):
    """Every S ⊆ V closed under arrows and saturated for all partitions.

    Direct 2^|V| scan from the definition: no arrow leaves S, and every
    information block and terminal block is inside S or disjoint from it.
    """
    V = list(bush.vertices)
    nv = len(V)
    if nv > 16:
        raise ValueError("brute force oracle capped at 16 vertices")
    blocks = []
    for p in bush.players:
        blocks += [frozenset(b.nodes) for b in bush.info[p]]
        blocks += [frozenset(b) for b in bush.terminal_partition[p]]
    out = set()
    for bits in range(1 << nv):
        S = frozenset(V[i] for i in range(nv) if bits >> i & 1)
        ok = all(
            all(c in S for c in bush.children(v)) for v in S
        ) and all(b <= S or not (b & S) for b in blocks)
        if ok:
            out.add(S)
    return out


# ---------------------------------------------------------------------------
# random correspondences over 1-dimensional pairs


def random_graph_corr(rng, pair, m=1, scale=1.0):
    vals = rng.uniform(-scale, scale, size=(len(pair.vertices), m))
    return graph_correspondence(pair, vals)


def add_whiskers(rng, corr, count=2, avoid=()):
    """Union vertical whiskers (fiber segments) at random W-vertices.

    The result contains the original correspondence, so spanning is
    preserved; ``avoid`` lists vertex indices to leave singleton-valued.
    """
    pair = corr.pair
    choices = [i for i in range(len(pair.vertices)) if i not in set(avoid)]
    labels = []
    simplices = []
    for _ in range(count):
        if not choices:
            break
        w = int(choices[rng.integers(len(choices))])
        y0 = rng.uniform(-1.5, 1.5, size=corr.m)
        y1 = y0 + rng.uniform(0.2, 0.8, size=corr.m)
        base = len(labels)
        labels.append((w, tuple(float(x) for x in y0)))
        labels.append((w, tuple(float(x) for x in y1)))
        simplices.append((base, base + 1))
    if not simplices:
        return corr
    extra = make_correspondence(pair, labels, simplices)
    return union_correspondences(corr, extra)


def random_spanning_corr(rng, pair, m=1, avoid=()):
    """A random correspondence guaranteed to span: a PL graph plus noise."""
    corr = random_graph_corr(rng, pair, m=m)
    if rng.random() < 0.7:
        corr = add_whiskers(rng, corr, count=int(rng.integers(1, 4)), avoid=avoid)
    return corr


def random_simplicial_map_values(rng, w_pair, x_pair):
    """Vertex values of a simplicial PL map W -> X (a lazy random walk).

    Each W-vertex lands on an X-vertex and each W-segment maps onto an
    X-segment or a single X-vertex, so the graph composes simplicially.
    """
    xs = sorted(v[0] for v in x_pair.vertices)
    nv = len(w_pair.vertices)
    pos = int(rng.integers(len(xs)))
    vals = [xs[pos]]
    for _ in range(nv - 1):
        step = int(rng.integers(-1, 2))
        pos = min(max(pos + step, 0), len(xs) - 1)
        vals.append(xs[pos])
    return np.array(vals)
