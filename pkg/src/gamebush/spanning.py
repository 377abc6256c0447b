"""Finite simplicial checker for the spanning property of correspondences.

A correspondence is treated here as a compact piecewise-linear subset F of
W x R^m, presented as a finite simplicial complex whose vertices carry
labels (w, y): a vertex of W's triangulation and a point of R^m.  The
checker decides whether the mod-2 fundamental class [W] of the pair
(W, bd W) lies in the image of the projection-induced homomorphism

    H_d(F, F | bd W; Z_2)  ->  H_d(W, bd W; Z_2)

of relative homology groups.  For finite complexes this is a linear
feasibility question over GF(2): find a d-chain z in F whose boundary is
supported in F | bd W and whose projection pushforward is the all-ones
chain [W].  Cech homology of general compacta is out of scope; on finite
complexes Cech and simplicial homology agree, so the checker covers
exactly the PL case.

Degenerate simplices (a d-simplex of F whose vertices share first labels)
push forward to zero, the standard simplicial convention.

Supported dimensions: d = 1 (ambient interval or circle) and d = 2
(square or torus).  The algebraic operations on correspondences (sum,
scaling, composition) are implemented for d = 1, where the diagonal
construction stays quadratic instead of combinatorial.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .kernels import gf2_rank, gf2_solve

_MANIFOLDS = {1: ("interval", "circle"), 2: ("square", "torus")}
_CLOSED = ("circle", "torus")
_KEY_DECIMALS = 12  # label dedup: points equal up to float noise merge


def _faces(simplex: tuple) -> list[tuple]:
    """Codimension-one faces of a simplex given as a sorted index tuple."""
    return [simplex[:i] + simplex[i + 1 :] for i in range(len(simplex))]


def _all_faces(simplex: tuple) -> list[tuple]:
    out = []
    for k in range(1, len(simplex) + 1):
        out.extend(itertools.combinations(simplex, k))
    return out


# ---------------------------------------------------------------------------
# triangulated pairs (W, bd W)


@dataclass(frozen=True)
class TriangulatedPair:
    """A triangulated compact d-dimensional W inside an ambient manifold.

    ``simplices`` are the top-dimensional simplices as sorted vertex index
    tuples; ``boundary`` holds the (d-1)-simplices that have exactly one
    coface.  Every (d-1)-face must have one or two cofaces, so the
    all-ones d-chain is automatically a relative cycle mod ``boundary``.
    """

    dimension: int
    manifold: str
    vertices: tuple
    simplices: tuple
    boundary: tuple

    @property
    def boundary_faces(self) -> frozenset:
        """All simplices of the subcomplex bd W, faces included."""
        out = set()
        for b in self.boundary:
            out.update(_all_faces(b))
        return frozenset(out)

    @property
    def face_set(self) -> frozenset:
        """All simplices of W's complex, every dimension."""
        out = set()
        for s in self.simplices:
            out.update(_all_faces(s))
        return frozenset(out)

    def interior_vertices(self) -> list[int]:
        on_boundary = {v for b in self.boundary for v in b}
        return [i for i in range(len(self.vertices)) if i not in on_boundary]

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "manifold": self.manifold,
            "vertices": [list(map(float, v)) for v in self.vertices],
            "simplices": [list(s) for s in self.simplices],
            "boundary": [list(b) for b in self.boundary],
        }

    @staticmethod
    def from_json(data: dict) -> "TriangulatedPair":
        return make_pair(
            int(data["dimension"]),
            data["manifold"],
            [tuple(v) for v in data["vertices"]],
            [tuple(s) for s in data["simplices"]],
        )


def make_pair(dimension: int, manifold: str, vertices, simplices) -> TriangulatedPair:
    """Validate and build a TriangulatedPair; derives the boundary subcomplex."""
    if dimension not in _MANIFOLDS:
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    if manifold not in _MANIFOLDS[dimension]:
        raise ValueError(f"manifold {manifold!r} does not match dimension {dimension}")
    verts = tuple(tuple(float(x) for x in v) for v in vertices)
    simps = []
    seen = set()
    for s in simplices:
        t = tuple(sorted(int(i) for i in s))
        if len(set(t)) != dimension + 1:
            raise ValueError(f"simplex {s} does not have {dimension + 1} distinct vertices")
        if any(i < 0 or i >= len(verts) for i in t):
            raise ValueError(f"simplex {s} references a missing vertex")
        if t in seen:
            raise ValueError(f"duplicate simplex {t}")
        seen.add(t)
        simps.append(t)
    if not simps:
        raise ValueError("a pair needs at least one top-dimensional simplex")
    cofaces: dict[tuple, int] = {}
    for s in simps:
        for g in _faces(s):
            cofaces[g] = cofaces.get(g, 0) + 1
    bad = [g for g, c in cofaces.items() if c > 2]
    if bad:
        raise ValueError(f"face {bad[0]} has {cofaces[bad[0]]} cofaces; 1 or 2 allowed")
    boundary = tuple(sorted(g for g, c in cofaces.items() if c == 1))
    # W filling a closed ambient manifold has empty boundary; a proper
    # subset of one does not, so only the open tags force non-emptiness
    if manifold not in _CLOSED and not boundary:
        raise ValueError(f"{manifold} must have a non-empty boundary")
    return TriangulatedPair(dimension, manifold, verts, tuple(sorted(simps)), boundary)


def fundamental_class(pair: TriangulatedPair) -> np.ndarray:
    """The all-ones d-chain over ``pair.simplices`` as a boolean vector.

    Asserts it is a relative cycle (its boundary is supported in bd W) and,
    via a GF(2) rank computation, that it is the only non-zero relative
    d-cycle, which for a valid pair pins down connectedness of W.
    """
    d = pair.dimension
    cofaces: dict[tuple, int] = {}
    for s in pair.simplices:
        for g in _faces(s):
            cofaces[g] = cofaces.get(g, 0) + 1
    bset = set(pair.boundary)
    for g, c in cofaces.items():
        if c % 2 == 1 and g not in bset:
            raise ValueError(f"boundary of [W] hits interior face {g}")
    interior = sorted(g for g in cofaces if g not in bset)
    rel = np.zeros((len(interior), len(pair.simplices)), dtype=bool)
    gidx = {g: i for i, g in enumerate(interior)}
    for j, s in enumerate(pair.simplices):
        for g in _faces(s):
            if g in gidx:
                rel[gidx[g], j] ^= True
    kernel_dim = len(pair.simplices) - gf2_rank(rel)
    if kernel_dim != 1:
        raise ValueError(
            f"relative cycle space has dimension {kernel_dim}; "
            "W must be connected with a unique relative class"
        )
    return np.ones(len(pair.simplices), dtype=bool)


# ---------------------------------------------------------------------------
# chain systems


@dataclass
class Z2ChainSystem:
    """Boundary matrices over GF(2) of a complex, dimensions 0..d+1.

    ``simplices[k]`` lists the k-simplices in a fixed order and
    ``boundaries[k]`` is the boolean matrix of the boundary operator
    C_k -> C_{k-1}.  ``verify`` checks the chain condition on composites.
    """

    simplices: dict
    boundaries: dict

    def verify(self) -> bool:
        for k in self.boundaries:
            if k - 1 in self.boundaries:
                a = self.boundaries[k - 1].astype(np.uint8)
                b = self.boundaries[k].astype(np.uint8)
                if a.size and b.size and np.any((a @ b) % 2):
                    raise ValueError(f"boundary composite in dimension {k} is non-zero")
        return True


def chain_system(top_simplices) -> Z2ChainSystem:
    """Close the given simplices under faces and assemble boundary matrices."""
    by_dim: dict[int, set] = {}
    for s in top_simplices:
        for f in _all_faces(tuple(sorted(s))):
            by_dim.setdefault(len(f) - 1, set()).add(f)
    simplices = {k: sorted(v) for k, v in by_dim.items()}
    index = {k: {s: i for i, s in enumerate(v)} for k, v in simplices.items()}
    boundaries = {}
    for k in simplices:
        if k == 0:
            continue
        mat = np.zeros((len(simplices[k - 1]), len(simplices[k])), dtype=bool)
        for j, s in enumerate(simplices[k]):
            for g in _faces(s):
                mat[index[k - 1][g], j] ^= True
        boundaries[k] = mat
    return Z2ChainSystem(simplices=simplices, boundaries=boundaries)


# ---------------------------------------------------------------------------
# simplicial correspondences


@dataclass(frozen=True)
class SimplicialCorrespondence:
    """A finite complex over W x R^m with a simplicial projection to W.

    Each vertex of the complex is labeled by a pair (w, y): the index of a
    vertex of ``pair`` and a point of R^m.  The projection sends a simplex
    to the simplex of W spanned by the distinct first labels (possibly a
    degenerate image of lower dimension).  The part of the complex lying
    over bd W is derived from the labels, never stored.
    """

    pair: TriangulatedPair
    labels: tuple  # ((w_index, (y_0, ..., y_{m-1})), ...)
    simplices: tuple  # sorted tuples of label indices, mixed dimensions

    @property
    def m(self) -> int:
        return len(self.labels[0][1]) if self.labels else 0

    def image(self, simplex: tuple) -> tuple:
        """Projection of an F-simplex: the W-simplex of its first labels."""
        return tuple(sorted({self.labels[i][0] for i in simplex}))

    def d_simplices(self) -> list[tuple]:
        d = self.pair.dimension
        return [s for s in self.simplices if len(s) == d + 1]

    def fiber(self, w_index: int) -> list[np.ndarray]:
        """Values over a W-vertex: the y parts of vertices labeled by it."""
        return [np.array(y) for w, y in self.labels if w == w_index]

    def over_boundary(self, simplex: tuple) -> bool:
        """Whether an F-simplex lies in F | bd W, i.e. projects into bd W."""
        return self.image(simplex) in self.pair.boundary_faces

    def validate(self) -> bool:
        faces = self.pair.face_set
        nw = len(self.pair.vertices)
        for w, y in self.labels:
            if not 0 <= w < nw:
                raise ValueError(f"label references missing W-vertex {w}")
            if len(y) != self.m:
                raise ValueError("inconsistent value dimensions across labels")
        seen = set(self.simplices)
        for s in self.simplices:
            if self.image(s) not in faces:
                raise ValueError(f"projection of {s} is not a simplex of W")
            for g in _faces(s):
                if len(g) >= 1 and g not in seen and len(s) > 1:
                    raise ValueError(f"complex not closed under faces at {g}")
        return True

    def to_json(self) -> dict:
        return {
            "dimension": self.pair.dimension,
            "pair": self.pair.to_json(),
            "vertices": [list(map(float, y)) for _, y in self.labels],
            "labels": [int(w) for w, _ in self.labels],
            "simplices": [list(s) for s in self.simplices],
        }

    @staticmethod
    def from_json(data: dict) -> "SimplicialCorrespondence":
        pair = TriangulatedPair.from_json(data["pair"])
        labels = [
            (int(w), tuple(float(x) for x in y))
            for w, y in zip(data["labels"], data["vertices"])
        ]
        return make_correspondence(pair, labels, [tuple(s) for s in data["simplices"]])


def make_correspondence(pair, labels, simplices) -> SimplicialCorrespondence:
    """Build a correspondence, merging duplicate labels and closing faces.

    Vertices whose labels agree up to 1e-12 are identified; a
    correspondence is a set, so simplices collapsing onto one another
    under the identification appear once.
    """
    canon: dict[tuple, int] = {}
    remap = []
    out_labels = []
    for w, y in labels:
        yt = tuple(float(v) for v in y)
        key = (int(w), tuple(np.round(yt, _KEY_DECIMALS)))
        if key not in canon:
            canon[key] = len(out_labels)
            out_labels.append((int(w), yt))
        remap.append(canon[key])
    out_simps = set()
    for s in simplices:
        t = tuple(sorted({remap[i] for i in s}))
        if t:
            out_simps.update(_all_faces(t))
    corr = SimplicialCorrespondence(
        pair=pair, labels=tuple(out_labels), simplices=tuple(sorted(out_simps))
    )
    corr.validate()
    return corr


def graph_correspondence(pair, values) -> SimplicialCorrespondence:
    """The graph of a PL function on W sampled at the triangulation vertices."""
    vals = np.atleast_2d(np.asarray(values, dtype=float))
    if vals.shape[0] == 1 and len(pair.vertices) > 1:
        vals = vals.T
    if vals.shape[0] != len(pair.vertices):
        raise ValueError("one value row per W-vertex required")
    labels = [(i, tuple(vals[i])) for i in range(len(pair.vertices))]
    return make_correspondence(pair, labels, pair.simplices)


def constant_correspondence(pair, y) -> SimplicialCorrespondence:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return graph_correspondence(pair, np.tile(y, (len(pair.vertices), 1)))


def union_correspondences(a, b) -> SimplicialCorrespondence:
    """Union of two correspondences over the same pair, as point sets."""
    if a.pair != b.pair:
        raise ValueError("union requires correspondences over the same pair")
    labels = list(a.labels) + list(b.labels)
    shift = len(a.labels)
    simplices = list(a.simplices) + [
        tuple(i + shift for i in s) for s in b.simplices
    ]
    return make_correspondence(a.pair, labels, simplices)


# ---------------------------------------------------------------------------
# the spanning decision


def has_spanning(corr: SimplicialCorrespondence, pair: TriangulatedPair | None = None):
    """Decide the spanning property; returns (verdict, witness).

    Solves over GF(2) for a d-chain z in F with boundary supported in
    F | bd W and projection pushforward equal to [W].  W carries no
    (d+1)-simplices and bd W no d-simplices, so chain-level equality
    with [W] is the same as equality of relative homology classes.  The
    witness is a list of indices into ``corr.d_simplices()``, or None.
    """
    if pair is None:
        pair = corr.pair
    elif pair != corr.pair:
        raise ValueError("correspondence is not over the given pair")
    corr.validate()
    fundamental_class(pair)
    fd = corr.d_simplices()
    ncols = len(fd)
    rows = []
    rhs = []
    # interior (d-1)-faces of F must cancel
    incidence: dict[tuple, list[int]] = {}
    for j, s in enumerate(fd):
        for g in _faces(s):
            incidence.setdefault(g, []).append(j)
    for g, js in sorted(incidence.items()):
        if corr.over_boundary(g):
            continue
        row = np.zeros(ncols, dtype=bool)
        row[js] = True
        rows.append(row)
        rhs.append(False)
    # pushforward must hit every d-simplex of W exactly once mod 2;
    # degenerate projections contribute nothing
    images = [corr.image(s) for s in fd]
    for t in pair.simplices:
        row = np.zeros(ncols, dtype=bool)
        for j, img in enumerate(images):
            if len(img) == pair.dimension + 1 and img == t:
                row[j] = True
        rows.append(row)
        rhs.append(True)
    a = np.array(rows, dtype=bool).reshape(len(rows), ncols)
    b = np.array(rhs, dtype=bool)
    z = gf2_solve(a, b)
    if z is None:
        return False, None
    return True, [int(j) for j in np.nonzero(z)[0]]


def restrict_correspondence(corr, pair, keep_simplices):
    """Restriction of F to a full-dimensional subcomplex W' of W.

    ``keep_simplices`` lists d-simplices of W (index tuples) spanning W'.
    The result is a correspondence over the sub-pair, carrying exactly the
    F-simplices that project into W'.
    """
    if pair != corr.pair:
        raise ValueError("correspondence is not over the given pair")
    keep = {tuple(sorted(s)) for s in keep_simplices}
    missing = keep - set(pair.simplices)
    if missing:
        raise ValueError(f"{sorted(missing)[0]} is not a simplex of W")
    if not keep:
        raise ValueError("restriction must keep at least one top simplex")
    used = sorted({v for s in keep for v in s})
    vmap = {v: i for i, v in enumerate(used)}
    sub_pair = make_pair(
        pair.dimension,
        pair.manifold,
        [pair.vertices[v] for v in used],
        [tuple(vmap[v] for v in s) for s in sorted(keep)],
    )
    sub_faces = set()
    for s in keep:
        sub_faces.update(_all_faces(s))
    fmap = {}
    labels = []
    for i, (w, y) in enumerate(corr.labels):
        if w in vmap:
            fmap[i] = len(labels)
            labels.append((vmap[w], y))
    simplices = []
    for s in corr.simplices:
        if corr.image(s) in sub_faces and all(i in fmap for i in s):
            simplices.append(tuple(fmap[i] for i in s))
    return make_correspondence(sub_pair, labels, simplices)


# ---------------------------------------------------------------------------
# algebra on d = 1 correspondences


def _require_dim1(corr, op: str):
    if corr.pair.dimension != 1:
        raise ValueError(f"{op} is implemented for 1-dimensional pairs only")


def _segments_over(corr, t: tuple) -> list[tuple]:
    """Non-degenerate F-segments projecting onto the W-segment t, as
    ((w_a, y_a), (w_b, y_b)) pairs ordered to match t = (a, b)."""
    out = []
    for s in corr.d_simplices():
        if corr.image(s) != t or len({corr.labels[i][0] for i in s}) != 2:
            continue
        i, j = s
        if corr.labels[i][0] == t[0]:
            out.append((corr.labels[i], corr.labels[j]))
        else:
            out.append((corr.labels[j], corr.labels[i]))
    return out


def _perturbed(corr, eps: float, rng) -> SimplicialCorrespondence:
    labels = [
        (w, tuple(np.asarray(y) + rng.uniform(-eps, eps, size=len(y))))
        for w, y in corr.labels
    ]
    return make_correspondence(corr.pair, labels, corr.simplices)


def sum_correspondences(corrs, perturb: float = 1e-9, seed: int = 0):
    """Pointwise sum of correspondences over one pair, values in R^m.

    Implements the diagonal construction: over each W-segment, every tuple
    of non-degenerate segments (one per summand) contributes the segment
    of coordinate sums.  When distinct tuples collide onto one output
    segment, the inputs are nudged by at most ``perturb`` (deterministic
    in ``seed``) to restore general position; pass perturb=0 to keep exact
    collisions, which then merge by set semantics.
    """
    corrs = list(corrs)
    if not corrs:
        raise ValueError("need at least one correspondence")
    pair = corrs[0].pair
    for c in corrs:
        _require_dim1(c, "sum_correspondences")
        if c.pair != pair:
            raise ValueError("summands must live over the same pair")
        if c.m != corrs[0].m:
            raise ValueError("summands must share a value dimension")

    def build(cs):
        labels = []
        simplices = []
        keys = {}
        collision = False
        for t in pair.simplices:
            per = [_segments_over(c, t) for c in cs]
            for combo in itertools.product(*per):
                ya = np.sum([np.asarray(seg[0][1]) for seg in combo], axis=0)
                yb = np.sum([np.asarray(seg[1][1]) for seg in combo], axis=0)
                key = (t, tuple(np.round(ya, _KEY_DECIMALS)), tuple(np.round(yb, _KEY_DECIMALS)))
                if key in keys:
                    collision = True
                keys[key] = True
                base = len(labels)
                labels.append((t[0], tuple(ya)))
                labels.append((t[1], tuple(yb)))
                simplices.append((base, base + 1))
        return make_correspondence(pair, labels, simplices), collision

    out, collision = build(corrs)
    if collision and perturb:
        rng = np.random.default_rng(seed)
        out, _ = build([_perturbed(c, perturb, rng) for c in corrs])
    return out


def product_correspondences(corrs) -> SimplicialCorrespondence:
    """Diagonal product over one pair: values (y_1, ..., y_l) concatenated.

    Over each W-segment, every tuple of non-degenerate segments (one per
    factor) contributes the diagonal segment whose labels concatenate the
    factor values.  This is the general-position carrier of the product
    set {(y_i)_i : y_i in F_i(x)}; coinciding diagonals merge by set
    semantics.  The full product contains it, so a spanning chain here
    certifies the product spans.
    """
    corrs = list(corrs)
    if not corrs:
        raise ValueError("need at least one correspondence")
    pair = corrs[0].pair
    for c in corrs:
        _require_dim1(c, "product_correspondences")
        if c.pair != pair:
            raise ValueError("factors must live over the same pair")

    labels = []
    simplices = []
    for t in pair.simplices:
        per = [_segments_over(c, t) for c in corrs]
        for combo in itertools.product(*per):
            ya = tuple(x for seg in combo for x in seg[0][1])
            yb = tuple(x for seg in combo for x in seg[1][1])
            base = len(labels)
            labels.append((t[0], ya))
            labels.append((t[1], yb))
            simplices.append((base, base + 1))
    return make_correspondence(pair, labels, simplices)


def scale_correspondence(lam, corr) -> SimplicialCorrespondence:
    """The correspondence (lam F)(x) = {lam(x) y : y in F(x)}.

    ``lam`` is piecewise-linear on W: an array of per-vertex values, or a
    callable evaluated at the vertex coordinates.  Labels are scaled at
    the vertices; fibers collapsing together merge by set semantics.
    """
    _require_dim1(corr, "scale_correspondence")
    pair = corr.pair
    if callable(lam):
        lam_v = np.array([lam(np.array(v)) for v in pair.vertices], dtype=float)
    else:
        lam_v = np.asarray(lam, dtype=float)
    if lam_v.shape != (len(pair.vertices),):
        raise ValueError("lam must give one value per W-vertex")
    labels = [
        (w, tuple(lam_v[w] * np.asarray(y))) for w, y in corr.labels
    ]
    return make_correspondence(pair, labels, corr.simplices)


def compose_correspondences(phi, psi) -> SimplicialCorrespondence:
    """Fiberwise composition of Phi: W -> X with Psi: X -> Y, d = 1.

    Phi's values must be scalars landing on vertex coordinates of Psi's
    pair (refine Phi first otherwise), and Psi's pair must be an interval
    so that coordinates order its triangulation.  Crossing points of X's
    vertices subdivide W, so the result lives over a refined copy of W's
    pair; vertical segments of either input are carried along, since a
    witness chain may need them to switch branches at a crossing.
    """
    _require_dim1(phi, "compose_correspondences")
    _require_dim1(psi, "compose_correspondences")
    if phi.m != 1:
        raise ValueError("Phi must take values in R^1, the codomain coordinate")
    xpair = psi.pair
    if xpair.manifold != "interval":
        raise ValueError("Psi must live over an interval pair")
    xcoord = np.array([v[0] for v in xpair.vertices])
    # snap Phi's values onto X's vertices
    xv_of_label = []
    for w, y in phi.labels:
        hits = np.nonzero(np.abs(xcoord - y[0]) <= 1e-12)[0]
        if hits.size == 0:
            raise ValueError(
                f"value {y[0]} of Phi is not a vertex of X; refine Phi first"
            )
        xv_of_label.append(int(hits[0]))
    xseg = set(xpair.simplices)
    vindex = {float(xcoord[k]): k for k in range(len(xcoord))}

    wpair = phi.pair
    # horizontal pieces per W-segment, in fractional coordinates along it:
    # (fa, fb, ya, yb), linear in between; verticals as (f, ya, yb)
    pieces: dict[tuple, list] = {t: [] for t in wpair.simplices}
    verts_at: dict[tuple, list] = {t: [] for t in wpair.simplices}
    point_verticals: list[tuple] = []  # (w_vertex, ya, yb) at original vertices

    def psi_pieces(u: int, v: int):
        """Psi-segments over the X-segment {u, v}, ordered from u to v."""
        key = tuple(sorted((u, v)))
        if key not in xseg:
            return []
        segs = _segments_over(psi, key)
        return segs if key == (u, v) else [(b, a) for a, b in segs]

    def psi_verticals(u: int):
        """Degenerate Psi-segments over the X-vertex u."""
        out = []
        for s in psi.d_simplices():
            if {psi.labels[i][0] for i in s} == {u}:
                out.append((psi.labels[s[0]][1], psi.labels[s[1]][1]))
        return out

    def crossed_chain(ca: float, cb: float):
        lo, hi = sorted((ca, cb))
        cs = sorted({float(c) for c in xcoord if lo - 1e-12 <= c <= hi + 1e-12})
        return cs if ca <= cb else cs[::-1]

    for s in phi.d_simplices():
        i, j = s
        wi, wj = phi.labels[i][0], phi.labels[j][0]
        ci, cj = xcoord[xv_of_label[i]], xcoord[xv_of_label[j]]
        if wi == wj:
            # vertical Phi-segment: {w} x Psi(x-path from ci to cj)
            for c_a, c_b in itertools.pairwise(crossed_chain(ci, cj)):
                for (xa, ya), (xb, yb) in psi_pieces(vindex[c_a], vindex[c_b]):
                    point_verticals.append((wi, ya, yb))
            for c in crossed_chain(ci, cj):
                for ya, yb in psi_verticals(vindex[c]):
                    point_verticals.append((wi, ya, yb))
            continue
        t = tuple(sorted((wi, wj)))
        c0, c1 = (ci, cj) if wi == t[0] else (cj, ci)  # x at t[0], t[1]
        if abs(c1 - c0) <= 1e-12:
            # constant Phi over the segment: the fiber of Psi at that vertex
            u = vindex[float(c0)]
            for y in psi.fiber(u):
                pieces[t].append((0.0, 1.0, np.asarray(y), np.asarray(y)))
            for ya, yb in psi_verticals(u):
                verts_at[t].append((0.0, ya, yb))
                verts_at[t].append((1.0, ya, yb))
            continue
        chain = crossed_chain(c0, c1)
        for c_a, c_b in itertools.pairwise(chain):
            fa = (c_a - c0) / (c1 - c0)
            fb = (c_b - c0) / (c1 - c0)
            for (xa, ya), (xb, yb) in psi_pieces(vindex[c_a], vindex[c_b]):
                pieces[t].append((fa, fb, np.asarray(ya), np.asarray(yb)))
        # branch switches can happen wherever the path meets an X-vertex
        for c in chain:
            f = (c - c0) / (c1 - c0)
            for ya, yb in psi_verticals(vindex[c]):
                verts_at[t].append((f, ya, yb))

    # refine W at every cut and subdivide the horizontal pieces, so that
    # distinct Phi-branches crossing at different points stay simplicial
    new_coords = list(wpair.vertices)
    point_ids: dict[tuple, int] = {}

    def w_point(t: tuple, frac: float) -> int:
        if frac <= 1e-12:
            return t[0]
        if frac >= 1.0 - 1e-12:
            return t[1]
        key = (t, round(frac, _KEY_DECIMALS))
        if key not in point_ids:
            a = np.asarray(wpair.vertices[t[0]])
            b = np.asarray(wpair.vertices[t[1]])
            new_coords.append(tuple(a + frac * (b - a)))
            point_ids[key] = len(new_coords) - 1
        return point_ids[key]

    labels: list[tuple] = []
    simplices: list[tuple] = []

    def emit(w_i: int, y_i, w_j: int, y_j):
        base = len(labels)
        labels.append((w_i, tuple(np.atleast_1d(y_i))))
        labels.append((w_j, tuple(np.atleast_1d(y_j))))
        simplices.append((base, base + 1))

    ref_simplices = []
    for t in wpair.simplices:
        cutset = {0.0, 1.0}
        for fa, fb, _, _ in pieces[t]:
            cutset.update((fa, fb))
        for f, _, _ in verts_at[t]:
            cutset.add(f)
        cuts = sorted(cutset)
        # drop cuts that collide after rounding
        cuts = [c for k, c in enumerate(cuts) if k == 0 or c - cuts[k - 1] > 1e-12]
        for fa, fb in itertools.pairwise(cuts):
            ref_simplices.append(tuple(sorted((w_point(t, fa), w_point(t, fb)))))
        for fa, fb, ya, yb in pieces[t]:
            lo, hi = sorted((fa, fb))
            inner = [f for f in cuts if lo - 1e-12 <= f <= hi + 1e-12]
            if fa > fb:
                inner = inner[::-1]
            span = fb - fa
            for g1, g2 in itertools.pairwise(inner):
                y1 = ya if abs(span) <= 1e-12 else ya + (g1 - fa) / span * (yb - ya)
                y2 = yb if abs(span) <= 1e-12 else ya + (g2 - fa) / span * (yb - ya)
                emit(w_point(t, g1), y1, w_point(t, g2), y2)
        for f, ya, yb in verts_at[t]:
            emit(w_point(t, f), ya, w_point(t, f), yb)
    for w, ya, yb in point_verticals:
        emit(w, ya, w, yb)

    ref_pair = make_pair(1, wpair.manifold, new_coords, ref_simplices)
    return make_correspondence(ref_pair, labels, simplices)


# ---------------------------------------------------------------------------
# standard pairs


def interval_pair(segments: int = 2, lo: float = 0.0, hi: float = 1.0):
    """[lo, hi] as a chain of equal segments; boundary is the endpoints."""
    if segments < 1:
        raise ValueError("need at least one segment")
    coords = np.linspace(lo, hi, segments + 1)
    verts = [(float(c),) for c in coords]
    simps = [(i, i + 1) for i in range(segments)]
    return make_pair(1, "interval", verts, simps)


def circle_pair(segments: int = 3) -> TriangulatedPair:
    """The circle as a closed polygon; empty boundary."""
    if segments < 3:
        raise ValueError("a triangulated circle needs at least 3 segments")
    ang = 2.0 * np.pi * np.arange(segments) / segments
    verts = [(float(np.cos(a)), float(np.sin(a))) for a in ang]
    simps = [(i, (i + 1) % segments) for i in range(segments)]
    return make_pair(1, "circle", verts, simps)


def square_pair() -> TriangulatedPair:
    """The unit square fanned into 8 triangles from its center."""
    ring = [
        (0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 0.5),
        (1.0, 1.0), (0.5, 1.0), (0.0, 1.0), (0.0, 0.5),
    ]
    verts = ring + [(0.5, 0.5)]
    center = 8
    simps = [(i, (i + 1) % 8, center) for i in range(8)]
    return make_pair(2, "square", verts, simps)


def torus_pair(n: int = 3) -> TriangulatedPair:
    """An n x n grid torus, each cell split into two triangles."""
    if n < 3:
        raise ValueError("a simplicial grid torus needs n >= 3")
    verts = [(i / n, j / n) for i in range(n) for j in range(n)]

    def vid(i, j):
        return (i % n) * n + (j % n)

    simps = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            simps.append((v00, v10, v11))
            simps.append((v00, v01, v11))
    return make_pair(2, "torus", verts, simps)


# ---------------------------------------------------------------------------
# file I/O


def load_correspondence(path: str) -> SimplicialCorrespondence:
    with open(path) as fh:
        return SimplicialCorrespondence.from_json(json.load(fh))


def save_correspondence(corr: SimplicialCorrespondence, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(corr.to_json(), fh, indent=1)
