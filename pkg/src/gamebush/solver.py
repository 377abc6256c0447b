"""Myopic equilibrium verification and search.

A profile/plan pair is a myopic (m-)equilibrium when every pure strategy in
a player's support attains that player's maximum per-pure-strategy payoff
under the frozen plan table.  Equivalently, with v the stacked value vector,
the blockwise nearest-point retraction r onto the simplex product satisfies
r(sigma + v) = sigma; both characterizations are exposed and must agree.

Search combines three mechanisms:

* exhaustive pure-profile checking (exact, small products only);
* support enumeration with linear solves, complete for profiles where at
  most two players mix and the payoff tables are constant;
* damped multistart fixed-point iteration sigma <- r(sigma + eta*v(sigma)),
  with eta halved on detected period-two cycling.

Everything returned passes verify_myopic at the configured tolerance; the
solver reports what it certifies and never fabricates.  Set-valued
continuation models branch the whole solve per fiber-candidate choice.
Equilibrium families are detected by bisecting along support directions and
reported as endpoint and midpoint representatives.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .kernels import fixed_point_constant, project_blocks, project_simplex
from .model import GameBundle
from .payoff_models import NoPlanError, SampledGraphModel, Selector, grid_compositions
from .strategies import (
    MixedProfile,
    Plan,
    action_values,
    as_q,
    compiled,
    expected_payoffs,
    make_plan,
    reach,
)

__all__ = [
    "SolverConfig",
    "MyopicCertificate",
    "SweepTable",
    "RegularizationConfig",
    "simplex_project",
    "retract",
    "nash_residual",
    "certificate_residual",
    "verify_myopic",
    "solve_myopic",
    "regularized_payoffs",
    "sweep",
    "solve_bundle_perfect",
    "PerfectResult",
]


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    support_cap: int = 64
    pure_cap: int = 4096
    max_iter: int = 100_000
    dyn_max_iter: int = 2500  # per-start cap when the plan must be re-frozen each step
    step_tol: float = 1e-11
    eta: float = 0.25
    multistarts: int = 32
    seed: int = 0
    dedup_tol: float = 1e-6
    selector: str = "first"
    branch_cap: int = 64
    mesh: int = 16
    epsilon: float | None = None
    bound: float | None = None
    detect_families: bool = True


@dataclass(frozen=True)
class RegularizationConfig:
    epsilon: float
    bound: float


@dataclass
class MyopicCertificate:
    """A verified profile/plan pair with its per-pure-strategy values."""

    sigma: MixedProfile
    plan: Plan
    values: dict
    residual: float
    tol: float
    payoffs: np.ndarray
    branch: dict | None = None
    family: str | None = None

    @property
    def valid(self) -> bool:
        return self.residual <= self.tol

    def to_json(self, bundle: GameBundle) -> dict:
        comp = compiled(bundle)
        return {
            "profile": {p: [float(x) for x in self.sigma[p]] for p in comp.players},
            "q": [float(x) for x in self.plan.q],
            "payoffs": {p: float(self.payoffs[i]) for i, p in enumerate(comp.players)},
            "values": {p: [float(x) for x in self.values[p]] for p in comp.players},
            "residual": float(self.residual),
            "tol": float(self.tol),
            "branch": {str(k): int(v) for k, v in (self.plan.choices or {}).items()},
            "family": self.family,
        }


# ---------------------------------------------------------------------------
# retraction characterization


def simplex_project(v) -> np.ndarray:
    """Euclidean nearest point of the standard simplex."""
    return project_simplex(np.asarray(v, dtype=float))


def retract(x: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Blockwise simplex projection onto the product of factor simplices."""
    return project_blocks(np.asarray(x, dtype=float), np.asarray(offsets, dtype=np.int64))


def nash_residual(sigma_blocks, value_blocks) -> float:
    """Norm of r(sigma + v) - sigma over the simplex product.

    Zero (within 1e-10) exactly when every support strategy attains its
    block's maximum value, matching the certificate residual criterion.
    """
    xs = [np.asarray(s, dtype=float) for s in sigma_blocks]
    vs = [np.asarray(v, dtype=float) for v in value_blocks]
    x = np.concatenate(xs)
    v = np.concatenate(vs)
    offsets = np.zeros(len(xs) + 1, dtype=np.int64)
    for i, s in enumerate(xs):
        offsets[i + 1] = offsets[i] + s.size
    return float(np.linalg.norm(retract(x + v, offsets) - x))


def certificate_residual(sigma_blocks, value_blocks) -> float:
    """max over players, strategies of sigma_a * (max_b v_b - v_a)."""
    worst = 0.0
    for s, v in zip(sigma_blocks, value_blocks):
        s = np.asarray(s, dtype=float)
        v = np.asarray(v, dtype=float)
        if v.size == 0:
            continue
        worst = max(worst, float(np.max(s * (np.max(v) - v))))
    return worst


# ---------------------------------------------------------------------------
# verification


def verify_myopic(
    bundle: GameBundle,
    q,
    sigma: MixedProfile,
    plan: Plan | None = None,
    tol: float = 1e-9,
    selector: str | Selector = "first",
    branch: dict | None = None,
    regularization: RegularizationConfig | None = None,
) -> MyopicCertificate:
    """Certificate for (q, sigma): plan, per-strategy values, residual."""
    comp = compiled(bundle)
    if plan is None:
        plan = make_plan(
            bundle, q, sigma, selector=selector, regularization=regularization, branch=branch
        )
    values = action_values(bundle, plan)
    residual = certificate_residual(
        [sigma[p] for p in comp.players], [values[p] for p in comp.players]
    )
    return MyopicCertificate(
        sigma=sigma,
        plan=plan,
        values=values,
        residual=residual,
        tol=tol,
        payoffs=expected_payoffs(bundle, plan),
        branch=branch,
    )


def regularized_payoffs(
    bundle: GameBundle, q, sigma: MixedProfile, config: RegularizationConfig,
    selector: str | Selector = "first",
):
    """Blended per-class payoff tables per the reach-ramp regularization.

    Classes reached with probability >= 2*epsilon keep their continuation
    value; below epsilon they take the constant bound table; in between the
    two are mixed linearly.  Returns (plan, lambdas).
    """
    plan = make_plan(bundle, q, sigma, selector=selector, regularization=config)
    return plan, plan.lambdas


# ---------------------------------------------------------------------------
# solve internals


def _is_constant_bundle(bundle: GameBundle):
    """Stacked (N, T) table when every class is distribution independent."""
    comp = compiled(bundle)
    y = np.zeros((len(comp.players), len(comp.terminals)))
    for ci, model in enumerate(bundle.models):
        table = model.constant_table()
        if table is None:
            return None
        y[:, comp.class_members_idx[ci]] = table
    return y


def _values_from_y(comp, qv, x, offsets, y):
    base = qv[comp.root_of] * comp.nat
    players = comp.players
    cons = []
    for i, p in enumerate(players):
        cons.append(x[offsets[i] : offsets[i + 1]] @ comp.M[p])
    out = np.empty_like(x)
    for i, p in enumerate(players):
        others = base.copy()
        for j in range(len(players)):
            if j != i:
                others = others * cons[j]
        out[offsets[i] : offsets[i + 1]] = comp.M[p] @ (others * y[i])
    return out


def _plan_y(bundle, comp, qv, x, offsets, selector, branch):
    """Frozen table at the profile x, or None when a needed fiber is empty."""
    base = qv[comp.root_of] * comp.nat
    w = base.copy()
    for i, p in enumerate(comp.players):
        w = w * (x[offsets[i] : offsets[i + 1]] @ comp.M[p])
    y = np.zeros((len(comp.players), len(comp.terminals)))
    for ci, model in enumerate(bundle.models):
        idx = comp.class_members_idx[ci]
        mass = w[idx]
        tot = float(mass.sum())
        if tot > 0.0:
            cond = mass / tot
        else:
            try:
                cond = model.witness_near(model.barycenter())
            except NoPlanError:
                return None
        cands = model.fiber(cond)
        if not cands:
            return None
        if branch and ci in branch:
            pick = branch[ci] % len(cands)
        else:
            pick = selector.choose(cands, cond)
        y[:, idx] = cands[pick]
    return y


def _iterate(bundle, comp, qv, x0, offsets, config, selector, branch, y_const=None):
    """Damped retraction iteration from x0; returns the final point."""
    if y_const is not None:
        base = qv[comp.root_of] * comp.nat
        x, _, _ = fixed_point_constant(
            np.ascontiguousarray(comp.m_stack()),
            offsets,
            np.ascontiguousarray(base),
            np.ascontiguousarray(y_const),
            np.ascontiguousarray(x0),
            config.eta,
            config.max_iter,
            config.step_tol,
        )
        return x
    x = x0.copy()
    eta = config.eta
    prev_step = None
    best_step = np.inf
    since_best = 0
    nblocks = len(offsets) - 1
    for _ in range(min(config.max_iter, config.dyn_max_iter)):
        y = _plan_y(bundle, comp, qv, x, offsets, selector, branch)
        if y is None:
            return x
        v = _values_from_y(comp, qv, x, offsets, y)
        res = 0.0
        for i in range(nblocks):
            vb = v[offsets[i] : offsets[i + 1]]
            xb = x[offsets[i] : offsets[i + 1]]
            if vb.size:
                res = max(res, float(np.max(xb * (np.max(vb) - vb))))
        if res <= 0.5 * config.tol:
            return x
        new = project_blocks(x + eta * v, offsets)
        step = float(np.max(np.abs(new - x)))
        if prev_step is not None and abs(step - prev_step) < 0.01 * step:
            eta *= 0.5  # period-two cycling guard
        prev_step = step
        x = new
        if step < config.step_tol:
            break
        if step < best_step * 0.5:
            best_step = step
            since_best = 0
        else:
            since_best += 1
            if since_best > 400:  # stalled plateau; let the verify gate judge
                break
    return x


def _branch_profiles(bundle: GameBundle, config: SolverConfig):
    """Fiber-candidate index assignments to sweep for set-valued models."""
    multi = []
    for ci, model in enumerate(bundle.models):
        if isinstance(model, SampledGraphModel):
            k = max((len(ts) for ts in model.samples.values()), default=1)
            if k > 1:
                multi.append((ci, min(k, config.branch_cap)))
    if not multi:
        return [None]
    combos = itertools.product(*(range(k) for _, k in multi))
    out = []
    for combo in itertools.islice(combos, config.branch_cap):
        out.append({ci: pick for (ci, _), pick in zip(multi, combo)})
    return out


def _support_candidates(comp, y_const, qv, cap):
    """Exact candidates from support enumeration on the constant table.

    Complete for supports where at most two players mix: the mixers then
    face a bilinear game given the others' pure choices, solved by the
    standard indifference systems.  Supports with three or more mixers are
    left to the iteration.
    """
    players = comp.players
    sizes = [len(comp.strategies[p]) for p in players]
    if int(np.prod(sizes)) > cap:
        return []
    base = qv[comp.root_of] * comp.nat
    out = []
    n = len(players)

    def pure_rows(i):
        return comp.M[players[i]]

    for supports in itertools.product(
        *(
            [s for r in range(1, sz + 1) for s in itertools.combinations(range(sz), r)]
            for sz in sizes
        )
    ):
        mixers = [i for i, s in enumerate(supports) if len(s) > 1]
        if len(mixers) > 2:
            continue
        if not mixers:
            continue  # pure profiles are checked exhaustively elsewhere
        pures = [i for i in range(n) if i not in mixers]
        for pure_choice in itertools.product(*[supports[i] for i in pures]):
            fixed = dict(zip(pures, pure_choice))
            weight = base.copy()
            for i, si in fixed.items():
                weight = weight * pure_rows(i)[si]
            if len(mixers) == 1:
                i = mixers[0]
                sup = supports[i]
                vals = pure_rows(i) @ (weight * y_const[i])
                if np.max(np.abs(vals[list(sup)] - vals[sup[0]])) > 1e-9:
                    continue
                dist = np.zeros(sizes[i])
                dist[list(sup)] = 1.0 / len(sup)
                cand = [np.zeros(sz) for sz in sizes]
                for j, sj in fixed.items():
                    cand[j][sj] = 1.0
                cand[i] = dist
                out.append(cand)
                for s_i in sup:  # vertex representatives of the face
                    cv = [c.copy() for c in cand]
                    cv[i] = np.zeros(sizes[i])
                    cv[i][s_i] = 1.0
                    out.append(cv)
            else:
                i, j = mixers
                sup_i, sup_j = supports[i], supports[j]
                if len(sup_i) != len(sup_j):
                    continue
                Mi, Mj = pure_rows(i), pure_rows(j)
                # A[s_i, s_j] = payoff to player i at the pure pair
                Ai = Mi @ ((weight * y_const[i])[None, :] * Mj).T
                Aj = Mi @ ((weight * y_const[j])[None, :] * Mj).T
                k = len(sup_i)
                # j's mixture makes i indifferent across sup_i
                sj = _solve_indifference(Ai[np.ix_(sup_i, sup_j)])
                si = _solve_indifference(Aj[np.ix_(sup_i, sup_j)].T)
                if sj is None or si is None:
                    continue
                cand = [np.zeros(sz) for sz in sizes]
                for jj, sjj in fixed.items():
                    cand[jj][sjj] = 1.0
                cand[i][list(sup_i)] = si
                cand[j][list(sup_j)] = sj
                out.append(cand)
    return out


def _solve_indifference(A):
    """Mixture x over columns of A equalizing all row values, or None."""
    k, m = A.shape
    rows = [A[r] - A[0] for r in range(1, k)]
    rows.append(np.ones(m))
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    mat = np.vstack(rows) if rows else np.ones((1, m))
    try:
        sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if np.max(np.abs(mat @ sol - rhs)) > 1e-8:
        return None
    if float(sol.min()) < -1e-9:
        return None
    sol = np.maximum(sol, 0.0)
    s = float(sol.sum())
    if s <= 0:
        return None
    return sol / s


def _profile_from_blocks(comp, blocks):
    return MixedProfile(
        {p: np.asarray(b, dtype=float) for p, b in zip(comp.players, blocks)},
        normalize=False,
    )


def _snap_blocks(blocks, thresh):
    """Blocks with sub-threshold weights zeroed, or None if nothing moved."""
    out = []
    changed = False
    for b in blocks:
        b = np.asarray(b, dtype=float)
        small = (b > 0.0) & (b < thresh)
        if small.any() and b[~small].sum() > 0.0:
            c = np.where(small, 0.0, b)
            c /= c.sum()
            out.append(c)
            changed = True
        else:
            out.append(b)
    return out if changed else None


def _dedup_key(cert, comp, tol):
    flat = np.concatenate([cert.sigma[p] for p in comp.players])
    # same profile with different fiber choices is a different (sigma, plan) pair
    picks = tuple(sorted((cert.plan.choices or {}).items()))
    return tuple(np.round(flat / tol).astype(np.int64)) + picks


def _detect_family(bundle, q, cert, config, selector, branch):
    """Bisect along support-pair directions; return extra representatives."""
    comp = compiled(bundle)
    reps = []
    desc = []
    for pi, p in enumerate(comp.players):
        sig = cert.sigma[p]
        size = sig.size
        if size < 2:
            continue
        vals = cert.values[p]
        top = np.max(vals)
        cand_idx = [a for a in range(size) if vals[a] >= top - 10 * cert.tol]
        if len(cand_idx) < 2:
            continue
        for a, b in itertools.combinations(cand_idx, 2):
            d = np.zeros(size)
            d[a] -= 1.0
            d[b] += 1.0
            t_cap = float(sig[a])
            if t_cap <= config.dedup_tol:
                continue

            def ok(t):
                nd = {pp: cert.sigma[pp].copy() for pp in comp.players}
                nd[p] = np.maximum(sig + t * d, 0.0)
                nd[p] /= nd[p].sum()
                try:
                    c = verify_myopic(
                        bundle, q, MixedProfile(nd), tol=cert.tol,
                        selector=selector, branch=branch,
                    )
                except NoPlanError:
                    return None
                return c if c.residual <= cert.tol else None

            hi_cert = ok(t_cap)
            if hi_cert is not None:
                t_star, far = t_cap, hi_cert
            else:
                lo, hi = 0.0, t_cap
                far = None
                for _ in range(40):
                    mid = 0.5 * (lo + hi)
                    c = ok(mid)
                    if c is not None:
                        lo, far = mid, c
                    else:
                        hi = mid
                t_star = lo
            if t_star > 10 * config.dedup_tol and far is not None:
                mid_cert = ok(0.5 * t_star)
                reps.append(far)
                if mid_cert is not None:
                    reps.append(mid_cert)
                desc.append(f"player {p}: segment toward strategy {b}")
    label = "; ".join(desc) if desc else None
    return reps, label


def solve_myopic(bundle: GameBundle, q=None, config: SolverConfig | None = None):
    """All certified m-equilibria the search finds at root distribution q.

    Returns MyopicCertificate objects with residual <= config.tol,
    deduplicated and deterministically ordered.  Completeness holds for
    constant-table bundles with at most two mixing players (support
    enumeration); beyond that the multistart iteration is a heuristic and
    extra equilibria may be missed, never invented.
    """
    config = config or SolverConfig()
    comp = compiled(bundle)
    qv = as_q(bundle, q)
    selector = Selector(config.selector)
    sizes = [len(comp.strategies[p]) for p in comp.players]
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    for i, s in enumerate(sizes):
        offsets[i + 1] = offsets[i] + s
    total = offsets[-1]
    y_const = _is_constant_bundle(bundle)

    found: dict[tuple, MyopicCertificate] = {}

    def consider(blocks, branch):
        try:
            sigma = _profile_from_blocks(comp, blocks)
        except ValueError:
            return None
        try:
            cert = verify_myopic(
                bundle, qv, sigma, tol=config.tol, selector=selector, branch=branch
            )
        except NoPlanError:
            return None
        if cert.residual <= config.tol:
            key = _dedup_key(cert, comp, config.dedup_tol)
            if key not in found or cert.residual < found[key].residual:
                found[key] = cert
            return cert
        return None

    rng = np.random.default_rng(config.seed)
    active = sum(1 for s in sizes if s > 1)
    for branch in _branch_profiles(bundle, config):
        # exhaustive pure profiles
        if int(np.prod(sizes)) <= config.pure_cap:
            for combo in itertools.product(*(range(s) for s in sizes)):
                blocks = [np.zeros(s) for s in sizes]
                for bi, ci in enumerate(combo):
                    blocks[bi][ci] = 1.0
                consider(blocks, branch)
        # support enumeration on constant tables
        enumerated = False
        if y_const is not None:
            for cand in _support_candidates(comp, y_const, qv, config.support_cap):
                consider(cand, branch)
            enumerated = int(np.prod(sizes)) <= config.support_cap
        if enumerated and active <= 2:
            continue  # enumeration is complete here; iteration adds nothing
        # damped multistart iteration
        n_starts = config.multistarts
        if y_const is None:
            # plan re-freezing per step is costly; scale starts to the problem
            n_starts = min(n_starts, 2 + int(total))
        starts = [np.concatenate([np.full(s, 1.0 / s) for s in sizes])]
        for _ in range(max(n_starts - 1, 0)):
            starts.append(
                np.concatenate([rng.dirichlet(np.ones(s)) for s in sizes])
            )
        for x0 in starts:
            x = _iterate(
                bundle, comp, qv, x0, offsets, config, selector, branch,
                y_const=y_const,
            )
            x = project_blocks(x, offsets)
            blocks = [x[offsets[i] : offsets[i + 1]] for i in range(len(sizes))]
            # iterates crawling along a flat residual valley can stall just
            # off a face; prefer the snapped point when it also certifies
            snapped = _snap_blocks(blocks, 1e-3)
            if snapped is not None and consider(snapped, branch) is not None:
                continue
            consider(blocks, branch)

    certs = list(found.values())
    # family representatives
    if config.detect_families:
        extra = []
        seen_desc = set()
        for cert in certs:
            reps, label = _detect_family(
                bundle, qv, cert, config, selector, cert.branch
            )
            if label:
                cert.family = label
            for r in reps:
                key = _dedup_key(r, comp, config.dedup_tol)
                if key not in found:
                    r.family = label
                    found[key] = r
                    extra.append(r)
            if label:
                seen_desc.add(label)
        certs = list(found.values())

    def sort_key(c):
        flat = np.concatenate([c.sigma[p] for p in comp.players])
        return tuple(np.round(flat, 9))

    certs.sort(key=sort_key)
    return certs


# ---------------------------------------------------------------------------
# sweep over the root simplex


@dataclass
class SweepTable:
    """Certified equilibria at every barycentric grid point of Delta(R)."""

    roots: tuple
    mesh: int
    points: list  # (composition, [MyopicCertificate])
    diagnostics: list = field(default_factory=list)

    def rows(self, bundle: GameBundle):
        comp = compiled(bundle)
        for comp_pt, certs in self.points:
            q = np.asarray(comp_pt, dtype=float) / self.mesh
            for ei, cert in enumerate(certs):
                for pi, p in enumerate(comp.players):
                    yield (comp_pt, q, ei, p, float(cert.payoffs[pi]), cert.residual)

    def to_csv(self, bundle: GameBundle) -> str:
        comp = compiled(bundle)
        head = [f"q_{r}" for r in self.roots] + [
            "equilibrium",
            "player",
            "payoff",
            "residual",
        ]
        lines = [",".join(head)]
        for comp_pt, q, ei, p, pay, res in self.rows(bundle):
            cells = [f"{x:.17g}" for x in q] + [str(ei), p, f"{pay:.17g}", f"{res:.17g}"]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self, bundle: GameBundle) -> dict:
        return {
            "roots": list(self.roots),
            "mesh": self.mesh,
            "points": [
                {
                    "w": [int(v) for v in comp_pt],
                    "equilibria": [c.to_json(bundle) for c in certs],
                }
                for comp_pt, certs in self.points
            ],
            "diagnostics": list(self.diagnostics),
        }

    def value_model(self, bundle: GameBundle, members, payoff_by_member):
        """Sampled-graph model of the equilibrium values over the grid.

        ``payoff_by_member`` maps (certificate, member index) to a payoff
        column; see factor-model packaging in solve_bundle_perfect.
        """
        samples = {}
        for comp_pt, certs in self.points:
            tables = []
            for cert in certs:
                cols = [payoff_by_member(cert, mi) for mi in range(len(members))]
                tables.append(np.stack(cols, axis=1))
            if tables:
                samples[tuple(int(v) for v in comp_pt)] = tables
        return SampledGraphModel(
            compiled(bundle).players, members, self.mesh, samples
        )


def sweep(bundle: GameBundle, config: SolverConfig | None = None, mesh: int | None = None,
          solver=None) -> SweepTable:
    """solve_myopic at every mesh-grid point of the root simplex.

    GB_THREADS > 1 runs grid points in a thread pool; results are merged in
    grid order so output is deterministic either way.
    """
    config = config or SolverConfig()
    mesh = mesh or config.mesh
    comp = compiled(bundle)
    roots = comp.roots
    grid = grid_compositions(mesh, len(roots))
    solver = solver or (lambda b, q, c: solve_myopic(b, q, c))
    diagnostics = []

    def run(comp_pt):
        q = np.asarray(comp_pt, dtype=float) / mesh
        try:
            return comp_pt, solver(bundle, q, config)
        except NoPlanError as err:
            diagnostics.append({"w": list(comp_pt), "error": str(err)})
            return comp_pt, []

    threads = int(os.environ.get("GB_THREADS", "1") or "1")
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, grid))
    else:
        results = [run(pt) for pt in grid]
    order = {pt: i for i, pt in enumerate(grid)}
    results.sort(key=lambda item: order[tuple(item[0])])
    return SweepTable(roots=roots, mesh=mesh, points=results, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# subgame-bundle-perfect solving


@dataclass
class PerfectResult:
    """A certified equilibrium with its per-subgame-set verdicts."""

    certificate: MyopicCertificate
    statuses: dict  # frozenset(S) -> SPerfectStatus
    composed_from: tuple | None = None

    @property
    def all_perfect(self) -> bool:
        return all(s.verdict == "true" for s in self.statuses.values())


def _conditional_on(bundle, cert, members):
    """Conditional distribution of the profile over the given terminals."""
    comp = compiled(bundle)
    idx = [comp.tindex[t] for t in members]
    w = cert.plan.q[comp.root_of] * comp.nat
    for p in comp.players:
        w = w * (cert.sigma[p] @ comp.M[p])
    mass = w[idx]
    tot = float(mass.sum())
    if tot <= 0.0:
        return None
    return mass / tot


def solve_bundle_perfect(bundle: GameBundle, config: SolverConfig | None = None, q=None):
    """Inductive equilibrium construction over the subgame lattice.

    Innermost first: sweep the minimal nondegenerate proper subgame bundle
    over its root simplex, package the per-root equilibrium values as
    sampled-graph continuations of the factor game, solve the factor
    recursively, and compose factor equilibria with matching subgame
    equilibria.  Every composed output is then checked S-perfect against
    every enumerated subgame set.  Returns a list of (q, [PerfectResult]).
    """
    from . import subgames

    config = config or SolverConfig()
    recall_ok, witness = subgames.has_perfect_recall(bundle.bush)
    if not recall_ok:
        raise ValueError(f"perfect recall fails at {witness}; decomposition unavailable")

    comp = compiled(bundle)
    if q is not None:
        q_list = [as_q(bundle, q)]
    elif len(comp.roots) == 1:
        q_list = [np.array([1.0])]
    else:
        q_list = [
            np.asarray(pt, dtype=float) / config.mesh
            for pt in grid_compositions(config.mesh, len(comp.roots))
        ]

    lattice = subgames.enumerate_subgame_sets(bundle.bush)
    proper = [
        s
        for s in lattice.sets
        if s.vertices and not s.degenerate and set(s.vertices) != set(bundle.bush.vertices)
    ]

    def finalize(qv, certs, composed_from=None):
        out = []
        for cert in certs:
            statuses = {}
            good = True
            for s in proper:
                st = subgames.is_s_perfect(bundle, s, qv, cert.sigma, cert.plan, config.tol)
                statuses[frozenset(s.vertices)] = st
                if st.verdict == "false":
                    good = False
            if good:
                out.append(PerfectResult(cert, statuses, composed_from))
        return out

    results = []
    if not proper:
        for qv in q_list:
            certs = solve_myopic(bundle, qv, config)
            results.append((qv, [PerfectResult(c, {}) for c in certs]))
        return results

    S = min(proper, key=lambda s: len(s.vertices))
    sub_bundle = subgames.restrict(bundle, S)

    # bundle-perfect equilibria of the subgame over its whole root simplex
    sub_lattice = subgames.enumerate_subgame_sets(sub_bundle.bush)
    sub_has_proper = any(
        s.vertices and not s.degenerate
        and set(s.vertices) != set(sub_bundle.bush.vertices)
        for s in sub_lattice.sets
    )
    if sub_has_proper:

        def sub_solver(b, qq, cc):
            per = solve_bundle_perfect(b, cc, q=qq)
            return [r.certificate for _, rs in per for r in rs]

    else:
        sub_solver = None  # plain solve_myopic; nothing to decompose

    table = sweep(sub_bundle, config, mesh=config.mesh, solver=sub_solver)

    # package per-root equilibrium values for the factor's R'-classes
    sub_comp = compiled(sub_bundle)
    factor_models = []
    fac_shape = subgames.factor_shape(bundle, S)
    for members in fac_shape.new_classes:
        mlist = list(members)
        root_pos = [sub_comp.roots.index(u) for u in mlist]

        def column(cert, mi, _pos=root_pos):
            dq = np.zeros(len(sub_comp.roots))
            dq[_pos[mi]] = 1.0
            rr_w = dq[sub_comp.root_of] * sub_comp.nat
            for p in sub_comp.players:
                rr_w = rr_w * (cert.sigma[p] @ sub_comp.M[p])
            return cert.plan.y @ rr_w

        if set(mlist) == set(sub_comp.roots):
            sub_table = table
        else:
            # restrict the sweep to the face Delta(C) of Delta(R')
            pts = []
            face = [sub_comp.roots.index(u) for u in mlist]
            for comp_pt, certs in table.points:
                if all(v == 0 for i, v in enumerate(comp_pt) if i not in face):
                    pts.append((tuple(comp_pt[i] for i in face), certs))
            sub_table = SweepTable(tuple(mlist), table.mesh, pts)
        factor_models.append(sub_table.value_model(sub_bundle, tuple(mlist), column))

    fac_bundle = subgames.factor(bundle, S, factor_models)

    for qv in q_list:
        fac_results = solve_bundle_perfect(fac_bundle, config, q=qv)
        composed = []
        for _, fr_list in fac_results:
            for fr in fr_list:
                fcert = fr.certificate
                cond = _conditional_on_factor(fac_bundle, fcert, sub_comp.roots)
                sub_matches = _matching_subgame_certs(
                    sub_bundle, table, fac_bundle, fcert, cond, config
                )
                for scert in sub_matches:
                    try:
                        full_sigma, full_plan = subgames.compose(
                            bundle, S, fac_bundle, fcert.plan,
                            sub_bundle, scert.plan, tol=config.tol,
                        )
                        cert = verify_myopic(
                            bundle, qv, full_sigma, plan=full_plan, tol=2 * config.tol
                        )
                    except (ValueError, NoPlanError):
                        continue
                    if cert.residual <= 2 * config.tol:
                        composed.append(cert)
        # dedup composed
        uniq = {}
        for c in composed:
            key = _dedup_key(c, comp, config.dedup_tol)
            if key not in uniq or c.residual < uniq[key].residual:
                uniq[key] = c
        results.append((qv, finalize(qv, list(uniq.values()), composed_from=(frozenset(S.vertices),))))
    return results


def _conditional_on_factor(fac_bundle, cert, rprime):
    """Conditional over the subgame roots induced by a factor certificate."""
    comp = compiled(fac_bundle)
    idx = [comp.tindex[u] for u in rprime]
    w = cert.plan.q[comp.root_of] * comp.nat
    for p in comp.players:
        w = w * (cert.sigma[p] @ comp.M[p])
    mass = w[idx]
    tot = float(mass.sum())
    if tot <= 0.0:
        return None
    return mass / tot


def _matching_subgame_certs(sub_bundle, table, fac_bundle, fcert, cond, config):
    """Subgame equilibria consistent with the factor plan's frozen values.

    The subgame's roots are terminals of the factor game, so the factor
    plan's frozen table fixes a target value column per root.  With
    positive reach the subgame must be solved at the induced conditional;
    with zero reach any root distribution is allowed, so every swept
    equilibrium whose per-root values match qualifies.
    """
    fac_comp = compiled(fac_bundle)
    candidates = []
    if cond is not None:
        candidates.extend(solve_myopic(sub_bundle, cond, config))
    else:
        for _, certs in table.points:
            candidates.extend(certs)

    out = []
    seen = set()
    fc = compiled(sub_bundle)
    match_tol = max(1e-6, 10 * config.tol)
    for scert in candidates:
        ok = True
        for ui, u in enumerate(fc.roots):
            dq = np.zeros(len(fc.roots))
            dq[ui] = 1.0
            w = dq[fc.root_of] * fc.nat
            for p in fc.players:
                w = w * (scert.sigma[p] @ fc.M[p])
            col = scert.plan.y @ w
            fcol = fcert.plan.y[:, fac_comp.tindex[u]]
            if float(np.max(np.abs(col - fcol))) > match_tol:
                ok = False
                break
        if ok:
            key = _dedup_key(scert, fc, config.dedup_tol)
            if key not in seen:
                seen.add(key)
                out.append(scert)
    return out
