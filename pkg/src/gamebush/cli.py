"""Command-line entry point tying the modules together.

Verb-style subcommands over one binary:

    gamebush validate  --input game.gb.json
    gamebush subgames  --input game.gb.json
    gamebush solve     --input game.gb.json [--q 0.3,0.7]
    gamebush sweep     --input game.gb.json --mesh 16 --out-dir out/
    gamebush perfect   --input game.gb.json
    gamebush span      --input correspondence.json
    gamebush example   ex1 [--s 0.1]

Reports go to stdout as JSON (sorted keys, so byte-identical for a fixed
seed and config) or CSV with all floats at 17 significant digits; errors
are JSON objects on stderr.  Exit codes: 0 success, 1 invalid input,
2 solver came up empty (partial results are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import fixtures, subgames
from .model import BundleValidationError, GameBundle, load_bundle
from .solver import (
    SolverConfig,
    solve_bundle_perfect,
    solve_myopic,
    sweep,
    verify_myopic,
)
from .spanning import load_correspondence, has_spanning
from .strategies import (
    MixedProfile,
    as_q,
    compiled,
    expected_payoffs,
    make_plan,
    pure_profile,
)


def g17(x) -> str:
    return f"{float(x):.17g}"


@dataclass
class RunConfig:
    """Parsed command-line options, shared across the verbs."""

    verb: str
    input: str | None = None
    q: tuple | None = None
    mesh: int = 16
    tol: float = 1e-9
    epsilon: float | None = None
    bound: float | None = None
    support_cap: int = 64
    selector: str = "first"
    fmt: str = "json"
    seed: int = 0
    out_dir: str = "."
    name: str | None = None
    s: float = 0.1

    def validate(self) -> None:
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.mesh < 2:
            raise ValueError("mesh must be an integer k >= 2 (grid step 1/k)")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.bound is not None and self.bound <= 0:
            raise ValueError("bound-B must be positive")

    def solver_config(self, multistarts: int = 32) -> SolverConfig:
        return SolverConfig(
            tol=self.tol,
            support_cap=self.support_cap,
            selector=self.selector,
            seed=self.seed,
            mesh=self.mesh,
            epsilon=self.epsilon,
            bound=self.bound,
            multistarts=multistarts,
        )


def _emit(report: dict, cfg: RunConfig, csv_text: str | None = None) -> None:
    if cfg.fmt == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=1) + "\n")


def _error(message: str, **extra) -> None:
    obj = {"error": message}
    obj.update(extra)
    sys.stderr.write(json.dumps(obj, sort_keys=True) + "\n")


def _load(cfg: RunConfig) -> GameBundle:
    if not cfg.input:
        raise ValueError("--input is required for this verb")
    return load_bundle(cfg.input)


def _profile_names(bundle: GameBundle, cert) -> dict:
    comp = compiled(bundle)
    out = {}
    for p in comp.players:
        names = ["/".join(st.choices) if st.choices else "-" for st in comp.strategies[p]]
        out[p] = {n: float(w) for n, w in zip(names, cert.sigma[p])}
    return out


def _cert_report(bundle: GameBundle, cert) -> dict:
    data = cert.to_json(bundle)
    data["strategies"] = _profile_names(bundle, cert)
    return data


def _solve_csv(bundle: GameBundle, qv, certs) -> str:
    comp = compiled(bundle)
    head = [f"q_{r}" for r in comp.roots] + ["equilibrium", "player", "payoff", "residual"]
    lines = [",".join(head)]
    for ei, cert in enumerate(certs):
        for pi, p in enumerate(comp.players):
            cells = [g17(x) for x in qv] + [
                str(ei), p, g17(cert.payoffs[pi]), g17(cert.residual),
            ]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verbs


def cmd_validate(cfg: RunConfig) -> int:
    try:
        bundle = _load(cfg)
    except BundleValidationError as err:
        _error("bundle failed validation", violations=[str(v) for v in err.violations])
        return 1
    bush = bundle.bush
    recall, witness = subgames.has_perfect_recall(bush)
    report = {
        "ok": True,
        "vertices": len(bush.vertices),
        "roots": list(bush.roots),
        "terminals": len(bush.terminals),
        "players": list(bush.players),
        "nature_nodes": len(bush.nature),
        "payoff_models": len(bundle.models),
        "perfect_recall": bool(recall),
    }
    if not recall:
        report["perfect_recall_violation"] = list(witness)
    _emit(report, cfg)
    return 0


def cmd_subgames(cfg: RunConfig) -> int:
    bundle = _load(cfg)
    lattice = subgames.enumerate_subgame_sets(bundle.bush)
    chain = subgames.is_solvable(bundle.bush)
    report = {
        "lattice": lattice.to_json(),
        "solvable": None if chain is None else [sorted(s) for s in chain],
    }
    _emit(report, cfg)
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    bundle = _load(cfg)
    comp = compiled(bundle)
    qv = np.array(cfg.q, dtype=float) if cfg.q is not None else None
    certs = solve_myopic(bundle, qv, cfg.solver_config())
    q_used = as_q(bundle, qv)
    report = {
        "q": {r: float(x) for r, x in zip(comp.roots, q_used)},
        "equilibria": [_cert_report(bundle, c) for c in certs],
    }
    _emit(report, cfg, csv_text=_solve_csv(bundle, q_used, certs))
    return 0 if certs else 2


def cmd_sweep(cfg: RunConfig) -> int:
    bundle = _load(cfg)
    table = sweep(bundle, cfg.solver_config(), mesh=cfg.mesh)
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, "sweep.csv")
    json_path = os.path.join(cfg.out_dir, "sweep.json")
    with open(csv_path, "w") as fh:
        fh.write(table.to_csv(bundle))
    with open(json_path, "w") as fh:
        json.dump(table.to_json(bundle), fh, sort_keys=True, indent=1)
    empty = sum(1 for _, certs in table.points if not certs)
    report = {
        "points": len(table.points),
        "empty_points": empty,
        "csv": csv_path,
        "json": json_path,
    }
    _emit(report, cfg)
    return 2 if empty else 0


def cmd_perfect(cfg: RunConfig) -> int:
    bundle = _load(cfg)
    qv = np.array(cfg.q, dtype=float) if cfg.q is not None else None
    results = solve_bundle_perfect(bundle, cfg.solver_config(), q=qv)
    comp = compiled(bundle)
    out = []
    total = 0
    for q_point, presults in results:
        entry = {
            "q": {r: float(x) for r, x in zip(comp.roots, np.asarray(q_point))},
            "equilibria": [],
        }
        for r in presults:
            total += 1
            entry["equilibria"].append(
                {
                    "certificate": _cert_report(bundle, r.certificate),
                    "all_perfect": bool(r.all_perfect),
                    "statuses": {
                        ",".join(sorted(S)): {
                            "verdict": st.verdict,
                            "residual": None if st.residual is None else float(st.residual),
                            "detail": st.detail,
                        }
                        for S, st in r.statuses.items()
                    },
                    "composed_from": None
                    if r.composed_from is None
                    else [sorted(S) for S in r.composed_from],
                }
            )
        out.append(entry)
    _emit({"results": out}, cfg)
    return 0 if total else 2


def cmd_span(cfg: RunConfig) -> int:
    if not cfg.input:
        raise ValueError("--input is required for span")
    corr = load_correspondence(cfg.input)
    ok, witness = has_spanning(corr)
    report = {
        "spanning": bool(ok),
        "witness": witness,
        "d_simplices": len(corr.d_simplices()),
        "pair": {
            "dimension": corr.pair.dimension,
            "manifold": corr.pair.manifold,
            "simplices": len(corr.pair.simplices),
        },
    }
    _emit(report, cfg)
    return 0


# ---------------------------------------------------------------------------
# canned example reproductions


def _example_ex1(cfg: RunConfig) -> tuple[dict, bool]:
    s = cfg.s
    bundle = fixtures.ex1(s=s)

    # one-player committed game: closed form against numeric optimization
    def f(p):
        return (1 + s) * (1 - p) * p * p + (1 - p) ** 2 * p

    p_closed = (s - 1 + np.sqrt(1 + s + s * s)) / (3 * s)
    opt = minimize_scalar(
        lambda p: -f(p), bounds=(0.0, 1.0), method="bounded",
        options={"xatol": 1e-12},
    )
    p_num = float(opt.x)

    # stage subgame: certify alpha = beta = 1 - p across the grid
    lattice = subgames.enumerate_subgame_sets(bundle.bush)
    proper = [
        t for t in lattice.sets
        if not t.degenerate and len(t.vertices) < len(bundle.bush.vertices)
    ]
    stage_set = max(proper, key=lambda t: len(t.vertices))
    sub = subgames.restrict(bundle, stage_set)
    comp = compiled(sub)
    idx_L = next(i for i, st in enumerate(comp.strategies["2"]) if st.choices == ("L",))
    idx_l = next(i for i, st in enumerate(comp.strategies["3"]) if st.choices == ("l",))
    grid = []
    max_res = 0.0
    for i in range(cfg.mesh + 1):
        p = i / cfg.mesh
        q = {"x": p, "y": 1 - p}
        dists = {}
        for pl in comp.players:
            n = len(comp.strategies[pl])
            v = np.ones(n) / n
            if pl == "2":
                v = np.zeros(n)
                v[idx_L] = 1 - p
                v[1 - idx_L] = p
            elif pl == "3":
                v = np.zeros(n)
                v[idx_l] = 1 - p
                v[1 - idx_l] = p
            dists[pl] = v
        cert = verify_myopic(sub, q, MixedProfile(dists), tol=cfg.tol)
        max_res = max(max_res, cert.residual)
        grid.append({"p": p, "alpha": 1 - p, "beta": 1 - p, "residual": float(cert.residual)})

    # factor one-player game: myopic equilibria sit at the corners
    factor_bundle = fixtures.ex1_factor(s=s)
    factor_certs = solve_myopic(factor_bundle, None, cfg.solver_config(multistarts=8))
    factor_rows = [
        {
            "profile": [float(x) for x in c.sigma["1"]],
            "payoff": float(c.payoffs[0]),
            "residual": float(c.residual),
        }
        for c in factor_certs
    ]
    best_factor = max((r["payoff"] for r in factor_rows), default=float("-inf"))

    report = {
        "name": "ex1",
        "s": s,
        "committed": {
            "p_star_closed_form": float(p_closed),
            "p_star_numeric": p_num,
            "payoff_closed_form": float(f(p_closed)),
            "payoff_numeric": float(f(p_num)),
        },
        "subgame_grid": {
            "mesh": cfg.mesh,
            "profile": "alpha = beta = 1 - p with q = (p, 1-p) on roots (x, y)",
            "max_residual": float(max_res),
            "points": grid,
        },
        "factor_equilibria": factor_rows,
        "commitment_beats_myopic": bool(best_factor < f(p_closed) - 1e-9),
    }
    ok = (
        abs(p_num - p_closed) <= 1e-6
        and max_res <= 1e-9
        and report["commitment_beats_myopic"]
        and all(abs(r["payoff"]) <= 1e-6 for r in factor_rows)
    )
    return report, ok


def _pure_payoff_table(bundle: GameBundle) -> dict:
    import itertools

    comp = compiled(bundle)
    table = {}
    ranges = [range(len(comp.strategies[p])) for p in comp.players]
    for picks in itertools.product(*ranges):
        prof = pure_profile(bundle, dict(zip(comp.players, picks)))
        key = "|".join(
            "/".join(comp.strategies[p][i].choices) or "-"
            for p, i in zip(comp.players, picks)
        )
        plan = make_plan(bundle, None, prof)
        pays = expected_payoffs(bundle, plan)
        table[key] = [round(float(x), 9) for x in pays]
    return table


def _example_ex2(cfg: RunConfig) -> tuple[dict, bool]:
    bundle = fixtures.ex2()
    certs = solve_myopic(bundle, None, cfg.solver_config(multistarts=8))
    raw = [_cert_report(bundle, c) for c in certs]
    results = solve_bundle_perfect(bundle, cfg.solver_config(multistarts=8))
    retained = [
        _cert_report(bundle, r.certificate)
        for _, presults in results
        for r in presults
        if r.all_perfect
    ]
    report = {"name": "ex2", "raw": raw, "bundle_perfect": retained}
    strategies = [r["strategies"] for r in retained]
    ok = (
        len(retained) == 1
        and strategies[0]["1"].get("A", 0.0) > 0.999
        and strategies[0]["2"].get("p", 0.0) > 0.999
        and len(certs) >= 2
    )
    return report, ok


def _example_ex3(cfg: RunConfig) -> tuple[dict, bool]:
    bundle = fixtures.ex3()
    results = solve_bundle_perfect(bundle, cfg.solver_config(multistarts=8))
    retained = [
        _cert_report(bundle, r.certificate)
        for _, presults in results
        for r in presults
        if r.all_perfect
    ]
    same_matrix = _pure_payoff_table(bundle) == _pure_payoff_table(fixtures.ex2())
    report = {
        "name": "ex3",
        "bundle_perfect": retained,
        "normal_form_equivalent_to_ex2": bool(same_matrix),
    }
    pure = [
        r["strategies"]
        for r in retained
        if all(max(w.values()) > 0.999 for w in r["strategies"].values())
    ]
    has_ap = any(s["1"].get("A", 0) > 0.999 and s["2"].get("p", 0) > 0.999 for s in pure)
    has_pa = any(s["1"].get("P", 0) > 0.999 and s["2"].get("a", 0) > 0.999 for s in pure)
    return report, bool(same_matrix and has_ap and has_pa)


def cmd_example(cfg: RunConfig) -> int:
    runners = {"ex1": _example_ex1, "ex2": _example_ex2, "ex3": _example_ex3}
    if cfg.name not in runners:
        raise ValueError(f"unknown example {cfg.name!r}; choose from {sorted(runners)}")
    report, ok = runners[cfg.name](cfg)
    report["checks_pass"] = bool(ok)
    _emit(report, cfg)
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(p: argparse.ArgumentParser, needs_input: bool) -> None:
    if needs_input:
        p.add_argument("--input", required=True, help="input file path")
    p.add_argument("--q", default=None, help="comma list of root weights")
    p.add_argument("--mesh", type=int, default=16, help="grid density k (step 1/k)")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--epsilon", type=float, default=None, help="regularization epsilon")
    p.add_argument("--bound-B", dest="bound", type=float, default=None)
    p.add_argument("--support-cap", dest="support_cap", type=int, default=64)
    p.add_argument("--selector", default="first", choices=("first", "barycenter"))
    p.add_argument("--format", dest="fmt", default="json", choices=("json", "csv"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", default=".")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gamebush",
        description="multi-root game bundles: validation, equilibria, spanning",
    )
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("validate", "subgames", "solve", "sweep", "perfect", "span"):
        _add_common(sub.add_parser(verb), needs_input=True)
    ex = sub.add_parser("example", help="reproduce a canned example report")
    ex.add_argument("name", choices=("ex1", "ex2", "ex3"))
    ex.add_argument("--s", type=float, default=0.1, help="ex1 payoff asymmetry")
    _add_common(ex, needs_input=False)
    return ap


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    q = None
    if getattr(args, "q", None):
        q = tuple(float(x) for x in str(args.q).split(","))
    return RunConfig(
        verb=args.verb,
        input=getattr(args, "input", None),
        q=q,
        mesh=args.mesh,
        tol=args.tol,
        epsilon=args.epsilon,
        bound=args.bound,
        support_cap=args.support_cap,
        selector=args.selector,
        fmt=args.fmt,
        seed=args.seed,
        out_dir=args.out_dir,
        name=getattr(args, "name", None),
        s=getattr(args, "s", 0.1),
    )


_VERBS = {
    "validate": cmd_validate,
    "subgames": cmd_subgames,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "perfect": cmd_perfect,
    "span": cmd_span,
    "example": cmd_example,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        cfg.validate()
    except ValueError as err:
        _error(str(err))
        return 1
    try:
        return _VERBS[cfg.verb](cfg)
    except BundleValidationError as err:
        _error("bundle failed validation", violations=[str(v) for v in err.violations])
        return 1
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        _error(str(err))
        return 1


if __name__ == "__main__":
    sys.exit(main())
