"""Timing comparison of the jitted kernels against their numpy twins.

Runs each kernel family (simplex projection, constant-table fixed point,
GF(2) elimination) on sized-up random inputs through both code paths and
prints a small table.  The jitted path is warmed once before timing so
compilation is not counted.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Set GAMEBUSH_NO_NUMBA=1 to confirm the package itself falls back cleanly;
this script imports both implementations directly so it always times both
when numba is importable.
"""

import argparse
import timeit

import numpy as np

from gamebush import kernels

HAS_NUMBA = kernels.HAVE_NUMBA


def bench(label, np_fn, nb_fn, args, repeat, number):
    t_np = min(timeit.repeat(lambda: np_fn(*args), number=number, repeat=repeat)) / number
    row = f"{label:34s} numpy {t_np * 1e6:10.1f} us"
    if nb_fn is not None:
        nb_fn(*args)  # warm the JIT
        t_nb = min(timeit.repeat(lambda: nb_fn(*args), number=number, repeat=repeat)) / number
        row += f"   numba {t_nb * 1e6:10.1f} us   speedup {t_np / t_nb:6.2f}x"
    print(row)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    if not HAS_NUMBA:
        print("numba not importable; timing the numpy path only")

    # blockwise simplex projection: many mid-sized blocks
    nblocks, width = 64, 16
    x = rng.normal(size=nblocks * width)
    offsets = np.arange(0, nblocks * width + 1, width, dtype=np.int64)
    bench(
        f"project_blocks ({nblocks}x{width})",
        kernels._project_blocks_np,
        kernels._project_blocks_nb if HAS_NUMBA else None,
        (x, offsets),
        args.repeat,
        200,
    )

    # damped best-response iteration on a random constant-table game
    nplayers, per, T = 3, 8, 256
    S = nplayers * per
    M = (rng.random((S, T)) < 0.5).astype(np.float64)
    off = np.arange(0, S + 1, per, dtype=np.int64)
    base = rng.dirichlet(np.ones(T))
    y = rng.normal(size=(nplayers, T))
    sigma0 = np.concatenate([np.full(per, 1.0 / per)] * nplayers)
    fp_args = (M, off, base, y, sigma0, 0.25, 500, 1e-11)
    bench(
        f"fixed_point ({nplayers}p x {per}s, T={T})",
        kernels._fixed_point_np,
        kernels._fixed_point_nb if HAS_NUMBA else None,
        fp_args,
        args.repeat,
        20,
    )

    # GF(2) elimination at a few densities and sizes
    for m, n in ((64, 64), (256, 256), (512, 1024)):
        rows = rng.random((m, n + 1)) < 0.4
        aug = kernels.pack_rows(rows)
        bench(
            f"gf2_eliminate ({m}x{n})",
            lambda a, k: kernels._gf2_eliminate_np(a.copy(), k),
            (lambda a, k: kernels._gf2_eliminate_nb(a.copy(), k)) if HAS_NUMBA else None,
            (aug, n),
            args.repeat,
            10,
        )

    # agreement spot check while we are here
    got_np = kernels._project_blocks_np(x, offsets)
    if HAS_NUMBA:
        got_nb = kernels._project_blocks_nb(x, offsets)
        assert np.allclose(got_np, got_nb, atol=1e-12), "projection paths disagree"
        r_np, _ = kernels._gf2_eliminate_np(aug.copy(), n)
        r_nb, _ = kernels._gf2_eliminate_nb(aug.copy(), n)
        assert r_np == r_nb, "gf2 ranks disagree"
        print("cross-path agreement: ok")


if __name__ == "__main__":
    main()
