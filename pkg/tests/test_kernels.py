import numpy as np
import pytest

from gamebush import kernels


def test_project_simplex_is_nearest_point():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n = int(rng.integers(1, 7))
        x = rng.normal(scale=2.0, size=n)
        p = kernels.project_simplex(x)
        assert p.min() >= -1e-12
        assert abs(p.sum() - 1.0) <= 1e-10
        d = np.linalg.norm(x - p)
        # no random simplex point may be closer
        for _ in range(200):
            z = rng.dirichlet(np.ones(n))
            assert np.linalg.norm(x - z) >= d - 1e-9


def test_project_simplex_fixed_points_and_edges():
    assert np.allclose(kernels.project_simplex([0.2, 0.8]), [0.2, 0.8])
    assert np.allclose(kernels.project_simplex([5.0, 0.0]), [1.0, 0.0])
    assert np.allclose(kernels.project_simplex([-3.0]), [1.0])
    with pytest.raises(ValueError):
        kernels.project_simplex(np.array([]))


def test_project_blocks_matches_per_block_projection():
    rng = np.random.default_rng(1)
    sizes = [3, 1, 4, 2]
    offsets = np.cumsum([0] + sizes).astype(np.int64)
    x = rng.normal(size=offsets[-1])
    got = kernels.project_blocks(x, offsets)
    for i in range(len(sizes)):
        a, b = offsets[i], offsets[i + 1]
        assert np.allclose(got[a:b], kernels.project_simplex(x[a:b]), atol=1e-12)


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")
def test_numba_and_numpy_paths_agree():
    rng = np.random.default_rng(2)
    x = rng.normal(size=12)
    offsets = np.array([0, 4, 7, 12], dtype=np.int64)
    a = kernels._project_blocks_np(x, offsets)
    b = kernels._project_blocks_nb(x, offsets)
    assert np.allclose(a, b, atol=1e-12)

    rows = rng.random((20, 33)) < 0.5
    aug = kernels.pack_rows(rows)
    r_np, piv_np = kernels._gf2_eliminate_np(aug.copy(), 32)
    r_nb, piv_nb = kernels._gf2_eliminate_nb(aug.copy(), 32)
    assert r_np == r_nb
    assert list(piv_np) == list(piv_nb)


def test_pack_unpack_roundtrip():
    rng = np.random.default_rng(3)
    rows = rng.random((5, 19)) < 0.5
    packed = kernels.pack_rows(rows)
    assert np.array_equal(kernels.unpack_rows(packed, 19), rows)


def _rank_by_span(rows):
    """GF(2) rank as log2 of the XOR-span size (independent oracle)."""
    span = {0}
    width = rows.shape[1]
    for r in rows:
        key = int("".join("1" if v else "0" for v in r), 2) if width else 0
        span |= {s ^ key for s in span}
    return int(np.log2(len(span)))


def test_gf2_rank_matches_span_oracle():
    rng = np.random.default_rng(4)
    for _ in range(30):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        rows = rng.random((m, n)) < 0.5
        assert kernels.gf2_rank(rows) == _rank_by_span(rows)


def test_gf2_solve_solves_or_reports_none():
    rng = np.random.default_rng(5)
    solved = 0
    for _ in range(60):
        m = int(rng.integers(1, 10))
        n = int(rng.integers(1, 10))
        a = rng.random((m, n)) < 0.5
        b = rng.random(m) < 0.5
        z = kernels.gf2_solve(a, b)
        if z is None:
            # inconsistency witness: rank grows when b is appended
            aug = np.concatenate([a, b[:, None]], axis=1)
            assert kernels.gf2_rank(aug) == kernels.gf2_rank(a) + 1
        else:
            solved += 1
            lhs = (a.astype(int) @ z.astype(int)) % 2
            assert np.array_equal(lhs == 1, b)
    assert solved > 10


def test_gf2_solve_known_system():
    a = np.array([[1, 1, 0], [0, 1, 1]], dtype=bool)
    b = np.array([1, 0], dtype=bool)
    z = kernels.gf2_solve(a, b)
    assert z is not None
    assert np.array_equal((a.astype(int) @ z.astype(int)) % 2 == 1, b)
    # x + y = 1 and x + y = 0 cannot both hold
    a2 = np.array([[1, 1], [1, 1]], dtype=bool)
    b2 = np.array([1, 0], dtype=bool)
    assert kernels.gf2_solve(a2, b2) is None


def test_fixed_point_stays_at_equilibrium():
    # matching pennies: uniform profile is stationary for the iteration
    # strategy incidence: rows = pure strategies of both players over terminals
    M = np.array(
        [
            [1.0, 1.0, 0.0, 0.0],  # player 1 heads: terminals HH HT
            [0.0, 0.0, 1.0, 1.0],  # player 1 tails
            [1.0, 0.0, 1.0, 0.0],  # player 2 heads
            [0.0, 1.0, 0.0, 1.0],  # player 2 tails
        ]
    )
    offsets = np.array([0, 2, 4], dtype=np.int64)
    base = np.ones(4)
    y = np.array(
        [
            [1.0, -1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0, -1.0],
        ]
    )
    sigma0 = np.array([0.5, 0.5, 0.5, 0.5])
    fixed_point = (
        kernels._fixed_point_nb if kernels.USE_NUMBA else kernels._fixed_point_np
    )
    sigma, it, converged = fixed_point(M, offsets, base, y, sigma0, 0.25, 10_000, 1e-12)
    assert converged
    assert np.allclose(sigma, sigma0, atol=1e-8)
