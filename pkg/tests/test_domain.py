"""Tests for the quadrature grid, Nystrom blocks, and SVD truncation."""

import math

import numpy as np
import pytest

from covergap.domain import (
    QuadratureGrid,
    assemble_block,
    assemble_support_blocks,
    build_grid,
    export_blocks,
    hs_norm_bound_check,
    load_blocks,
    svd_truncate,
)
from covergap.surface_group import (
    build_bolza_realization,
    dehn_reduce,
    in_fundamental_domain,
    inverse_word,
    support_set,
)


@pytest.fixture(scope="module")
def real():
    return build_bolza_realization()


@pytest.fixture(scope="module")
def grid(real):
    return build_grid(real, 120)


@pytest.fixture(scope="module")
def support(real):
    return support_set(real, 1.0)


# ------------------------------------------------------------------- grid

def test_grid_sizes_and_weight_sum(real):
    # weights are exact cell areas, so the 1% contract (and the 2x
    # improvement under refinement) is met at the roundoff floor
    for target, m in ((400, 392), (1600, 1568)):
        g = build_grid(real, target)
        assert g.m == m == len(g.points) == len(g.weights)
        assert abs(g.total_weight - 4.0 * math.pi) < 1e-10
        assert (g.weights > 0).all()


def test_grid_nodes_strictly_inside(real):
    g = build_grid(real, 400)
    for p in g.points:
        assert in_fundamental_domain(real, p, slack=-1e-9)


def test_grid_rejects_small_target(real):
    with pytest.raises(ValueError):
        build_grid(real, 49)


def test_grid_validation():
    from covergap.hyperbolic import HPoint

    with pytest.raises(ValueError):
        QuadratureGrid(points=[HPoint(0, 1)], weights=np.array([1.0, 2.0]), m=1)
    with pytest.raises(ValueError):
        QuadratureGrid(points=[HPoint(0, 1)], weights=np.array([-1.0]), m=1)


# ----------------------------------------------------------------- blocks

def test_identity_block_full_coverage(real, grid):
    # t beyond the domain diameter: the indicator is identically one and the
    # block is the rank-one matrix sqrt(w) sqrt(w)^T with top value sum(w)
    ident = ((), real.side_pairings[0] @ real.side_pairings[0].inverse())
    b = assemble_block(ident, real.domain_diameter + 0.1, grid)
    sqw = np.sqrt(grid.weights)
    assert np.allclose(b.dense(), np.outer(sqw, sqw), atol=1e-14)
    assert b.hs_norm == pytest.approx(grid.total_weight, rel=1e-12)
    s = np.linalg.svd(b.dense(), compute_uv=False)
    assert s[0] == pytest.approx(4.0 * math.pi, rel=1e-10)
    assert s[1] < 1e-12


def test_identity_block_t0_diagonal(real, grid):
    ident = ((), real.side_pairings[0] @ real.side_pairings[0].inverse())
    b = assemble_block(ident, 0.0, grid)
    assert b.is_sparse
    D = b.dense()
    assert np.allclose(np.diag(D), grid.weights, atol=1e-15)
    assert np.abs(D - np.diag(np.diag(D))).max() == 0.0


def test_adjoint_relation(real, grid, support):
    blocks = {w: assemble_block((w, M), 1.0, grid) for w, M in support.elements}
    for w, M in support.elements:
        winv = dehn_reduce(inverse_word(w), real.presentation)
        assert winv in blocks
        dev = np.abs(blocks[w].dense().T - blocks[winv].dense()).max()
        assert dev <= 1e-12


def test_hs_norm_matches_double_sum(real, grid):
    g = (real.side_pairing_words[0], real.side_pairings[0])
    b = assemble_block(g, 1.0, grid)
    from covergap.hyperbolic import mobius_apply, pairwise_cosh_distance

    mask = pairwise_cosh_distance(grid.xy, mobius_apply(g[1].m, grid.xy)) <= math.cosh(1.0)
    oracle = math.sqrt(float((np.outer(grid.weights, grid.weights) * mask).sum()))
    assert abs(b.hs_norm - oracle) <= 1e-10


def test_hs_monotone_in_t(real, grid):
    for g in [((), real.side_pairings[0] @ real.side_pairings[0].inverse()),
              (real.side_pairing_words[2], real.side_pairings[2])]:
        norms = [assemble_block(g, t, grid).hs_norm for t in (0.5, 1.0, 1.5)]
        assert norms[0] <= norms[1] <= norms[2]


def test_sparse_dense_switch(real, grid):
    ident = ((), real.side_pairings[1] @ real.side_pairings[1].inverse())
    small = assemble_block(ident, 0.3, grid)
    big = assemble_block(ident, 3.0, grid)
    assert small.is_sparse
    assert not big.is_sparse
    dens = (big.dense() != 0).mean()
    assert dens >= 0.25


def test_hs_norm_bound_check(real, grid):
    by_t = {}
    for t in (0.5, 1.0, 1.5):
        ss = support_set(real, t)
        by_t[t] = assemble_support_blocks(ss, t, grid)
    C = hs_norm_bound_check(by_t)
    assert C > 0
    for t, blocks in by_t.items():
        assert max(b.hs_norm for b in blocks) <= C * math.exp(t) + 1e-12
    with pytest.raises(ValueError):
        hs_norm_bound_check({1.0: by_t[1.0]})


def test_zero_blocks_dropped(real, grid):
    # at t = 0 only the identity translate can pair any node with itself
    ss = support_set(real, 0.0)
    blocks = assemble_support_blocks(ss, 0.0, grid)
    assert len(blocks) == 1
    assert blocks[0].gamma[0] == ()


# -------------------------------------------------------------- truncation

def test_svd_exact_at_full_rank(real, grid):
    g = (real.side_pairing_words[0], real.side_pairings[0])
    b = assemble_block(g, 1.0, grid)
    tb = svd_truncate(b, grid.m)
    assert tb.op_error_bound == 0.0
    assert np.allclose(tb.dense(), b.dense(), atol=1e-10)


def test_svd_bound_and_frobenius(real, grid):
    g = (real.side_pairing_words[3], real.side_pairings[3])
    b = assemble_block(g, 1.0, grid)
    s = np.linalg.svd(b.dense(), compute_uv=False)
    assert abs((s * s).sum() - b.hs_norm**2) <= 1e-10 * b.hs_norm**2
    for r in range(1, 41):
        tb = svd_truncate(b, r)
        assert tb.op_error_bound == pytest.approx(s[r] if r < len(s) else 0.0, abs=1e-14)
        assert tb.op_error_bound <= b.hs_norm / math.sqrt(r) + 1e-12
        assert len(tb.singular_values) <= r


def test_svd_spectral_error_is_next_singular_value(real, grid):
    g = (real.side_pairing_words[1], real.side_pairings[1])
    b = assemble_block(g, 1.0, grid)
    A = b.dense()
    for r in (3, 10):
        tb = svd_truncate(b, r)
        err = np.linalg.norm(A - tb.dense(), 2)
        assert err == pytest.approx(tb.op_error_bound, abs=1e-10)


def test_svd_rejects_bad_rank(real, grid):
    g = (real.side_pairing_words[0], real.side_pairings[0])
    b = assemble_block(g, 1.0, grid)
    with pytest.raises(ValueError):
        svd_truncate(b, 0)


# ------------------------------------------------------------------ export

def test_export_load_roundtrip(real, grid, support, tmp_path):
    blocks = [assemble_block(g, 1.0, grid) for g in support.elements[:3]]
    jp, dp = tmp_path / "blocks.json", tmp_path / "blocks.bin"
    export_blocks(blocks, jp, dp)
    back = load_blocks(jp, dp)
    assert len(back) == 3
    for orig, copy in zip(blocks, back):
        assert copy.gamma[0] == orig.gamma[0]
        assert np.array_equal(copy.gamma[1].m, orig.gamma[1].m)
        assert np.array_equal(copy.dense(), orig.dense())
        assert copy.hs_norm == orig.hs_norm
        assert copy.t == orig.t
