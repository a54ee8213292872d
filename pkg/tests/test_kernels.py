"""Backend parity: the compiled kernels must match the pure reference."""

import numpy as np
import pytest

from latstruct._kernels import _pure, backend_name
from latstruct.graphs import dconnected_set
from latstruct.inverse import _CsrDag

from conftest import random_dag

try:
    from latstruct._kernels import _fast
except ImportError:
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None, reason="compiled extension not built")


def _random_g2_inputs(seed, n=5000, n_s=2):
    rng = np.random.default_rng(seed)
    ki, kj = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    s_dims = rng.integers(2, 4, size=n_s).astype(np.int64)
    xi = rng.integers(0, ki, n).astype(np.int32)
    xj = rng.integers(0, kj, n).astype(np.int32)
    s_cols = np.vstack([rng.integers(0, d, n).astype(np.int32) for d in s_dims]) if n_s else np.empty((0, n), np.int32)
    return xi, xj, s_cols, ki, kj, s_dims


@needs_fast
@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("n_s", [0, 1, 2, 3])
def test_g2_backends_agree(seed, n_s):
    xi, xj, s_cols, ki, kj, s_dims = _random_g2_inputs(seed, n_s=n_s)
    stat_pure, min_pure = _pure.g2_statistic(xi, xj, s_cols, ki, kj, s_dims)
    stat_fast, min_fast = _fast.g2_statistic(xi, xj, s_cols, ki, kj, s_dims)
    assert stat_fast == pytest.approx(stat_pure, rel=1e-12, abs=1e-12)
    assert min_fast == min_pure


@needs_fast
def test_g2_backends_empty_rows():
    xi = np.empty(0, np.int32)
    s_cols = np.empty((1, 0), np.int32)
    s_dims = np.array([3], np.int64)
    assert _pure.g2_statistic(xi, xi, s_cols, 2, 2, s_dims) == (0.0, 0)
    assert _fast.g2_statistic(xi, xi, s_cols, 2, 2, s_dims) == (0.0, 0)


def _csr_and_masks(seed):
    g = random_dag(n_nodes=9, edge_prob=0.3, seed=seed)
    index = {nid: k for k, nid in enumerate(g.node_ids)}
    csr = _CsrDag(g, index)
    return g, index, csr


@needs_fast
@pytest.mark.parametrize("seed", range(15))
def test_reachable_backends_agree(seed):
    g, index, csr = _csr_and_masks(seed)
    rng = np.random.default_rng(seed)
    for _ in range(30):
        source = int(rng.integers(0, csr.n))
        s_mask = (rng.random(csr.n) < 0.25).astype(np.uint8)
        s_mask[source] = 0
        pure = _pure.reachable_mask(
            csr.n, csr.p_indptr, csr.p_indices, csr.c_indptr, csr.c_indices, source, s_mask
        )
        fast = _fast.reachable_mask(
            csr.n, csr.p_indptr, csr.p_indices, csr.c_indptr, csr.c_indices, source, s_mask
        )
        assert np.array_equal(pure, fast)


@pytest.mark.parametrize("seed", range(10))
def test_reachable_matches_reference_dconnected(seed):
    g, index, csr = _csr_and_masks(seed)
    names = g.node_ids
    rng = np.random.default_rng(seed + 1)
    for _ in range(20):
        source = int(rng.integers(0, csr.n))
        s_mask = (rng.random(csr.n) < 0.3).astype(np.uint8)
        s_mask[source] = 0
        s = {names[i] for i in range(csr.n) if s_mask[i]}
        expected = dconnected_set(g, names[source], s)
        mask = _pure.reachable_mask(
            csr.n, csr.p_indptr, csr.p_indices, csr.c_indptr, csr.c_indices, source, s_mask
        )
        got = {names[i] for i in range(csr.n) if mask[i]}
        assert got == expected


def test_backend_selected():
    assert backend_name() in ("pure", "compiled")
