"""NumPy/pure-Python implementations of the hot kernels.

This backend is always available and defines the reference semantics; the
compiled extension in ``_fast.pyx`` mirrors these functions exactly and is
preferred at import time when present.
"""

from __future__ import annotations

import numpy as np


def g2_statistic(
    xi: np.ndarray,
    xj: np.ndarray,
    s_cols: np.ndarray,
    ki: int,
    kj: int,
    s_dims: np.ndarray,
) -> tuple[float, int]:
    """Conditional G-squared statistic over category-coded columns.

    Builds the (config, i, j) contingency cube, compares observed cell
    counts against the within-config independence expectation, and returns
    the statistic together with the smallest per-config sample count (the
    caller uses it for the reliability guard).  Configs run over the full
    cartesian product of the conditioning cardinalities, so unsupported
    configs count as zero.
    """
    n = xi.shape[0]
    cfg = np.zeros(n, dtype=np.int64)
    cfg_size = 1
    for col, dim in zip(s_cols, s_dims):
        cfg = cfg * int(dim) + col
        cfg_size *= int(dim)
    joint = (cfg * ki + xi) * kj + xj
    counts = np.bincount(joint, minlength=cfg_size * ki * kj).reshape(cfg_size, ki, kj)

    totals = counts.sum(axis=(1, 2))
    rows = counts.sum(axis=2)
    cols = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = rows[:, :, None] * cols[:, None, :] / totals[:, None, None]
        ratio = np.where(counts > 0, counts / expected, 1.0)
        stat = 2.0 * float(np.sum(np.where(counts > 0, counts * np.log(ratio), 0.0)))
    min_total = int(totals.min()) if cfg_size > 0 else 0
    return stat, min_total


def reachable_mask(
    n_nodes: int,
    parent_indptr: np.ndarray,
    parent_indices: np.ndarray,
    child_indptr: np.ndarray,
    child_indices: np.ndarray,
    source: int,
    s_mask: np.ndarray,
) -> np.ndarray:
    """All nodes d-connected to ``source`` given the conditioning mask.

    Graph arrives as parent/child CSR arrays.  Classic two-phase reachable
    walk: mark ancestors of the conditioning set, then sweep (node, entry
    direction) states.
    """
    anc = s_mask.astype(bool).copy()
    stack = [v for v in range(n_nodes) if anc[v]]
    while stack:
        v = stack.pop()
        for t in range(parent_indptr[v], parent_indptr[v + 1]):
            p = parent_indices[t]
            if not anc[p]:
                anc[p] = True
                stack.append(p)

    in_s = s_mask.astype(bool)
    visited_up = np.zeros(n_nodes, dtype=bool)
    visited_down = np.zeros(n_nodes, dtype=bool)
    reach = np.zeros(n_nodes, dtype=bool)
    work = [(source, True)]
    while work:
        v, up = work.pop()
        if up:
            if visited_up[v]:
                continue
            visited_up[v] = True
        else:
            if visited_down[v]:
                continue
            visited_down[v] = True
        if not in_s[v]:
            reach[v] = True
        if up and not in_s[v]:
            for t in range(parent_indptr[v], parent_indptr[v + 1]):
                work.append((parent_indices[t], True))
            for t in range(child_indptr[v], child_indptr[v + 1]):
                work.append((child_indices[t], False))
        elif not up:
            if not in_s[v]:
                for t in range(child_indptr[v], child_indptr[v + 1]):
                    work.append((child_indices[t], False))
            if anc[v]:
                for t in range(parent_indptr[v], parent_indptr[v + 1]):
                    work.append((parent_indices[t], True))
    reach[source] = False
    return reach
