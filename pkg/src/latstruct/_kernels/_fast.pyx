# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the `_pure` kernels.

Same signatures, same outputs, single-pass C loops instead of vectorized
NumPy.  See benchmarks/bench_kernels.py for the speed comparison.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log
from libc.stdlib cimport free, malloc

cnp.import_array()


def g2_statistic(
    cnp.int32_t[::1] xi,
    cnp.int32_t[::1] xj,
    cnp.int32_t[:, ::1] s_cols,
    int ki,
    int kj,
    cnp.int64_t[::1] s_dims,
):
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t n_s = s_cols.shape[0]
    cdef Py_ssize_t r, t
    cdef long long cfg_size = 1
    for t in range(n_s):
        cfg_size *= s_dims[t]
    cdef long long cells = cfg_size * ki * kj
    cdef long long* counts = <long long*> malloc(cells * sizeof(long long))
    if counts == NULL:
        raise MemoryError()
    cdef long long c
    for c in range(cells):
        counts[c] = 0

    cdef long long idx
    for r in range(n):
        idx = 0
        for t in range(n_s):
            idx = idx * s_dims[t] + s_cols[t, r]
        idx = (idx * ki + xi[r]) * kj + xj[r]
        counts[idx] += 1

    cdef double stat = 0.0
    cdef long long min_total = -1
    cdef long long total, obs
    cdef double expected
    cdef long long* rows = <long long*> malloc(ki * sizeof(long long))
    cdef long long* cols = <long long*> malloc(kj * sizeof(long long))
    if rows == NULL or cols == NULL:
        free(counts)
        if rows != NULL:
            free(rows)
        if cols != NULL:
            free(cols)
        raise MemoryError()
    cdef long long g, base
    cdef int a, b
    for g in range(cfg_size):
        base = g * ki * kj
        total = 0
        for a in range(ki):
            rows[a] = 0
        for b in range(kj):
            cols[b] = 0
        for a in range(ki):
            for b in range(kj):
                obs = counts[base + a * kj + b]
                rows[a] += obs
                cols[b] += obs
                total += obs
        if min_total < 0 or total < min_total:
            min_total = total
        if total == 0:
            continue
        for a in range(ki):
            if rows[a] == 0:
                continue
            for b in range(kj):
                obs = counts[base + a * kj + b]
                if obs > 0:
                    expected = (<double> rows[a]) * (<double> cols[b]) / (<double> total)
                    stat += 2.0 * obs * log(obs / expected)
    free(counts)
    free(rows)
    free(cols)
    if min_total < 0:
        min_total = 0
    return stat, int(min_total)


def reachable_mask(
    int n_nodes,
    cnp.int32_t[::1] parent_indptr,
    cnp.int32_t[::1] parent_indices,
    cnp.int32_t[::1] child_indptr,
    cnp.int32_t[::1] child_indices,
    int source,
    cnp.uint8_t[::1] s_mask,
):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] reach_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef cnp.uint8_t[::1] reach = reach_arr
    cdef int n_edges = parent_indices.shape[0]
    cdef int cap = 2 * n_nodes + 4 * n_edges + 4
    cdef int* stack = <int*> malloc(cap * sizeof(int))
    cdef cnp.uint8_t* anc = <cnp.uint8_t*> malloc(n_nodes * sizeof(cnp.uint8_t))
    cdef cnp.uint8_t* vis_up = <cnp.uint8_t*> malloc(n_nodes * sizeof(cnp.uint8_t))
    cdef cnp.uint8_t* vis_down = <cnp.uint8_t*> malloc(n_nodes * sizeof(cnp.uint8_t))
    if stack == NULL or anc == NULL or vis_up == NULL or vis_down == NULL:
        if stack != NULL: free(stack)
        if anc != NULL: free(anc)
        if vis_up != NULL: free(vis_up)
        if vis_down != NULL: free(vis_down)
        raise MemoryError()

    cdef int v, t, p, top
    for v in range(n_nodes):
        anc[v] = s_mask[v]
        vis_up[v] = 0
        vis_down[v] = 0
    # ancestors of the conditioning set
    top = 0
    for v in range(n_nodes):
        if anc[v]:
            stack[top] = v
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for t in range(parent_indptr[v], parent_indptr[v + 1]):
            p = parent_indices[t]
            if not anc[p]:
                anc[p] = 1
                stack[top] = p
                top += 1

    # (node, direction) sweep; direction encoded in the low bit
    cdef int state, up
    top = 0
    stack[top] = source * 2 + 1
    top += 1
    while top > 0:
        top -= 1
        state = stack[top]
        v = state >> 1
        up = state & 1
        if up:
            if vis_up[v]:
                continue
            vis_up[v] = 1
        else:
            if vis_down[v]:
                continue
            vis_down[v] = 1
        if not s_mask[v]:
            reach[v] = 1
        if up and not s_mask[v]:
            for t in range(parent_indptr[v], parent_indptr[v + 1]):
                stack[top] = parent_indices[t] * 2 + 1
                top += 1
            for t in range(child_indptr[v], child_indptr[v + 1]):
                stack[top] = child_indices[t] * 2
                top += 1
        elif not up:
            if not s_mask[v]:
                for t in range(child_indptr[v], child_indptr[v + 1]):
                    stack[top] = child_indices[t] * 2
                    top += 1
            if anc[v]:
                for t in range(parent_indptr[v], parent_indptr[v + 1]):
                    stack[top] = parent_indices[t] * 2 + 1
                    top += 1
    reach[source] = 0
    free(stack)
    free(anc)
    free(vis_up)
    free(vis_down)
    return reach_arr.view(bool)
