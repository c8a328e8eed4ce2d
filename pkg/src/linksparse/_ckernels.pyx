# cython: language_level=3
"""Compiled inner loops. Signatures mirror ``_kernels_py`` exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline bint _beats(double wa, Py_ssize_t a, double wb, Py_ssize_t b) noexcept nogil:
    return wa > wb or (wa == wb and a < b)


def lgs_rounds(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] weights, const cnp.uint8_t[::1] active):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, k, u, n_undecided = 0
    cdef int rnd = 0
    cdef long long messages = 0
    cdef bint local_max

    scheduled_arr = np.zeros(n, dtype=np.uint8)
    round_arr = np.full(n, -1, dtype=np.int32)
    undecided_arr = np.zeros(n, dtype=np.uint8)
    winner_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] scheduled = scheduled_arr
    cdef cnp.int32_t[::1] decided_at = round_arr
    cdef cnp.uint8_t[::1] undecided = undecided_arr
    cdef cnp.uint8_t[::1] winner = winner_arr

    for v in range(n):
        if active[v]:
            undecided[v] = 1
            n_undecided += 1

    with nogil:
        while n_undecided > 0:
            rnd += 1
            messages += 2 * n_undecided
            for v in range(n):
                winner[v] = 0
                if not undecided[v]:
                    continue
                local_max = True
                for k in range(indptr[v], indptr[v + 1]):
                    u = indices[k]
                    if undecided[u] and not _beats(weights[v], v, weights[u], u):
                        local_max = False
                        break
                if local_max:
                    winner[v] = 1
            for v in range(n):
                if not winner[v]:
                    continue
                scheduled[v] = 1
                undecided[v] = 0
                decided_at[v] = rnd
                n_undecided -= 1
                for k in range(indptr[v], indptr[v + 1]):
                    u = indices[k]
                    if undecided[u]:
                        undecided[u] = 0
                        decided_at[u] = rnd
                        n_undecided -= 1
    return scheduled_arr.astype(bool), round_arr, int(messages)


def csma_contend(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                 const cnp.uint8_t[::1] contending, const cnp.int64_t[::1] backoff):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, k, u
    cdef long long lowest
    wins_arr = np.zeros(n, dtype=np.uint8)
    coll_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] wins = wins_arr
    cdef cnp.uint8_t[::1] coll = coll_arr
    with nogil:
        for v in range(n):
            if not contending[v]:
                continue
            lowest = backoff[v] + 1
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                if contending[u] and backoff[u] < lowest:
                    lowest = backoff[u]
            if backoff[v] < lowest:
                wins[v] = 1
            elif backoff[v] == lowest:
                coll[v] = 1
    return wins_arr.astype(bool), coll_arr.astype(bool)


def laplacian_apply(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                    const double[::1] inv_sqrt_deg, const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t g = x.shape[1]
    cdef Py_ssize_t v, k, u, j
    cdef double w
    out_arr = np.array(x, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] out = out_arr
    with nogil:
        for v in range(n):
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                w = inv_sqrt_deg[v] * inv_sqrt_deg[u]
                for j in range(g):
                    out[v, j] -= w * x[u, j]
    return out_arr


def induced_degrees(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                    const cnp.uint8_t[::1] mask):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, k
    cdef long long c
    deg_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] deg = deg_arr
    with nogil:
        for v in range(n):
            if not mask[v]:
                continue
            c = 0
            for k in range(indptr[v], indptr[v + 1]):
                c += mask[indices[k]]
            deg[v] = c
    return deg_arr
