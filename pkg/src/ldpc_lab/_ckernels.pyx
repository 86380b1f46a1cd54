# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Contracts match ``ldpc_lab._pykernels``."""
import numpy as np

from libc.math cimport fabs

NAME = "cython"

cdef enum:
    C_DECODES = 0
    C_STUCK = 1
    C_UNDECIDED = 2

DECODES, STUCK, UNDECIDED = C_DECODES, C_STUCK, C_UNDECIDED


def bp_flood(const int[:, ::1] var_checks, Py_ssize_t num_checks,
             const unsigned char[::1] erased, long max_iters):
    """Flooding erasure decoder with per-check unknown counts and XOR sums.

    A check with exactly one unknown neighbour names it in its XOR
    accumulator. Candidates for round t+1 are the checks whose count dropped
    to one while applying round t, so total work is linear in the edges.
    """
    cdef Py_ssize_t n = var_checks.shape[0]
    cdef Py_ssize_t l = var_checks.shape[1]
    recovered_np = np.empty(n, dtype=np.int32)
    count_np = np.zeros(num_checks, dtype=np.int32)
    xsum_np = np.zeros(num_checks, dtype=np.int32)
    buf_a = np.empty(num_checks, dtype=np.int32)
    buf_b = np.empty(num_checks, dtype=np.int32)
    newly_np = np.empty(max(n, 1), dtype=np.int32)
    cdef int[::1] rec = recovered_np
    cdef int[::1] count = count_np
    cdef int[::1] xsum = xsum_np
    cdef int[::1] cand = buf_a
    cdef int[::1] nxt = buf_b
    cdef int[::1] tmp
    cdef int[::1] newly = newly_np
    cdef Py_ssize_t v, d, i, c, ncand, nnext, nnew
    cdef long remaining = 0, rounds = 0
    cdef int truncated = 0

    with nogil:
        for v in range(n):
            if erased[v]:
                rec[v] = -1
                remaining += 1
                for d in range(l):
                    c = var_checks[v, d]
                    count[c] += 1
                    xsum[c] ^= <int>v
            else:
                rec[v] = 0
        ncand = 0
        for c in range(num_checks):
            if count[c] == 1:
                cand[ncand] = <int>c
                ncand += 1

    while remaining > 0:
        with nogil:
            nnew = 0
            for i in range(ncand):
                c = cand[i]
                if count[c] == 1:
                    v = xsum[c]
                    if rec[v] == -1:
                        rec[v] = -2  # claimed this round
                        newly[nnew] = <int>v
                        nnew += 1
        if nnew == 0:
            break
        if rounds >= max_iters:
            for i in range(nnew):
                rec[newly[i]] = -1
            truncated = 1
            break
        rounds += 1
        with nogil:
            remaining -= nnew
            nnext = 0
            for i in range(nnew):
                v = newly[i]
                rec[v] = <int>rounds
                for d in range(l):
                    c = var_checks[v, d]
                    count[c] -= 1
                    xsum[c] ^= <int>v
                    if count[c] == 1:
                        nxt[nnext] = <int>c
                        nnext += 1
        tmp = cand
        cand = nxt
        nxt = tmp
        ncand = nnext
    return recovered_np, int(rounds), bool(truncated)


cdef inline void _exclusive(double* vals, double* out, Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 1.0
    for i in range(w):
        out[i] = acc
        acc = acc * vals[i]
    acc = 1.0
    for i in range(w - 1, -1, -1):
        out[i] = out[i] * acc
        acc = acc * vals[i]


cdef void _de_round(const long long[:, ::1] var_edges, const long long[:, ::1] chk_edges,
                    double eps, double[::1] x, double[::1] y, double* vals, double* out,
                    double* max_x, double* change) noexcept nogil:
    cdef Py_ssize_t a, i, e
    cdef Py_ssize_t wc = chk_edges.shape[1], wv = var_edges.shape[1]
    cdef double mx = 0.0, ch = 0.0, nv, dx
    for a in range(chk_edges.shape[0]):
        for i in range(wc):
            e = chk_edges[a, i]
            vals[i] = 1.0 - x[e] if e >= 0 else 1.0
        _exclusive(vals, out, wc)
        for i in range(wc):
            e = chk_edges[a, i]
            if e >= 0:
                y[e] = 1.0 - out[i]
    for a in range(var_edges.shape[0]):
        for i in range(wv):
            e = var_edges[a, i]
            vals[i] = y[e] if e >= 0 else 1.0
        _exclusive(vals, out, wv)
        for i in range(wv):
            e = var_edges[a, i]
            if e >= 0:
                nv = eps * out[i]
                dx = fabs(nv - x[e])
                if dx > ch:
                    ch = dx
                x[e] = nv
                if nv > mx:
                    mx = nv
    max_x[0] = mx
    change[0] = ch


def de_step(var_edges, chk_edges, double eps, double[::1] x, double[::1] y):
    cdef double mx = 0.0, ch = 0.0
    cdef const long long[:, ::1] ve = np.ascontiguousarray(var_edges, dtype=np.int64)
    cdef const long long[:, ::1] ce = np.ascontiguousarray(chk_edges, dtype=np.int64)
    cdef Py_ssize_t width = max(ve.shape[1], ce.shape[1])
    scratch = np.empty(2 * width, dtype=np.float64)
    cdef double[::1] s = scratch
    _de_round(ve, ce, eps, x, y, &s[0], &s[width], &mx, &ch)
    return mx, ch


def de_run(var_edges, chk_edges, double eps, double[::1] x, double[::1] y,
           double tol, double stall, long max_iters):
    cdef double mx = 0.0, ch = np.inf
    cdef long it = 0
    cdef int verdict = C_UNDECIDED
    cdef const long long[:, ::1] ve = np.ascontiguousarray(var_edges, dtype=np.int64)
    cdef const long long[:, ::1] ce = np.ascontiguousarray(chk_edges, dtype=np.int64)
    cdef Py_ssize_t width = max(ve.shape[1], ce.shape[1])
    scratch = np.empty(2 * width, dtype=np.float64)
    cdef double[::1] s = scratch
    with nogil:
        while it < max_iters:
            _de_round(ve, ce, eps, x, y, &s[0], &s[width], &mx, &ch)
            it += 1
            if mx < tol:
                verdict = C_DECODES
                break
            if ch < stall:
                verdict = C_STUCK
                break
    if it == 0:
        mx = float(np.max(np.asarray(x), initial=0.0))
    return int(it), mx, ch, verdict
