# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels; same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, isfinite

cnp.import_array()

cdef double _TINY = 1e-290


cdef inline Py_ssize_t _argmax(double[::1] q) noexcept nogil:
    cdef Py_ssize_t j, best = 0
    cdef double top = q[0]
    for j in range(1, q.shape[0]):
        if q[j] > top:
            top = q[j]
            best = j
    return best


cdef inline void _apply(const double[:, ::1] haz, const double[:, ::1] p, Py_ssize_t h,
                        double[::1] v, double[::1] out) noexcept nogil:
    # out = A(h) v
    cdef Py_ssize_t N = v.shape[0], i, j
    cdef double acc, e
    for j in range(N):
        out[j] = (1.0 - haz[j, h]) * v[j]
    for i in range(N):
        e = haz[i, h] * v[i]
        if e != 0.0:
            for j in range(N):
                out[j] += p[j, i] * e


def forward_filter(const double[:, ::1] haz, const double[:, ::1] p,
                   const cnp.int64_t[::1] supports, const double[:, ::1] loggam,
                   const double[::1] q0, cnp.int64_t h0, cnp.int64_t map0):
    cdef Py_ssize_t T1 = loggam.shape[0], N = loggam.shape[1]
    q_arr = np.empty((T1, N))
    ls_arr = np.zeros(T1)
    hh_arr = np.empty(T1, dtype=np.int64)
    mp_arr = np.empty(T1, dtype=np.int64)
    a_arr = np.empty(N)
    cdef double[:, ::1] q = q_arr
    cdef double[::1] logscale = ls_arr
    cdef cnp.int64_t[::1] hhat = hh_arr
    cdef cnp.int64_t[::1] mapst = mp_arr
    cdef double[::1] a = a_arr
    cdef Py_ssize_t k, j, jstar
    cdef cnp.int64_t h, hn
    cdef double m, s, lw

    for j in range(N):
        q[0, j] = q0[j]
    hhat[0] = h0
    mapst[0] = map0
    with nogil:
        for k in range(T1 - 1):
            h = hhat[k]
            _apply(haz, p, h, q[k], a)
            m = loggam[k + 1, 0]
            for j in range(1, N):
                if loggam[k + 1, j] > m:
                    m = loggam[k + 1, j]
            s = 0.0
            for j in range(N):
                q[k + 1, j] = a[j] * exp(loggam[k + 1, j] - m)
                s += q[k + 1, j]
            if s > _TINY and isfinite(s):
                for j in range(N):
                    q[k + 1, j] /= s
                logscale[k + 1] = m + log(s)
            else:
                m = -INFINITY
                for j in range(N):
                    if a[j] > 0.0:
                        lw = log(a[j]) + loggam[k + 1, j]
                        if lw > m:
                            m = lw
                s = 0.0
                for j in range(N):
                    if a[j] > 0.0:
                        q[k + 1, j] = exp(log(a[j]) + loggam[k + 1, j] - m)
                    else:
                        q[k + 1, j] = 0.0
                    s += q[k + 1, j]
                for j in range(N):
                    q[k + 1, j] /= s
                logscale[k + 1] = m + log(s)
            jstar = _argmax(q[k + 1])
            hn = h + 1 if jstar == mapst[k] else 1
            if hn > supports[jstar]:
                hn = supports[jstar]
            hhat[k + 1] = hn
            mapst[k + 1] = jstar
    return q_arr, ls_arr, hh_arr, mp_arr


def backward_pass(const double[:, ::1] haz, const double[:, ::1] p,
                  const double[:, ::1] loggam, const cnp.int64_t[::1] hhat):
    cdef Py_ssize_t T1 = loggam.shape[0], N = loggam.shape[1]
    v_arr = np.empty((T1, N))
    ls_arr = np.zeros(T1)
    u_arr = np.empty(N)
    cdef double[:, ::1] v = v_arr
    cdef double[::1] logscale = ls_arr
    cdef double[::1] u = u_arr
    cdef Py_ssize_t k, i, j
    cdef cnp.int64_t h
    cdef double m, s, acc, su

    for j in range(N):
        v[T1 - 1, j] = 1.0
    with nogil:
        for k in range(T1 - 2, -1, -1):
            h = hhat[k]
            m = loggam[k + 1, 0]
            for j in range(1, N):
                if loggam[k + 1, j] > m:
                    m = loggam[k + 1, j]
            su = 0.0
            for j in range(N):
                u[j] = v[k + 1, j] * exp(loggam[k + 1, j] - m)
                su += u[j]
            if not su > _TINY:
                m = -INFINITY
                for j in range(N):
                    if v[k + 1, j] > 0.0 and log(v[k + 1, j]) + loggam[k + 1, j] > m:
                        m = log(v[k + 1, j]) + loggam[k + 1, j]
                for j in range(N):
                    if v[k + 1, j] > 0.0:
                        u[j] = exp(log(v[k + 1, j]) + loggam[k + 1, j] - m)
                    else:
                        u[j] = 0.0
            s = 0.0
            for i in range(N):
                acc = 0.0
                for j in range(N):
                    acc += p[j, i] * u[j]
                v[k, i] = (1.0 - haz[i, h]) * u[i] + haz[i, h] * acc
                s += v[k, i]
            for i in range(N):
                v[k, i] /= s
            logscale[k] = m + log(s)
    return v_arr, ls_arr


def forward_statistics(const double[:, ::1] haz, const double[:, ::1] p,
                       const double[:, ::1] q, const cnp.int64_t[::1] hhat,
                       const double[:, ::1] bscaled, const double[:, ::1] fvals,
                       double[:, ::1] stats):
    cdef Py_ssize_t T1 = q.shape[0], N = q.shape[1], F = fvals.shape[1]
    cdef Py_ssize_t K = stats.shape[0]
    cdef Py_ssize_t nn = N * N, lag0 = N * N, cur0 = N * N + F * N
    A_arr = np.empty((N, N))
    row_arr = np.empty(N)
    cdef double[:, ::1] A = A_arr
    cdef double[::1] row = row_arr
    cdef Py_ssize_t k, r, i, j, f
    cdef cnp.int64_t h
    cdef double acc, qi, fy

    with nogil:
        for k in range(T1 - 1):
            h = hhat[k]
            for j in range(N):
                for i in range(N):
                    if i == j:
                        A[j, i] = 1.0 - haz[i, h]
                    else:
                        A[j, i] = p[j, i] * haz[i, h]
            for r in range(K):
                for j in range(N):
                    acc = 0.0
                    for i in range(N):
                        acc += A[j, i] * stats[r, i]
                    row[j] = acc * bscaled[k + 1, j]
                for j in range(N):
                    stats[r, j] = row[j]
            for j in range(N):
                for i in range(N):
                    if i != j:
                        stats[j * N + i, j] += A[j, i] * q[k, i] * bscaled[k + 1, j]
            for f in range(F):
                fy = fvals[k + 1, f]
                for i in range(N):
                    qi = q[k, i]
                    for j in range(N):
                        stats[lag0 + f * N + i, j] += fy * (A[j, i] * bscaled[k + 1, j] * qi)
                    stats[cur0 + f * N + i, i] += fy * q[k + 1, i]
    return np.asarray(stats)


def simulate_path(const double[:, ::1] haz, const double[:, ::1] cum_p,
                  const cnp.int64_t[::1] supports, cnp.int64_t x0,
                  const double[::1] u_exit, const double[::1] u_jump):
    cdef Py_ssize_t T = u_exit.shape[0], N = cum_p.shape[0], k, j, last
    st_arr = np.empty(T + 1, dtype=np.int64)
    ck_arr = np.empty(T + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] states = st_arr
    cdef cnp.int64_t[::1] clock = ck_arr
    cdef cnp.int64_t x = x0, h = 1
    states[0] = x
    clock[0] = h
    with nogil:
        for k in range(T):
            if u_exit[k] < haz[x, h]:
                j = 0
                while j < N and not (u_jump[k] < cum_p[j, x]):
                    j += 1
                if j >= N:
                    # rounding left the column sum just below u: take the last positive entry
                    last = 0
                    for j in range(N):
                        if cum_p[j, x] > (cum_p[j - 1, x] if j > 0 else 0.0):
                            last = j
                    j = last
                x = j
                h = 1
            else:
                h += 1
            states[k + 1] = x
            clock[k + 1] = h
    return st_arr, ck_arr
