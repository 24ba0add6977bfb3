"""Pure-Python/numpy implementations of the time-stepping kernels.

Mirrors ``_ckernels.pyx`` signature for signature.  Every array argument is
float64 or int64 and C-contiguous; the caller in ``kernels.py`` takes care
of that.
"""
from __future__ import annotations

import numpy as np

# below this the scaled product is redone in log space
_TINY = 1e-290


def _transition_apply(haz_col, p, v):
    """A v, with A = diag(1 - haz) + p diag(haz)."""
    e = haz_col * v
    return (1.0 - haz_col) * v + p @ e


def _transpose_apply(haz_col, p, v):
    """A' v."""
    return (1.0 - haz_col) * v + haz_col * (p.T @ v)


def _log_weighted(a, lg):
    mask = a > 0
    lw = np.full(a.shape, -np.inf)
    lw[mask] = np.log(a[mask]) + lg[mask]
    top = lw.max()
    w = np.exp(lw - top)
    s = w.sum()
    return w / s, top + np.log(s)


def _argmax(q):
    return int(np.argmax(q))


def forward_filter(haz, p, supports, loggam, q0, h0, map0):
    """Run the sojourn-clock filter over rows 1..T of ``loggam``.

    Returns normalized q (T+1, N), per-step log scale (T+1,), hhat, map.
    """
    T1, N = loggam.shape
    q = np.empty((T1, N))
    logscale = np.zeros(T1)
    hhat = np.empty(T1, dtype=np.int64)
    mapst = np.empty(T1, dtype=np.int64)
    q[0] = q0
    hhat[0] = h0
    mapst[0] = map0
    for k in range(T1 - 1):
        h = hhat[k]
        a = _transition_apply(haz[:, h], p, q[k])
        lg = loggam[k + 1]
        m = lg.max()
        w = a * np.exp(lg - m)
        s = w.sum()
        if s > _TINY and np.isfinite(s):
            q[k + 1] = w / s
            logscale[k + 1] = m + np.log(s)
        else:
            q[k + 1], logscale[k + 1] = _log_weighted(a, lg)
        j = _argmax(q[k + 1])
        hn = h + 1 if j == mapst[k] else 1
        hhat[k + 1] = min(hn, supports[j])
        mapst[k + 1] = j
    return q, logscale, hhat, mapst


def backward_pass(haz, p, loggam, hhat):
    """Backward vectors, each rescaled to unit sum; v[T] is all ones."""
    T1, N = loggam.shape
    v = np.empty((T1, N))
    logscale = np.zeros(T1)
    v[T1 - 1] = 1.0
    for k in range(T1 - 2, -1, -1):
        col = haz[:, hhat[k]]
        lg = loggam[k + 1]
        m = lg.max()
        u = v[k + 1] * np.exp(lg - m)
        if u.sum() > _TINY:
            b = _transpose_apply(col, p, u)
            s = b.sum()
            v[k] = b / s
            logscale[k] = m + np.log(s)
        else:
            # every surviving entry underflowed: redo with a log-space shift
            mask = v[k + 1] > 0
            lu = np.full(N, -np.inf)
            lu[mask] = np.log(v[k + 1][mask]) + lg[mask]
            top = lu.max()
            b = _transpose_apply(col, p, np.exp(lu - top))
            s = b.sum()
            v[k] = b / s
            logscale[k] = top + np.log(s)
    return v, logscale


def forward_statistics(haz, p, q, hhat, bscaled, fvals, stats):
    """Advance stacked statistic vectors from step 0 to T, in place.

    ``stats`` rows are laid out as: N*N jump-count vectors (row j*N+i for the
    i -> j count), then F*N lagged functional vectors (row N*N + f*N + i),
    then F*N same-time functional vectors.  ``bscaled[k]`` is gamma(y_k)
    divided by the filter's step-k scale, ``fvals[k, f]`` is f(y_k).
    """
    T1, N = q.shape
    F = fvals.shape[1]
    nn = N * N
    lag0 = nn
    cur0 = nn + F * N
    idx = np.arange(N)
    for k in range(T1 - 1):
        col = haz[:, hhat[k]]
        A = p * col[None, :]
        A[idx, idx] = 1.0 - col
        bs = bscaled[k + 1]
        qk = q[k]
        new = (stats @ A.T) * bs
        # jump counts: a_ji q_k^i gamma_j e_j
        inc = A * qk[None, :] * bs[:, None]
        inc[idx, idx] = 0.0
        new[idx[:, None] * N + idx[None, :], idx[:, None]] += inc
        # lagged functionals: f(y_{k+1}) q_k^i B A e_i
        BAe = A * bs[:, None]  # column i is B A e_i
        qBA = (BAe * qk[None, :]).T  # row i
        fy = fvals[k + 1]
        for f in range(F):
            new[lag0 + f * N: lag0 + (f + 1) * N] += fy[f] * qBA
        # same-time functionals: f(y_{k+1}) q_{k+1}^i e_i
        qn = q[k + 1]
        for f in range(F):
            new[cur0 + f * N + idx, idx] += fy[f] * qn
        stats[...] = new
    return stats


def simulate_path(haz, cum_p, supports, x0, u_exit, u_jump):
    T = u_exit.shape[0]
    N = cum_p.shape[0]
    states = np.empty(T + 1, dtype=np.int64)
    clock = np.empty(T + 1, dtype=np.int64)
    x = int(x0)
    h = 1
    states[0] = x
    clock[0] = h
    for k in range(T):
        if u_exit[k] < haz[x, h]:
            col = cum_p[:, x]
            j = int(np.searchsorted(col, u_jump[k], side="right"))
            if j >= N:
                j = int(np.flatnonzero(np.diff(np.concatenate([[0.0], col])) > 0)[-1])
            x = j
            h = 1
        else:
            h += 1
        states[k + 1] = x
        clock[k + 1] = h
    return states, clock
