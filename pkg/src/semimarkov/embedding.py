"""Markov embedding on (state, sojourn) pairs and the exact filters built on it.

The lifted state (i, r), with 0-based state ``i`` and sojourn ``r >= 1``,
sits at index ``(r - 1) * N + i``: level-major, so the first N entries are
the states at sojourn 1, the next N at sojourn 2, and so on.  The lift is
truncated at depth M (the longest sojourn support); at level M every state
jumps with probability one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import (ModelError, NumericalGuardError, ObservationModel,
                    SemiMarkovModel)

ENUMERATION_LIMIT = 10**7
UNDERFLOW_GUARD = 1e-300


@dataclass(frozen=True, eq=False)
class EmbeddedModel:
    base: SemiMarkovModel
    depth: int
    C: sp.csc_matrix

    @property
    def n_states(self) -> int:
        return self.base.n_states

    @property
    def size(self) -> int:
        return self.n_states * self.depth

    def index(self, state: int, sojourn: int) -> int:
        return (sojourn - 1) * self.n_states + state

    def lift(self, dist) -> np.ndarray:
        """Place a state distribution at sojourn level 1."""
        out = np.zeros(self.size)
        out[: self.n_states] = dist
        return out

    def marginal(self, lifted) -> np.ndarray:
        """Sum lifted vectors (..., N*M) over sojourn levels."""
        lifted = np.asarray(lifted)
        return lifted.reshape(lifted.shape[:-1] + (self.depth, self.n_states)).sum(axis=-2)

    def lifted_observation(self, obs: ObservationModel) -> tuple[np.ndarray, np.ndarray]:
        """c and d replicated across sojourn levels."""
        return np.tile(obs.c, self.depth), np.tile(obs.d, self.depth)

    def blocks(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Dense jump blocks Pi(r) (top block row) and stay blocks D(r) (subdiagonal)."""
        N, M = self.n_states, self.depth
        dense = self.C.toarray()
        jump = [dense[:N, (r - 1) * N: r * N] for r in range(1, M + 1)]
        stay = [dense[r * N:(r + 1) * N, (r - 1) * N: r * N] for r in range(1, M)]
        return jump, stay


def build_embedded(model: SemiMarkovModel, depth: int | None = None) -> EmbeddedModel:
    M = model.max_support if depth is None else int(depth)
    if model.max_support > M:
        raise ModelError("depth", f"sojourn support {model.max_support} exceeds depth {M}")
    N = model.n_states
    haz = model.hazard_table(M)
    p = model.kernel.p
    rows, cols, vals = [], [], []
    for r in range(1, M + 1):
        for i in range(N):
            col = (r - 1) * N + i
            h = haz[i, r]
            for j in range(N):
                if j != i and p[j, i] * h > 0:
                    rows.append(j)
                    cols.append(col)
                    vals.append(p[j, i] * h)
            if r < M and h < 1.0:
                rows.append(r * N + i)
                cols.append(col)
                vals.append(1.0 - h)
    C = sp.csc_matrix((vals, (rows, cols)), shape=(N * M, N * M))
    return EmbeddedModel(model, M, C)


def embedded_predict(em: EmbeddedModel, dist, steps: int) -> np.ndarray:
    """C^steps dist."""
    out = np.asarray(dist, dtype=float).copy()
    for _ in range(steps):
        out = em.C @ out
    return out


@dataclass(frozen=True, eq=False)
class EmbeddedFilterResult:
    """Unit-sum lifted filter vectors; the unnormalized ones are q * exp(log_norm)."""

    q: np.ndarray
    log_norm: np.ndarray
    marginals: np.ndarray


def embedded_filter(em: EmbeddedModel, obs: ObservationModel, y,
                    init: str = "bayes0") -> EmbeddedFilterResult:
    """q_{k+1} = B(y_{k+1}) C q_k on the lifted space, rescaled each step."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("observation sequence must be a non-empty 1-d array")
    loggam = np.tile(obs.log_gamma(y), (1, em.depth))
    K = em.size
    q = np.empty((y.size, K))
    log_norm = np.empty(y.size)

    def weigh(a, lg, k):
        m = lg.max()
        w = a * np.exp(lg - m)
        s = w.sum()
        if not s > UNDERFLOW_GUARD:
            raise NumericalGuardError(f"lifted filter mass underflowed at step {k}")
        return w / s, m + np.log(s)

    p0 = em.lift(em.base.p0)
    if init == "bayes0":
        q[0], log_norm[0] = weigh(p0, loggam[0], 0)
    elif init == "prior":
        q[0], log_norm[0] = p0, 0.0
    else:
        raise ValueError(f"unknown init mode {init!r}")
    for k in range(1, y.size):
        q[k], step = weigh(em.C @ q[k - 1], loggam[k], k)
        log_norm[k] = log_norm[k - 1] + step
    return EmbeddedFilterResult(q, log_norm, em.marginal(q))


@dataclass(frozen=True, eq=False)
class EnumerationResult:
    filtered: np.ndarray
    smoothed: np.ndarray
    log_evidence: float


def enumerate_posterior(model: SemiMarkovModel, obs: ObservationModel, y,
                        init: str = "bayes0") -> EnumerationResult:
    """Exact posteriors by summing over every state path.

    Each path's prior probability is the product of p_0 and the per-step
    stay/jump probabilities read off the exit probabilities along its own clock.
    ``filtered[k]`` conditions on y_0..y_k, ``smoothed[k]`` on all of y.
    """
    y = np.asarray(y, dtype=float)
    N = model.n_states
    T1 = y.size
    if N ** T1 > ENUMERATION_LIMIT:
        raise ValueError(f"{N}**{T1} paths exceeds the enumeration limit {ENUMERATION_LIMIT}")
    paths = np.array(list(itertools.product(range(N), repeat=T1)), dtype=np.int64)
    P = paths.shape[0]
    like = np.exp(obs.log_gamma(y))  # (T1, N)
    prior = np.asarray(model.p0, dtype=float)[paths[:, 0]].copy()
    clock = np.ones(P, dtype=np.int64)
    # weight[k] for every path: prior prob of the prefix times likelihoods of y_0..y_k
    weight = np.empty((T1, P))
    lik = like[0, paths[:, 0]] if init == "bayes0" else np.ones(P)
    weight[0] = prior * lik
    M = model.max_support
    haz_tab = np.array([[1.0] + [law.exit_probability(r) for r in range(1, M + 1)]
                        for law in model.sojourns])
    for k in range(1, T1):
        prev, cur = paths[:, k - 1], paths[:, k]
        # clocks past a support only occur on zero-probability prefixes; hazard is 1 there
        haz = haz_tab[prev, np.minimum(clock, M)]
        stay = cur == prev
        step = np.where(stay, 1.0 - haz, model.kernel.p[cur, prev] * haz)
        prior = prior * step
        lik = lik * like[k, cur]
        clock = np.where(stay, clock + 1, 1)
        weight[k] = prior * lik
    filtered = np.zeros((T1, N))
    smoothed = np.zeros((T1, N))
    for k in range(T1):
        np.add.at(filtered[k], paths[:, k], weight[k])
        np.add.at(smoothed[k], paths[:, k], weight[-1])
    log_ev = float(np.log(weight[-1].sum()))
    filtered /= filtered.sum(axis=1, keepdims=True)
    smoothed /= smoothed.sum(axis=1, keepdims=True)
    return EnumerationResult(filtered, smoothed, log_ev)
