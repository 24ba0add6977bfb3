"""Recursive estimators of jump counts, occupation times and observation sums.

All statistic vectors share the filter's scale: at every step they are
divided by the same factor as ``q``, so any ratio ``<sigma, 1> / <q, 1>``
is unaffected by the rescaling.

Two kinds of observation sums are kept for f in (1, y, y^2):

* lagged, ``G^i_k = sum_{l=1..k} f(y_l) <X_{l-1}, e_i>``; with f = 1 this
  is the occupation time J^i used for the jump-rate ratios;
* same-time, ``H^i_k = sum_l f(y_l) <X_l, e_i>``, from which the
  observation levels and noise scales are re-estimated.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .filter import FilterResult, initial_state, run_filter
from .model import ObservationModel, SemiMarkovModel, gamma, transition_matrix

FUNCTIONALS = ("1", "y", "y2")
UNVISITED_TOL = 1e-12
VARIANCE_FLOOR = 1e-8


def functional_values(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.stack([np.ones_like(y), y, y * y], axis=-1)


@dataclass(frozen=True, eq=False)
class StatisticState:
    """Filter vector and statistic vectors after ``k`` steps.

    sigma_N[j, i] is the vector for the count of i -> j jumps; sigma_G[f, i]
    and sigma_H[f, i] are the lagged and same-time sums for functional f.
    """

    q: np.ndarray
    log_norm: float
    h_hat: int
    map_state: int
    sigma_N: np.ndarray
    sigma_G: np.ndarray
    sigma_H: np.ndarray
    k: int = 0

    @property
    def sigma_J(self) -> np.ndarray:
        return self.sigma_G[0]

    def scaled(self, factor: float) -> "StatisticState":
        """q and every sigma vector multiplied by ``factor`` (exactly, via ``log_norm``)."""
        if not factor > 0:
            raise ValueError("factor must be positive")
        return replace(self, log_norm=self.log_norm + float(np.log(factor)))

    def scaled_arrays(self, factor: float) -> "StatisticState":
        """Multiply the stored arrays themselves; exact only for powers of two."""
        return replace(self, q=self.q * factor, sigma_N=self.sigma_N * factor,
                       sigma_G=self.sigma_G * factor, sigma_H=self.sigma_H * factor)

    def _stacked(self) -> np.ndarray:
        N = self.q.size
        return np.ascontiguousarray(np.concatenate([
            self.sigma_N.reshape(N * N, N),
            self.sigma_G.reshape(-1, N),
            self.sigma_H.reshape(-1, N),
        ]))

    @classmethod
    def _from_stacked(cls, stacked, q, log_norm, h_hat, map_state, k):
        N = q.size
        F = len(FUNCTIONALS)
        nn = N * N
        return cls(q, log_norm, h_hat, map_state,
                   stacked[:nn].reshape(N, N, N).copy(),
                   stacked[nn:nn + F * N].reshape(F, N, N).copy(),
                   stacked[nn + F * N:].reshape(F, N, N).copy(), k)


def initial_statistics(model: SemiMarkovModel, obs: ObservationModel, y0: float,
                       init: str = "bayes0") -> StatisticState:
    first = initial_state(model, obs, y0, init)
    N = model.n_states
    F = len(FUNCTIONALS)
    sigma_H = np.zeros((F, N, N))
    if init == "bayes0":
        fy = functional_values(y0)
        for f in range(F):
            sigma_H[f][np.diag_indices(N)] = fy[f] * first.q
    return StatisticState(first.q, first.log_norm, first.h_hat, first.map_state,
                          np.zeros((N, N, N)), np.zeros((F, N, N)), sigma_H, 0)


def _scaled_gammas(obs: ObservationModel, y, step_log_scale) -> np.ndarray:
    # gamma(y_k) / (step-k scale factor); capped so a vanishing predicted
    # mass cannot produce inf * 0
    return np.exp(np.minimum(obs.log_gamma(y) - step_log_scale[:, None], 700.0))


def statistics_step(stat: StatisticState, model: SemiMarkovModel, obs: ObservationModel,
                    y_next: float, backend: str | None = None) -> StatisticState:
    """Advance the filter and every statistic by one observation."""
    s0 = stat.q.sum()
    q0 = stat.q / s0
    loggam = np.vstack([np.zeros(model.n_states), obs.log_gamma(y_next)])
    haz = model.hazard_table()
    q, ls, hh, mp = kernels.forward_filter(haz, model.kernel.p, model.supports, loggam,
                                           q0, stat.h_hat, stat.map_state, backend=backend)
    stacked = stat._stacked() / s0
    y2 = np.array([0.0, y_next])
    kernels.forward_statistics(haz, model.kernel.p, q, np.array([stat.h_hat, hh[1]]),
                               _scaled_gammas(obs, y2, ls), functional_values(y2),
                               stacked, backend=backend)
    return StatisticState._from_stacked(
        stacked, q[1], stat.log_norm + float(np.log(s0)) + float(ls[1]),
        int(hh[1]), int(mp[1]), stat.k + 1)


def collect_statistics(model: SemiMarkovModel, obs: ObservationModel, y,
                       init: str = "bayes0", filt: FilterResult | None = None,
                       backend: str | None = None) -> StatisticState:
    """Run filter and statistic recursions over the whole sequence."""
    y = np.asarray(y, dtype=float)
    if filt is None:
        filt = run_filter(model, obs, y, init=init, backend=backend)
    start = initial_statistics(model, obs, y[0], init)
    step_ls = filt.step_scales()
    stacked = start._stacked()
    kernels.forward_statistics(model.hazard_table(), model.kernel.p, filt.q, filt.h_hat,
                               _scaled_gammas(obs, y, step_ls), functional_values(y),
                               stacked, backend=backend)
    T = y.size - 1
    return StatisticState._from_stacked(stacked, filt.q[T].copy(), float(filt.log_norm[T]),
                                        int(filt.h_hat[T]), int(filt.map_state[T]), T)


# -- single recursions, unscaled ------------------------------------------------

def step_N(sigma_N: np.ndarray, q_k: np.ndarray, model: SemiMarkovModel,
           obs: ObservationModel, h_hat: int, y_next: float, scale: float = 1.0) -> np.ndarray:
    """sigma(N^{ji} X)' = B A sigma(N^{ji} X) + a_ji <q, e_i> gamma_j e_j, all pairs.

    The result is divided by ``scale``.
    """
    N = model.n_states
    A = transition_matrix(model, h_hat)
    g = np.array([gamma(obs, j, y_next) for j in range(N)])
    out = np.einsum("ab,jib->jia", A, sigma_N) * g
    for j in range(N):
        for i in range(N):
            if i != j:
                out[j, i, j] += A[j, i] * q_k[i] * g[j]
    return out / scale


def step_G(sigma_G: np.ndarray, q_k: np.ndarray, model: SemiMarkovModel,
           obs: ObservationModel, h_hat: int, y_next: float, f, scale: float = 1.0) -> np.ndarray:
    """sigma(G^i X)' = B A sigma(G^i X) + f(y') <q, e_i> B A e_i, for every i.

    ``f`` is a callable or one of the names in FUNCTIONALS.
    """
    if isinstance(f, str):
        f = {"1": lambda v: 1.0, "y": lambda v: v, "y2": lambda v: v * v}[f]
    N = model.n_states
    A = transition_matrix(model, h_hat)
    g = np.array([gamma(obs, j, y_next) for j in range(N)])
    BA = g[:, None] * A
    out = sigma_G @ BA.T
    out += f(y_next) * (BA * q_k[None, :]).T
    return out / scale


# -- re-estimation ----------------------------------------------------------------

@dataclass(frozen=True)
class Estimates:
    """Normalized (conditional-mean) statistics."""

    N_hat: np.ndarray
    J_hat: np.ndarray
    G_hat: np.ndarray
    H_hat: np.ndarray


def normalized_statistics(stat: StatisticState) -> Estimates:
    mass = stat.q.sum()
    return Estimates(stat.sigma_N.sum(axis=-1) / mass,
                     stat.sigma_J.sum(axis=-1) / mass,
                     stat.sigma_G.sum(axis=-1) / mass,
                     stat.sigma_H.sum(axis=-1) / mass)


def reestimate_a(stat: StatisticState) -> tuple[np.ndarray, list[int]]:
    """Per-step jump probabilities N^{ji} / J^i, and the unvisited states.

    Off-diagonal entries are clamped to [0, 1]; the diagonal holds the
    remaining stay probability.  Columns of unvisited states are NaN.
    """
    est = normalized_statistics(stat)
    N = est.J_hat.size
    undefined = [i for i in range(N) if not est.J_hat[i] >= UNVISITED_TOL]
    a = np.full((N, N), np.nan)
    for i in range(N):
        if i in undefined:
            continue
        col = np.clip(est.N_hat[:, i] / est.J_hat[i], 0.0, 1.0)
        col[i] = 0.0
        col[i] = max(0.0, 1.0 - col.sum())
        a[:, i] = col
    return a, undefined


def reestimate_observation(stat: StatisticState) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Observation levels and noise scales from the same-time sums."""
    est = normalized_statistics(stat)
    occ, s1, s2 = est.H_hat
    N = occ.size
    undefined = [i for i in range(N) if not occ[i] >= UNVISITED_TOL]
    c = np.full(N, np.nan)
    d = np.full(N, np.nan)
    ok = np.array([i not in undefined for i in range(N)], dtype=bool)
    c[ok] = s1[ok] / occ[ok]
    var = s2[ok] / occ[ok] - c[ok] ** 2
    d[ok] = np.sqrt(np.maximum(var, VARIANCE_FLOOR))
    return c, d, undefined


def estimate(model: SemiMarkovModel, obs: ObservationModel, y, init: str = "bayes0",
             backend: str | None = None) -> dict:
    """One pass of the statistic recursions plus the parameter re-estimates."""
    stat = collect_statistics(model, obs, y, init=init, backend=backend)
    est = normalized_statistics(stat)
    a_hat, und_a = reestimate_a(stat)
    c_hat, d_hat, und_o = reestimate_observation(stat)
    return {
        "a_hat": a_hat,
        "N_hat": est.N_hat,
        "J_hat": est.J_hat,
        "c_hat": c_hat,
        "d_hat": d_hat,
        "undefined_states": sorted(set(und_a) | set(und_o)),
    }
