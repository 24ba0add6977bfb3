"""Forward filter with a recursive integer estimate of the sojourn clock.

The unnormalized filter vector is carried as a unit-sum vector ``q`` plus
the log of its total mass, ``log_norm``.  Every step multiplies by
B(y) A(h_hat) and folds the new mass into ``log_norm``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ObservationModel, SemiMarkovModel, gamma

INIT_MODES = ("bayes0", "prior")


@dataclass(frozen=True, eq=False)
class FilterState:
    q: np.ndarray
    log_norm: float
    h_hat: int
    map_state: int

    @property
    def posterior(self) -> np.ndarray:
        return self.q / self.q.sum()

    def scaled(self, factor: float) -> "FilterState":
        """The unnormalized vector multiplied by ``factor``.

        The factor goes into ``log_norm``; ``q`` keeps its bits, so the
        operation is exact for any positive factor.
        """
        if not factor > 0:
            raise ValueError("factor must be positive")
        return FilterState(self.q, self.log_norm + float(np.log(factor)),
                           self.h_hat, self.map_state)

    def scaled_arrays(self, factor: float) -> "FilterState":
        """Multiply the stored ``q`` itself; exact only for powers of two."""
        return FilterState(self.q * factor, self.log_norm, self.h_hat, self.map_state)


@dataclass(frozen=True, eq=False)
class FilterResult:
    """Filter output for k = 0..T.

    ``q`` rows are unit-sum unnormalized vectors; the true unnormalized
    vector at step k is ``q[k] * exp(log_norm[k])``.  ``step_log_scale[k]``
    is the log of the mass removed at step k (``log_norm`` is its cumsum);
    it is kept separately because differencing the cumsum loses digits.
    """

    q: np.ndarray
    log_norm: np.ndarray
    h_hat: np.ndarray
    map_state: np.ndarray
    step_log_scale: np.ndarray | None = None

    def step_scales(self) -> np.ndarray:
        if self.step_log_scale is not None:
            return self.step_log_scale
        return np.diff(self.log_norm, prepend=0.0)

    @property
    def posteriors(self) -> np.ndarray:
        return self.q / self.q.sum(axis=1, keepdims=True)

    @property
    def horizon(self) -> int:
        return self.q.shape[0] - 1

    def state(self, k: int) -> FilterState:
        return FilterState(self.q[k].copy(), float(self.log_norm[k]),
                           int(self.h_hat[k]), int(self.map_state[k]))

    def log_likelihood(self, y) -> float:
        """log density of y_0..y_T (bayes0 initialization)."""
        y = np.asarray(y, dtype=float)
        return float(self.log_norm[-1] - 0.5 * np.sum(y * y) - 0.5 * y.size * np.log(2 * np.pi))


def b_matrix(obs: ObservationModel, y: float) -> np.ndarray:
    return np.diag([gamma(obs, j, y) for j in range(obs.n_states)])


def _normalize_weighted(a: np.ndarray, lg: np.ndarray) -> tuple[np.ndarray, float]:
    """(a * exp(lg)) normalized to unit sum, and the log of the removed mass."""
    m = lg.max()
    w = a * np.exp(lg - m)
    s = w.sum()
    if s > 1e-290 and np.isfinite(s):
        return w / s, float(m + np.log(s))
    mask = a > 0
    lw = np.full(a.shape, -np.inf)
    lw[mask] = np.log(a[mask]) + lg[mask]
    top = lw.max()
    w = np.exp(lw - top)
    s = w.sum()
    return w / s, float(top + np.log(s))


def initial_state(model: SemiMarkovModel, obs: ObservationModel, y0: float,
                  init: str = "bayes0") -> FilterState:
    """q_0 = B(y_0) p_0 (``bayes0``) or q_0 = p_0 (``prior``); h_hat_0 = 1."""
    if init == "bayes0":
        q, log_norm = _normalize_weighted(np.asarray(model.p0, dtype=float), obs.log_gamma(y0))
    elif init == "prior":
        q, log_norm = np.array(model.p0, dtype=float), 0.0
    else:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    return FilterState(q, log_norm, 1, int(np.argmax(q)))


def filter_step(state: FilterState, model: SemiMarkovModel, obs: ObservationModel,
                y_next: float, backend: str | None = None) -> FilterState:
    """One step q' = B(y') A(h_hat) q, plus the MAP sojourn-clock update.

    The incoming ``q`` may carry any positive scale; it is moved into
    ``log_norm`` before the step.
    """
    s0 = state.q.sum()
    loggam = np.vstack([np.zeros(model.n_states), obs.log_gamma(y_next)])
    q, ls, hh, mp = kernels.forward_filter(
        model.hazard_table(), model.kernel.p, model.supports, loggam,
        state.q / s0, state.h_hat, state.map_state, backend=backend)
    return FilterState(q[1], state.log_norm + float(np.log(s0)) + float(ls[1]),
                       int(hh[1]), int(mp[1]))


def run_filter(model: SemiMarkovModel, obs: ObservationModel, y, init: str = "bayes0",
               backend: str | None = None) -> FilterResult:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("observation sequence must be a non-empty 1-d array")
    if obs.n_states != model.n_states:
        raise ValueError("observation model and chain disagree on the state count")
    first = initial_state(model, obs, y[0], init)
    loggam = obs.log_gamma(y)
    q, ls, hh, mp = kernels.forward_filter(
        model.hazard_table(), model.kernel.p, model.supports, loggam,
        first.q, first.h_hat, first.map_state, backend=backend)
    ls[0] = first.log_norm
    return FilterResult(q, np.cumsum(ls), hh, mp, ls)
