"""Sample paths of the semi-Markov chain and noisy observations of them.

Randomness comes from numpy's PCG64 ``Generator``.  A seed may be an int
or a ``numpy.random.SeedSequence``; independent streams for parallel paths
are obtained with :func:`spawn_seeds`, which uses ``SeedSequence.spawn``.
Within one path the draws are consumed in a fixed order: one uniform for
X_0, then T exit uniforms, then T arrival uniforms.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .model import ObservationModel, SemiMarkovModel, transition_matrix


@dataclass(frozen=True, eq=False)
class PathRecord:
    states: np.ndarray
    sojourn_clock: np.ndarray
    jump_times: np.ndarray
    observations: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.states.size - 1

    def state_clocks(self, n_states: int) -> np.ndarray:
        """h^i_k for every state: the clock where X_k = e_i, else 0. Shape (T+1, N)."""
        out = np.zeros((self.states.size, n_states), dtype=np.int64)
        out[np.arange(self.states.size), self.states] = self.sojourn_clock
        return out


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n)


def occupation_clock(states) -> np.ndarray:
    """h_0 = 1, h_k = 1 + [X_k == X_{k-1}] h_{k-1}."""
    states = np.asarray(states)
    if states.size == 0:
        raise ValueError("state sequence must be non-empty")
    h = np.ones(states.size, dtype=np.int64)
    for k in range(1, states.size):
        if states[k] == states[k - 1]:
            h[k] = h[k - 1] + 1
    return h


def jump_times(states) -> np.ndarray:
    states = np.asarray(states)
    return np.flatnonzero(states[1:] != states[:-1]) + 1


def _inverse_cdf(cum: np.ndarray, u: float) -> int:
    # first index whose cumulative mass exceeds u; lowest index on ties
    j = int(np.searchsorted(cum, u, side="right"))
    if j >= cum.size:
        j = int(np.flatnonzero(np.diff(cum, prepend=0.0) > 0)[-1])
    return j


def simulate_path(model: SemiMarkovModel, horizon: int, rng_seed,
                  backend: str | None = None) -> PathRecord:
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    rng = np.random.default_rng(rng_seed)
    x0 = _inverse_cdf(np.cumsum(model.p0), rng.random())
    u_exit = rng.random(horizon)
    u_jump = rng.random(horizon)
    states, clock = kernels.simulate_path(
        model.hazard_table(), np.cumsum(model.kernel.p, axis=0), model.supports,
        x0, u_exit, u_jump, backend=backend)
    return PathRecord(states, clock, jump_times(states))


def observe_path(path: PathRecord, obs: ObservationModel, rng_seed) -> np.ndarray:
    """y_k = c[X_k] + d[X_k] w_k with w_k i.i.d. N(0, 1)."""
    if path.states.size == 0:
        raise ValueError("path must be non-empty")
    w = np.random.default_rng(rng_seed).standard_normal(path.states.size)
    return obs.c[path.states] + obs.d[path.states] * w


def simulate(model: SemiMarkovModel, obs: ObservationModel | None, horizon: int, seed,
             backend: str | None = None) -> PathRecord:
    """Path plus observations, from two streams spawned off ``seed``."""
    path_seed, obs_seed = spawn_seeds(seed, 2)
    path = simulate_path(model, horizon, path_seed, backend=backend)
    if obs is None:
        return path
    return replace(path, observations=observe_path(path, obs, obs_seed))


def one_step_draws(model: SemiMarkovModel, state: int, sojourn: int, n_samples: int,
                   rng_seed) -> np.ndarray:
    """Next-state indices of ``n_samples`` independent steps from (state, sojourn)."""
    if not 1 <= sojourn <= model.sojourns[state].support:
        raise ValueError("sojourn must lie in 1..support of the state's law")
    rng = np.random.default_rng(rng_seed)
    haz = model.sojourns[state].exit_probability(sojourn)
    u_exit = rng.random(n_samples)
    u_jump = rng.random(n_samples)
    cum = np.cumsum(model.kernel.p[:, state])
    arrive = np.searchsorted(cum, u_jump, side="right")
    last = int(np.flatnonzero(np.diff(cum, prepend=0.0) > 0)[-1])
    arrive = np.minimum(arrive, last)
    return np.where(u_exit < haz, arrive, state)


def martingale_diagnostic(model: SemiMarkovModel, state: int, sojourn: int, n_samples: int,
                          rng_seed) -> np.ndarray:
    """Average of X_{k+1} - A(r) e_i over one-step draws from (e_i, r)."""
    nxt = one_step_draws(model, state, sojourn, n_samples, rng_seed)
    freq = np.bincount(nxt, minlength=model.n_states) / n_samples
    return freq - transition_matrix(model, sojourn)[:, state]
