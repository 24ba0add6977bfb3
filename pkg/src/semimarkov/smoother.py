"""Fixed-interval smoothing on top of the forward filter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .filter import FilterResult, run_filter
from .model import ObservationModel, SemiMarkovModel


@dataclass(frozen=True, eq=False)
class SmootherPass:
    """``v[k]`` is the backward vector at k, rescaled; ``v[T]`` is all ones.

    The unscaled vector is ``v[k] * exp(log_scale[k])``.
    """

    v: np.ndarray
    log_scale: np.ndarray
    smoothed: np.ndarray


def backward_pass(model: SemiMarkovModel, obs: ObservationModel, y, h_hat_seq,
                  backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """v_k = A(h_hat_k)' B(y_{k+1}) v_{k+1}, v_T = 1.

    ``h_hat_seq`` is the forward filter's sojourn estimate, used unchanged.
    Returns the rescaled vectors and the cumulative log scale (0 at T).
    """
    y = np.asarray(y, dtype=float)
    h_hat_seq = np.asarray(h_hat_seq)
    if h_hat_seq.shape != y.shape:
        raise ValueError("h_hat_seq must align with y")
    v, ls = kernels.backward_pass(model.hazard_table(), model.kernel.p,
                                  obs.log_gamma(y), h_hat_seq, backend=backend)
    return v, np.cumsum(ls[::-1])[::-1]


def smooth(q_seq, v_seq) -> np.ndarray:
    """Normalized q_k * v_k for every k.

    When the filter and backward vectors concentrate on different states the
    plain product can underflow; those rows are redone in log space.
    """
    q_seq = np.asarray(q_seq, dtype=float)
    v_seq = np.asarray(v_seq, dtype=float)
    prod = q_seq * v_seq
    total = prod.sum(axis=1, keepdims=True)
    low = ~(total[:, 0] > 1e-290)
    if low.any():
        with np.errstate(divide="ignore"):
            lp = np.log(q_seq[low]) + np.log(v_seq[low])
        w = np.exp(lp - lp.max(axis=1, keepdims=True))
        prod[low] = w
        total[low] = w.sum(axis=1, keepdims=True)
    return prod / total


def run_smoother(model: SemiMarkovModel, obs: ObservationModel, y, init: str = "bayes0",
                 filt: FilterResult | None = None,
                 backend: str | None = None) -> tuple[FilterResult, SmootherPass]:
    if filt is None:
        filt = run_filter(model, obs, y, init=init, backend=backend)
    v, ls = backward_pass(model, obs, y, filt.h_hat, backend=backend)
    return filt, SmootherPass(v, ls, smooth(filt.q, v))
