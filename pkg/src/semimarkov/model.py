"""Semi-Markov chain primitives: sojourn laws, jump kernel, A(k), observations.

States are indexed 0..N-1 in the Python API.  Matrices act on column
vectors, so the jump kernel and every transition matrix are
column-stochastic: entry ``[j, i]`` is the probability of moving *to* ``j``
*from* ``i``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a model or its JSON config violates a constraint.

    ``field`` names the offending config entry (e.g. ``"sojourns[1].pmf"``).
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalGuardError(ArithmeticError):
    """A numerical guard tripped (e.g. total filter mass underflowed)."""


@dataclass(frozen=True, eq=False)
class SojournLaw:
    """Probability mass of the time spent in a state, on 1..L.

    ``pmf[m - 1]`` is the probability of staying exactly ``m`` steps.
    """

    pmf: np.ndarray
    survival: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, pmf: Sequence[float], *, name: str = "pmf"):
        arr = np.array(pmf, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ModelError(name, "must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ModelError(name, "entries must be finite and >= 0")
        if abs(math.fsum(arr) - 1.0) > PROB_TOL:
            raise ModelError(name, f"must sum to 1 (got {math.fsum(arr)!r})")
        # trailing zeros carry no mass; the support ends at the last positive entry
        last = int(np.flatnonzero(arr)[-1])
        arr = arr[: last + 1]
        arr.flags.writeable = False
        # survival[k] = P(sojourn > k) for k = 0..L, summed from the tail so
        # that small survival values keep full relative precision
        tail = np.concatenate([np.cumsum(arr[::-1])[::-1], [0.0]])
        tail[0] = 1.0
        tail.flags.writeable = False
        object.__setattr__(self, "pmf", arr)
        object.__setattr__(self, "survival", tail)

    @classmethod
    def geometric(cls, rho: float, support: int) -> "SojournLaw":
        """Geometric law with exit probability ``rho``, tail folded into ``support``."""
        if not 0.0 < rho <= 1.0:
            raise ModelError("rho", "must lie in (0, 1]")
        m = np.arange(1, support + 1)
        pmf = (1.0 - rho) ** (m - 1) * rho
        pmf[-1] = (1.0 - rho) ** (support - 1)
        return cls(pmf)

    @classmethod
    def deterministic(cls, length: int) -> "SojournLaw":
        pmf = np.zeros(length)
        pmf[-1] = 1.0
        return cls(pmf)

    @property
    def support(self) -> int:
        return int(self.pmf.size)

    def cdf(self, k: int) -> float:
        """P(sojourn <= k)."""
        return 1.0 - self.survival_at(k)

    def survival_at(self, k: int) -> float:
        """P(sojourn > k)."""
        if k <= 0:
            return 1.0
        if k >= self.support:
            return 0.0
        return float(self.survival[k])

    def hazard(self, k: int) -> float:
        return hazard(self, k)

    def exit_probability(self, h: int) -> float:
        return exit_probability(self, h)

    def exit_probabilities(self, depth: int) -> np.ndarray:
        """Exit probabilities at clock readings h = 1..depth (1 past the support)."""
        out = np.ones(depth)
        # clock h has survived h - 1 steps: hazard(h - 1) = pmf(h) / P(sojourn > h - 1)
        n = min(depth, self.support)
        surv = self.survival[:n]
        with np.errstate(invalid="ignore", divide="ignore"):
            h = np.where(surv > 0, self.pmf[:n] / surv, 1.0)
        out[:n] = np.clip(h, 0.0, 1.0)
        return out

    def to_dict(self) -> dict:
        return {"pmf": [float(x) for x in self.pmf]}


def hazard(law: SojournLaw, k: int) -> float:
    """pmf(k + 1) / P(sojourn > k): chance of leaving now, having stayed ``k`` steps.

    Returns 1 once the survival is zero or ``k`` reaches the support end.
    """
    if k < 0:
        raise ValueError(f"elapsed sojourn must be >= 0, got {k}")
    if k >= law.support:
        return 1.0
    surv = law.survival[k]
    if surv <= 0.0:
        return 1.0
    return min(1.0, max(0.0, float(law.pmf[k] / surv)))


def exit_probability(law: SojournLaw, h: int) -> float:
    """Probability that a chain whose sojourn clock reads ``h`` jumps next step.

    The clock reads 1 on arrival, so ``h - 1`` steps have elapsed.
    """
    if h < 1:
        raise ValueError(f"sojourn clock must be >= 1, got {h}")
    return hazard(law, h - 1)


@dataclass(frozen=True, eq=False)
class JumpKernel:
    """Column-stochastic jump probabilities with zero diagonal."""

    p: np.ndarray

    def __init__(self, p: Sequence[Sequence[float]] | np.ndarray, *, name: str = "jump_kernel"):
        arr = np.array(p, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ModelError(name, "must be a square matrix")
        n = arr.shape[0]
        if n < 2:
            raise ModelError(name, "need at least 2 states (a jump must leave the state)")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise ModelError(name, "entries must lie in [0, 1]")
        if np.any(np.diag(arr) != 0):
            raise ModelError(name, "diagonal must be 0")
        sums = arr.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            raise ModelError(name, f"column {int(bad[0])} sums to {sums[bad[0]]!r}, expected 1")
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    def generator(self) -> np.ndarray:
        """The matrix Pi: kernel off the diagonal, -1 on it."""
        out = self.p.copy()
        np.fill_diagonal(out, -1.0)
        return out


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Scalar Gaussian observations ``y = c[x] + d[x] * w``."""

    c: np.ndarray
    d: np.ndarray

    def __init__(self, c: Sequence[float], d: Sequence[float]):
        c_arr = np.array(c, dtype=float)
        d_arr = np.array(d, dtype=float)
        if c_arr.ndim != 1 or c_arr.shape != d_arr.shape:
            raise ModelError("observation", "c and d must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(c_arr)) and np.all(np.isfinite(d_arr))):
            raise ModelError("observation", "c and d must be finite")
        if np.any(d_arr <= 0):
            raise ModelError("observation.d", "every noise scale must be > 0")
        c_arr.flags.writeable = False
        d_arr.flags.writeable = False
        object.__setattr__(self, "c", c_arr)
        object.__setattr__(self, "d", d_arr)

    @property
    def n_states(self) -> int:
        return self.c.size

    def log_gamma(self, y) -> np.ndarray:
        """Log likelihood ratios against N(0,1), shape ``y.shape + (N,)``."""
        y = np.asarray(y, dtype=float)[..., None]
        z = (y - self.c) / self.d
        return 0.5 * (y * y - z * z) - np.log(self.d)

    def to_dict(self) -> dict:
        return {"c": [float(x) for x in self.c], "d": [float(x) for x in self.d]}


def gamma(obs: ObservationModel, j: int, y: float) -> float:
    """phi((y - c_j) / d_j) / (d_j * phi(y)) with phi the N(0,1) density.

    Evaluated in log form, so it stays positive where phi(y) underflows.
    """
    z = (y - obs.c[j]) / obs.d[j]
    return math.exp(0.5 * (y * y - z * z) - math.log(obs.d[j]))


@dataclass(frozen=True, eq=False)
class SemiMarkovModel:
    kernel: JumpKernel
    sojourns: tuple[SojournLaw, ...]
    p0: np.ndarray

    def __init__(self, kernel: JumpKernel | np.ndarray, sojourns: Sequence[SojournLaw],
                 p0: Sequence[float]):
        if not isinstance(kernel, JumpKernel):
            kernel = JumpKernel(kernel)
        n = kernel.n_states
        sojourns = tuple(s if isinstance(s, SojournLaw) else SojournLaw(s) for s in sojourns)
        if len(sojourns) != n:
            raise ModelError("sojourns", f"expected {n} laws, got {len(sojourns)}")
        p0_arr = np.array(p0, dtype=float)
        if p0_arr.shape != (n,):
            raise ModelError("p0", f"expected length {n}")
        if np.any(p0_arr < 0) or abs(math.fsum(p0_arr) - 1.0) > PROB_TOL:
            raise ModelError("p0", "must be a probability vector")
        p0_arr.flags.writeable = False
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "sojourns", sojourns)
        object.__setattr__(self, "p0", p0_arr)

    @property
    def n_states(self) -> int:
        return self.kernel.n_states

    @property
    def supports(self) -> np.ndarray:
        return np.array([s.support for s in self.sojourns], dtype=np.int64)

    @property
    def max_support(self) -> int:
        return int(max(s.support for s in self.sojourns))

    def hazard_table(self, depth: int | None = None) -> np.ndarray:
        """``H[i, h]`` = exit probability of state i at clock h, for h = 0..depth.

        Column 0 is unused (filled with 1) so that clock readings index directly.
        """
        depth = self.max_support if depth is None else depth
        table = np.ones((self.n_states, depth + 1))
        for i, law in enumerate(self.sojourns):
            table[i, 1:] = law.exit_probabilities(depth)
        return table

    def transition_matrix(self, h: int) -> np.ndarray:
        return transition_matrix(self, h)


def _exit_vector(model: SemiMarkovModel, h: int) -> np.ndarray:
    return np.array([exit_probability(law, h) for law in model.sojourns])


def transition_matrix(model: SemiMarkovModel, h: int) -> np.ndarray:
    """A(h): column i is the one-step law from state i when the sojourn clock reads h.

    Diagonal 1 - exit_i(h), off-diagonal p_ji exit_i(h).
    """
    haz = _exit_vector(model, h)
    A = model.kernel.p * haz[None, :]
    A[np.diag_indices_from(A)] = 1.0 - haz
    return A


def transition_matrix_from_generator(model: SemiMarkovModel, h: int) -> np.ndarray:
    """I + Pi D(h); a second construction of A(h)."""
    return np.eye(model.n_states) + model.kernel.generator() @ np.diag(_exit_vector(model, h))


# -- JSON config ---------------------------------------------------------------

def _require(doc: Mapping[str, Any], key: str) -> Any:
    if key not in doc:
        raise ModelError(key, "missing required field")
    return doc[key]


def model_from_dict(doc: Mapping[str, Any]) -> tuple[SemiMarkovModel, ObservationModel | None]:
    """Build (model, observation model or None) from a config mapping."""
    if not isinstance(doc, Mapping):
        raise ModelError("<root>", "config must be a JSON object")
    n = _require(doc, "states")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ModelError("states", "must be a positive integer")
    try:
        kernel = JumpKernel(_require(doc, "jump_kernel"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError("jump_kernel", str(exc)) from exc
    if kernel.n_states != n:
        raise ModelError("jump_kernel", f"dimension {kernel.n_states} does not match states={n}")
    raw = _require(doc, "sojourns")
    if not isinstance(raw, list) or len(raw) != n:
        raise ModelError("sojourns", f"must be a list of {n} entries")
    laws = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, Mapping) or "pmf" not in entry:
            raise ModelError(f"sojourns[{i}]", "must be an object with a 'pmf' list")
        try:
            laws.append(SojournLaw(entry["pmf"], name=f"sojourns[{i}].pmf"))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"sojourns[{i}].pmf", str(exc)) from exc
    try:
        model = SemiMarkovModel(kernel, laws, _require(doc, "p0"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError("p0", str(exc)) from exc
    obs = None
    if doc.get("observation") is not None:
        o = doc["observation"]
        if not isinstance(o, Mapping):
            raise ModelError("observation", "must be an object with 'c' and 'd'")
        try:
            obs = ObservationModel(_require(o, "c"), _require(o, "d"))
        except ModelError:
            raise
        except (TypeError, ValueError) as exc:
            raise ModelError("observation", str(exc)) from exc
        if obs.n_states != n:
            raise ModelError("observation", f"c and d must have length {n}")
    return model, obs


def model_to_dict(model: SemiMarkovModel, obs: ObservationModel | None = None) -> dict:
    doc = {
        "states": model.n_states,
        "p0": [float(x) for x in model.p0],
        "jump_kernel": model.kernel.p.tolist(),
        "sojourns": [law.to_dict() for law in model.sojourns],
    }
    if obs is not None:
        doc["observation"] = obs.to_dict()
    return doc


def load_model(path: str | Path) -> tuple[SemiMarkovModel, ObservationModel | None]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError("<root>", f"invalid JSON: {exc}") from exc
    return model_from_dict(doc)


BUNDLED_MODELS = ("geometric2", "deterministic3", "mixed3")


def load_bundled(name: str) -> tuple[SemiMarkovModel, ObservationModel | None]:
    """Load one of the example models shipped in ``semimarkov/data/models``."""
    from importlib import resources

    if name not in BUNDLED_MODELS:
        raise KeyError(f"unknown bundled model {name!r}; choose from {BUNDLED_MODELS}")
    text = resources.files("semimarkov").joinpath("data", "models", f"{name}.json").read_text()
    return model_from_dict(json.loads(text))
