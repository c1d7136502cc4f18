"""Time evolution of population vectors, observables and the intensity correlation g2.

Propagation uses uniformization: with ``L`` slightly above the largest exit
rate, ``P = I + Q / L`` is a column-stochastic matrix and

    exp(Q t) v = sum_k Poisson(k; L t) P^k v.

The series is truncated where the Poisson tail drops below ``poisson_tail``
and the kept weights are rescaled to sum to one, so total weight is conserved
exactly (up to roundoff) and every term is nonnegative. Long intervals are cut
into steps with ``L dt <= max_step``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.stats import poisson

from .errors import DarkState, InvalidParams, NotConverged
from .model import ModelParams, levels
from .rates import Generator
from .steady import NEGATIVE_TOL, Distribution

__all__ = [
    "PropagationSettings",
    "Propagator",
    "ObservableSet",
    "evolve",
    "observables",
    "emission_factor",
    "jump_map",
    "g2",
    "g2_zero",
    "relaxation_time",
]

MAX_POISSON_TERMS = 100_000
DENSE_MAX_STATES = 4096


@dataclass(frozen=True)
class PropagationSettings:
    method: str = "uniformization"
    poisson_tail: float = 1e-12
    max_step: float = 50.0
    rate_factor: float = 1.01

    def __post_init__(self):
        if self.method not in ("uniformization", "dense"):
            raise ValueError(f"unknown propagation method {self.method!r}")
        if not 0 < self.poisson_tail <= 1e-6:
            raise ValueError("poisson_tail must lie in (0, 1e-6]")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.rate_factor >= 1:
            raise ValueError("rate_factor must be >= 1")


@lru_cache(maxsize=64)
def _poisson_weights(mu: float, tail: float) -> np.ndarray:
    if mu == 0:
        return np.ones(1)
    K = int(poisson.isf(tail, mu))
    while poisson.sf(K, mu) > tail:
        K += 1
    if K > MAX_POISSON_TERMS:
        raise NotConverged(f"Poisson truncation needs {K} terms for mean {mu:g}")
    w = poisson.pmf(np.arange(K + 1), mu)
    return w / w.sum()


class Propagator:
    """Reusable ``exp(Q t)`` action for one generator."""

    def __init__(self, gen: Generator, settings: PropagationSettings | None = None):
        self.gen = gen
        self.settings = settings or PropagationSettings()
        self.rate = self.settings.rate_factor * gen.max_exit_rate
        n = gen.dimension
        if self.settings.method == "dense":
            if n > DENSE_MAX_STATES:
                raise InvalidParams(f"dense propagation limited to {DENSE_MAX_STATES} states, got {n}")
            self._Qd = gen.Q.toarray()
        elif self.rate > 0:
            self._P = (sp.identity(n, format="csr") + gen.Q.tocsr() / self.rate).tocsr()

    def apply(self, v: np.ndarray, tau: float) -> np.ndarray:
        if tau < 0 or not math.isfinite(tau):
            raise InvalidParams(f"tau must be finite and >= 0, got {tau}")
        v = np.asarray(v, dtype=np.float64)
        if tau == 0 or self.rate == 0:
            return v.copy()
        if self.settings.method == "dense":
            return scipy.linalg.expm(self._Qd * tau) @ v
        n_steps = max(1, math.ceil(self.rate * tau / self.settings.max_step))
        dt = tau / n_steps
        weights = _poisson_weights(self.rate * dt, self.settings.poisson_tail)
        P = self._P
        for _ in range(n_steps):
            term = v
            acc = weights[0] * term
            for wk in weights[1:]:
                term = P @ term
                acc += wk * term
            v = acc
        return v


def _clean(x: np.ndarray) -> np.ndarray:
    scale = max(np.abs(x).max(), 1.0) if x.size else 1.0
    low = x.min() if x.size else 0.0
    if low < -NEGATIVE_TOL * scale:
        raise NotConverged(f"propagation produced a negative weight {low:.3e}")
    return np.where(x < 0, 0.0, x)


def evolve(gen: Generator, dist: Distribution, tau: float, settings: PropagationSettings | None = None) -> Distribution:
    """``exp(Q tau) @ dist``; linear, so unnormalized input is allowed."""
    if dist.weights.shape != (gen.dimension,):
        raise InvalidParams("distribution does not match the generator dimension")
    out = _clean(Propagator(gen, settings).apply(dist.weights, tau))
    return Distribution(dist.params, out, normalized=dist.normalized)


def emission_factor(params: ModelParams) -> np.ndarray:
    """Collective emission rate ``(J+M)(J-M+1)`` of every state."""
    J, M = levels(params)
    return ((J + M) * (J - M + 1)).astype(np.float64)


@dataclass(frozen=True)
class ObservableSet:
    """Expectation values of a (possibly unnormalized) weight vector.

    ``intensity``, ``inversion`` and ``boundary_mass`` are plain weighted sums;
    ``mean_J``, ``mean_M`` and ``var_J`` are moments of the normalized weights.
    """

    intensity: float
    inversion: float
    mean_J: float
    mean_M: float
    var_J: float
    boundary_mass: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def observables(dist: Distribution) -> ObservableSet:
    p = dist.weights
    J, M = levels(dist.params)
    total = p.sum()
    f = emission_factor(dist.params)
    mean_J = float(J @ p / total) if total > 0 else 0.0
    return ObservableSet(
        intensity=float(f @ p),
        inversion=float(M @ p),
        mean_J=mean_J,
        mean_M=float(M @ p / total) if total > 0 else 0.0,
        var_J=float((J - mean_J) ** 2 @ p / total) if total > 0 else 0.0,
        boundary_mass=float(p[M == -J].sum()),
    )


def jump_map(dist: Distribution) -> Distribution:
    """Weight after one collective emission: ``(J, M) -> (J, M-1)`` scaled by ``f(J, M)``."""
    f = emission_factor(dist.params)
    out = np.zeros_like(dist.weights)
    src = np.flatnonzero(f > 0)
    # (J, M-1) sits one index below (J, M)
    out[src - 1] = f[src] * dist.weights[src]
    return Distribution(dist.params, out, normalized=False)


def g2_zero(steady: Distribution) -> float:
    """Zero-delay correlation ``sum P f(J,M) f(J,M-1) / I**2`` evaluated directly."""
    J, M = levels(steady.params)
    f_here = ((J + M) * (J - M + 1)).astype(np.float64)
    f_below = ((J + M - 1) * (J - M + 2)).astype(np.float64)
    f_below[f_here == 0] = 0.0
    intensity = f_here @ steady.weights
    if intensity <= 0:
        raise DarkState("intensity vanishes, g2 is undefined")
    return float((steady.weights * f_here * f_below).sum() / intensity**2)


def g2(gen: Generator, steady: Distribution, taus, settings: PropagationSettings | None = None) -> np.ndarray:
    """Normalized intensity correlation at the delays ``taus``.

    The auxiliary vector ``jump_map(steady)`` is propagated once through the
    sorted delays; the result follows the input order.
    """
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or (taus.size and (taus.min() < 0 or not np.all(np.isfinite(taus)))):
        raise InvalidParams("taus must be a 1-d array of finite, nonnegative delays")
    f = emission_factor(steady.params)
    intensity = float(f @ steady.weights)
    if intensity <= 0:
        raise DarkState("intensity vanishes, g2 is undefined")
    prop = Propagator(gen, settings)
    order = np.argsort(taus, kind="stable")
    out = np.empty_like(taus)
    v = jump_map(steady).weights
    t_prev = 0.0
    for k in order:
        v = prop.apply(v, taus[k] - t_prev)
        t_prev = taus[k]
        out[k] = (f @ v) / intensity**2
    return out


def relaxation_time(params: ModelParams) -> float:
    """Ten times the inverse of the smallest positive single-atom rate."""
    rates = [r for r in (params.w, params.gamma, 1.0) if r > 0]
    return 10.0 / min(rates)
