"""Closed-form results for the dark-boundary populations.

These serve as independent oracles for the numerical steady state: the
boundary recursion, its Gaussian continuum limit for ``0 < w < gamma``, and
the exact small-pump constants at ``gamma = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParams
from .model import ModelParams, state_count
from .steady import Distribution

__all__ = [
    "BoundaryDistribution",
    "GaussianLimit",
    "boundary_rates",
    "boundary_recursion",
    "gaussian_limit",
    "ratio_table",
    "finite_n_ratio",
    "small_w_populations",
]


def boundary_rates(params: ModelParams):
    """Effective hop rates along the boundary, as arrays over J = 0..N/2.

    Returns ``(down, up)``: ``down[J]`` is the repump rate (J,-J) -> (J-1,-J+1)
    and ``up[J]`` the repump rate to (J+1,-J+1) plus the individual decay rate
    (J,-J) -> (J+1,-J-1). Interior states reached by the repump relax to the
    boundary through collective decay.
    """
    N, w, gamma = params.N, params.w, params.gamma
    J = np.arange(N // 2 + 1, dtype=np.float64)
    down = np.zeros_like(J)
    j = J[1:]
    down[1:] = w * (N + 2 * j + 2) * (2 * j) * (2 * j - 1) / (4 * j * (2 * j + 1))
    up = w * (N - 2 * J) * 2 / (4 * (J + 1) * (2 * J + 1)) + gamma * (N - 2 * J) / 2
    return down, up


@dataclass(frozen=True, eq=False)
class BoundaryDistribution:
    """Populations ``P[J]`` of the dark states (J, -J)."""

    params: ModelParams
    P: np.ndarray = field(repr=False)

    @property
    def mean(self) -> float:
        J = np.arange(self.P.size)
        return float(J @ self.P)

    @property
    def variance(self) -> float:
        J = np.arange(self.P.size)
        return float((J - self.mean) ** 2 @ self.P)

    def to_distribution(self) -> Distribution:
        """Embed into the full (J, M) space, zero off the boundary."""
        w = np.zeros(state_count(self.params))
        J = np.arange(self.P.size)
        w[J * J] = self.P
        return Distribution(self.params, w)


def boundary_recursion(params: ModelParams) -> BoundaryDistribution:
    """Stationary populations of the one-dimensional boundary chain.

    ``P[J] = P[0] * prod_{k=1..J} up[k-1] / down[k]``, accumulated in log space.
    Meaningful where the population stays on the boundary (``w < gamma`` or
    ``N w << 1``).
    """
    if params.w <= 0:
        raise InvalidParams("boundary recursion needs w > 0")
    down, up = boundary_rates(params)
    log_ratio = np.log(up[:-1]) - np.log(down[1:])
    log_p = np.concatenate([[0.0], np.cumsum(log_ratio)])
    log_p -= logsumexp(log_p)
    return BoundaryDistribution(params, np.exp(log_p))


@dataclass(frozen=True)
class GaussianLimit:
    """Continuum Gaussian for J on the boundary, valid for ``0 < w < gamma`` and large N."""

    mu: float
    sigma2: float
    note: str = "continuum limit, valid for 0 < w < gamma and N >> 1"


def gaussian_limit(params: ModelParams) -> GaussianLimit:
    N, w, g = params.N, params.w, params.gamma
    if not 0 < w < g:
        raise InvalidParams(f"Gaussian limit needs 0 < w < gamma, got w={w}, gamma={g}")
    return GaussianLimit(mu=N / 2 * (g - w) / (g + w), sigma2=N * g * w / (g + w) ** 2)


def ratio_table(J: int) -> Fraction:
    """Large-N ratio ``(2J+1) / (J (2J-1)**2)`` of successive boundary populations at gamma = 0."""
    J = int(J)
    if J < 1:
        raise InvalidParams(f"J must be >= 1, got {J}")
    return Fraction(2 * J + 1, J * (2 * J - 1) ** 2)


def finite_n_ratio(N: int, J: int) -> Fraction:
    """Exact ratio ``up[J-1] / down[J]`` at gamma = 0 for finite N."""
    N, J = int(N), int(J)
    if not 1 <= J <= N // 2:
        raise InvalidParams(f"J must lie in [1, {N // 2}], got {J}")
    return Fraction(N - 2 * J + 2, N + 2 * J + 2) * ratio_table(J)


def small_w_populations() -> tuple[Fraction, Fraction, Fraction]:
    """``(P0, P1, P2)`` in the gamma = 0, N w << 1, N -> oo limit, truncated at J <= 2.

    The neglected ``P3 = 7 P2 / 75`` is about 0.016.
    """
    r1, r2 = ratio_table(1), ratio_table(2)
    p0 = 1 / (1 + r1 * (1 + r2))
    p1 = r1 * p0
    return p0, p1, r2 * p1
