"""Physical parameters and the triangular (J, M) state space.

States are ordered J-major with M ascending inside each J block, so the dark
boundary state (J, -J) is the first entry of its block and

    index(J, M) = J**2 + J + M.

All rates and times are in units of the collective emission rate, which is
fixed to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import InvalidParams

__all__ = [
    "ModelParams",
    "Level",
    "state_count",
    "index_of",
    "level_of",
    "multiplicity",
    "levels",
]


@dataclass(frozen=True)
class ModelParams:
    """One physical instance of the repumped bad-cavity laser.

    Parameters
    ----------
    N : int
        Number of atoms, even and at least 2.
    w : float
        Individual repump rate.
    gamma : float
        Individual free-space decay rate.
    """

    N: int
    w: float
    gamma: float = 0.1

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise InvalidParams(f"N must be an integer, got {self.N!r}")
        if self.N < 2 or self.N % 2:
            raise InvalidParams(f"N must be even and >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("w", "gamma"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidParams(f"{name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)

    @property
    def j_max(self) -> int:
        return self.N // 2

    @cached_property
    def n_states(self) -> int:
        return state_count(self)

    def as_dict(self) -> dict:
        return {"N": self.N, "w": self.w, "gamma": self.gamma}


class Level(NamedTuple):
    """A collective state |J, M>."""

    J: int
    M: int


def state_count(params: ModelParams) -> int:
    """Number of (J, M) states, ``(N/2 + 1)**2``."""
    return (params.N // 2 + 1) ** 2


def _check_level(params: ModelParams, J: int, M: int) -> None:
    if not (0 <= J <= params.j_max and -J <= M <= J):
        raise InvalidParams(f"level (J={J}, M={M}) is invalid for N={params.N}")


def index_of(params: ModelParams, level) -> int:
    """Linear index of ``level`` in the flattened state space."""
    J, M = int(level[0]), int(level[1])
    _check_level(params, J, M)
    return J * J + J + M


def level_of(params: ModelParams, index: int) -> Level:
    """Inverse of :func:`index_of`."""
    index = int(index)
    if not 0 <= index < state_count(params):
        raise InvalidParams(f"index {index} out of range for N={params.N}")
    J = math.isqrt(index)
    return Level(J, index - J * J - J)


def levels(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``(J, M)`` of quantum numbers for every state, in index order."""
    jmax = params.j_max
    J = np.repeat(np.arange(jmax + 1), 2 * np.arange(jmax + 1) + 1)
    M = np.arange(J.size) - J * J - J
    return J, M


def multiplicity(N: int, J: int) -> int:
    """Degeneracy ``N! (2J+1) / ((N/2+J+1)! (N/2-J)!)`` of the J manifold.

    Evaluated in exact integer arithmetic as ``C(N, N/2-J) (2J+1) / (N/2+J+1)``.
    """
    if N < 0 or N % 2:
        raise InvalidParams(f"N must be a non-negative even integer, got {N}")
    half = N // 2
    if not 0 <= J <= half:
        raise InvalidParams(f"J={J} out of range [0, {half}]")
    num = math.comb(N, half - J) * (2 * J + 1)
    q, r = divmod(num, half + J + 1)
    assert r == 0
    return q
