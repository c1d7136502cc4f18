"""Transition rates of the collective-spin Markov chain and its generator.

The generator ``Q`` acts on column vectors of populations, ``dP/dt = Q @ P``,
so ``Q[to, from]`` is the rate of the jump ``from -> to`` and every column sums
to zero.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import Level, ModelParams, index_of, levels, state_count

__all__ = [
    "Channel",
    "Generator",
    "channel_rate",
    "local_rates",
    "build_generator",
    "export_triplets",
]


class Channel(enum.IntEnum):
    """Jump channels with their (dJ, dM) displacement."""

    COLLECTIVE_DECAY = 0
    REPUMP_SAME_J = 1
    REPUMP_J_MINUS = 2
    REPUMP_J_PLUS = 3
    DECAY_SAME_J = 4
    DECAY_J_MINUS = 5
    DECAY_J_PLUS = 6

    @property
    def shift(self) -> tuple[int, int]:
        return _SHIFTS[self]

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Channel":
        key = label.strip().lower().replace("-", "_")
        if key == "collective":
            return cls.COLLECTIVE_DECAY
        return cls[key.upper()]


_SHIFTS = {
    Channel.COLLECTIVE_DECAY: (0, -1),
    Channel.REPUMP_SAME_J: (0, 1),
    Channel.REPUMP_J_MINUS: (-1, 1),
    Channel.REPUMP_J_PLUS: (1, 1),
    Channel.DECAY_SAME_J: (0, -1),
    Channel.DECAY_J_MINUS: (-1, -1),
    Channel.DECAY_J_PLUS: (1, -1),
}


def _terms(N, J, M):
    """(prefactor name, numerator, denominator) for every channel.

    Works on Python ints and on numpy arrays alike.
    """
    return {
        Channel.COLLECTIVE_DECAY: (None, (J + M) * (J - M + 1), 1),
        Channel.REPUMP_SAME_J: ("w", (N + 2) * (J - M) * (J + M + 1), 4 * J * (J + 1)),
        Channel.REPUMP_J_MINUS: ("w", (N + 2 * J + 2) * (J - M) * (J - M - 1), 4 * J * (2 * J + 1)),
        Channel.REPUMP_J_PLUS: ("w", (N - 2 * J) * (J + M + 1) * (J + M + 2), 4 * (J + 1) * (2 * J + 1)),
        Channel.DECAY_SAME_J: ("gamma", (N + 2) * (J + M) * (J - M + 1), 4 * J * (J + 1)),
        Channel.DECAY_J_MINUS: ("gamma", (N + 2 * J + 2) * (J + M) * (J + M - 1), 4 * J * (2 * J + 1)),
        Channel.DECAY_J_PLUS: ("gamma", (N - 2 * J) * (J - M + 1) * (J - M + 2), 4 * (J + 1) * (2 * J + 1)),
    }


def _prefactor(params: ModelParams, name) -> float:
    return 1.0 if name is None else getattr(params, name)


def channel_rate(params: ModelParams, level, channel: Channel) -> float:
    """Rate of ``channel`` out of ``level``.

    Returns exactly 0 when an angular-momentum factor of the numerator
    vanishes, which covers J = 0 and every jump that would leave the
    triangle.
    """
    J, M = int(level[0]), int(level[1])
    index_of(params, (J, M))
    name, num, den = _terms(params.N, J, M)[Channel(channel)]
    if num == 0:
        return 0.0
    return _prefactor(params, name) * num / den


def local_rates(params: ModelParams, level) -> list[tuple[Channel, Level, float]]:
    """Strictly positive jump channels out of ``level`` with their targets.

    Matrix-free counterpart of :func:`build_generator`; the collective and the
    individual same-J decay are reported separately here.
    """
    J, M = int(level[0]), int(level[1])
    index_of(params, (J, M))
    out = []
    for channel, (name, num, den) in _terms(params.N, J, M).items():
        if num == 0:
            continue
        rate = _prefactor(params, name) * num / den
        if rate > 0:
            dJ, dM = _SHIFTS[channel]
            out.append((channel, Level(J + dJ, M + dM), rate))
    return out


def _all_channel_rates(params: ModelParams):
    """Yield ``(channel, source_index, target_index, rate)`` arrays over all states."""
    J, M = levels(params)
    src = np.arange(J.size)
    Jf = J.astype(np.float64)
    Mf = M.astype(np.float64)
    for channel, (name, num, den) in _terms(float(params.N), Jf, Mf).items():
        num = np.broadcast_to(np.asarray(num, dtype=np.float64), Jf.shape)
        den = np.broadcast_to(np.asarray(den, dtype=np.float64), Jf.shape)
        mask = num != 0
        rate = np.zeros_like(Jf)
        np.divide(num, den, out=rate, where=mask)
        rate *= _prefactor(params, name)
        keep = rate > 0
        dJ, dM = _SHIFTS[channel]
        Jt = J[keep] + dJ
        Mt = M[keep] + dM
        yield channel, src[keep], Jt * Jt + Jt + Mt, rate[keep]


@dataclass(frozen=True, eq=False)
class Generator:
    """Sparse rate matrix of the chain.

    Attributes
    ----------
    params : ModelParams
    Q : scipy.sparse.csc_matrix
        Full generator including the diagonal, ``Q[to, from]``.
    """

    params: ModelParams
    Q: sp.csc_matrix = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.Q.diagonal()

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.Q.diagonal()

    @property
    def max_exit_rate(self) -> float:
        return float(self.exit_rates.max())

    def off_diagonal(self) -> sp.coo_matrix:
        """Off-diagonal part as COO, entries ``(to, from) -> rate``."""
        off = self.Q.tocoo()
        keep = off.row != off.col
        return sp.coo_matrix(
            (off.data[keep], (off.row[keep], off.col[keep])), shape=off.shape
        )

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(source, target, rate)`` for every positive off-diagonal entry."""
        off = self.off_diagonal()
        order = np.lexsort((off.row, off.col))
        return off.col[order], off.row[order], off.data[order]


def build_generator(params: ModelParams) -> Generator:
    """Assemble all channel rates into the sparse generator."""
    n = state_count(params)
    rows, cols, data = [], [], []
    for _, src, dst, rate in _all_channel_rates(params):
        rows.append(dst)
        cols.append(src)
        data.append(rate)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    off = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsc()
    off.sum_duplicates()
    exit_rates = np.asarray(off.sum(axis=0)).ravel()
    Q = (off - sp.diags(exit_rates, format="csc")).tocsc()
    Q.sort_indices()
    return Generator(params, Q)


def export_triplets(gen: Generator, path) -> Path:
    """Write every nonzero of ``Q`` as ``row col rate`` lines (row = target)."""
    path = Path(path)
    coo = gen.Q.tocoo()
    order = np.lexsort((coo.row, coo.col))
    with path.open("w") as fh:
        p = gen.params
        fh.write(f"# N={p.N} w={p.w!r} gamma={p.gamma!r} dim={gen.dimension}\n")
        fh.write("# row col rate\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
    return path
