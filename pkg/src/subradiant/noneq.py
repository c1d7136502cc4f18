"""Net probability currents, entropy production and detailed-balance checks.

For an unordered neighbor pair (a, b) with a < b in linear index, the net
current is ``W = P[a] r(a->b) - P[b] r(b->a)``; the forward and backward
fluxes are the two products. Sums over ordered pairs with a factor 1/2 are
evaluated as single sums over these unordered pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DivergentEntropy, InvalidParams
from .model import Level, ModelParams, level_of, levels
from .rates import Generator
from .steady import Distribution

__all__ = [
    "CurrentField",
    "EntropyReport",
    "DetailedBalanceResult",
    "neighbor_pairs",
    "currents",
    "entropy_rates",
    "detailed_balance_check",
    "restrict_to_boundary",
    "plaquette_circulation",
    "max_circulation",
    "FLUX_FLOOR",
]

FLUX_FLOOR = 1e-300


def neighbor_pairs(gen: Generator):
    """Unordered neighbor pairs ``a < b`` with the rates in both directions.

    Returns ``(a, b, r_ab, r_ba)`` where ``r_ab`` is the total rate a -> b.
    """
    off = gen.off_diagonal()
    # R[from, to]
    R = sp.csr_matrix((off.data, (off.col, off.row)), shape=off.shape)
    pattern = sp.triu(R + R.T, k=1).tocoo()
    order = np.lexsort((pattern.col, pattern.row))
    a = pattern.row[order].astype(np.int64)
    b = pattern.col[order].astype(np.int64)
    r_ab = np.asarray(R[a, b]).ravel()
    r_ba = np.asarray(R[b, a]).ravel()
    return a, b, r_ab, r_ba


def _weights(gen: Generator, dist) -> np.ndarray:
    p = dist.weights if isinstance(dist, Distribution) else np.asarray(dist, dtype=float)
    if p.shape != (gen.dimension,):
        raise InvalidParams(f"distribution of shape {p.shape} does not match dimension {gen.dimension}")
    return p


@dataclass(frozen=True, eq=False)
class CurrentField:
    """Net currents on every neighbor pair, oriented toward the larger index."""

    params: ModelParams
    source: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)

    def __len__(self):
        return self.W.size

    @property
    def edges(self) -> list[tuple[Level, Level, float]]:
        p = self.params
        return [
            (level_of(p, a), level_of(p, b), float(w))
            for a, b, w in zip(self.source, self.target, self.W)
        ]

    def current(self, a: int, b: int) -> float:
        """Signed net current from state index ``a`` to ``b`` (0 if not neighbors)."""
        lo, hi, sign = (a, b, 1.0) if a < b else (b, a, -1.0)
        hit = np.flatnonzero((self.source == lo) & (self.target == hi))
        return sign * float(self.W[hit[0]]) if hit.size else 0.0

    def divergence(self) -> np.ndarray:
        """Net outflow at every node; zero in a stationary state."""
        n = self.params.n_states
        out = np.zeros(n)
        np.add.at(out, self.source, self.W)
        np.add.at(out, self.target, -self.W)
        return out

    def as_matrix(self) -> sp.csr_matrix:
        """Antisymmetric matrix ``X[a, b]`` = net current a -> b."""
        n = self.params.n_states
        rows = np.concatenate([self.source, self.target])
        cols = np.concatenate([self.target, self.source])
        data = np.concatenate([self.W, -self.W])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def currents(gen: Generator, dist) -> CurrentField:
    """Net probability current on every neighbor pair."""
    p = _weights(gen, dist)
    a, b, r_ab, r_ba = neighbor_pairs(gen)
    W = p[a] * r_ab - p[b] * r_ba
    return CurrentField(gen.params, a, b, W)


@dataclass(frozen=True)
class EntropyReport:
    """Entropy rates of the chain, in units of the collective rate.

    ``n_edges_floored`` counts pairs where exactly one flux fell below the
    floor and was raised to it inside the logarithm.
    """

    s_tot: float
    s_e: float
    s_i: float
    N: int
    n_edges_skipped: int = 0
    n_edges_floored: int = 0

    @property
    def s_i_per_atom(self) -> float:
        return self.s_i / self.N


def entropy_rates(gen: Generator, dist) -> EntropyReport:
    """Total, external and internal entropy rates of ``dist``.

    Pairs whose forward and backward fluxes are both below ``FLUX_FLOOR`` are
    skipped. A pair with positive flux against an exactly zero reverse rate
    makes the internal production infinite and raises
    :class:`DivergentEntropy`.
    """
    p = _weights(gen, dist)
    a, b, r_ab, r_ba = neighbor_pairs(gen)
    fwd = p[a] * r_ab
    bwd = p[b] * r_ba

    one_way = ((r_ba == 0) & (fwd > 0)) | ((r_ab == 0) & (bwd > 0))
    if one_way.any():
        k = int(np.flatnonzero(one_way)[0])
        raise DivergentEntropy(
            f"one-way edge {level_of(gen.params, a[k])} <-> {level_of(gen.params, b[k])} "
            f"carries flux (w={gen.params.w}, gamma={gen.params.gamma})"
        )

    live = (fwd >= FLUX_FLOOR) | (bwd >= FLUX_FLOOR)
    n_skipped = int((~live).sum())
    fwd, bwd, r_ab, r_ba = fwd[live], bwd[live], r_ab[live], r_ba[live]
    floored = (fwd < FLUX_FLOOR) | (bwd < FLUX_FLOOR)
    log_fwd = np.log(np.maximum(fwd, FLUX_FLOOR))
    log_bwd = np.log(np.maximum(bwd, FLUX_FLOOR))
    log_r_ab = np.log(r_ab)
    log_r_ba = np.log(r_ba)
    W = fwd - bwd

    s_i = float(np.sum(W * (log_fwd - log_bwd)))
    s_e = float(np.sum(W * (log_r_ba - log_r_ab)))
    # ln(P_a / P_b), consistent with any flooring applied above
    s_tot = float(np.sum(W * ((log_fwd - log_r_ab) - (log_bwd - log_r_ba))))
    return EntropyReport(
        s_tot=s_tot,
        s_e=s_e,
        s_i=s_i,
        N=gen.params.N,
        n_edges_skipped=n_skipped,
        n_edges_floored=int(floored.sum()),
    )


@dataclass(frozen=True)
class DetailedBalanceResult:
    """Outcome of :func:`detailed_balance_check`.

    ``weighted_violation`` is the flux-weighted aggregate
    ``sum |W| / sum (forward + backward)``; unlike the per-pair maximum it is
    not dominated by nearly empty pairs. ``n_unresolved`` counts pairs whose
    total flux lies below the resolution threshold and were not assessed.
    """

    passed: bool
    worst_violation: float
    worst_edge: tuple[Level, Level] | None
    weighted_violation: float = 0.0
    n_unresolved: int = 0

    def __bool__(self):
        return self.passed


def detailed_balance_check(
    gen: Generator, dist, tol: float = 1e-9, resolution: float = 1e-12
) -> DetailedBalanceResult:
    """Check ``|W| / (forward + backward flux) < tol`` on every resolved pair.

    A pair is resolved when its total flux exceeds ``resolution`` times the
    largest pair flux. Below that the fluxes are at the roundoff level of a
    solution meeting the steady-state residual contract, and their ratio
    carries no information.
    """
    p = _weights(gen, dist)
    a, b, r_ab, r_ba = neighbor_pairs(gen)
    fwd = p[a] * r_ab
    bwd = p[b] * r_ba
    total = fwd + bwd
    net = np.abs(fwd - bwd)
    if not (total > 0).any():
        return DetailedBalanceResult(True, 0.0, None, 0.0, 0)
    resolved = total > resolution * total.max()
    rel = np.zeros_like(total)
    rel[resolved] = net[resolved] / total[resolved]
    k = int(np.argmax(rel))
    worst = float(rel[k])
    edge = (level_of(gen.params, a[k]), level_of(gen.params, b[k]))
    weighted = float(net.sum() / total.sum())
    n_unresolved = int(((total > 0) & ~resolved).sum())
    return DetailedBalanceResult(worst < tol, worst, edge, weighted, n_unresolved)


def restrict_to_boundary(gen: Generator) -> Generator:
    """Generator of the one-dimensional chain on the dark boundary M = -J.

    Every jump leaving the boundary is removed; jumps out of interior states
    are kept, so interior states are transient and the stationary
    distribution lives on the boundary alone.
    """
    J, M = levels(gen.params)
    on_boundary = M == -J
    off = gen.off_diagonal()
    keep = ~(on_boundary[off.col] & ~on_boundary[off.row])
    n = gen.dimension
    kept = sp.csc_matrix((off.data[keep], (off.row[keep], off.col[keep])), shape=(n, n))
    exit_rates = np.asarray(kept.sum(axis=0)).ravel()
    Q = (kept - sp.diags(exit_rates, format="csc")).tocsc()
    Q.sort_indices()
    return Generator(gen.params, Q)


# Elementary loops of unit lattice area, as step sequences (dJ, dM) from the anchor.
PLAQUETTES = {
    "up_right": ((1, 1), (0, -1), (-1, -1), (0, 1)),
    "down_right": ((1, -1), (0, 1), (-1, 1), (0, -1)),
    "wedge_right": ((1, 1), (0, -1), (0, -1), (-1, 1)),
    "wedge_left": ((-1, 1), (0, -1), (0, -1), (1, 1)),
}


def plaquette_circulation(field: CurrentField) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Loop integral of the current around every elementary plaquette.

    The jump lattice has crossing diagonal edges, so there is no single
    planar face set; every 4-cycle enclosing unit area in the (J, M) plane
    counts as a plaquette (see ``PLAQUETTES``). Returns, per shape, arrays
    ``(J, M, circulation)`` of anchor levels and the signed sum of net
    currents traversed in the listed order.
    """
    X = field.as_matrix().tocsr()
    jmax = field.params.j_max
    J0, M0 = levels(field.params)
    out = {}
    for name, steps in PLAQUETTES.items():
        corners = [(J0, M0)]
        ok = np.ones(J0.size, dtype=bool)
        for dJ, dM in steps[:-1]:
            j, m = corners[-1]
            j, m = j + dJ, m + dM
            ok &= (j >= 0) & (j <= jmax) & (np.abs(m) <= j)
            corners.append((j, m))
        idx = [(j * j + j + m)[ok] for j, m in corners]
        circ = np.zeros(int(ok.sum()))
        for k in range(4):
            circ += np.asarray(X[idx[k], idx[(k + 1) % 4]]).ravel()
        out[name] = (J0[ok], M0[ok], circ)
    return out


def max_circulation(field: CurrentField) -> float:
    """Largest absolute plaquette circulation over all shapes."""
    return max(
        (float(np.abs(c).max()) for _, _, c in plaquette_circulation(field).values() if c.size),
        default=0.0,
    )
