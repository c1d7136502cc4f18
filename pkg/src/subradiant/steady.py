"""Stationary distribution of the generator."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidParams, NotConverged, SingularOrNonUnique
from .model import ModelParams, index_of, state_count
from .rates import Generator

__all__ = [
    "Distribution",
    "steady_state",
    "power_iteration",
    "residual",
    "NEGATIVE_TOL",
]

log = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12
RESIDUAL_TOL = 1e-12
PIVOT_WEIGHT_MIN = 1e-6


@dataclass(frozen=True, eq=False)
class Distribution:
    """Nonnegative weights over the (J, M) states.

    ``normalized`` distinguishes probability vectors from the unnormalized
    auxiliary vectors used for intensity correlations. ``info`` carries solver
    diagnostics.
    """

    params: ModelParams
    weights: np.ndarray = field(repr=False)
    normalized: bool = True
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (state_count(self.params),):
            raise InvalidParams(
                f"weights have shape {w.shape}, expected ({state_count(self.params)},)"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, params: ModelParams, level, weight: float = 1.0) -> "Distribution":
        w = np.zeros(state_count(params))
        w[index_of(params, level)] = weight
        return cls(params, w, normalized=weight == 1.0)

    @classmethod
    def uniform(cls, params: ModelParams) -> "Distribution":
        n = state_count(params)
        return cls(params, np.full(n, 1.0 / n))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __getitem__(self, level) -> float:
        return float(self.weights[index_of(self.params, level)])


def _cleanup(x: np.ndarray, what: str) -> np.ndarray:
    low = x.min()
    if low < -NEGATIVE_TOL:
        raise SingularOrNonUnique(f"{what}: entry {low:.3e} is negative beyond roundoff")
    x = np.where(x < 0, 0.0, x)
    return x / x.sum()


def residual(gen: Generator, dist) -> float:
    """``max |Q P|`` scaled by the largest exit rate."""
    p = dist.weights if isinstance(dist, Distribution) else np.asarray(dist, dtype=float)
    if p.shape != (gen.dimension,):
        raise InvalidParams(f"distribution of shape {p.shape} does not match dimension {gen.dimension}")
    scale = gen.max_exit_rate
    r = np.abs(gen.Q @ p).max()
    return float(r / scale) if scale > 0 else float(r)


def _check_unique(gen: Generator) -> None:
    p = gen.params
    if p.w == 0 and p.gamma == 0:
        raise SingularOrNonUnique(
            "w = gamma = 0: every dark state (J, -J) is absorbing, no unique steady state"
        )


def _reduced_solve(gen: Generator, pivot: int, ordering: str, refine: int):
    """Fix ``x[pivot] = 1``, solve the other balance equations, normalize.

    Returns ``None`` when the factorization fails or the result misses the
    residual or positivity targets.
    """
    n = gen.dimension
    rest = np.delete(np.arange(n), pivot)
    Q = gen.Q.tocsc()
    B = Q[rest][:, rest].tocsc()
    rhs = -Q[rest, pivot].toarray().ravel()
    try:
        lu = splu(B, permc_spec=ordering)
    except RuntimeError as exc:
        log.info("reduced LU with pivot %d failed: %s", pivot, exc)
        return None
    y = lu.solve(rhs)
    for _ in range(refine):
        y = y + lu.solve(rhs - B @ y)
    x = np.empty(n)
    x[rest] = y
    x[pivot] = 1.0
    total = x.sum()
    if not (np.all(np.isfinite(x)) and np.isfinite(total) and total > 0):
        return None
    x = x / total
    if x.min() < -NEGATIVE_TOL or residual(gen, x) >= RESIDUAL_TOL:
        return None
    return x


def _normalization_row_solve(gen: Generator, pivot: int, ordering: str, refine: int):
    n = gen.dimension
    keep = np.ones(n)
    keep[pivot] = 0.0
    ones_row = sp.csr_matrix((np.ones(n), (np.full(n, pivot), np.arange(n))), shape=(n, n))
    A = (sp.diags(keep) @ gen.Q + ones_row).tocsc()
    b = np.zeros(n)
    b[pivot] = 1.0
    try:
        lu = splu(A, permc_spec=ordering)
    except RuntimeError as exc:
        raise SingularOrNonUnique(f"sparse LU failed: {exc}") from exc
    x = lu.solve(b)
    for _ in range(refine):
        x = x + lu.solve(b - A @ x)
    if not np.all(np.isfinite(x)):
        raise SingularOrNonUnique("sparse LU produced non-finite values")
    return x


def _direct(gen: Generator, ordering: str, refine: int = 2) -> tuple[np.ndarray, int]:
    """Sparse LU solve with the pivot state's balance equation replaced.

    Replacing the pivot row by the normalization constraint is equivalent to
    fixing ``x[pivot] = 1``, solving the remaining equations with the pivot
    row and column deleted, and rescaling. The reduced matrix keeps the
    sparsity of ``Q`` (no dense row), which cuts fill-in by an order of
    magnitude.

    The pivot is the state with the largest exit rate. If that state ends up
    with negligible weight, the solve is repeated with the most populated
    state as pivot. If the reduced system is singular (transient pivot), the
    explicit normalization-row system is solved first to locate the mass.
    """
    pivot = int(np.argmax(gen.exit_rates))
    x = _reduced_solve(gen, pivot, ordering, refine)
    if x is not None:
        if x[pivot] >= PIVOT_WEIGHT_MIN * x.max():
            return x, pivot
        # pivot nearly empty: its equation fixed the scale of roundoff only
        better = int(np.argmax(x))
        retry = _reduced_solve(gen, better, ordering, refine)
        return (retry, better) if retry is not None else (x, pivot)
    log.info("pivot %d unusable, solving the normalization-row system", pivot)
    x = _normalization_row_solve(gen, pivot, ordering, refine)
    pivot = int(np.argmax(x))
    retry = _reduced_solve(gen, pivot, ordering, refine)
    if retry is not None:
        return retry, pivot
    return x, pivot


def power_iteration(
    gen: Generator,
    x0=None,
    tol: float = 1e-13,
    max_iter: int = 10**7,
    record_every: int = 0,
) -> tuple[np.ndarray, list[float]]:
    """Power iteration on the uniformized matrix ``I + Q / L``, ``L = 1.01 max exit``.

    Stops when successive iterates differ by less than ``tol`` in the max norm.
    Returns the final iterate and, if ``record_every`` > 0, the residual
    history sampled every ``record_every`` sweeps.
    """
    n = gen.dimension
    lam = 1.01 * gen.max_exit_rate
    P = (sp.identity(n, format="csr") + gen.Q.tocsr() / lam).tocsr()
    x = np.full(n, 1.0 / n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= x.sum()
    history = []
    for it in range(1, max_iter + 1):
        y = P @ x
        diff = np.abs(y - x).max()
        x = y
        if record_every and it % record_every == 0:
            history.append(residual(gen, x))
        if diff < tol:
            return x, history
    raise NotConverged(f"power iteration did not converge in {max_iter} sweeps")


def steady_state(
    gen: Generator, method: str = "direct", ordering: str = "MMD_AT_PLUS_A"
) -> Distribution:
    """Stationary distribution ``P`` with ``Q P = 0`` and ``sum(P) = 1``.

    ``method="direct"`` factorizes ``Q`` with the balance equation of the
    fastest-decaying state replaced by the normalization constraint, then
    applies two steps of iterative refinement. If that misses the residual target, power
    iteration on the uniformized chain takes over from the direct solution.
    ``method="power"`` uses power iteration only.

    ``ordering`` is the SuperLU column permutation. The fill-reducing default
    gives normwise accuracy; ``"NATURAL"`` keeps the J-major band structure,
    which resolves exponentially small weights of a one-dimensional chain to
    full relative precision at the cost of more fill.
    """
    _check_unique(gen)
    info = {"method": method, "ordering": ordering}
    if method == "direct":
        x, pivot = _direct(gen, ordering)
        info["pivot_index"] = pivot
        x = _cleanup(x, "direct solve")
        res = residual(gen, x)
        if res >= RESIDUAL_TOL:
            log.warning("direct solve residual %.2e, switching to power iteration", res)
            x, _ = power_iteration(gen, x0=x)
            x = _cleanup(x, "power iteration")
            info["method"] = "direct+power"
    elif method == "power":
        x, _ = power_iteration(gen)
        x = _cleanup(x, "power iteration")
    else:
        raise ValueError(f"unknown method {method!r}")
    info["residual"] = residual(gen, x)
    return Distribution(gen.params, x, normalized=True, info=info)
