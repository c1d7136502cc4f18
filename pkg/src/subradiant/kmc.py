"""Kinetic Monte Carlo (Gillespie) trajectories of the collective-spin chain.

Rates are evaluated per visited state from the channel formulas, so runs at
N = 10^4 never build the ~10^8-entry generator. These trajectories are
unravelings of the classical rate equation; they do not describe a
physically monitored quantum system.
"""
from __future__ import annotations

import math
from array import array
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import NamedTuple

import numpy as np

from .errors import InsufficientData, InvalidParams
from .model import Level, ModelParams, index_of, level_of, state_count
from .rates import Channel, local_rates
from .steady import Distribution

__all__ = [
    "Event",
    "JumpRecord",
    "BurstStats",
    "simulate",
    "occupancy",
    "burst_stats",
    "pinned_steps",
    "total_variation",
    "RNG_NAME",
]

RNG_NAME = "numpy.random.PCG64"
_BATCH = 1 << 15


class Event(NamedTuple):
    t: float
    channel: Channel
    source: Level
    target: Level


@dataclass(frozen=True, eq=False)
class JumpRecord:
    """Time-ordered jumps of one trajectory, stored column-wise."""

    params: ModelParams
    initial: Level
    times: np.ndarray = field(repr=False)
    channels: np.ndarray = field(repr=False)
    source: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    t_end: float = 0.0
    seed: int | None = None
    absorbed: bool = False
    rng: str = RNG_NAME

    def __len__(self):
        return self.times.size

    @property
    def events(self) -> list[Event]:
        p = self.params
        return [
            Event(float(t), Channel(int(c)), level_of(p, a), level_of(p, b))
            for t, c, a, b in zip(self.times, self.channels, self.source, self.target)
        ]

    def channel_times(self, channels=None, t_from: float = 0.0) -> np.ndarray:
        """Jump times of the given channels at or after ``t_from``."""
        mask = self.times >= t_from
        if channels is not None:
            mask &= np.isin(self.channels, [int(c) for c in channels])
        return self.times[mask]


class _Table:
    """Per-state cache of cumulative exit rates."""

    def __init__(self, params: ModelParams):
        self.params = params
        self._cache: dict[int, tuple] = {}

    def __call__(self, idx: int):
        entry = self._cache.get(idx)
        if entry is None:
            out = local_rates(self.params, level_of(self.params, idx))
            cum = list(accumulate(r for _, _, r in out))
            entry = (
                cum[-1] if cum else 0.0,
                cum,
                [int(c) for c, _, _ in out],
                [index_of(self.params, lvl) for _, lvl, _ in out],
            )
            self._cache[idx] = entry
        return entry


class _Uniforms:
    """Buffered uniforms on [0, 1) from one PCG64 stream."""

    def __init__(self, seed):
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self._buf = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.rng.random(_BATCH).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _pick(cum: list, total: float, u: float) -> int:
    k = bisect_right(cum, u * total)
    return min(k, len(cum) - 1)


def simulate(
    params: ModelParams,
    initial=None,
    t_max: float = 100.0,
    seed: int | None = 0,
) -> JumpRecord:
    """Gillespie trajectory from ``initial`` until ``t_max`` or absorption.

    The default initial state is (N/2, -N/2), all atoms down. Identical seeds
    give identical records.
    """
    if not t_max > 0:
        raise InvalidParams(f"t_max must be positive, got {t_max}")
    if initial is None:
        initial = Level(params.j_max, -params.j_max)
    idx = index_of(params, initial)
    table = _Table(params)
    uniform = _Uniforms(seed)

    times = array("d")
    chans = array("b")
    src = array("q")
    dst = array("q")
    t = 0.0
    absorbed = False
    while True:
        total, cum, channels, targets = table(idx)
        if total == 0.0:
            absorbed = True
            break
        u = uniform()
        while u == 0.0:
            u = uniform()
        t += -math.log(u) / total
        if t > t_max:
            break
        k = _pick(cum, total, uniform())
        times.append(t)
        chans.append(channels[k])
        src.append(idx)
        idx = targets[k]
        dst.append(idx)

    return JumpRecord(
        params=params,
        initial=Level(*initial),
        times=np.frombuffer(times, dtype=np.float64).copy(),
        channels=np.frombuffer(chans, dtype=np.int8).copy(),
        source=np.frombuffer(src, dtype=np.int64).copy(),
        target=np.frombuffer(dst, dtype=np.int64).copy(),
        t_end=float(t_max),
        seed=seed,
        absorbed=absorbed,
    )


def pinned_steps(params: ModelParams, level, n_steps: int, seed: int | None = 0):
    """Draw ``n_steps`` Gillespie steps from a fixed state without moving.

    Uses the same waiting-time and channel-selection draws as :func:`simulate`.
    Returns ``(channel_counts, waiting_times)`` with counts keyed by channel.
    """
    idx = index_of(params, level)
    total, cum, channels, _ = _Table(params)(idx)
    if total == 0.0:
        raise InsufficientData(f"{level} is absorbing")
    uniform = _Uniforms(seed)
    counts = {Channel(c): 0 for c in channels}
    waits = np.empty(n_steps)
    for i in range(n_steps):
        u = uniform()
        while u == 0.0:
            u = uniform()
        waits[i] = -math.log(u) / total
        counts[Channel(channels[_pick(cum, total, uniform())])] += 1
    return counts, waits


def occupancy(record: JumpRecord, t_burn: float = 0.0) -> Distribution:
    """Fraction of ``[t_burn, t_end]`` spent in each state."""
    if not t_burn < record.t_end:
        raise InsufficientData(f"empty window: t_burn={t_burn} >= t_end={record.t_end}")
    p = record.params
    states = np.concatenate([[index_of(p, record.initial)], record.target])
    starts = np.concatenate([[0.0], record.times])
    ends = np.concatenate([record.times, [record.t_end]])
    durations = np.clip(ends, t_burn, None) - np.clip(starts, t_burn, None)
    w = np.zeros(state_count(p))
    np.add.at(w, states, durations)
    return Distribution(p, w / w.sum())


def total_variation(p, q) -> float:
    a = p.weights if isinstance(p, Distribution) else np.asarray(p)
    b = q.weights if isinstance(q, Distribution) else np.asarray(q)
    return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True)
class BurstStats:
    """Counting statistics of selected jumps after burn-in.

    ``fano`` is variance over mean of the counts in consecutive windows of
    length ``window``; ``wait_edges``/``wait_counts`` form a log-binned
    histogram of the waiting times between consecutive selected jumps.
    """

    fano: float
    mean_count: float
    var_count: float
    n_events: int
    n_windows: int
    rate: float
    window: float
    wait_edges: np.ndarray = field(repr=False)
    wait_counts: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "fano": self.fano,
            "mean_count": self.mean_count,
            "var_count": self.var_count,
            "n_events": self.n_events,
            "n_windows": self.n_windows,
            "rate": self.rate,
            "window": self.window,
            "wait_edges": self.wait_edges.tolist(),
            "wait_counts": self.wait_counts.tolist(),
        }


def burst_stats(
    record: JumpRecord,
    channels=(Channel.COLLECTIVE_DECAY,),
    window: float = 1.0,
    t_burn: float = 0.0,
    n_bins: int = 30,
) -> BurstStats:
    if not window > 0:
        raise InvalidParams("window must be positive")
    times = record.channel_times(channels, t_from=t_burn)
    if times.size < 2:
        raise InsufficientData(f"need at least 2 matching events, got {times.size}")
    n_windows = int((record.t_end - t_burn) // window)
    if n_windows < 2:
        raise InsufficientData("fewer than two complete counting windows")
    edges = t_burn + window * np.arange(n_windows + 1)
    counts, _ = np.histogram(times, bins=edges)
    mean = counts.mean()
    var = counts.var()
    fano = float(var / mean) if mean > 0 else float("nan")

    waits = np.diff(times)
    positive = waits[waits > 0]
    if positive.size:
        lo, hi = positive.min(), positive.max()
        if hi <= lo:
            hi = lo * 2
        wait_edges = np.geomspace(lo, hi, n_bins + 1)
        wait_counts, _ = np.histogram(positive, bins=wait_edges)
    else:
        wait_edges, wait_counts = np.zeros(0), np.zeros(0, dtype=int)
    return BurstStats(
        fano=fano,
        mean_count=float(mean),
        var_count=float(var),
        n_events=int(times.size),
        n_windows=n_windows,
        rate=float(times.size / (record.t_end - t_burn)),
        window=float(window),
        wait_edges=wait_edges,
        wait_counts=wait_counts,
    )
