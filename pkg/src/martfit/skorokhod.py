"""Exact sampling of martingale paths through a max-ladder Skorokhod embedding.

Within one grid interval a Brownian motion started from the lower marginal is
stopped when it falls from its running maximum s to the barrier b(s).  For
atomic marginals b is a step function, constant on rungs [lo_k, hi_k), so the
embedding reduces to a chain of fair two-point bets: from maximum s the motion
reaches hi_k before b with probability (s - b) / (hi_k - b).  Given a ruin the
terminal maximum is drawn exactly from P(max >= m) = (s - b) / (m - b).

The path in calendar time rides the ceiling alpha(u(t)) until the jump time
T = t0 + (t1 - t0) * F*(s*), then drops to the landing level and stays there.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import streams
from .errors import DomainError, ValidationError
from .extremal import BarrierFunctions
from .marginals import CallSurface, MarginalDistribution, validate_cp


@dataclass(frozen=True, eq=False)
class TransitionBarrier:
    """Rungs [lo_k, hi_k) with barrier levels bar_k, and the top stop level."""

    functions: BarrierFunctions
    lo: np.ndarray
    hi: np.ndarray
    bar: np.ndarray
    stop: float

    @property
    def t0(self) -> float:
        return float(self.functions.t0)

    @property
    def t1(self) -> float:
        return float(self.functions.t1)

    @property
    def rungs(self) -> np.ndarray:
        return np.concatenate([self.lo, [self.stop]])

    def barrier(self, s):
        """b(s); equal to s itself at and above the stop level."""
        sv = np.asarray(s, dtype=float)
        k = np.searchsorted(self.hi, sv, side="right")
        out = np.where(k < self.bar.size, self.bar[np.minimum(k, self.bar.size - 1)], sv)
        return float(out) if out.ndim == 0 else out


def build_barrier(lower: MarginalDistribution, upper: MarginalDistribution,
                  t0: float = 0.0, t1: float = 1.0) -> TransitionBarrier:
    """Max-ladder for moving ``lower`` at t0 onto ``upper`` at t1.

    Rung ends are alpha(u_k) at the upper marginal's cumulative weights; on
    the rung ending at alpha(u_k) the barrier is the k-th upper atom.
    """
    bf = BarrierFunctions(lower, upper, t0, t1)
    ends = bf.alpha_at_breakpoints
    ys = upper.positions
    lo, hi, bar = [], [], []
    prev = float(lower.positions[0])
    for k in range(len(upper) - 1):
        end = float(ends[k])
        if end > prev:
            if ys[k] > prev + bf.tol:
                raise ValidationError(f"barrier {ys[k]:.17g} above rung start {prev:.17g}")
            lo.append(prev)
            hi.append(end)
            bar.append(min(float(ys[k]), prev))
            prev = end
    stop = float(ys[-1])
    if prev > stop + bf.tol:
        raise ValidationError("rungs extend past the top of the upper support")
    return TransitionBarrier(bf, np.array(lo), np.array(hi), np.array(bar), stop)


@dataclass(frozen=True)
class PathSample:
    """Closed form of one path over one interval."""

    start: float
    terminal_max: float
    landing: float
    jump_u: float
    jump_time: float


def _sample_many(barrier: TransitionBarrier, x0: np.ndarray,
                 draw: Callable[[int], np.ndarray]):
    """Vectorised ladder walk.

    ``draw(j)`` returns one uniform on (0, 1] per path for rung step j.
    Returns (terminal_max, landing, immediate) arrays.
    """
    lo, hi, bar = barrier.lo, barrier.hi, barrier.bar
    n = x0.size
    s = x0.astype(float).copy()
    smax = s.copy()
    land = s.copy()
    immediate = np.ones(n, dtype=bool)
    if lo.size == 0:
        return smax, land, immediate
    active = (s >= lo[0]) & (s < barrier.stop)
    k = np.searchsorted(hi, s, side="right")
    step = 0
    while active.any():
        idx = np.flatnonzero(active)
        kk = k[idx]
        b = bar[kk]
        ss = s[idx]
        halt = b >= ss
        if halt.any():
            h = idx[halt]
            land[h] = s[h]
            smax[h] = s[h]
            active[h] = False
            immediate[h] = step == 0
        go = idx[~halt]
        if go.size == 0:
            break
        immediate[go] = False
        u = draw(step)[go]
        bg = bar[k[go]]
        top = hi[k[go]]
        m = bg + (s[go] - bg) / u
        climb = m >= top
        ruined = go[~climb]
        smax[ruined] = m[~climb]
        land[ruined] = bg[~climb]
        active[ruined] = False
        up = go[climb]
        s[up] = top[climb]
        k[up] += 1
        finished = up[k[up] >= hi.size]
        s[finished] = barrier.stop
        smax[finished] = barrier.stop
        land[finished] = barrier.stop
        active[finished] = False
        step += 1
    return smax, land, immediate


def _jump_u(barrier: TransitionBarrier, smax, immediate):
    u = np.asarray(barrier.functions.fstar(smax), dtype=float)
    return np.where(immediate, 0.0, u)


def sample_transition(barrier: TransitionBarrier, x0: float,
                      randomness: Iterable[float]) -> PathSample:
    """Draw one PathSample, consuming one uniform on (0, 1] per rung climbed."""
    it = iter(randomness)
    smax, land, imm = _sample_many(barrier, np.array([float(x0)]),
                                   lambda step: np.array([float(next(it))]))
    u = float(_jump_u(barrier, smax, imm)[0])
    return PathSample(float(x0), float(smax[0]), float(land[0]), u,
                      barrier.t0 + (barrier.t1 - barrier.t0) * u)


def exact_kernel(barrier: TransitionBarrier, x0: float) -> MarginalDistribution:
    """Exact law of the landing level from start x0 (no randomness)."""
    x0 = float(x0)
    lo, hi, bar = barrier.lo, barrier.hi, barrier.bar
    out: dict[float, float] = {}
    if lo.size == 0 or x0 < lo[0] or x0 >= barrier.stop:
        return MarginalDistribution.dirac(x0)
    k = int(np.searchsorted(hi, x0, side="right"))
    s, mass = x0, 1.0
    while k < hi.size:
        b = float(bar[k])
        if b >= s:
            out[s] = out.get(s, 0.0) + mass
            mass = 0.0
            break
        p = (s - b) / (float(hi[k]) - b)
        out[b] = out.get(b, 0.0) + mass * (1.0 - p)
        mass *= p
        s = float(hi[k])
        k += 1
    if mass > 0.0:
        out[barrier.stop] = out.get(barrier.stop, 0.0) + mass
    return MarginalDistribution.from_atoms(out.items())


def mix_kernel(barrier: TransitionBarrier, lower: MarginalDistribution) -> MarginalDistribution:
    """Landing law when the start is drawn from ``lower``."""
    acc: dict[float, float] = {}
    for x, w in lower.atoms:
        for y, q in exact_kernel(barrier, x).atoms:
            acc[y] = acc.get(y, 0.0) + w * q
    return MarginalDistribution.from_atoms(acc.items())


def jump_time_of(s_star: float, barrier: TransitionBarrier) -> float:
    return barrier.t0 + (barrier.t1 - barrier.t0) * float(barrier.functions.fstar(s_star))


def _ceiling(barrier: TransitionBarrier, t: float) -> float:
    u = barrier.functions.u_of(t)
    if u <= 0.0:
        return -np.inf
    return barrier.functions.alpha(min(u, 1.0))


def path_value(path: PathSample, barrier: TransitionBarrier, t: float) -> float:
    """max(start, alpha(u(t))) before the jump time, the landing level after."""
    if not barrier.t0 <= t <= barrier.t1:
        raise DomainError(f"t={t} outside [{barrier.t0}, {barrier.t1}]")
    if t >= path.jump_time:
        return path.landing
    return max(path.start, _ceiling(barrier, t))


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Closed-form paths over a whole surface; arrays are (interval, path)."""

    surface: CallSurface
    barriers: tuple
    start: np.ndarray
    x0: np.ndarray
    smax: np.ndarray
    land: np.ndarray
    jump_u: np.ndarray
    jump_time: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.start.size

    def sample(self, k: int, i: int) -> PathSample:
        return PathSample(float(self.x0[k, i]), float(self.smax[k, i]), float(self.land[k, i]),
                          float(self.jump_u[k, i]), float(self.jump_time[k, i]))

    def values(self, t: float, idx=slice(None)) -> np.ndarray:
        times = self.surface.times
        t = float(t)
        if len(self.barriers) == 0 or t <= times[0]:
            return self.start[idx].copy()
        if t >= times[-1]:
            return self.land[-1, idx].copy()
        k = int(np.searchsorted(times, t, side="right")) - 1
        if t == times[k]:
            return self.x0[k, idx].copy()
        ceiling = _ceiling(self.barriers[k], t)
        riding = t < self.jump_time[k, idx]
        return np.where(riding, np.maximum(self.x0[k, idx], ceiling), self.land[k, idx])

    def matrix(self, times: Sequence[float]) -> np.ndarray:
        return np.column_stack([self.values(t) for t in times])


def _draw_start(first: MarginalDistribution, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(first.weights)
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(first) - 1)
    return first.positions[idx]


def surface_barriers(surface: CallSurface) -> tuple:
    report = validate_cp(surface)
    if not report.valid:
        raise ValidationError("invalid call surface: " + "; ".join(report.violations))
    return tuple(build_barrier(surface.marginals[k], surface.marginals[k + 1],
                               float(surface.times[k]), float(surface.times[k + 1]))
                 for k in range(len(surface) - 1))


def simulate(surface: CallSurface, n_paths: int, seed: int,
             threads: int | None = None, barriers: tuple | None = None) -> PathEnsemble:
    """Sample ``n_paths`` closed-form paths; bitwise reproducible in (seed, n_paths).

    Interval k consumes uniforms from stream (seed, k, rung step) at the path
    index, so the result does not depend on chunking or thread count.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    if barriers is None:
        barriers = surface_barriers(surface)
    n_int = len(barriers)

    def run(lo: int, hi: int):
        n = hi - lo
        start = _draw_start(surface.marginals[0],
                            streams.uniforms(seed, streams.INIT, 0, 0, lo, n))
        cur = start
        rows = []
        for k, bar in enumerate(barriers):
            def draw(step, k=k):
                return streams.open_uniforms(seed, streams.TRANSITION, k, step, lo, n)
            smax, land, imm = _sample_many(bar, cur, draw)
            u = _jump_u(bar, smax, imm)
            rows.append((cur, smax, land, u, bar.t0 + (bar.t1 - bar.t0) * u))
            cur = land
        return start, rows

    parts = streams.map_chunks(run, n_paths, threads)
    start = np.concatenate([p[0] for p in parts])

    def stack(j):
        if n_int == 0:
            return np.empty((0, n_paths))
        return np.vstack([np.concatenate([p[1][k][j] for p in parts]) for k in range(n_int)])

    return PathEnsemble(surface, tuple(barriers), start, stack(0), stack(1), stack(2),
                        stack(3), stack(4))


def simulate_paths(surface: CallSurface, n_paths: int, seed: int,
                   query_times: Sequence[float], threads: int | None = None) -> np.ndarray:
    """Path matrix of shape (n_paths, len(query_times))."""
    times = [float(t) for t in query_times]
    if not times:
        raise DomainError("empty query time list")
    lo, hi = float(surface.times[0]), float(surface.times[-1])
    bad = [t for t in times if not lo <= t <= hi]
    if bad:
        raise DomainError(f"query times {bad} outside [{lo}, {hi}]")
    return simulate(surface, n_paths, seed, threads).matrix(times)
