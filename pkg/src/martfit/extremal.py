"""Extremal interpolation of call functions between two convex-ordered marginals.

For u in (0, 1] let beta(u) be the left-continuous u-quantile of the upper
marginal and g_u the supporting line of the upper call at beta(u) with slope
u - 1.  alpha(u) is the largest level x >= beta(u) where g_u(x) still lies on
or above the lower call.  Between the grid times the interpolated call is the
upper call left of beta, the lower call right of alpha, and g_u in between,
with u = (t - t0) / (t1 - t0).

Both calls are piecewise linear, so alpha is found segment by segment as the
root of a linear equation; no iterative root finding is involved.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import DomainError, ValidationError
from .marginals import (CALL_TOL, CallSlice, CallSurface, MarginalDistribution,
                        check_convex_order, marginal_from_call_slice, validate_cp)

LawLike = Union[MarginalDistribution, CallSlice]


def _as_marginal(obj: LawLike) -> MarginalDistribution:
    if isinstance(obj, MarginalDistribution):
        return obj
    return marginal_from_call_slice(obj)


def _check_u(u: float) -> float:
    u = float(u)
    if not 0.0 < u <= 1.0:
        raise DomainError(f"probability level u={u!r} outside (0, 1]")
    return u


def _breakpoints(dist: MarginalDistribution) -> np.ndarray:
    cum = np.cumsum(dist.weights)
    cum[-1] = 1.0
    return cum


def quantile_beta(upper: LawLike, u: float) -> float:
    """inf{x : F(x) >= u} for the upper marginal."""
    u = _check_u(u)
    dist = _as_marginal(upper)
    k = int(np.searchsorted(_breakpoints(dist), u, side="left"))
    return float(dist.positions[min(k, len(dist) - 1)])


def tangent_g(upper_call: LawLike, u: float, x):
    """Supporting line of the upper call at beta(u) with slope u - 1."""
    dist = _as_marginal(upper_call)
    b = quantile_beta(dist, u)
    cb = CallSlice.from_marginal(dist)(b)
    return cb + (np.asarray(x, dtype=float) - b) * (float(u) - 1.0)


@dataclass(frozen=True, eq=False)
class BarrierFunctions:
    """beta, alpha, F* and the interpolated call for one grid interval."""

    lower: MarginalDistribution
    upper: MarginalDistribution
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if not float(self.t1) > float(self.t0):
            raise DomainError(f"degenerate interval [{self.t0}, {self.t1}]")
        if not check_convex_order(self.lower, self.upper):
            raise DomainError("marginals are not increasing in the convex order")

    @cached_property
    def lower_call(self) -> CallSlice:
        return CallSlice.from_marginal(self.lower)

    @cached_property
    def upper_call(self) -> CallSlice:
        return CallSlice.from_marginal(self.upper)

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """Cumulative weights u_k of the upper marginal (last one is 1)."""
        return _breakpoints(self.upper)

    @cached_property
    def tol(self) -> float:
        scale = max(1.0, float(np.max(np.abs(self.lower.positions))),
                    float(np.max(np.abs(self.upper.positions))))
        return CALL_TOL * scale

    # -- quantile side ------------------------------------------------------
    def _block(self, u: float) -> int:
        k = int(np.searchsorted(self.breakpoints, u, side="left"))
        return min(k, len(self.upper) - 1)

    def beta(self, u: float) -> float:
        u = _check_u(u)
        return float(self.upper.positions[self._block(u)])

    def g(self, u: float, x):
        u = _check_u(u)
        k = self._block(u)
        y, d = self.upper.positions[k], self.upper_call.values[k]
        return d + (np.asarray(x, dtype=float) - y) * (u - 1.0)

    # -- alpha ----------------------------------------------------------------
    def _crossing(self, u: float, strict: bool) -> float:
        u = _check_u(u)
        k = self._block(u)
        y = float(self.upper.positions[k])
        if u >= 1.0:
            return y
        d = float(self.upper_call.values[k])
        slope = u - 1.0
        kn, kv = self.lower_call.knots, self.lower_call.values
        tol = self.tol

        h0 = d - float(self.lower_call(y))
        if h0 < -tol:
            raise DomainError(f"upper call below lower call at x={y:.17g}; "
                              "marginals are not in convex order")
        ok = (lambda v: v > tol) if strict else (lambda v: v >= -tol)

        start = int(np.searchsorted(kn, y, side="right"))
        hs = d + (kn[start:] - y) * slope - kv[start:]
        p, hp, nxt = (y, h0, start) if ok(h0) else (None, None, None)
        for j, hj in enumerate(hs):
            if ok(hj):
                p, hp, nxt = float(kn[start + j]), float(hj), start + j + 1
        if p is None:
            return y
        hp = max(hp, 0.0)
        if nxt < kn.size:
            q = float(kn[nxt])
            hq = d + (q - y) * slope - float(kv[nxt])
            if hq >= hp:
                return q
            return min(q, p + hp * (q - p) / (hp - hq))
        # right of the last lower atom the lower call is zero
        return max(p, y + d / (1.0 - u))

    def alpha_many(self, u, strict: bool = False) -> np.ndarray:
        """Vectorised alpha (or its left limit) over an array of u in (0, 1]."""
        uv = np.asarray(u, dtype=float).reshape(-1)
        if np.any(~((uv > 0.0) & (uv <= 1.0))):
            raise DomainError("u must lie in (0, 1]")
        k = np.minimum(np.searchsorted(self.breakpoints, uv, side="left"), len(self.upper) - 1)
        y = self.upper.positions[k]
        d = self.upper_call.values[k]
        slope = uv - 1.0
        kn, kv = self.lower_call.knots, self.lower_call.values
        tol = self.tol
        h0 = d - self.lower_call(y)
        if np.any(h0 < -tol):
            raise DomainError("upper call below lower call; marginals are not in convex order")

        def ok(v):
            return v > tol if strict else v >= -tol

        # h at every lower knot right of y; column 0 stands for y itself
        h = d[:, None] + (kn[None, :] - y[:, None]) * slope[:, None] - kv[None, :]
        valid = np.concatenate([np.ones((uv.size, 1), bool), kn[None, :] > y[:, None]], axis=1)
        hh = np.concatenate([h0[:, None], h], axis=1)
        good = valid & ok(hh)
        any_good = good.any(axis=1)
        last = good.shape[1] - 1 - np.argmax(good[:, ::-1], axis=1)
        p = np.where(last == 0, y, kn[np.maximum(last - 1, 0)])
        hp = np.maximum(hh[np.arange(uv.size), last], 0.0)
        # index into kn of the first knot right of p
        nxt = np.where(last == 0, np.searchsorted(kn, y, side="right"), last)
        inside = nxt < kn.size
        q = kn[np.minimum(nxt, kn.size - 1)]
        hq = d + (q - y) * slope - kv[np.minimum(nxt, kn.size - 1)]
        with np.errstate(divide="ignore", invalid="ignore"):
            interior = np.where(hq >= hp, q, np.minimum(q, p + hp * (q - p) / (hp - hq)))
            tail = np.maximum(p, y + d / (1.0 - uv))
        out = np.where(inside, interior, tail)
        out = np.where(any_good, out, y)
        out = np.where(uv >= 1.0, y, out)
        return out.reshape(np.shape(u))

    def alpha(self, u: float) -> float:
        """Largest crossing of g_u with the lower call (right-continuous)."""
        return self._crossing(u, strict=False)

    def alpha_left(self, u: float) -> float:
        """Left limit alpha(u-); differs from alpha(u) only at jumps."""
        return self._crossing(u, strict=True)

    @cached_property
    def jumps(self) -> tuple[tuple[float, float, float], ...]:
        """(u, alpha(u-), alpha(u)) for every discontinuity of alpha.

        A jump needs g_u to coincide with a segment of the lower call, so
        the candidates are u = 1 + slope over the lower call's segments.
        """
        inner = np.diff(self.lower_call.values) / np.diff(self.lower_call.knots)
        out = []
        for s in np.unique(inner):
            u = 1.0 + float(s)
            if not 0.0 < u < 1.0:
                continue
            lo, hi = self.alpha_left(u), self.alpha(u)
            if hi - lo > 1e3 * self.tol:
                out.append((u, lo, hi))
        return tuple(out)

    @cached_property
    def alpha_at_breakpoints(self) -> np.ndarray:
        """alpha(u_k) for the upper marginal's cumulative weights, snapped to atoms."""
        atoms = np.union1d(self.lower.positions, self.upper.positions)
        vals = []
        for u in self.breakpoints:
            a = self.alpha(float(u))
            j = int(np.argmin(np.abs(atoms - a)))
            if abs(atoms[j] - a) <= 10 * self.tol:
                a = float(atoms[j])
            vals.append(a)
        vals[-1] = float(self.upper.positions[-1])
        vals = np.array(vals)
        if np.any(np.diff(vals) < -10 * self.tol):
            raise ValidationError("alpha is not non-decreasing across cumulative weights")
        return np.maximum.accumulate(vals)

    # -- F* --------------------------------------------------------------------
    def fstar(self, s):
        """inf{u in (0, 1) : alpha(u) > s}, right-continuous, from 0 to 1.

        Inverts each block exactly: for u in a block with quantile y and
        s > y, alpha(u) > s iff u > 1 - (C1(y) - C0(s)) / (s - y).
        """
        sv = np.asarray(s, dtype=float)
        flat = sv.reshape(-1)
        out = np.ones_like(flat)
        done = flat >= self.upper.positions[-1]
        # alpha(0+) is the lowest lower atom, so F* vanishes below it
        out[~done & (flat < self.lower.positions[0])] = 0.0
        done |= flat < self.lower.positions[0]
        c0 = self.lower_call(flat)
        kn = self.lower_call.knots
        slopes = self.lower_call.segment_slopes()
        seg = np.searchsorted(kn, flat, side="right")
        prev = 0.0
        for y, d, uk in zip(self.upper.positions, self.upper_call.values, self.breakpoints):
            todo = ~done
            below = todo & (flat < y)
            out[below] = prev
            done |= below
            w = np.full_like(flat, np.inf)
            gt = todo & (flat > y)
            w[gt] = 1.0 - (d - c0[gt]) / (flat[gt] - y)
            # on the lower-call segment through y, C0(s) - C0(y) is slope * (s - y);
            # using it avoids cancellation when s is close to y
            j = int(np.searchsorted(kn, y, side="right"))
            same = gt & (seg == j)
            h0 = d - float(self.lower_call(y))
            if h0 <= self.tol:  # calls touch at y
                h0 = 0.0
            w[same] = 1.0 + slopes[j] - h0 / (flat[same] - y)
            eq = todo & (flat == y)
            if eq.any():
                if d - float(self.lower_call(y)) > self.tol:
                    w[eq] = -np.inf
                else:
                    w[eq] = 1.0 + float(self.lower_call.right_slope(y))
            # w at either block end is that end up to roundoff
            w[np.abs(w - prev) <= 1e-12] = prev
            w[np.abs(w - uk) <= 1e-12] = uk
            hit = (gt | eq) & (w < uk)
            out[hit] = np.clip(np.maximum(prev, w[hit]), 0.0, 1.0)
            done |= hit
            prev = float(uk)
        out = out.reshape(sv.shape)
        return float(out) if out.ndim == 0 else out

    # -- interpolated call ----------------------------------------------------
    def u_of(self, t: float) -> float:
        return (float(t) - float(self.t0)) / (float(self.t1) - float(self.t0))

    def call(self, t: float, x):
        """Interpolated call at time t (clamped to the interval) and level(s) x."""
        u = self.u_of(t)
        xs = np.asarray(x, dtype=float)
        if u <= 0.0:
            out = self.lower_call(xs)
        elif u >= 1.0:
            out = self.upper_call(xs)
        else:
            b, a = self.beta(u), self.alpha(u)
            out = np.where(xs <= b, self.upper_call(xs),
                           np.where(xs >= a, self.lower_call(xs), self.g(u, xs)))
        return float(out) if np.ndim(out) == 0 else out

    def slice_at(self, t: float) -> CallSlice:
        u = self.u_of(t)
        if u <= 0.0:
            return self.lower_call
        if u >= 1.0:
            return self.upper_call
        knots = np.union1d(self.lower.positions, self.upper.positions)
        extra = [p for p in (self.beta(u), self._snapped_alpha(u))
                 if np.min(np.abs(knots - p)) > 0.0]
        knots = np.union1d(knots, extra)
        vals = np.asarray(self.call(t, knots))
        vals[-1] = 0.0
        return CallSlice(knots, vals)

    def _snapped_alpha(self, u: float) -> float:
        """alpha(u), moved onto an atom when within roundoff of one.

        Keeping a crossing one ulp off an atom would add a sliver segment
        whose slope is pure roundoff.
        """
        a = self.alpha(u)
        atoms = np.union1d(self.lower.positions, self.upper.positions)
        j = int(np.argmin(np.abs(atoms - a)))
        return float(atoms[j]) if abs(atoms[j] - a) <= self.tol else a

    def marginal_at(self, t: float) -> MarginalDistribution:
        """Law of the interpolated slice, read off the three pieces of C~.

        Upper atoms below beta and lower atoms above alpha keep their
        weights; the kinks at beta and alpha carry u - F1(beta-) and
        F0(alpha) - u.
        """
        u = self.u_of(t)
        if u <= 0.0:
            return self.lower
        if u >= 1.0:
            return self.upper
        b, a = self.beta(u), self._snapped_alpha(u)
        up, lo = self.upper, self.lower
        below = up.positions < b
        above = lo.positions > a
        f1_left = float(up.weights[below].sum())
        f0 = float(lo.weights[lo.positions <= a].sum())
        atoms = list(zip(up.positions[below], up.weights[below]))
        atoms += [(b, u - f1_left), (a, f0 - u)]
        atoms += list(zip(lo.positions[above], lo.weights[above]))
        return MarginalDistribution.from_atoms(atoms, min_weight=1e3 * self.tol)


def compute_alpha(lower_call: LawLike, upper_call: LawLike, u: float) -> float:
    """sup{x >= beta(u) : g_u(x) >= C0(x)} for one pair of call slices."""
    return BarrierFunctions(_as_marginal(lower_call), _as_marginal(upper_call)).alpha(u)


def build_fstar(bf: BarrierFunctions):
    """Right-continuous generalized inverse of alpha as a callable.

    Raises ``ValidationError`` when alpha is not monotone on the cumulative
    weight levels, which would mean the construction is inconsistent.
    """
    grid = np.concatenate([bf.breakpoints, np.linspace(0.0, 1.0, 129)[1:]])
    vals = np.array([bf.alpha(float(u)) for u in np.sort(grid)])
    if np.any(np.diff(vals) < -1e3 * bf.tol):
        raise ValidationError("alpha is not non-decreasing")
    return bf.fstar


def extremal_pair_call(lower: LawLike, upper: LawLike, t0: float, t1: float,
                       t: float, x):
    """Interpolated call between (t0, lower) and (t1, upper)."""
    if not float(t0) <= float(t) <= float(t1):
        raise DomainError(f"t={t} outside [{t0}, {t1}]")
    bf = BarrierFunctions(_as_marginal(lower), _as_marginal(upper), t0, t1)
    return bf.call(t, x)


@dataclass(frozen=True, eq=False)
class ExtremalSurface:
    """Chained extremal interpolation over a validated call surface.

    Constant in t before the first and after the last grid time.
    """

    surface: CallSurface

    @cached_property
    def pieces(self) -> tuple[BarrierFunctions, ...]:
        s = self.surface
        return tuple(BarrierFunctions(s.marginals[k], s.marginals[k + 1],
                                      float(s.times[k]), float(s.times[k + 1]))
                     for k in range(len(s) - 1))

    @property
    def times(self) -> np.ndarray:
        return self.surface.times

    def _locate(self, t: float):
        times = self.surface.times
        t = float(t)
        if t <= times[0] or not self.pieces:
            return None, 0
        if t >= times[-1]:
            return None, len(times) - 1
        k = int(np.searchsorted(times, t, side="right")) - 1
        if t == times[k]:
            return None, k
        return self.pieces[k], k

    def __call__(self, t: float, x):
        piece, k = self._locate(t)
        if piece is None:
            return self.surface.slices[k](x)
        return piece.call(t, x)

    def slice_at(self, t: float) -> CallSlice:
        piece, k = self._locate(t)
        if piece is None:
            return self.surface.slices[k]
        return piece.slice_at(t)

    def marginal_at(self, t: float) -> MarginalDistribution:
        piece, k = self._locate(t)
        if piece is None:
            return self.surface.marginals[k]
        return piece.marginal_at(t)

    def grid(self, times, levels) -> np.ndarray:
        levels = np.asarray(levels, dtype=float)
        return np.vstack([np.asarray(self(t, levels), dtype=float) for t in times])


def extremal_chain(surface: CallSurface) -> ExtremalSurface:
    """Interpolator (t, x) -> C~(t, x) matching every grid slice exactly."""
    report = validate_cp(surface)
    if not report.valid:
        raise ValidationError("invalid call surface: " + "; ".join(report.violations))
    return ExtremalSurface(surface)
