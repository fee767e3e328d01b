"""The capped sup distance between call surfaces.

    d(A, B) = sup_{t, x} min(|A(t, x) - B(t, x)|, 2^(-|x| - t))

Both surfaces are read through their extremal interpolation, so they are
continuous in t and piecewise linear in x.  For fixed t the supremum over x is
computed exactly; over t a branch-and-bound uses that calls are non-decreasing
in t, so on [ta, tb]

    |A - B| <= max(A(tb, x) - B(ta, x), B(tb, x) - A(ta, x)),

which is again piecewise linear in x and handled by the same exact routine.
"""
from __future__ import annotations

import heapq
import math
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .extremal import ExtremalSurface, extremal_chain
from .marginals import CallSlice, CallSurface

T_MAX = 40.0  # the cap is below 2^-40 beyond this
LN2 = math.log(2.0)

SurfaceLike = Union[CallSurface, ExtremalSurface]


def _cap(t: float, x):
    return np.exp2(-np.abs(x) - t)


def _seg_sup(a: float, b: float, la: float, lb: float, t: float) -> float:
    """sup over [a, b] of min(L, cap), L linear from la to lb, 0 not inside (a, b)."""
    vals = [min(la, float(_cap(t, a))), min(lb, float(_cap(t, b)))]
    if b <= a:
        return max(vals)
    slope = (lb - la) / (b - a)

    def gap(x):
        return la + slope * (x - a) - float(_cap(t, x))

    # the cap is convex and monotone on [a, b], so gap is concave with at most
    # two roots; min(L, cap) peaks at an endpoint or a root
    pts = [a, b]
    side = 1.0 if a >= 0.0 else -1.0
    level = -side * slope / LN2  # gap' = 0 where cap = level
    if level > 0:
        x_star = side * (-math.log2(level) - t)
        if a < x_star < b:
            pts = [a, x_star, b]
    for lo, hi in zip(pts[:-1], pts[1:]):
        glo, ghi = gap(lo), gap(hi)
        if glo * ghi < 0:
            r = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            vals.append(float(_cap(t, r)))
    return max(vals)


def _pl_sup(knots: np.ndarray, d: np.ndarray, t: float) -> float:
    """sup_x min(|D(x)|, cap) for D linear between knots and constant outside."""
    # 0 is a knot, so on both tails D is constant and the cap peaks at the end knot
    best = max(min(abs(d[0]), float(_cap(t, knots[0]))),
               min(abs(d[-1]), float(_cap(t, knots[-1]))))
    for a, b, da, db in zip(knots[:-1], knots[1:], d[:-1], d[1:]):
        if da * db < 0:
            z = a + (b - a) * da / (da - db)
            best = max(best, _seg_sup(a, z, abs(da), 0.0, t), _seg_sup(z, b, 0.0, abs(db), t))
        else:
            best = max(best, _seg_sup(a, b, abs(da), abs(db), t))
    return best


def _knots(*slices: CallSlice) -> np.ndarray:
    return np.union1d(np.concatenate([s.knots for s in slices]), [0.0])


class _Slices:
    """Memoised slice_at; bisection revisits every interval end point."""

    def __init__(self, surface: ExtremalSurface):
        self.surface = surface
        self.cache: dict[float, CallSlice] = {}

    def __getattr__(self, name):
        return getattr(self.surface, name)

    def slice_at(self, t: float) -> CallSlice:
        out = self.cache.get(t)
        if out is None:
            out = self.cache[t] = self.surface.slice_at(t)
        return out


def _sup_at(A, B, t: float) -> float:
    sa, sb = A.slice_at(t), B.slice_at(t)
    k = _knots(sa, sb)
    return _pl_sup(k, sa(k) - sb(k), t)


def _bound(A, B, ta: float, tb: float) -> float:
    a0, a1, b0, b1 = A.slice_at(ta), A.slice_at(tb), B.slice_at(ta), B.slice_at(tb)
    k = _knots(a0, a1, b0, b1)
    env = np.maximum(a1(k) - b0(k), b1(k) - a0(k))
    return _pl_sup(k, np.maximum(env, 0.0), ta)


def _law_at(S: ExtremalSurface, ta: float, tb: float):
    """(lower, upper, t0, t1) of the piece covering [ta, tb], or the constant marginal."""
    piece, k = S._locate(0.5 * (ta + tb))
    if piece is None:
        m = S.surface.marginals[k]
        return m, m, None, None
    return piece.lower, piece.upper, piece.t0, piece.t1


def _identical_on(A: ExtremalSurface, B: ExtremalSurface, ta: float, tb: float) -> bool:
    la, ua, a0, a1 = _law_at(A, ta, tb)
    lb, ub, b0, b1 = _law_at(B, ta, tb)
    if not (la.same_atoms(lb) and ua.same_atoms(ub)):
        return False
    # equal end laws make a piece constant in t
    return la.same_atoms(ua) or (a0 == b0 and a1 == b1)


def _as_extremal(s: SurfaceLike) -> ExtremalSurface:
    return s if isinstance(s, ExtremalSurface) else extremal_chain(s)


def metric_d(A: SurfaceLike, B: SurfaceLike, tol: float = 1e-3) -> float:
    """d(A, B) to within additive ``tol``.

    The t-bound loosens linearly in the interval width, so the cost grows like
    1/tol where the two surfaces stay close over a long stretch of time.
    Surfaces are constant in t outside their grids, and t ranges over
    [min(0, first grid time), 40].
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    A, B = _as_extremal(A), _as_extremal(B)
    t_lo = min(0.0, float(A.times[0]), float(B.times[0]))
    t_hi = min(T_MAX, max(float(A.times[-1]), float(B.times[-1])))
    # grid times of either surface are where the t-dependence changes form
    cuts = np.union1d(np.concatenate([A.times, B.times]), [t_lo, t_hi])
    cuts = cuts[(cuts >= t_lo) & (cuts <= t_hi)]
    identical = [_identical_on(A, B, a, b) for a, b in zip(cuts[:-1], cuts[1:])]
    A, B = _Slices(A), _Slices(B)
    if cuts.size == 1:
        return _sup_at(A, B, float(cuts[0]))

    best = max(_sup_at(A, B, float(t)) for t in cuts)
    # cells where both surfaces use the same piece contribute nothing
    heap = [(-_bound(A, B, float(a), float(b)), float(a), float(b))
            for a, b, same in zip(cuts[:-1], cuts[1:], identical) if not same]
    heapq.heapify(heap)
    while heap:
        neg, a, b = heapq.heappop(heap)
        if -neg <= best + tol:
            break
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            continue
        best = max(best, _sup_at(A, B, m))
        for lo, hi in ((a, m), (m, b)):
            ub = _bound(A, B, lo, hi)
            if ub > best + tol:
                heapq.heappush(heap, (-ub, lo, hi))
    return float(min(best, 1.0))
