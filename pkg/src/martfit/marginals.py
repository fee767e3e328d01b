"""Finite-atom marginals, their call functions, and call-surface validation.

A marginal law mu is carried in two equivalent forms:

* ``MarginalDistribution`` -- sorted atoms and weights;
* ``CallSlice`` -- the convex piecewise-linear function C(x) = E[(X - x)_+],
  stored by its values at a set of knots.

Slopes of C lie in [-1, 0]; ``1 + C'(x+)`` is the distribution function.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

PROB_TOL = 1e-9
CALL_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarginalDistribution:
    """Probability law with finitely many atoms.

    Positions are strictly increasing, weights positive and summing to one
    within ``PROB_TOL``.
    """

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = _frozen(self.positions).reshape(-1)
        w = _frozen(self.weights).reshape(-1)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        if pos.size == 0:
            raise ValidationError("marginal has no atoms")
        if pos.size != w.size:
            raise ValidationError("positions and weights differ in length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValidationError("non-finite atom position or weight")
        if np.any(np.diff(pos) <= 0):
            raise ValidationError("atom positions must be strictly increasing")
        if np.any(w <= 0):
            raise ValidationError("atom weights must be positive")
        total = float(w.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"weights sum to {total:.12g}, not 1")

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]], *,
                   min_weight: float = 0.0) -> "MarginalDistribution":
        """Build from unsorted (position, weight) pairs.

        Repeated positions are merged. Atoms with weight ``<= min_weight``
        are dropped, which lets callers discard round-off crumbs.
        """
        merged: dict[float, float] = {}
        for x, w in atoms:
            merged[float(x)] = merged.get(float(x), 0.0) + float(w)
        keep = sorted((x, w) for x, w in merged.items() if w > min_weight)
        if not keep:
            raise ValidationError("marginal has no atoms")
        pos, w = zip(*keep)
        return cls(np.array(pos), np.array(w))

    @classmethod
    def dirac(cls, x: float) -> "MarginalDistribution":
        return cls(np.array([float(x)]), np.array([1.0]))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    def __len__(self) -> int:
        return self.positions.size

    def __repr__(self) -> str:
        body = ", ".join(f"({x:.6g}, {w:.6g})" for x, w in self.atoms[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"MarginalDistribution([{body}{more}])"

    def mean(self) -> float:
        return float(np.dot(self.weights, self.positions))

    def cdf(self, x):
        """Right-continuous distribution function mu((-inf, x])."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.positions, x, side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def call(self, x):
        return call_from_marginal(self, x)

    def same_atoms(self, other: "MarginalDistribution", tol: float = CALL_TOL) -> bool:
        return (len(self) == len(other)
                and np.array_equal(self.positions, other.positions)
                and bool(np.all(np.abs(self.weights - other.weights) <= tol)))


def mean(dist: MarginalDistribution) -> float:
    """Mean of a finite-atom law."""
    return dist.mean()


def call_from_marginal(dist: MarginalDistribution, x):
    """C(x) = sum_i w_i (x_i - x)_+ evaluated at a scalar or array of levels."""
    xs = np.asarray(x, dtype=float)
    payoff = np.maximum(dist.positions - xs[..., None], 0.0)
    out = payoff @ dist.weights
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class CallSlice:
    """Convex piecewise-linear call function of one marginal.

    The function is linear between ``knots``, has slope -1 left of the first
    knot and is constant (zero) right of the last one.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = _frozen(self.knots).reshape(-1)
        v = _frozen(self.values).reshape(-1)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        if k.size == 0 or k.size != v.size:
            raise ValidationError("call slice needs matching, non-empty knots and values")
        if np.any(np.diff(k) <= 0):
            raise ValidationError("call slice knots must be strictly increasing")

    @classmethod
    def from_marginal(cls, dist: MarginalDistribution) -> "CallSlice":
        pos, w = dist.positions, dist.weights
        # suffix sums give C at each atom in O(n)
        tail_w = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
        tail_wx = np.concatenate([np.cumsum((w * pos)[::-1])[::-1][1:], [0.0]])
        vals = tail_wx - pos * tail_w
        vals[-1] = 0.0
        return cls(pos, vals)

    @classmethod
    def from_function(cls, fn, knots: Sequence[float]) -> "CallSlice":
        knots = np.asarray(knots, dtype=float)
        return cls(knots, np.asarray(fn(knots), dtype=float))

    @property
    def mean(self) -> float:
        return float(self.values[0] + self.knots[0])

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        k, v = self.knots, self.values
        out = np.interp(xs, k, v)
        out = np.where(xs < k[0], v[0] + (k[0] - xs), out)
        return float(out) if out.ndim == 0 else out

    def segment_slopes(self) -> np.ndarray:
        """Slopes on (-inf, k0), each knot interval, and (k_last, inf)."""
        inner = np.diff(self.values) / np.diff(self.knots)
        return np.concatenate([[-1.0], inner, [0.0]])

    def right_slope(self, x):
        idx = np.searchsorted(self.knots, x, side="right")
        return self.segment_slopes()[idx]

    def left_slope(self, x):
        idx = np.searchsorted(self.knots, x, side="left")
        return self.segment_slopes()[idx]

    def cdf(self, x):
        return self.right_slope(x) + 1.0

    def problems(self, tol: float = CALL_TOL) -> list[str]:
        """Violated slice invariants, empty when the slice is admissible."""
        out = []
        slopes = self.segment_slopes()
        if abs(self.values[-1]) > tol:
            out.append(f"call does not vanish at the right ({self.values[-1]:.3g})")
        if np.any(slopes < -1.0 - tol) or np.any(slopes > tol):
            out.append("slope outside [-1, 0]")
        if np.any(np.diff(slopes) < -tol):
            out.append("non-convex in x")
        return out


def marginal_from_call_slice(slc: CallSlice, tol: float = CALL_TOL) -> MarginalDistribution:
    """Recover atoms from the slope jumps of a call slice.

    Knots whose slope jump is within ``tol`` of zero are not atoms.
    """
    bad = slc.problems(tol)
    if bad:
        raise ValidationError("invalid call slice: " + "; ".join(bad))
    masses = np.diff(slc.segment_slopes())
    keep = masses > tol
    pos, w = slc.knots[keep], masses[keep]
    return MarginalDistribution(pos, w / w.sum())


def check_convex_order(lo: MarginalDistribution, hi: MarginalDistribution) -> bool:
    """True iff ``lo`` precedes ``hi`` in the convex order.

    Both calls are piecewise linear with kinks at atoms, so comparing them at
    the union of atom positions is exact.
    """
    if abs(lo.mean() - hi.mean()) > PROB_TOL:
        return False
    grid = np.union1d(lo.positions, hi.positions)
    return bool(np.all(call_from_marginal(lo, grid) <= call_from_marginal(hi, grid) + CALL_TOL))


@dataclass(frozen=True, eq=False)
class CallSurface:
    """Marginals at strictly increasing grid times."""

    times: np.ndarray
    marginals: tuple

    def __post_init__(self):
        t = _frozen(self.times).reshape(-1)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if t.size == 0:
            raise ValidationError("surface has no grid times")
        if t.size != len(self.marginals):
            raise ValidationError("one marginal per grid time is required")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("grid times must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, MarginalDistribution]]) -> "CallSurface":
        pairs = list(pairs)
        return cls(np.array([t for t, _ in pairs]), tuple(m for _, m in pairs))

    @cached_property
    def slices(self) -> tuple[CallSlice, ...]:
        return tuple(CallSlice.from_marginal(m) for m in self.marginals)

    def __len__(self) -> int:
        return self.times.size

    def support(self) -> tuple[float, float]:
        lo = min(float(m.positions[0]) for m in self.marginals)
        hi = max(float(m.positions[-1]) for m in self.marginals)
        return lo, hi


@dataclass(frozen=True, eq=False)
class GriddedSurface:
    """Call values on a (time, level) lattice; ``values[i, j] = C(t_i, x_j)``."""

    times: np.ndarray
    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times).reshape(-1)
        x = _frozen(self.levels).reshape(-1)
        v = _frozen(self.values)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "levels", x)
        object.__setattr__(self, "values", v)
        if v.shape != (t.size, x.size):
            raise ValidationError(f"values shape {v.shape} does not match lattice {(t.size, x.size)}")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(x) <= 0):
            raise ValidationError("lattice coordinates must be strictly increasing")

    @classmethod
    def from_function(cls, fn, times, levels) -> "GriddedSurface":
        times = np.asarray(times, dtype=float)
        levels = np.asarray(levels, dtype=float)
        tt, xx = np.meshgrid(times, levels, indexing="ij")
        return cls(times, levels, np.asarray(fn(tt, xx), dtype=float))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid

    def __str__(self) -> str:
        return "valid" if self.valid else "\n".join(self.violations)


def _label(k: int, t: float) -> str:
    return f"block {k + 1} (t={t:.17g})"


def _validate_call_surface(surface: CallSurface) -> list[str]:
    out = []
    for k, (t, m) in enumerate(zip(surface.times, surface.marginals)):
        total = float(m.weights.sum())
        if abs(total - 1.0) > PROB_TOL:
            out.append(f"{_label(k, t)}: weights sum to {total:.12g}")
        bad = CallSlice.from_marginal(m).problems()
        out.extend(f"{_label(k, t)}: {p}" for p in bad)
    a0 = surface.marginals[0].mean()
    for k, (t, m) in enumerate(zip(surface.times, surface.marginals)):
        if abs(m.mean() - a0) > PROB_TOL:
            out.append(f"means differ: {_label(k, t)} has mean {m.mean():.12g}, "
                       f"first block has {a0:.12g}")
    for k in range(len(surface) - 1):
        lo, hi = surface.marginals[k], surface.marginals[k + 1]
        grid = np.union1d(lo.positions, hi.positions)
        gap = call_from_marginal(lo, grid) - call_from_marginal(hi, grid)
        j = int(np.argmax(gap))
        if gap[j] > CALL_TOL:
            out.append(f"call decreasing in t between t={surface.times[k]:.17g} and "
                       f"t={surface.times[k + 1]:.17g} at x={grid[j]:.17g} (by {gap[j]:.3g})")
    return out


def _validate_gridded(surface: GriddedSurface, tol: float = PROB_TOL) -> list[str]:
    out = []
    v, x = surface.values, surface.levels
    if not np.all(np.isfinite(v)):
        out.append("non-finite call values")
        return out
    if v.min() < -tol:
        out.append(f"negative call value ({v.min():.3g})")
    if v.shape[0] > 1:
        dt = np.diff(v, axis=0)
        if dt.min() < -tol:
            i, j = np.unravel_index(np.argmin(dt), dt.shape)
            out.append(f"call decreasing in t between t={surface.times[i]:.17g} and "
                       f"t={surface.times[i + 1]:.17g} at x={x[j]:.17g} (by {-dt[i, j]:.3g})")
    if v.shape[1] > 1:
        slopes = np.diff(v, axis=1) / np.diff(x)
        if slopes.min() < -1.0 - tol or slopes.max() > tol:
            out.append("slope outside [-1, 0]")
        if v.shape[1] > 2:
            curv = np.diff(slopes, axis=1)
            if curv.min() < -tol:
                i, j = np.unravel_index(np.argmin(curv), curv.shape)
                out.append(f"non-convex in x at t={surface.times[i]:.17g}, x={x[j + 1]:.17g}")
    return out


def validate_cp(surface) -> ValidationReport:
    """List every violated call-surface condition; empty report iff valid.

    Accepts a ``CallSurface`` (checks weights, convexity, equal means and
    convex order between consecutive grid times) or a ``GriddedSurface``
    (checks non-negativity, monotonicity in t, slope range and discrete
    convexity in x).
    """
    if isinstance(surface, GriddedSurface):
        return ValidationReport(tuple(_validate_gridded(surface)))
    return ValidationReport(tuple(_validate_call_surface(surface)))
