"""Scenario builders: gap and sticky transforms, and the built-in corpus."""
from __future__ import annotations

import numpy as np

from .errors import DomainError, ValidationError
from .families import quantize
from .marginals import (PROB_TOL, CallSlice, CallSurface, MarginalDistribution,
                        marginal_from_call_slice, validate_cp)


def _require_valid(surface: CallSurface, what: str) -> None:
    report = validate_cp(surface)
    if not report.valid:
        raise ValidationError(f"{what}: " + "; ".join(report.violations))


def _gap_marginal(m: MarginalDistribution) -> MarginalDistribution:
    inside = (m.positions > 0.0) & (m.positions < 1.0)
    if not inside.any():
        return m
    slc = CallSlice.from_marginal(m)
    knots = np.union1d(m.positions[~inside], [0.0, 1.0])
    vals = np.asarray(slc(knots))
    vals[-1] = 0.0 if knots[-1] >= m.positions[-1] else vals[-1]
    return marginal_from_call_slice(CallSlice(knots, vals))


def scenario_gap(base: CallSurface) -> CallSurface:
    """Replace every slice on (0, 1) by its chord; mass there moves to {0, 1}."""
    _require_valid(base, "invalid base surface")
    out = CallSurface(base.times, tuple(_gap_marginal(m) for m in base.marginals))
    _require_valid(out, "gap scenario broke the call-surface conditions")
    return out


def _sticky_marginal(m: MarginalDistribution) -> MarginalDistribution:
    atoms = [(x, 0.5 * w) for x, w in m.atoms] + [(0.0, 0.5)]
    return MarginalDistribution.from_atoms(atoms)


def scenario_sticky(base: CallSurface) -> CallSurface:
    """Average each slice with the call of a unit atom at 0."""
    _require_valid(base, "invalid base surface")
    for t, m in zip(base.times, base.marginals):
        if abs(m.mean()) > PROB_TOL:
            raise DomainError(f"sticky scenario needs mean 0; marginal at t={t} has mean {m.mean():.6g}")
    out = CallSurface(base.times, tuple(_sticky_marginal(m) for m in base.marginals))
    _require_valid(out, "sticky scenario broke the call-surface conditions")
    return out


def gaussian_family(times, n_atoms: int = 16, mean: float = 0.0,
                    var0: float = 1.0, rate: float = 1.0) -> CallSurface:
    """Quantized Normal(mean, var0 + rate * t) at each time, quantized per time.

    Raises ``ValidationError`` if quantization breaks the convex order.
    """
    times = np.asarray(times, dtype=float)
    dists = tuple(quantize("normal", (mean, var0 + rate * t), n_atoms) for t in times)
    out = CallSurface(times, dists)
    _require_valid(out, "quantized family is not a valid call surface")
    return out


def _pair_a() -> CallSurface:
    return CallSurface([0.0, 1.0], (MarginalDistribution.dirac(0.0),
                                    MarginalDistribution([-1.0, 1.0], [0.5, 0.5])))


def _pair_b() -> CallSurface:
    third = 1.0 / 3.0
    return CallSurface([0.0, 1.0], (MarginalDistribution.dirac(0.0),
                                    MarginalDistribution([-1.0, 0.0, 1.0], [third] * 3)))


def _chain3() -> CallSurface:
    third = 1.0 / 3.0
    return CallSurface([0.0, 1.0, 2.0], (MarginalDistribution.dirac(0.0),
                                         MarginalDistribution([-1.0, 1.0], [0.5, 0.5]),
                                         MarginalDistribution([-2.0, 0.0, 2.0], [third] * 3)))


_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)

SCENARIOS = {
    "pair-a": ("delta 0 at t=0, then +-1 with equal weight at t=1", _pair_a),
    "pair-b": ("delta 0 at t=0, then -1, 0, 1 with equal weight at t=1", _pair_b),
    "chain3": ("delta 0, +-1, then -2, 0, 2 at t = 0, 1, 2", _chain3),
    "gaussian": ("Normal(0, 1+t) quantized to 16 atoms at t = 0, .25, .5, .75, 1",
                 lambda: gaussian_family(_GRID)),
    "gap": ("Normal(0.5, 1+t) family with no mass in (0, 1)",
            lambda: scenario_gap(gaussian_family(_GRID, mean=0.5))),
    "sticky": ("Normal(0, 1+t) family mixed half-and-half with an atom at 0",
               lambda: scenario_sticky(gaussian_family(_GRID))),
}


def build_scenario(name: str) -> CallSurface:
    try:
        return SCENARIOS[name][1]()
    except KeyError:
        raise DomainError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
