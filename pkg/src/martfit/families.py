"""Closed-form continuous families and their quantization to finite atoms."""
from __future__ import annotations

import numpy as np
from scipy import special, stats

from .errors import DomainError
from .marginals import MarginalDistribution

FAMILIES = ("normal", "uniform")


def normal_call(x, mean: float = 0.0, variance: float = 1.0):
    """E[(Z - x)_+] for Z ~ Normal(mean, variance)."""
    x = np.asarray(x, dtype=float)
    var = np.asarray(variance, dtype=float)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (mean - x) / sd
        out = sd * stats.norm.pdf(d) + (mean - x) * special.ndtr(d)
    return np.where(var > 0, out, np.maximum(mean - x, 0.0))


def quantize(family: str, params, n_atoms: int) -> MarginalDistribution:
    """Replace each of ``n_atoms`` equal-probability quantile blocks by its
    conditional mean.

    ``normal`` takes (mean, variance); ``uniform`` takes (a, b).
    """
    if n_atoms < 1:
        raise DomainError("n_atoms must be positive")
    family = family.lower()
    probs = np.linspace(0.0, 1.0, n_atoms + 1)
    if family == "normal":
        m, var = (float(p) for p in params)
        if var < 0:
            raise DomainError("variance must be non-negative")
        if var == 0 or n_atoms == 1:
            return MarginalDistribution.dirac(m)
        z = special.ndtri(probs)
        pdf = stats.norm.pdf(z)
        # E[Z | z_i < Z < z_{i+1}] = (pdf(z_i) - pdf(z_{i+1})) / P(block)
        block = (pdf[:-1] - pdf[1:]) * n_atoms
        block = (block - block[::-1]) / 2.0  # exact symmetry about zero
        pos = m + np.sqrt(var) * block
    elif family == "uniform":
        a, b = (float(p) for p in params)
        if not b > a:
            raise DomainError("uniform needs a < b")
        pos = a + (b - a) * (probs[:-1] + probs[1:]) / 2.0
    else:
        raise DomainError(f"unsupported family {family!r}; choose from {FAMILIES}")
    return MarginalDistribution.from_atoms(zip(pos, np.full(n_atoms, 1.0 / n_atoms)))
