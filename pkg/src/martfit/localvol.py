"""Local volatility from a smooth gridded call surface, and an Euler simulator.

The driftless forward equation dC/dt = sigma^2/2 * d2C/dx2 is solved for
sigma on interior lattice cells with central differences.  Simulating
dX = sigma(t, X) dB with the extracted sigma gives an independent route back
to the call surface.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage, special

from . import streams
from .errors import DomainError, ValidationError
from .marginals import GriddedSurface, MarginalDistribution

CURVATURE_FLOOR = 1e-8
SIGMA_CAP = 1e3
NEG_DT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LocalVolGrid:
    times: np.ndarray
    levels: np.ndarray
    sigma: np.ndarray  # NaN on masked cells
    mask: np.ndarray
    n_capped: int = 0

    def filled(self) -> np.ndarray:
        """sigma with each masked cell replaced by its nearest unmasked value."""
        if self.mask.all():
            raise ValidationError("every local-vol cell is masked")
        _, (ii, jj) = ndimage.distance_transform_edt(self.mask, return_indices=True)
        return self.sigma[ii, jj]


def _uniform_step(a: np.ndarray, name: str) -> float:
    if a.size < 3:
        raise ValidationError(f"{name} lattice needs at least 3 points, got {a.size}")
    d = np.diff(a)
    if np.max(np.abs(d - d.mean())) > 1e-9 * max(1.0, abs(d.mean())):
        raise ValidationError(f"{name} lattice is not uniform")
    return float(d.mean())


def dupire_sigma(surface: GriddedSurface, curvature_floor: float = CURVATURE_FLOOR,
                 cap: float = SIGMA_CAP) -> LocalVolGrid:
    """sigma = sqrt(2 C_t / C_xx) on interior cells.

    Cells with C_xx below ``curvature_floor``, with C_t below -1e-12, or with
    sigma above ``cap`` are masked; boundary cells are always masked.
    """
    ht = _uniform_step(surface.times, "time")
    hx = _uniform_step(surface.levels, "level")
    c = surface.values
    ct = (c[2:, 1:-1] - c[:-2, 1:-1]) / (2.0 * ht)
    cxx = (c[1:-1, 2:] - 2.0 * c[1:-1, 1:-1] + c[1:-1, :-2]) / (hx * hx)

    bad = (cxx < curvature_floor) | (ct < -NEG_DT_TOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        sig = np.sqrt(2.0 * np.maximum(ct, 0.0) / cxx)
    capped = ~bad & (sig > cap)
    bad |= capped

    mask = np.ones(c.shape, dtype=bool)
    mask[1:-1, 1:-1] = bad
    sigma = np.full(c.shape, np.nan)
    sigma[1:-1, 1:-1] = np.where(bad, np.nan, sig)
    return LocalVolGrid(surface.times, surface.levels, sigma, mask, int(capped.sum()))


def _normals(seed: int, step: int, lo: int, n: int) -> np.ndarray:
    u = streams.uniforms(seed, streams.EULER, step, 0, lo, n)
    return special.ndtri(u + 2.0 ** -54)


def _interp_uniform(x: np.ndarray, x0: float, h: float, row: np.ndarray) -> np.ndarray:
    """np.interp on the uniform lattice x0 + h * j, constant beyond its ends."""
    pos = np.clip((x - x0) / h, 0.0, row.size - 1.0)
    j = np.minimum(pos.astype(np.intp), row.size - 2)
    w = pos - j
    return row[j] + w * (row[j + 1] - row[j])


def euler_simulate(vol: LocalVolGrid, initial: MarginalDistribution, n_paths: int,
                   seed: int, query_times: Sequence[float], dt: float,
                   threads: int | None = None) -> np.ndarray:
    """Explicit scheme X <- X + sigma(t, X) sqrt(dt) N(0, 1) from the first lattice time.

    sigma is interpolated bilinearly (constant beyond the level lattice).
    Returns an (n_paths, len(query_times)) matrix.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    times = [float(t) for t in query_times]
    if not times:
        raise DomainError("empty query time list")
    t_lo, t_hi = float(vol.times[0]), float(vol.times[-1])
    if any(not t_lo <= t <= t_hi for t in times):
        raise DomainError(f"query times must lie in [{t_lo}, {t_hi}]")
    sig = vol.filled()
    lat_t, lat_x = vol.times, vol.levels
    hx = _uniform_step(lat_x, "level")
    targets = sorted(set(times))

    # step grid shared by all paths: uniform dt, shortened to land on query times
    grid = [t_lo]
    for q in targets:
        while grid[-1] + dt < q - 1e-12 * dt:
            grid.append(grid[-1] + dt)
        if q > grid[-1]:
            grid.append(q)
    grid = np.array(grid)

    rows = []
    for a, b in zip(grid[:-1], grid[1:]):
        i = int(np.clip(np.searchsorted(lat_t, a, side="right") - 1, 0, lat_t.size - 2))
        w = np.clip((a - lat_t[i]) / (lat_t[i + 1] - lat_t[i]), 0.0, 1.0)
        rows.append(((1.0 - w) * sig[i] + w * sig[i + 1], np.sqrt(b - a)))
    col = {q: int(np.searchsorted(grid, q)) for q in targets}

    cum = np.cumsum(initial.weights)

    def run(lo: int, hi: int):
        n = hi - lo
        u0 = streams.uniforms(seed, streams.INIT, 1, 0, lo, n)
        x = initial.positions[np.minimum(np.searchsorted(cum, u0, side="right"), len(initial) - 1)]
        out = {}
        if col.get(t_lo) == 0:
            out[t_lo] = x.copy()
        for step, (row, sq) in enumerate(rows, start=1):
            x = x + _interp_uniform(x, lat_x[0], hx, row) * sq * _normals(seed, step, lo, n)
            t = grid[step]
            if col.get(float(t)) == step:
                out[float(t)] = x.copy()
        return np.column_stack([out[q] for q in times])

    return np.vstack(streams.map_chunks(run, n_paths, threads))
