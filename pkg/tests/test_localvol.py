from __future__ import annotations

import numpy as np
import pytest

from martfit import (DomainError, GriddedSurface, MarginalDistribution as M, ValidationError,
                     dupire_sigma, euler_simulate, normal_call, quantize)


def gaussian_grid(rate: float, h: float = 0.01, xmax: float = 4.0, tmax: float = 1.0):
    ts = np.linspace(0.0, tmax, int(round(tmax / h)) + 1)
    xs = np.linspace(-xmax, xmax, int(round(2 * xmax / h)) + 1)
    return GriddedSurface.from_function(lambda t, x: normal_call(x, 0.0, 1.0 + rate * t), ts, xs)


def max_err(vol, target, xlim=2.0):
    inner = np.abs(vol.levels) <= xlim
    s = vol.sigma[:, inner]
    return float(np.nanmax(np.abs(s - target)))


class TestDupire:
    @pytest.mark.parametrize("rate, target", [(1.0, 1.0), (2.0, np.sqrt(2.0))])
    def test_gaussian_family(self, rate, target):
        vol = dupire_sigma(gaussian_grid(rate))
        assert max_err(vol, target) <= 1e-3 * target

    def test_refinement_shrinks_error(self):
        errs = [max_err(dupire_sigma(gaussian_grid(1.0, h, 3.0)), 1.0) for h in (0.04, 0.02, 0.01)]
        assert errs[0] > errs[1] > errs[2]

    def test_static_surface_has_zero_vol(self):
        ts, xs = np.linspace(0, 1, 5), np.linspace(-3, 3, 61)
        g = GriddedSurface.from_function(lambda t, x: normal_call(x, 0.0, 1.0) + 0 * t, ts, xs)
        vol = dupire_sigma(g)
        assert np.nanmax(np.abs(vol.sigma)) == 0.0

    def test_boundary_and_flat_cells_masked(self):
        ts, xs = np.linspace(0, 1, 11), np.linspace(-40, 40, 161)
        vol = dupire_sigma(GriddedSurface.from_function(
            lambda t, x: normal_call(x, 0.0, 1.0 + t), ts, xs))
        assert vol.mask[0].all() and vol.mask[-1].all()
        assert vol.mask[:, 0].all() and vol.mask[:, -1].all()
        # far tails have no curvature left
        assert vol.mask[5, 1] and vol.mask[5, -2]
        assert np.isnan(vol.sigma[vol.mask]).all()
        assert not np.isnan(vol.sigma[~vol.mask]).any()

    def test_lattice_errors(self):
        with pytest.raises(ValidationError):
            dupire_sigma(GriddedSurface.from_function(
                lambda t, x: normal_call(x, 0.0, 1.0 + t), np.array([0.0, 1.0]), np.linspace(-1, 1, 5)))
        with pytest.raises(ValidationError):
            dupire_sigma(GriddedSurface.from_function(
                lambda t, x: normal_call(x, 0.0, 1.0 + t), np.array([0.0, 0.1, 0.5]),
                np.linspace(-1, 1, 5)))


class TestEuler:
    def test_zero_vol_keeps_start(self):
        ts, xs = np.linspace(0, 1, 5), np.linspace(-3, 3, 61)
        vol = dupire_sigma(GriddedSurface.from_function(
            lambda t, x: normal_call(x, 0.0, 1.0) + 0 * t, ts, xs))
        init = M([-1.0, 0.5], [1 / 3, 2 / 3])
        p = euler_simulate(vol, init, 500, 2, [0.0, 1.0], 0.05)
        assert np.array_equal(p[:, 0], p[:, 1])
        assert set(np.unique(p[:, 0])) <= {-1.0, 0.5}

    def test_unit_vol_variance(self):
        vol = dupire_sigma(gaussian_grid(1.0, 0.05))
        p = euler_simulate(vol, M.dirac(0.0), 40_000, 4, [0.5, 1.0], 0.01)
        assert abs(p[:, 1].mean()) < 4 * np.sqrt(1.0 / p.shape[0])
        for j, t in enumerate((0.5, 1.0)):
            var = p[:, j].var()
            assert abs(var - t) < 4 * t * np.sqrt(2.0 / p.shape[0])

    def test_deterministic_and_thread_invariant(self):
        vol = dupire_sigma(gaussian_grid(1.0, 0.05))
        init = quantize("normal", (0.0, 1.0), 64)
        a = euler_simulate(vol, init, 20_000, 9, [1.0, 0.25], 0.02, threads=1)
        b = euler_simulate(vol, init, 20_000, 9, [1.0, 0.25], 0.02, threads=4)
        assert np.array_equal(a, b)

    def test_errors(self):
        vol = dupire_sigma(gaussian_grid(1.0, 0.05))
        with pytest.raises(DomainError):
            euler_simulate(vol, M.dirac(0.0), 10, 1, [2.0], 0.01)
        with pytest.raises(DomainError):
            euler_simulate(vol, M.dirac(0.0), 10, 1, [1.0], 0.0)
        with pytest.raises(DomainError):
            euler_simulate(vol, M.dirac(0.0), 0, 1, [1.0], 0.01)
