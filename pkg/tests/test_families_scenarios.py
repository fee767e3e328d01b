from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from martfit import (CallSurface, DomainError, MarginalDistribution as M, build_scenario,
                     check_convex_order, gaussian_family, normal_call, quantize, scenario_gap,
                     scenario_sticky, validate_cp)
from martfit.scenarios import SCENARIOS


class TestNormalCall:
    @pytest.mark.parametrize("x, m, v", [(0.0, 0.0, 1.0), (0.7, -0.2, 2.5), (-1.5, 0.3, 0.4)])
    def test_against_quadrature(self, x, m, v):
        ref, _ = integrate.quad(lambda z: (z - x) * stats.norm.pdf(z, m, np.sqrt(v)), x, np.inf)
        assert normal_call(x, m, v) == pytest.approx(ref, abs=1e-10)

    def test_zero_variance(self):
        np.testing.assert_array_equal(normal_call([-1.0, 2.0], 0.5, 0.0), [1.5, 0.0])


class TestQuantize:
    def test_normal_two_atoms(self):
        q = quantize("normal", (0.0, 1.0), 2)
        np.testing.assert_allclose(q.positions, [-np.sqrt(2 / np.pi), np.sqrt(2 / np.pi)], atol=1e-15)

    def test_uniform_four_atoms(self):
        q = quantize("uniform", (0.0, 1.0), 4)
        np.testing.assert_allclose(q.positions, [1 / 8, 3 / 8, 5 / 8, 7 / 8], atol=1e-15)
        np.testing.assert_allclose(q.weights, [0.25] * 4)

    @pytest.mark.parametrize("family, params, mean", [("normal", (1.5, 2.0), 1.5),
                                                     ("uniform", (-1.0, 3.0), 1.0)])
    def test_single_atom_is_mean(self, family, params, mean):
        assert quantize(family, params, 1).atoms == [(pytest.approx(mean), 1.0)]

    @given(st.sampled_from(["normal", "uniform"]), st.floats(-5, 5), st.floats(0.1, 4),
           st.integers(1, 200))
    def test_mean_preserved(self, family, a, w, n):
        params = (a, w) if family == "normal" else (a, a + w)
        q = quantize(family, params, n)
        target = a if family == "normal" else a + w / 2
        assert q.mean() == pytest.approx(target, abs=1e-12 * max(1.0, abs(a) + w))

    @pytest.mark.parametrize("family", ["normal", "uniform"])
    def test_refinement_is_convex_ordered(self, family):
        for n in (1, 2, 4, 8, 16, 32):
            assert check_convex_order(quantize(family, (0.0, 1.0), n), quantize(family, (0.0, 1.0), 2 * n))

    def test_normal_symmetric(self):
        q = quantize("normal", (0.0, 1.0), 7)
        np.testing.assert_array_equal(q.positions, -q.positions[::-1])

    def test_errors(self):
        with pytest.raises(DomainError):
            quantize("cauchy", (0.0, 1.0), 4)
        with pytest.raises(DomainError):
            quantize("normal", (0.0, 1.0), 0)
        with pytest.raises(DomainError):
            quantize("uniform", (1.0, 1.0), 3)


class TestScenarios:
    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_all_valid(self, name):
        assert validate_cp(build_scenario(name)).valid

    def test_unknown(self):
        with pytest.raises(DomainError):
            build_scenario("nope")

    def test_gap_splits_by_chord(self):
        base = CallSurface([0.0, 1.0], (M.dirac(0.5), M([-1.0, 0.5, 2.0], [0.25, 0.5, 0.25])))
        g = scenario_gap(base)
        assert g.marginals[0].atoms == [(0.0, 0.5), (1.0, 0.5)]
        assert g.marginals[1].atoms == [(-1.0, 0.25), (0.0, 0.25), (1.0, 0.25), (2.0, 0.25)]

    def test_gap_family_has_no_interior_mass(self):
        for m in build_scenario("gap").marginals:
            assert not np.any((m.positions > 0) & (m.positions < 1))
            assert m.mean() == pytest.approx(0.5, abs=1e-12)

    def test_gap_calls_agree_outside(self):
        base = gaussian_family([0.0, 1.0], mean=0.5)
        g = scenario_gap(base)
        xs = np.concatenate([np.linspace(-4, 0, 41), np.linspace(1, 5, 41)])
        for a, b in zip(base.marginals, g.marginals):
            np.testing.assert_allclose(a.call(xs), b.call(xs), atol=1e-12)

    def test_sticky_mass(self):
        s = build_scenario("sticky")
        for m in s.marginals:
            assert dict(m.atoms)[0.0] == 0.5
        d = CallSurface([0.0, 1.0], (M.dirac(0.0), M.dirac(0.0)))
        assert scenario_sticky(d).marginals[0].atoms == [(0.0, 1.0)]

    def test_sticky_needs_zero_mean(self):
        with pytest.raises(DomainError):
            scenario_sticky(gaussian_family([0.0, 1.0], mean=1.0))
