from __future__ import annotations

import numpy as np
import pytest
from conftest import pairs
from hypothesis import given, settings
from hypothesis import strategies as st

from martfit import (CallSlice, CallSurface, GriddedSurface, MarginalDistribution as M,
                     ValidationError, call_from_marginal, check_convex_order,
                     marginal_from_call_slice, mean, normal_call, validate_cp)

THIRD = 1.0 / 3.0


def laws():
    # atoms on a 0.01 lattice: slopes between sub-ulp neighbours carry no information
    return st.lists(st.tuples(st.integers(-2000, 2000).map(lambda i: i / 100),
                              st.floats(0.01, 1.0)),
                    min_size=1, max_size=12).map(_normalise)


def _normalise(atoms):
    total = sum(w for _, w in atoms)
    return M.from_atoms((x, w / total) for x, w in atoms)


class TestMarginalDistribution:
    def test_rejects_bad_weights(self):
        with pytest.raises(ValidationError, match="sum"):
            M([0.0, 1.0], [0.5, 0.4])
        with pytest.raises(ValidationError, match="positive"):
            M([0.0, 1.0], [1.2, -0.2])

    def test_rejects_unsorted_or_empty(self):
        with pytest.raises(ValidationError):
            M([1.0, 0.0], [0.5, 0.5])
        with pytest.raises(ValidationError):
            M([], [])

    def test_from_atoms_merges_duplicates(self):
        m = M.from_atoms([(1.0, 0.25), (-1.0, 0.5), (1.0, 0.25)])
        assert m.atoms == [(-1.0, 0.5), (1.0, 0.5)]

    @pytest.mark.parametrize("law, expected", [
        (M.dirac(0.0), 0.0),
        (M([-1.0, 1.0], [0.5, 0.5]), 0.0),
        (M([-1.0, 0.0, 1.0], [THIRD] * 3), 0.0),
        (M([-1.0, 2.0], [0.5, 0.5]), 0.5),
    ])
    def test_mean(self, law, expected):
        assert mean(law) == pytest.approx(expected, abs=1e-15)

    def test_call_values(self):
        m = M([-1.0, 1.0], [0.5, 0.5])
        np.testing.assert_allclose(call_from_marginal(m, [-2.0, -1.0, 0.0, 1.0, 2.0]),
                                   [2.0, 1.0, 0.5, 0.0, 0.0])

    def test_cdf_right_continuous(self):
        m = M([-1.0, 1.0], [0.5, 0.5])
        assert m.cdf(-1.0) == 0.5
        assert m.cdf(-1.0 - 1e-12) == 0.0
        assert m.cdf(1.0) == pytest.approx(1.0)


class TestCallSlice:
    def test_shape_outside_knots(self):
        s = CallSlice.from_marginal(M([-1.0, 1.0], [0.5, 0.5]))
        assert s(-3.0) == pytest.approx(3.0)
        assert s(5.0) == 0.0
        assert s.mean == pytest.approx(0.0)

    @given(laws())
    def test_round_trip_positions_exact(self, law):
        back = marginal_from_call_slice(CallSlice.from_marginal(law))
        assert np.array_equal(back.positions, law.positions)
        assert np.max(np.abs(back.weights - law.weights)) <= 1e-12 * max(1.0, np.abs(law.positions).max())

    @given(laws())
    def test_right_slope_is_cdf(self, law):
        s = CallSlice.from_marginal(law)
        xs = np.sort(np.concatenate([law.positions, np.linspace(-30, 30, 241)]))
        f = s.cdf(xs)
        assert np.all(np.diff(f) >= -1e-12)
        assert s.cdf(-1e6) == 0.0
        assert s.cdf(1e6) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(f, law.cdf(xs), atol=1e-9)

    @given(laws(), st.lists(st.floats(-30, 30), min_size=3, max_size=3, unique=True))
    def test_call_is_convex(self, law, pts):
        x1, x2, x3 = sorted(pts)
        c1, c2, c3 = call_from_marginal(law, [x1, x2, x3])
        lam = (x3 - x2) / (x3 - x1)
        assert c2 <= lam * c1 + (1 - lam) * c3 + 1e-12 * max(1.0, abs(c1), abs(c3))

    def test_problems_reported(self):
        bad = CallSlice(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.2, 0.1]))
        assert any("vanish" in p for p in bad.problems())
        concave = CallSlice(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.9, 0.0]))
        assert "non-convex in x" in concave.problems()


class TestConvexOrder:
    @pytest.mark.parametrize("lo, hi, expected", [
        (M.dirac(0.0), M([-1.0, 0.0, 1.0], [THIRD] * 3), True),
        (M([-1.0, 1.0], [0.5, 0.5]), M([-1.0, 1.0], [0.5, 0.5]), True),
        (M.dirac(0.0), M([-1.0, 2.0], [0.5, 0.5]), False),
        (M([-1.0, 1.0], [0.5, 0.5]), M.dirac(0.0), False),
    ])
    def test_examples(self, lo, hi, expected):
        assert check_convex_order(lo, hi) is expected

    @given(pairs())
    def test_spread_is_ordered(self, pair):
        lo, hi = pair
        assert check_convex_order(lo, hi)

    @settings(max_examples=60)
    @given(pairs())
    def test_antisymmetry(self, pair):
        lo, hi = pair
        if check_convex_order(hi, lo):
            grid = np.union1d(lo.positions, hi.positions)
            np.testing.assert_allclose(lo.call(grid), hi.call(grid), atol=1e-12)


class TestValidateCP:
    def test_valid_pair(self, pair_a):
        assert validate_cp(pair_a).valid

    def test_names_offending_block(self):
        s = CallSurface([0.0, 1.0], (M([-1.0, 1.0], [0.5, 0.5]), M.dirac(0.0)))
        report = validate_cp(s)
        assert not report.valid
        assert any("decreasing in t" in v for v in report.violations)

    def test_mean_mismatch(self):
        s = CallSurface([0.0, 1.0], (M.dirac(0.0), M([-1.0, 2.0], [0.5, 0.5])))
        assert any("means differ" in v and "block 2" in v for v in validate_cp(s).violations)

    def test_surface_structure(self):
        with pytest.raises(ValidationError):
            CallSurface([1.0, 0.0], (M.dirac(0.0), M.dirac(0.0)))
        with pytest.raises(ValidationError):
            CallSurface([0.0], ())

    def test_gridded_gaussian_valid(self):
        g = GriddedSurface.from_function(lambda t, x: normal_call(x, 0.0, 1.0 + t),
                                         np.linspace(0, 1, 11), np.linspace(-3, 3, 61))
        assert validate_cp(g).valid

    def test_gridded_violations(self):
        t, x = np.linspace(0, 1, 3), np.linspace(-1, 1, 5)
        decreasing = GriddedSurface.from_function(lambda tt, xx: normal_call(xx, 0.0, 2.0 - tt), t, x)
        assert any("decreasing in t" in v for v in validate_cp(decreasing).violations)
        concave = GriddedSurface.from_function(lambda tt, xx: 0.5 - 0.1 * xx ** 2 + 0 * tt, t, x)
        assert any("non-convex" in v for v in validate_cp(concave).violations)
