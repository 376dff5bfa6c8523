import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltedlines.model import (BoundarySpec, EnsembleState, GridInterval,
                               ModelError, TiltParams, area_functional,
                               check_ordering, gaussian_bridge_mass,
                               tilt_log_weight)


class TestGridInterval:
    def test_endpoints_exact(self):
        g = GridInterval(-3.7, 11.3, 977)
        t = g.times()
        assert t[0] == -3.7 and t[-1] == 11.3
        assert np.all(np.diff(t) > 0)

    def test_validation(self):
        with pytest.raises(ModelError):
            GridInterval(1.0, 1.0, 5)
        with pytest.raises(ModelError):
            GridInterval(0.0, 1.0, 0)

    def test_index_of(self):
        g = GridInterval(0.0, 1.0, 4)
        assert g.index_of(0.5) == 2
        with pytest.raises(ModelError):
            g.index_of(0.3)


class TestAreaFunctional:
    def test_constant_path(self):
        g = GridInterval(0.0, 2.0, 7)
        assert area_functional(np.ones(8), g) == pytest.approx(2.0, abs=1e-14)

    def test_triangle(self):
        g = GridInterval(0.0, 1.0, 2)
        assert area_functional([0.0, 1.0, 0.0], g) == pytest.approx(0.5, abs=1e-14)

    def test_hand_trapezoid(self):
        # 0.125 * (0.3 + 1.1 + 0.9 + 0.1) = 0.3, summing consecutive-pair means
        g = GridInterval(0.0, 1.0, 4)
        val = area_functional([0.0, 0.3, 0.8, 0.1, 0.0], g)
        assert val == pytest.approx(0.125 * (0.3 + 1.1 + 0.9 + 0.1), abs=1e-14)
        assert val == pytest.approx(0.3, abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ModelError):
            area_functional([1.0, 2.0], GridInterval(0.0, 1.0, 4))

    @given(st.integers(2, 30), st.integers(0, 10))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, steps, seed):
        g = GridInterval(0.0, 1.0, steps)
        r = np.random.default_rng(seed)
        f, h = r.normal(size=steps + 1), r.normal(size=steps + 1)
        a, b = 1.7, -0.3
        lhs = area_functional(a * f + b * h, g)
        rhs = a * area_functional(f, g) + b * area_functional(h, g)
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestTiltLogWeight:
    def test_single_line(self):
        g = GridInterval(0.0, 2.0, 10)
        s = EnsembleState(g, np.ones((1, 11)), BoundarySpec.free(),
                          TiltParams(1.0, 2.0))
        assert tilt_log_weight(s) == pytest.approx(-2.0, abs=1e-14)

    def test_two_lines_geometric(self):
        g = GridInterval(0.0, 1.0, 8)
        h = np.vstack([2 * np.ones(9), np.ones(9)])  # ordered; both area 1 test below
        s = EnsembleState(g, np.vstack([np.ones(9) * 2, np.ones(9)]),
                          BoundarySpec.free(), TiltParams(1.0, 2.0))
        # lines have areas 2 and 1: -(1*2 + 2*1) = -4; use equal heights via
        # the documented example instead: both constant 1 is not ordered, so
        # check the formula against independent accumulation
        coef = [1.0, 2.0]
        expect = -(coef[0] * 2.0 + coef[1] * 1.0)
        assert tilt_log_weight(s) == pytest.approx(expect, abs=1e-12)

    def test_equal_tilts_lambda_one(self):
        g = GridInterval(0.0, 1.0, 6)
        h = np.vstack([3 * np.ones(7), 2 * np.ones(7), np.ones(7)])
        s = EnsembleState(g, h, BoundarySpec.free(),
                          TiltParams(1.0, 1.0, diagnostic=True))
        assert tilt_log_weight(s) == pytest.approx(-6.0, abs=1e-12)

    def test_monotone_in_heights(self):
        g = GridInterval(0.0, 1.0, 5)
        h = np.vstack([2 * np.ones(6), np.ones(6)])
        s = EnsembleState(g, h, BoundarySpec.free(), TiltParams(1.0, 2.0))
        base = tilt_log_weight(s)
        s.heights[1] += 0.25
        assert tilt_log_weight(s) < base


class TestGaussianBridgeMass:
    def test_known_values(self):
        assert gaussian_bridge_mass([0.0], [0.0], 1.0) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi), abs=1e-12)
        assert gaussian_bridge_mass([0.0, 1.0], [0.0, 1.0], 1.0) == pytest.approx(
            1.0 / (2 * math.pi), abs=1e-12)
        assert gaussian_bridge_mass([0.0], [1.0], 0.5) == pytest.approx(
            math.pi ** -0.5 * math.exp(-1.0), abs=1e-10)

    def test_duration_domain(self):
        with pytest.raises(ModelError):
            gaussian_bridge_mass([0.0], [0.0], 0.0)

    @given(st.integers(1, 4), st.integers(0, 50))
    @settings(max_examples=40, deadline=None)
    def test_symmetry_and_max_at_diagonal(self, n, seed):
        r = np.random.default_rng(seed)
        x, y = r.normal(size=n), r.normal(size=n)
        d = float(r.uniform(0.1, 3.0))
        assert gaussian_bridge_mass(x, y, d) == pytest.approx(
            gaussian_bridge_mass(y, x, d), rel=1e-13)
        assert gaussian_bridge_mass(x, x, d) >= gaussian_bridge_mass(x, y, d)


class TestCheckOrdering:
    def _state(self, heights, **kw):
        g = GridInterval(0.0, 1.0, heights.shape[1] - 1)
        return EnsembleState(g, heights, BoundarySpec.free(),
                             TiltParams(1.0, 2.0), **kw)

    def test_ordered_lines(self):
        h = np.vstack([2 * np.ones(5), np.ones(5)])
        assert check_ordering(self._state(h)).ok

    def test_tie_reported(self):
        h = np.vstack([2 * np.ones(5), np.ones(5)])
        h[1, 2] = 2.0
        rep = check_ordering(self._state(h))
        assert not rep.ok and rep.index == 2 and rep.line in (0, 1)

    def test_floor_touch(self):
        h = np.ones((1, 5))
        h[0, 2] = 0.0
        assert not check_ordering(self._state(h)).ok

    def test_shift_invariance(self):
        r = np.random.default_rng(3)
        h = np.sort(r.uniform(0.5, 3.0, size=(3, 6)), axis=0)[::-1] + \
            np.arange(3)[::-1][:, None] * 0.01
        s = self._state(h.copy())
        ok1 = check_ordering(s).ok
        s2 = EnsembleState(s.grid, s.heights + 5.0, s.boundary, s.tilt,
                           s.floor + 5.0, s.ceiling + 5.0)
        assert check_ordering(s2).ok == ok1

    def test_frozen_columns_exempt(self):
        h = np.vstack([2 * np.ones(5), np.ones(5)])
        h[:, 2] = 0.0
        frozen = np.zeros(5, bool)
        frozen[[0, 2, 4]] = True
        s = self._state(h, frozen_cols=frozen)
        assert check_ordering(s).ok


class TestBoundarySpec:
    def test_fixed_validation(self):
        BoundarySpec.fixed([2.0, 1.0], [3.0, 0.5])
        BoundarySpec.fixed([0.0, 0.0], [0.0, 0.0])  # zero-boundary limit
        with pytest.raises(ModelError):
            BoundarySpec.fixed([1.0, 2.0], [3.0, 0.5])
        with pytest.raises(ModelError):
            BoundarySpec.fixed([2.0, -1.0], [3.0, 0.5])

    def test_kind_exclusivity(self):
        with pytest.raises(ModelError):
            BoundarySpec(BoundarySpec.zero().kind, np.array([1.0]), None)


class TestTiltParams:
    def test_validation(self):
        with pytest.raises(ModelError):
            TiltParams(0.0, 2.0)
        with pytest.raises(ModelError):
            TiltParams(1.0, 1.0)
        TiltParams(0.0, 1.0, diagnostic=True)

    def test_coefficients(self):
        c = TiltParams(0.5, 3.0).line_coefficients(3)
        assert np.allclose(c, [0.5, 1.5, 4.5])
