import math

import numpy as np
import pytest

from tiltedlines.bridge import (bridge_log_density, bridge_point_conditional,
                                sample_bridge)
from tiltedlines.estimators import ks_2sample
from tiltedlines.model import GridInterval, ModelError
from tiltedlines.rng import RngStream


class TestSampleBridge:
    def test_endpoints_pinned_exactly(self, rng):
        g = GridInterval(-1.0, 3.0, 37)
        for _ in range(20):
            p = sample_bridge(g, 0.7, -1.2, rng)
            assert p[0] == 0.7 and p[-1] == -1.2

    def test_interior_moments(self, rng):
        # closed-form bridge covariance t(1-t) on [0,1]: var at 1/2 is 1/4
        g = GridInterval(0.0, 1.0, 8)
        n = 10 ** 5
        vals = np.empty(n)
        for i in range(n):
            vals[i] = sample_bridge(g, 0.0, 0.0, rng)[4]
        se_mean = 0.5 / math.sqrt(n)
        assert abs(vals.mean()) < 4 * se_mean
        var = vals.var()
        se_var = 0.25 * math.sqrt(2.0 / n)
        assert abs(var - 0.25) < 4 * se_var

    def test_linear_mean(self, rng):
        g = GridInterval(0.0, 1.0, 4)
        n = 10 ** 5
        vals = np.empty(n)
        for i in range(n):
            vals[i] = sample_bridge(g, 0.0, 1.0, rng)[1]
        assert abs(vals.mean() - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 1.0) / math.sqrt(n)

    def test_reproducible(self):
        g = GridInterval(0.0, 2.0, 16)
        p1 = sample_bridge(g, 0.0, 0.0, RngStream(4, 1))
        p2 = sample_bridge(g, 0.0, 0.0, RngStream(4, 1))
        assert np.array_equal(p1, p2)

    def test_markov_consistency(self, rng):
        # value at t=0.25: a full bridge on [0,1], versus drawing the midpoint
        # from its exact conditional and bridging [0, 0.5] to it
        g = GridInterval(0.0, 1.0, 8)
        gl = GridInterval(0.0, 0.5, 4)
        n = 10 ** 4
        direct = np.empty(n)
        comp = np.empty(n)
        for i in range(n):
            direct[i] = sample_bridge(g, 0.0, 0.0, rng)[2]
        mean, var = bridge_point_conditional(0.0, 0.0, 1.0, 0.0, 0.5)
        for i in range(n):
            mid = mean + math.sqrt(var) * rng.normal()
            comp[i] = sample_bridge(gl, 0.0, mid, rng)[2]
        _, p = ks_2sample(direct, comp)
        assert p > 0.01


class TestPointConditional:
    def test_examples(self):
        assert bridge_point_conditional(0, 0, 1, 0, 0.5) == pytest.approx((0.0, 0.25))
        assert bridge_point_conditional(0, 1, 4, 3, 2.0) == pytest.approx((2.0, 1.0))

    def test_pinning_limit(self):
        mean, var = bridge_point_conditional(0, 0.8, 1, 0.1, 1e-9)
        assert mean == pytest.approx(0.8, abs=1e-8)
        assert var < 1e-8

    def test_domain(self):
        with pytest.raises(ModelError):
            bridge_point_conditional(0, 0, 1, 0, 1.5)


class TestLogDensity:
    def test_one_step_zero(self):
        g = GridInterval(0.0, 1.0, 1)
        assert bridge_log_density([0.3, 0.9], g, 0.3, 0.9) == 0.0

    def test_two_step_value(self):
        # log N(v; 0, 0.25) at v=0 is -0.5*log(2*pi*0.25) = -0.2257913526
        g = GridInterval(0.0, 1.0, 2)
        val = bridge_log_density([0.0, 0.0, 0.0], g, 0.0, 0.0)
        assert val == pytest.approx(-0.2257913526, abs=1e-9)

    def test_translation_invariance(self):
        g = GridInterval(0.0, 1.0, 5)
        path = np.array([0.0, 0.4, -0.2, 0.5, 0.1, 0.3])
        v1 = bridge_log_density(path, g, 0.0, 0.3)
        v2 = bridge_log_density(path + 2.5, g, 2.5, 2.8)
        assert v1 == pytest.approx(v2, abs=1e-12)

    def test_normalized_density(self):
        # quadrature of exp(log density) over two interior points equals 1
        g = GridInterval(0.0, 1.0, 3)
        xg, wg = np.polynomial.legendre.leggauss(200)
        lim = 6.0
        x = lim * xg
        w = lim * wg
        total = 0.0
        for i, v1 in enumerate(x):
            for j, v2 in enumerate(x):
                ld = bridge_log_density([0.0, v1, v2, 0.0], g, 0.0, 0.0)
                total += w[i] * w[j] * math.exp(ld)
        assert total == pytest.approx(1.0, abs=1e-6)
