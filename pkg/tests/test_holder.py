import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfplab.coeffs import cylinder_membership, preset
from kfplab.errors import InputError, ResolutionError
from kfplab.holder import (boundary_exponent, fit_exponent, holder_seminorm, initial_time_profile,
                           kinetic_distance, max_radius, oscillation, oscillation_profile, rescaled_oscillation)
from kfplab.solver import GridSpec, ScalarField


def grid(n=48, t=(-1.0, 0.0)):
    return GridSpec(n, n, n, 1, t, (-1.0, 1.0), (-1.5, 1.5))


def field_of(g, fn):
    T, X, V = g.mesh()
    return ScalarField(g, np.broadcast_to(fn(T, X[..., 0], V[..., 0]), g.shape).astype(float).copy())


Z0 = (0.0, np.array([0.1]), np.array([0.2]))


def brute_force_osc(f, z0, r, bv0):
    """Loop over every cell with scalar arithmetic."""
    g = f.grid
    t0, x0, v0 = z0[0], float(z0[1][0]), float(z0[2][0])
    L = g.x_lengths[0]
    ts, xs, vs = g.axis_coords()
    hits = []
    for i, t in enumerate(ts):
        dt = t - t0
        if not (-r * r < dt <= 0):
            continue
        for j, x in enumerate(xs):
            dx = x - x0 - dt * bv0
            dx -= L * round(dx / L)
            if abs(dx) >= r ** 3:
                continue
            for k, v in enumerate(vs):
                if abs(v - v0) < r:
                    hits.append(f.values[i, j, k])
    return max(hits) - min(hits)


class TestOscillation:
    def test_constant(self):
        g = grid(96)
        f = field_of(g, lambda T, X, V: 0 * T + 2.5)
        assert oscillation(f, Z0, 0.5, [0.0]) == 0.0
        prof = oscillation_profile(f, None, 100.0, (0.0, [0.0], [0.0]), preset("free_streaming", 1))
        assert prof.beta_fit == math.inf and prof.r_squared == 1.0 and prof.theta1_hat == 1.0

    @pytest.mark.parametrize("r", [0.8, 0.4, 0.2])
    def test_linear_in_v(self, r):
        g = grid(64)
        f = field_of(g, lambda T, X, V: V + 0 * T + 0 * X)
        dv = g.dv[0]
        osc = oscillation(f, Z0, r, [0.2])
        assert 2 * r - 2 * dv <= osc <= 2 * r

    @pytest.mark.parametrize("bv0", [0.0, 0.7, -1.3])
    def test_slanted_cylinder_matches_enumeration(self, bv0):
        g = GridSpec(24, 48, 24, 1, (-1.0, 0.0), (-1.0, 1.0), (-1.5, 1.5))
        f = field_of(g, lambda T, X, V: np.sin(np.pi * X) + 0.3 * T * V)
        for r in (0.9, 0.6):
            assert oscillation(f, Z0, r, [bv0]) == brute_force_osc(f, Z0, r, bv0)

    def test_too_few_cells(self):
        g = grid(16)
        f = field_of(g, lambda T, X, V: V + 0 * T)
        with pytest.raises(ResolutionError):
            oscillation(f, Z0, 0.05, [0.0])

    def test_nested_monotone(self):
        g = grid(48)
        f = ScalarField(g, np.random.default_rng(0).normal(size=g.shape))
        rs = [0.9, 0.7, 0.5, 0.3]
        osc = [oscillation(f, Z0, r, [0.4]) for r in rs]
        assert all(a >= b for a, b in zip(osc, osc[1:]))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(-10, 10), st.floats(0.3, 0.9))
    def test_affine_invariance(self, c, a, r):
        g = grid(24)
        base = field_of(g, lambda T, X, V: np.cos(2 * X) * V + T)
        scaled = ScalarField(g, c * base.values + a)
        o = oscillation(base, Z0, r, [0.0])
        assert oscillation(scaled, Z0, r, [0.0]) == pytest.approx(abs(c) * o, rel=1e-9, abs=1e-9)


class TestMetric:
    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.05, 1.0), st.floats(-1.2, 0.0), st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
    def test_zero_drift_cylinder_is_metric_ball(self, r, dt, dx, dv):
        dist = float(kinetic_distance(np.array(dt), np.array([dx]), np.array([dv])))
        inside = cylinder_membership((dt, np.array([dx]), np.array([dv])), (0.0, np.zeros(1), np.zeros(1)),
                                     r, np.zeros(1))
        assert inside == ((dist < r) and (-r * r < dt <= 0) and abs(dx) < r ** 3)
        if inside:
            assert dist < r

    def test_drift_shear(self):
        d = kinetic_distance(np.array([-0.25]), np.array([[-0.25 * 2.0]]), np.array([[0.0]]), b_v0=[2.0])
        assert d[0] == pytest.approx(0.5)

    def test_max_radius(self):
        g = grid(32)
        f = field_of(g, lambda T, X, V: V + 0 * T)
        # v-distance to the edge 1.5 - 0.2 = 1.3 exceeds sqrt(t0 - t_start) = 1
        assert max_radius(f, Z0) == pytest.approx(1.0)
        assert max_radius(f, (0.0, [0.0], [1.4])) == pytest.approx(0.1)


class TestFit:
    def test_power_law(self):
        r = 0.8 * 0.5 ** np.arange(5)
        beta, r2, C = fit_exponent(r, 3 * r ** 0.4)
        assert beta == pytest.approx(0.4, abs=1e-12) and r2 == pytest.approx(1.0) and C == 0.0

    def test_source_term_recovered(self):
        r = 0.8 * 0.5 ** np.arange(6)
        corr = r ** 1.9
        beta, r2, C = fit_exponent(r, 2 * r ** 0.5 + 0.7 * corr, corr)
        assert C == pytest.approx(0.7, rel=1e-3)
        assert beta == pytest.approx(0.5, abs=1e-3) and r2 > 0.999999

    def test_single_positive_value(self):
        assert fit_exponent(np.array([1.0, 0.5]), np.array([0.3, 0.0]))[0] == math.inf

    def test_linear_profile(self):
        g = grid(96)
        f = field_of(g, lambda T, X, V: V + 0 * T + 0 * X)
        prof = oscillation_profile(f, None, 100.0, (0.0, [0.0], [0.0]), preset("free_streaming", 1))
        assert 0.9 <= prof.beta_fit <= 1.1
        assert prof.beta_over_3 == pytest.approx(prof.beta_fit / 3)
        assert prof.omega == pytest.approx(math.sqrt(0.125 ** 2 / 2.125))
        assert np.allclose(prof.scales[1:] / prof.scales[:-1], 0.5)

    def test_omega_ratio(self):
        # omega/2 ~ 0.043 per step: the second scale is already below one x cell
        g = grid(96)
        f = field_of(g, lambda T, X, V: V + 0 * T)
        b = preset("free_streaming", 1)
        r2 = 0.9 * math.sqrt(0.125 ** 2 / 2.125) / 2
        with pytest.raises(ResolutionError, match=f"radius {r2:.4g} "):
            oscillation_profile(f, None, 100.0, (0.0, [0.0], [0.0]), b, r1=0.9, ratio="omega")

    def test_source_correction_column(self):
        g = grid(96)
        f = field_of(g, lambda T, X, V: V + T)
        s = field_of(g, lambda T, X, V: 1 + 0 * T)
        prof = oscillation_profile(f, s, 100.0, (0.0, [0.0], [0.0]), preset("free_streaming", 1))
        assert np.all(prof.source_correction >= 0) and prof.C_source >= 0

    def test_bad_arguments(self):
        g = grid(32)
        f = field_of(g, lambda T, X, V: V + 0 * T)
        b = preset("free_streaming", 1)
        with pytest.raises(InputError):
            oscillation_profile(f, None, 100.0, Z0, b, scale_count=3)
        with pytest.raises(InputError):
            oscillation_profile(f, None, 100.0, Z0, b, ratio=1.5)

    def test_csv_and_summary(self, tmp_path):
        g = grid(96)
        f = field_of(g, lambda T, X, V: V + 0 * T)
        prof = oscillation_profile(f, None, 100.0, (0.0, [0.0], [0.0]), preset("free_streaming", 1))
        p = tmp_path / "profile.csv"
        prof.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "r,osc,source_correction,ratio"
        assert len(lines) == 5 and lines[1].endswith(",nan")
        keys = [ln.split("=")[0] for ln in prof.summary().splitlines()]
        assert keys == ["beta_fit", "beta_over_3", "theta1_hat", "r_squared", "C_source", "omega"]


class TestInitialTime:
    def forward_grid(self):
        return grid(96, t=(0.0, 1.0))

    def test_exponent_example(self):
        assert boundary_exponent(0.6, 0.2) == pytest.approx(0.2 / 3)
        assert boundary_exponent(2.0, 0.9) == pytest.approx(0.5 / 3)

    def test_profile_and_clamp(self):
        g = self.forward_grid()
        f = field_of(g, lambda T, X, V: V + 0 * T)
        b = preset("free_streaming", 1)
        prof = initial_time_profile(f, (2.0, 1.0), None, 100.0, (0.0, [0.0], [0.0]), b)
        assert prof.warnings == ["alpha0=2.0 clamped to 1"]
        assert prof.beta0 == pytest.approx(min(0.5, prof.beta_fit) / 3)
        assert "warning=alpha0=2.0 clamped to 1" in prof.summary()
        prof = initial_time_profile(f, (0.6, 1.0), None, 100.0, (0.0, [0.0], [0.0]), b)
        assert prof.beta0 == pytest.approx(0.1) and not prof.warnings

    def test_requires_initial_slice(self):
        g = self.forward_grid()
        f = field_of(g, lambda T, X, V: V + 0 * T)
        b = preset("free_streaming", 1)
        with pytest.raises(InputError):
            initial_time_profile(f, (0.5, 1.0), None, 100.0, (0.25, [0.0], [0.0]), b)
        with pytest.raises(InputError):
            initial_time_profile(field_of(grid(32), lambda T, X, V: V + 0 * T), (0.5, 1.0), None, 100.0,
                                 (0.0, [0.0], [0.0]), b)


class TestSeminorm:
    def test_linear_in_v(self):
        g = grid(32)
        f = field_of(g, lambda T, X, V: V + 0 * T)
        assert holder_seminorm(f, 1.0, pair_count=4000) == pytest.approx(1.0, rel=1e-12)

    def test_constant(self):
        g = grid(16)
        assert holder_seminorm(field_of(g, lambda T, X, V: 0 * T + 1), 0.5) == 0.0

    def test_seeded(self):
        g = grid(24)
        f = ScalarField(g, np.random.default_rng(0).normal(size=g.shape))
        assert holder_seminorm(f, 0.3, seed=5) == holder_seminorm(f, 0.3, seed=5)

    @pytest.mark.parametrize("beta", [0.0, 1.5])
    def test_invalid_beta(self, beta):
        with pytest.raises(InputError):
            holder_seminorm(field_of(grid(8), lambda T, X, V: V + 0 * T), beta)


class TestCommutation:
    @pytest.mark.parametrize("b", [preset("constant", 1, c=0.7), preset("free_streaming", 1)])
    def test_direct_equals_rescaled(self, b):
        g = GridSpec(64, 64, 64, 1, (-1.0, 0.0), (-1.0, 1.0), (-1.5, 1.5))
        f = field_of(g, lambda T, X, V: np.sin(np.pi * X) * np.cos(V) + T + 0.3 * V ** 2)
        z0 = (0.0, np.array([0.1]), np.array([0.4]))
        bv0 = b(z0[2]).reshape(1)
        direct = oscillation(f, z0, 0.7, bv0)
        resc = rescaled_oscillation(f, z0, 0.7, b, samples=48)
        assert abs(direct - resc) <= 0.02 * direct
