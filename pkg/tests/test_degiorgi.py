import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kfplab.averaging import exponent_table
from kfplab.degiorgi import (box_bump, decay_exponent, degiorgi_trace, directional_jump_detect,
                             iteration_bound_const, level_set_measure, lp_norm, moser_trace, radius_schedule,
                             region_volume, transition_index, unroll_bound)
from kfplab.errors import InputError, ThresholdError
from kfplab.regions import cylinder_mask, default_center
from kfplab.solver import GridSpec, ScalarField


def unit_grid(n=32):
    return GridSpec(n, n, n, 1, (-1.0, 0.0), (-1.0, 1.0), (-1.0, 1.0))


def const_field(g, c):
    return ScalarField(g, np.full(g.shape, float(c)))


# --- measures ----------------------------------------------------------------------


class TestLevelSets:
    def test_zero_and_full(self):
        g = unit_grid(16)
        assert level_set_measure(const_field(g, 0.0), 1.0, 1.0) == 0.0
        V = region_volume(g, 1.0)
        assert V > 0
        assert level_set_measure(const_field(g, 2.0), 1.0, 1.0) == pytest.approx(V)

    def test_ramp_halfspace(self):
        g = unit_grid(64)
        T, X, V = g.mesh()
        f = ScalarField(g, np.broadcast_to(V[..., 0], g.shape).copy())
        mask = cylinder_mask(g, 1.0)
        half = 0.5 * region_volume(g, mask)
        # slab of one v-layer across the cylinder
        layer = np.count_nonzero(mask) / g.nv * g.cell_volume
        assert abs(level_set_measure(f, 0.0, mask) - half) <= layer

    def test_empty_region(self):
        g = unit_grid(8)
        with pytest.raises(InputError):
            level_set_measure(const_field(g, 1.0), 0.0, np.zeros(g.shape, dtype=bool))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-2, 2), st.floats(0, 2))
    def test_nonincreasing_in_level(self, k, dk):
        g = unit_grid(12)
        f = ScalarField(g, np.random.default_rng(1).normal(size=g.shape))
        assert level_set_measure(f, k + dk) <= level_set_measure(f, k)

    def test_additive_over_disjoint_regions(self):
        g = unit_grid(12)
        f = ScalarField(g, np.random.default_rng(2).normal(size=g.shape))
        m = cylinder_mask(g, 0.6)
        total = level_set_measure(f, 0.1, m) + level_set_measure(f, 0.1, ~m)
        assert total == pytest.approx(level_set_measure(f, 0.1))

    def test_lp_norm(self):
        vals = np.array([3.0, -4.0])
        mask = np.ones(2, dtype=bool)
        assert lp_norm(vals, mask, 1.0, 2.0) == pytest.approx(5.0)
        assert lp_norm(vals, mask, 1.0, math.inf) == 4.0
        # huge exponent stays finite
        assert lp_norm(vals, mask, 1.0, 1e4) == pytest.approx(4.0, rel=1e-3)
        assert lp_norm(np.zeros(2), mask, 1.0, 2.0) == 0.0


# --- Moser -----------------------------------------------------------------------


class TestMoser:
    def test_constant_source_oracle(self):
        g = unit_grid(24)
        s = const_field(g, 3.0)
        tr = moser_trace(ScalarField(g, np.zeros(g.shape)), s, 100.0, n_max=5)
        vol1 = region_volume(g, cylinder_mask(g, 1.0))
        l = 3.0 * vol1 ** (1 / 100)
        assert tr.constants["l"] == pytest.approx(l, rel=1e-12)
        for e in tr.entries:
            vol = region_volume(g, cylinder_mask(g, e.r_n))
            assert e.value == pytest.approx(l * vol ** (1 / e.level_or_p), rel=1e-12)
            assert np.isfinite(e.value)

    def test_zero_steps(self):
        g = unit_grid(16)
        f = ScalarField(g, np.random.default_rng(0).normal(size=g.shape))
        tr = moser_trace(f, None, 100.0, n_max=0)
        assert len(tr.entries) == 1
        m = cylinder_mask(g, 1.0)
        want = math.sqrt(np.sum(np.maximum(f.values, 0)[m] ** 2) * g.cell_volume)
        assert tr.entries[0].value == pytest.approx(want, rel=1e-12)

    def test_exponents_follow_kappa(self):
        g = unit_grid(16)
        tr = moser_trace(const_field(g, 1.0), None, 100.0, n_max=4)
        k = exponent_table(1.0, 1.0, 1, 1, 100.0, "bdd").kappa
        assert [e.level_or_p for e in tr.entries] == pytest.approx([2 * k ** n for n in range(5)])
        assert [e.r_n for e in tr.entries] == [radius_schedule(n) for n in range(5)]

    def test_lyapunov_consistency(self):
        g = unit_grid(16)
        vals = np.abs(np.random.default_rng(4).normal(size=g.shape))
        m = cylinder_mask(g, 0.8)
        V = region_volume(g, m)
        for p, pp in ((2.0, 3.0), (2.5, 40.0)):
            lo = lp_norm(vals, m, g.cell_volume, p)
            hi = lp_norm(vals, m, g.cell_volume, pp)
            assert lo <= hi * V ** (1 / p - 1 / pp) * (1 + 1e-10)

    def test_threshold(self):
        g = unit_grid(8)
        with pytest.raises(ThresholdError):
            moser_trace(const_field(g, 1.0), None, 8.0)

    def test_smooth_instance_sup(self, smooth64):
        tr = moser_trace(smooth64, None, 100.0, n_max=20)
        est, gmax = tr.constants["sup_estimate"], tr.constants["grid_max_Q_half"]
        assert abs(est - gmax) <= 0.1 * gmax
        assert tr.converged


# --- De Giorgi -------------------------------------------------------------------


class TestDeGiorgi:
    def test_below_level_vanishes(self):
        g = unit_grid(16)
        f = ScalarField(g, np.random.default_rng(0).uniform(-1, 0.5, size=g.shape))
        tr = degiorgi_trace(f, None, 100.0, l=1.0, l0=0.5, n_max=6)
        assert np.all(tr.values[1:] == 0)
        assert tr.converged

    def test_spike_transition(self):
        g = unit_grid(16)
        l0, l = 1.0, 0.5
        height = l0 + l * (1 - 2 ** -3.5)
        vals = np.zeros(g.shape)
        t0, x0, v0 = default_center(g)
        T, X, V = g.mesh()
        # the cell nearest the centre sits in every Q_{r_n}
        dist = (T - t0) ** 2 + (X[..., 0] - x0[0]) ** 2 + (V[..., 0] - v0[0]) ** 2
        idx = np.unravel_index(np.argmin(np.broadcast_to(dist, g.shape)), g.shape)
        vals[idx] = height
        assert all(cylinder_mask(g, radius_schedule(n))[idx] for n in range(10))
        tr = degiorgi_trace(ScalarField(g, vals), None, 100.0, l=l, l0=l0, n_max=9)
        want = next(n for n in range(10) if l0 + l * (1 - 0.5 ** n) >= height)
        assert want == 4
        assert transition_index(tr) == want
        assert np.all(tr.values[:want] > 0)
        assert tr.constants["k_inf"] == l0 + l

    def test_monotone_levels_on_fixed_region(self):
        # with r_n >= 1/2 fixed and k_n increasing the positive parts shrink
        g = unit_grid(16)
        f = ScalarField(g, np.random.default_rng(5).normal(size=g.shape))
        tr = degiorgi_trace(f, None, 100.0, l=2.0, l0=0.0, n_max=8)
        assert np.all(np.diff(tr.values) <= 1e-15)

    def test_fitted_constant_stable(self, smooth32, smooth64):
        Cs = []
        for f in (smooth32, smooth64):
            m = cylinder_mask(f.grid, 1.0)
            l0 = 0.25 * lp_norm(np.maximum(f.values, 0), m, f.grid.cell_volume, 2.0)
            Cs.append(degiorgi_trace(f, None, 100.0, l=l0, l0=l0).constants["C"])
        assert all(np.isfinite(Cs)) and all(c > 0 for c in Cs)
        assert abs(Cs[0] - Cs[1]) <= 0.25 * Cs[1]

    def test_eps_gap_recorded(self):
        g = unit_grid(8)
        tr = degiorgi_trace(const_field(g, 1.0), None, 100.0, l=1.0)
        k = exponent_table(1.0, 1.0, 1, 1, 100.0, "bdd").kappa
        assert tr.constants["eps"] == pytest.approx(1 - 1 / k - 0.02)

    def test_bad_level(self):
        with pytest.raises(InputError):
            degiorgi_trace(const_field(unit_grid(8), 1.0), None, 100.0, l=0.0)

    def test_csv_and_summary(self, tmp_path):
        g = unit_grid(8)
        tr = degiorgi_trace(const_field(g, 2.0), None, 100.0, l=1.0, l0=1.0, n_max=3)
        p = tmp_path / "dg.csv"
        tr.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "n,r_n,level_or_p,value,growth_factor"
        assert len(lines) == 5
        assert tr.summary().startswith("scheme=degiorgi ")


# --- iteration lemmas ------------------------------------------------------------------


class TestIterationLemmas:
    @pytest.mark.parametrize("iota", [0.5, 1.0, 2.0, 3.0, 7.5])
    def test_zero_eps_closed_form(self, iota):
        assert iteration_bound_const(0.0, iota) == 2.0 ** iota

    def test_half_three(self):
        th = (0.5 ** (1 / 3) + 1) / 2
        want = (1 - th) ** -3 / (1 - 0.5 * th ** -3)
        C = iteration_bound_const(0.5, 3.0)
        assert C == pytest.approx(want, rel=1e-14)
        assert C == pytest.approx(2969.14, rel=1e-5)

    def test_nine_tenths(self):
        C = iteration_bound_const(0.9, 1.0)
        assert C == pytest.approx(380.0, rel=1e-3)
        assert unroll_bound(0.9, 1.0, C, depth=60) <= 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 0.95), st.floats(0.2, 4.0))
    def test_bound_holds_and_exceeds_one(self, eps, iota):
        C = iteration_bound_const(eps, iota)
        assert C >= 1
        assert unroll_bound(eps, iota, C, depth=80, r=0.1, s=0.9, c=2.0) <= 1.0 + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1.0, 5.0), st.floats(0.0, 2.0))
    def test_zero_eps_monotone_in_iota(self, iota, d_iota):
        # 2^iota grows with iota; the closed form must follow it exactly
        assert iteration_bound_const(0.0, iota) <= iteration_bound_const(0.0, iota + d_iota)

    @pytest.mark.parametrize("eps,iota", [(1.0, 1.0), (-0.1, 1.0), (0.5, 0.0)])
    def test_invalid(self, eps, iota):
        with pytest.raises(InputError):
            iteration_bound_const(eps, iota)

    def test_decay_exponent_values(self):
        assert decay_exponent(0.5, 0.25, 0.0) == pytest.approx(2.0)
        assert decay_exponent(0.1, 0.5, 0.5) == pytest.approx(0.1505149978, rel=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 0.99), st.floats(0.0, 0.99))
    def test_decay_exponent_diagonal(self, tau, eps):
        assert decay_exponent(tau, tau, eps) == pytest.approx(1 - eps, rel=1e-14)

    @pytest.mark.parametrize("args", [(0.0, 0.5, 0.1), (0.5, 1.0, 0.1), (0.5, 0.5, 1.0)])
    def test_decay_exponent_invalid(self, args):
        with pytest.raises(InputError):
            decay_exponent(*args)


# --- directional jumps ----------------------------------------------------------------


def halfspaces(n=128):
    xs = -0.5 + (np.arange(n) + 0.5) / n
    X1 = np.broadcast_to(xs[:, None], (n, n))
    kw = dict(tau_list=[0.2, 0.1, 0.05, 1 / n], spacing=(1 / n, 1 / n), lower=(-0.5, -0.5))
    return X1, kw


def interface_integral():
    """Integral of the documented bump over the line x1 = 0 in [-1/2, 1/2]^2."""
    w = 0.4
    line = quad(lambda u: math.exp(-1 / (1 - u * u)), -1, 1)[0] * w
    return math.exp(-1) * line


class TestJumpDetector:
    def test_down_jump_compliant(self):
        X1, kw = halfspaces()
        v = directional_jump_detect((X1 <= 0).astype(int), (1.0, 0.0), **kw)
        assert v.verdict == "compliant"
        assert np.all(v.D == 0)

    def test_up_jump_violating(self):
        X1, kw = halfspaces()
        v = directional_jump_detect((X1 > 0).astype(int), (1.0, 0.0), **kw)
        assert v.verdict == "violating"
        assert interface_integral() == pytest.approx(0.0653, abs=1e-4)
        assert v.D[-1] == pytest.approx(interface_integral(), rel=0.01)

    def test_constant_compliant(self):
        _, kw = halfspaces()
        v = directional_jump_detect(np.ones((128, 128), dtype=int), (0.0, 1.0), **kw)
        assert v.verdict == "compliant"

    def test_antisymmetry(self):
        X1, kw = halfspaces(64)
        P = (X1 > 0).astype(int)
        fwd = directional_jump_detect(P, (1.0, 0.0), **kw).verdict
        back = directional_jump_detect(P, (-1.0, 0.0), **kw).verdict
        assert {fwd, back} == {"compliant", "violating"}

    def test_competing_bound_reported(self):
        X1, kw = halfspaces(64)
        v = directional_jump_detect((X1 > 0).astype(int), (1.0, 0.0), p=3.0, **kw)
        assert np.allclose(v.competing_bound, v.taus ** 2)
        assert v.summary().startswith("verdict=violating")

    def test_bump_support(self):
        phi = box_bump((20, 20), (0.05, 0.05), (0.0, 0.0))
        assert phi[0].max() == 0 and phi[:, -1].max() == 0 and phi[10, 10] > 0

    @pytest.mark.parametrize("P,h", [(np.array([[0, 2]]), (1.0, 0.0)), (np.zeros((2, 2)), (1.0, 1.0))])
    def test_invalid(self, P, h):
        with pytest.raises(InputError):
            directional_jump_detect(P, h, [0.1])
