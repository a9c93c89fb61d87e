"""Jump-increment exponent: pointwise values, coercivity, moments, inversion."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator, interp1d

from boltznc.collision import CrossSection
from boltznc.levy import (
    GRAD_BOUND_C,
    LevyCtx,
    SymbolValue,
    invert_symbol,
    lambda_moments,
    psi,
    psi_with_error,
    rescaled_symbol_lattice,
    symbol_sweep,
    verify_coercivity,
)
from boltznc.stats import EmpiricalMeasure, GridSpec

HARD = CrossSection(gamma=0.5, nu=0.5, k=10.0)
SOFT = CrossSection(gamma=-0.5, nu=0.8, k=10.0)
V0 = np.array([0.3, -0.2, 0.5])

GAUSS_GRAD_L1 = 2.0 / math.sqrt(math.pi)


def snap(t, samples):
    return SimpleNamespace(
        t=t, measure=EmpiricalMeasure.from_samples(np.asarray(samples, dtype=np.float64))
    )


def gaussian_bg(seed, n_atoms, times=(0.85, 0.95, 1.0), sigma=1.0):
    rng = np.random.default_rng(seed)
    return tuple(snap(t, sigma * rng.standard_normal((n_atoms, 3))) for t in times)


@pytest.fixture(scope="module")
def hard_ctx():
    return LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(11, 800), cs=HARD)


@pytest.fixture(scope="module")
def small_ctx():
    return LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(7, 16), cs=HARD)


@pytest.fixture(scope="module")
def xi_probe_grid():
    rng = np.random.default_rng(5)
    dirs = rng.standard_normal((6, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.geomspace(0.1, 10.0, 7)
    return (dirs[None, :, :] * radii[:, None, None]).reshape(-1, 3)


finite_xi = st.tuples(
    st.floats(-30.0, 30.0), st.floats(-30.0, 30.0), st.floats(-30.0, 30.0)
).map(np.array)


class TestCtxValidation:
    def test_eps_must_sit_inside_unit_interval(self):
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError, match="eps must lie"):
                LevyCtx(eps=bad, t=1.0, v0=V0, background=gaussian_bg(0, 4), cs=HARD)

    def test_window_start_needs_background_coverage(self):
        bg = gaussian_bg(0, 4, times=(0.95, 1.0))
        with pytest.raises(ValueError, match="start at or before"):
            LevyCtx(eps=0.1, t=1.0, v0=V0, background=bg, cs=HARD)

    def test_background_times_must_increase(self):
        bg = (snap(0.9, np.ones((2, 3))), snap(0.9, np.zeros((2, 3))))
        with pytest.raises(ValueError, match="strictly increasing"):
            LevyCtx(eps=0.1, t=1.0, v0=V0, background=bg, cs=HARD)

    def test_empty_background_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            LevyCtx(eps=0.1, t=1.0, v0=V0, background=(), cs=HARD)

    def test_v0_shape_checked(self):
        with pytest.raises(ValueError, match="3-vector"):
            LevyCtx(eps=0.1, t=1.0, v0=np.ones(4), background=gaussian_bg(0, 4), cs=HARD)

    def test_kernel_type_checked(self):
        with pytest.raises(TypeError, match="CrossSection"):
            LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(0, 4), cs=object())

    def test_symbol_value_rejects_negative_real_part(self):
        with pytest.raises(ValueError, match="cannot be negative"):
            SymbolValue(xi=np.ones(3), psi_re=-1e-3, psi_im=0.0)

    def test_symbol_value_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            SymbolValue(xi=np.ones(3), psi_re=math.nan, psi_im=0.0)


class TestPointwiseSymbol:
    def test_vanishes_at_zero_frequency(self, small_ctx):
        val = psi(small_ctx, np.zeros(3))
        assert val.psi_re == 0.0 and val.psi_im == 0.0

    def test_dirac_background_kills_hard_potential(self):
        bg = (snap(0.85, np.tile(V0, (5, 1))), snap(1.0, np.tile(V0, (5, 1))))
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=bg, cs=HARD)
        val = psi(ctx, np.array([2.0, -1.0, 0.5]))
        assert val.value == 0.0
        assert lambda_moments(ctx, 1) == 0.0
        assert lambda_moments(ctx, 4) == 0.0

    def test_rejects_nonfinite_frequency(self, small_ctx):
        with pytest.raises(ValueError, match="finite 3-vector"):
            psi(small_ctx, np.array([1.0, math.inf, 0.0]))

    def test_rejects_unknown_azimuth_rule(self, small_ctx):
        with pytest.raises(ValueError, match="phi_rule"):
            psi(small_ctx, np.ones(3), phi_rule="midpoint")

    def test_rejects_window_outside_span(self, small_ctx):
        with pytest.raises(ValueError, match="subinterval"):
            psi(small_ctx, np.ones(3), window=(0.5, 1.0))

    @settings(max_examples=60, deadline=None)
    @given(xi=finite_xi)
    def test_conjugate_symmetry(self, small_ctx, xi):
        fwd = psi(small_ctx, xi).value
        bwd = psi(small_ctx, -xi).value
        assert abs(fwd.conjugate() - bwd) <= 1e-10 * max(abs(fwd), 1.0)

    @settings(max_examples=60, deadline=None)
    @given(xi=finite_xi)
    def test_real_part_never_negative(self, small_ctx, xi):
        assert psi(small_ctx, xi).psi_re >= 0.0

    @settings(max_examples=25, deadline=None)
    @given(xi=finite_xi)
    def test_azimuth_rules_agree(self, small_ctx, xi):
        closed = psi(small_ctx, xi).value
        uniform = psi(small_ctx, xi, phi_rule="uniform").value
        assert abs(closed - uniform) <= 1e-10 * max(abs(closed), 1.0)

    def test_additive_over_time_subwindows(self, small_ctx):
        xi = np.array([3.0, -2.0, 1.0])
        whole = psi(small_ctx, xi).value
        # split points fall both on and off snapshot times
        for mid in (0.95, 0.93):
            left = psi(small_ctx, xi, window=(0.9, mid)).value
            right = psi(small_ctx, xi, window=(mid, 1.0)).value
            assert abs((left + right) - whole) <= 1e-12 * max(abs(whole), 1.0)

    def test_reported_error_within_tolerance(self, hard_ctx):
        val, err = psi_with_error(hard_ctx, np.array([2.0, -1.0, 0.5]))
        assert err <= 1e-6
        assert val.psi_re > 0.0

    def test_sweep_rows_mirror_pointwise_values(self, small_ctx):
        xis = np.array([[1.0, 0.0, 0.0], [0.0, -2.0, 1.0], [4.0, 4.0, -3.0]])
        rows = symbol_sweep(small_ctx, xis)
        assert rows.shape == (3, 5)
        for row, xi in zip(rows, xis):
            val = psi(small_ctx, xi)
            np.testing.assert_allclose(row[:3], xi)
            assert row[3] == val.psi_re and row[4] == val.psi_im

    def test_sweep_requires_stacked_frequencies(self, small_ctx):
        with pytest.raises(ValueError, match=r"\(m, 3\)"):
            symbol_sweep(small_ctx, np.ones(3))


class TestCoercivity:
    def test_positive_on_gaussian_background_hard(self, hard_ctx, xi_probe_grid):
        c_hat = verify_coercivity(hard_ctx, xi_probe_grid)
        assert c_hat > 0.0

    def test_positive_on_gaussian_background_soft(self, xi_probe_grid):
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(11, 800), cs=SOFT)
        assert verify_coercivity(ctx, xi_probe_grid) > 0.0

    def test_rescaled_grid_stays_positive(self, hard_ctx, xi_probe_grid):
        base = verify_coercivity(hard_ctx, xi_probe_grid)
        doubled = verify_coercivity(hard_ctx, 2.0 * xi_probe_grid)
        assert doubled > 0.0
        assert 0.1 < doubled / base < 10.0

    def test_degenerate_background_flagged(self, xi_probe_grid):
        bg = (snap(0.85, np.tile(V0, (3, 1))), snap(1.0, np.tile(V0, (3, 1))))
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=bg, cs=HARD)
        with pytest.warns(RuntimeWarning, match="degenerate"):
            c_hat = verify_coercivity(ctx, xi_probe_grid)
        assert c_hat == 0.0

    def test_shrinking_background_drives_constant_down(self, xi_probe_grid):
        base = np.random.default_rng(3).standard_normal((600, 3))
        estimates = []
        for sigma in (0.4, 0.2, 0.1, 0.05):
            bg = (snap(0.85, V0 + sigma * base), snap(1.0, V0 + sigma * base))
            ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=bg, cs=HARD)
            estimates.append(verify_coercivity(ctx, xi_probe_grid[::4]))
        assert all(e > 0.0 for e in estimates)
        for wider, narrower in zip(estimates, estimates[1:]):
            assert narrower <= wider * 1.01

    def test_all_zero_grid_rejected(self, small_ctx):
        with pytest.raises(ValueError, match="zero comparator"):
            verify_coercivity(small_ctx, np.zeros((4, 3)))


class TestMoments:
    def test_only_first_and_fourth_supported(self, small_ctx):
        with pytest.raises(ValueError, match="1 or 4"):
            lambda_moments(small_ctx, 2)

    def test_rescaling_cancels_eps_in_first_moment(self):
        values = []
        for eps in (0.4, 0.2, 0.1, 0.05):
            bg = gaussian_bg(11, 800, times=(1.0 - eps - 0.05, 1.0 - eps / 2, 1.0))
            ctx = LevyCtx(eps=eps, t=1.0, v0=V0, background=bg, cs=HARD)
            values.append(lambda_moments(ctx, 1))
        assert max(values) <= 1.5 * min(values)

    @pytest.mark.parametrize("n", [1, 4])
    def test_explicit_constant_bounds_moment(self, hard_ctx, n):
        cs = hard_ctx.cs
        theta_max = hard_ctx.eps ** (1.0 / cs.nu)
        # independent angle integral with the singular weight left in place
        t_n, _ = quad(
            lambda th: math.sin(th / 2.0) ** n * cs.cb * th ** (-1.0 - cs.nu),
            0.0,
            theta_max,
            limit=200,
        )
        c_exp = (
            2.0
            * math.pi
            * hard_ctx.eps ** (1.0 - n / cs.nu)
            * t_n
            * 2.0 ** max(cs.gamma + n - 1.0, 0.0)
        )
        sup = 0.0
        speed0 = float(np.linalg.norm(hard_ctx.v0))
        for s in hard_ctx.background:
            speeds = np.linalg.norm(s.measure.samples, axis=1)
            sup = max(
                sup,
                float(
                    np.sum(
                        s.measure.weights
                        * (speeds ** (cs.gamma + n) + speed0 ** (cs.gamma + n))
                    )
                ),
            )
        assert lambda_moments(hard_ctx, n) <= c_exp * sup


class TestLatticeSymbol:
    def test_matches_pointwise_evaluation(self):
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(17, 48), cs=HARD)
        grid = GridSpec(center=np.zeros(3), extent=12.0, n=8)
        phi = rescaled_symbol_lattice(ctx, grid, max_atoms=None)
        axis = grid.spacing * (np.arange(grid.n) - grid.n // 2)
        scale = ctx.eps ** (-1.0 / ctx.cs.nu)
        rng = np.random.default_rng(0)
        for _ in range(6):
            i, j, l = rng.integers(0, grid.n, 3)
            exact = psi(ctx, scale * np.array([axis[i], axis[j], axis[l]])).value
            assert abs(phi[i, j, l] - exact) <= 1e-9 * max(abs(exact), 1e-12)

    def test_origin_entry_is_exactly_zero(self):
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(17, 16), cs=HARD)
        grid = GridSpec(center=np.zeros(3), extent=6.0, n=4)
        phi = rescaled_symbol_lattice(ctx, grid, max_atoms=None)
        h = grid.n // 2
        assert phi[h, h, h] == 0.0
        assert phi.real.min() >= 0.0

    def test_atom_cap_resamples_deterministically(self):
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(17, 200), cs=HARD)
        grid = GridSpec(center=np.zeros(3), extent=6.0, n=4)
        first = rescaled_symbol_lattice(ctx, grid, max_atoms=32)
        second = rescaled_symbol_lattice(ctx, grid, max_atoms=32)
        np.testing.assert_array_equal(first, second)

    def test_off_center_grid_rejected(self):
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=gaussian_bg(17, 16), cs=HARD)
        grid = GridSpec(center=np.full(3, 2.0), extent=6.0, n=4)
        with pytest.raises(ValueError, match="centered at the origin"):
            rescaled_symbol_lattice(ctx, grid)


def stable_radial_profile(nu, r_max, spacing):
    """Spherically symmetric density of exp(-|xi|^nu) by radial quadrature."""

    def k_radial(r):
        if r < 1e-12:
            val, _ = quad(lambda s: np.exp(-(s**nu)) * s**2, 0.0, np.inf, limit=200)
            return val / (2.0 * math.pi**2)
        val, _ = quad(
            lambda s: np.exp(-(s**nu)) * s / (2.0 * math.pi**2 * r),
            0.0,
            np.inf,
            weight="sin",
            wvar=r,
            limit=400,
        )
        return val

    rs = np.concatenate([[0.0], np.geomspace(spacing / 4.0, r_max, 220)])
    ks = np.array([k_radial(r) for r in rs])
    return interp1d(rs, ks, kind="cubic", bounds_error=False, fill_value=(ks[0], 0.0))


def periodized_oracle(profile, axis, period, shells=3):
    """Dual-lattice translates of a radial profile, coarse grid plus remainder."""
    ax_c = np.linspace(axis[0], axis[-1], 17)
    xc, yc, zc = np.meshgrid(ax_c, ax_c, ax_c, indexing="ij")
    img = np.zeros_like(xc)
    for j1 in range(-shells, shells + 1):
        for j2 in range(-shells, shells + 1):
            for j3 in range(-shells, shells + 1):
                if j1 == j2 == j3 == 0:
                    continue
                img += profile(
                    np.sqrt(
                        (xc + period * j1) ** 2
                        + (yc + period * j2) ** 2
                        + (zc + period * j3) ** 2
                    )
                )
    # translates beyond the summed shells enter at their mean level
    r_cut = (shells + 0.5) * period
    mass_in, _ = quad(lambda r: 4.0 * math.pi * r**2 * profile(r), 0.0, r_cut, limit=400)
    img += max(1.0 - mass_in, 0.0) / period**3
    interp = RegularGridInterpolator((ax_c, ax_c, ax_c), img, method="linear")
    pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    r3 = np.sqrt(
        axis[:, None, None] ** 2 + axis[None, :, None] ** 2 + axis[None, None, :] ** 2
    )
    return profile(r3) + interp(pts)


class TestInversion:
    def test_gaussian_symbol_recovers_heat_kernel(self):
        grid = GridSpec(center=np.zeros(3), extent=8.0, n=48)
        res = invert_symbol(lambda p: np.einsum("ij,ij->i", p, p), grid)
        assert abs(res.grad_l1 - GAUSS_GRAD_L1) <= 0.01 * GAUSS_GRAD_L1
        assert abs(res.density.mass - 1.0) <= 1e-6
        assert res.imag_max <= 1e-9
        assert res.density.values.min() >= -1e-9
        g = res.density.grid
        axis = g.axis()
        line = res.density.values[:, g.n // 2, g.n // 2]
        expected = (4.0 * math.pi) ** -1.5 * np.exp(
            -(axis**2 + 2.0 * axis[g.n // 2] ** 2) / 4.0
        )
        np.testing.assert_allclose(line, expected, atol=1e-9)
        assert res.bound_rhs is None and res.bound_ok is None

    def test_wide_lattice_keeps_stable_density_nonnegative(self):
        grid = GridSpec(center=np.zeros(3), extent=1600.0, n=64)
        res = invert_symbol(
            lambda p: np.einsum("ij,ij->i", p, p) ** 0.25, grid
        )
        assert res.density.values.min() >= -1e-6
        assert abs(res.density.mass - 1.0) <= 1e-6
        assert res.tail_mass <= 1e-4

    def test_stable_density_matches_radial_quadrature(self):
        nu = 0.95
        grid = GridSpec(center=np.zeros(3), extent=30.0, n=160)
        res = invert_symbol(
            lambda p: np.einsum("ij,ij->i", p, p) ** (nu / 2.0), grid
        )
        g = res.density.grid
        axis = g.axis()
        period = g.spacing * g.n
        profile = stable_radial_profile(
            nu, math.sqrt(3.0) * 3.5 * period, g.spacing
        )
        oracle = periodized_oracle(profile, axis, period)
        l1 = float(np.abs(res.density.values - oracle).sum()) * g.spacing**3
        assert l1 <= 0.03

    def test_refuses_when_frequency_tail_escapes(self):
        grid = GridSpec(center=np.zeros(3), extent=2.0, n=16)
        with pytest.raises(ValueError, match="tail not captured"):
            invert_symbol(lambda p: np.einsum("ij,ij->i", p, p), grid)

    def test_refuses_negative_real_part(self):
        grid = GridSpec(center=np.zeros(3), extent=8.0, n=16)
        with pytest.raises(ValueError, match="negative on the grid"):
            invert_symbol(lambda p: -np.ones(p.shape[0]), grid)

    def test_supplied_moments_populate_bound(self):
        grid = GridSpec(center=np.zeros(3), extent=8.0, n=32)
        res = invert_symbol(
            lambda p: np.einsum("ij,ij->i", p, p), grid, moments=(1.0, 1.0)
        )
        assert res.bound_rhs == pytest.approx(
            GRAD_BOUND_C * 3.0 * (res.weighted_integral + res.tail_mass)
        )
        assert res.bound_ok == (res.grad_l1 <= res.bound_rhs)

    def test_simulated_window_satisfies_gradient_bound(self):
        bg = gaussian_bg(23, 96, times=(0.89, 1.0))
        ctx = LevyCtx(eps=0.1, t=1.0, v0=V0, background=bg, cs=HARD)
        grid = GridSpec(center=np.zeros(3), extent=12.0, n=24)
        res = invert_symbol(ctx, grid, max_atoms=None, n_theta=96)
        assert res.bound_ok
        assert res.bound_rhs > res.grad_l1
        assert 0.8 <= res.grad_l1 <= 1.4
        assert res.density.values.min() >= -1e-9
        assert abs(res.density.mass - 1.0) <= 0.02
        assert res.imag_max <= 1e-8
