"""Geometry and sampling tests for the collision module."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from boltznc import collision as C

RNG = np.random.default_rng


def vec_batch(seed, n, scale=1.0):
    return RNG(seed).normal(size=(n, 3)) * scale


class TestCrossSection:
    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            C.CrossSection(gamma=1.0, nu=0.5)
        with pytest.raises(ValueError):
            C.CrossSection(gamma=-1.2, nu=0.5)
        with pytest.raises(ValueError):
            C.CrossSection(gamma=0.5, nu=0.0)
        with pytest.raises(ValueError):
            C.CrossSection(gamma=0.5, nu=1.0)
        with pytest.raises(ValueError):
            C.CrossSection(gamma=-0.5, nu=0.4)  # gamma + nu <= 0
        with pytest.raises(ValueError):
            C.CrossSection(gamma=0.5, nu=0.5, k=0.5)  # k below 2/pi
        C.CrossSection(gamma=-0.5, nu=0.8, k=10.0)

    def test_b_support(self):
        cs = C.CrossSection(gamma=0.5, nu=0.5)
        theta = np.array([-1.0, 0.0, 1e-4, 1.0, math.pi / 2, math.pi / 2 + 1e-9, 3.0])
        vals = cs.b(theta)
        assert vals[0] == 0.0 and vals[1] == 0.0
        assert vals[-1] == 0.0 and vals[-2] == 0.0
        assert np.all(vals[2:5] > 0.0)
        assert vals[2] == pytest.approx(1e-4 ** (-1.5), rel=1e-12)

    def test_theta_mass_matches_quadrature(self):
        cs = C.CrossSection(gamma=0.5, nu=0.7, cb=1.0)
        val, err = integrate.quad(lambda t: cs.b(t), 0.02, math.pi / 2)
        assert cs.theta_mass(0.02) == pytest.approx(val, rel=1e-9)

    def test_candidate_rate_closed_form(self):
        cs = C.CrossSection(gamma=0.5, nu=0.5, k=10.0)
        c_theta = (10.0**0.5 - (math.pi / 2) ** (-0.5)) / 0.5
        assert cs.c_theta() == pytest.approx(c_theta, rel=1e-14)
        assert cs.candidate_rate() == pytest.approx(2 * math.pi * 10 * c_theta, rel=1e-14)


class TestFrame:
    def test_axis_example(self):
        i, j = C.orthonormal_frame(np.array([2.0, 0.0, 0.0]))
        assert np.array_equal(i, [0.0, 2.0, 0.0])
        assert np.array_equal(j, [0.0, 0.0, 2.0])

    def test_zero_maps_to_zero(self):
        i, j = C.orthonormal_frame(np.zeros(3))
        assert np.array_equal(i, np.zeros(3))
        assert np.array_equal(j, np.zeros(3))

    def test_batch_orthogonality_and_norms(self):
        x = vec_batch(11, 20000)
        # include tiny and huge magnitudes
        x[:100] *= 1e-150
        x[100:200] *= 1e150
        i, j = C.orthonormal_frame(x)
        nx = np.linalg.norm(x, axis=1)
        tol = 1e-12 * nx
        assert np.all(np.abs(np.sum(i * x, axis=1)) <= tol * nx)
        assert np.all(np.abs(np.sum(j * x, axis=1)) <= tol * nx)
        assert np.all(np.abs(np.sum(i * j, axis=1)) <= tol * nx)
        assert np.all(np.abs(np.linalg.norm(i, axis=1) - nx) <= tol)
        assert np.all(np.abs(np.linalg.norm(j, axis=1) - nx) <= tol)

    @given(
        st.tuples(
            st.floats(-1e3, 1e3),
            st.floats(-1e3, 1e3),
            st.floats(-1e3, 1e3),
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_frame_property(self, xyz):
        x = np.array(xyz)
        n = np.linalg.norm(x)
        i, j = C.orthonormal_frame(x)
        if n == 0.0:
            assert np.array_equal(i, np.zeros(3))
            return
        assert abs(np.dot(i, x)) <= 1e-12 * n * n
        assert abs(np.dot(i, j)) <= 1e-12 * n * n
        assert abs(np.linalg.norm(i) - n) <= 1e-12 * n
        # right-handed: j = (x/|x|) x i
        assert np.allclose(np.cross(x / n, i), j, atol=1e-12 * n)


class TestDeviation:
    def test_head_on_example(self):
        v = np.array([1.0, 0.0, 0.0])
        w = np.array([-1.0, 0.0, 0.0])
        a = C.deviation(v, w, math.pi / 2, 0.0)
        assert np.allclose(a, [-1.0, 1.0, 0.0], atol=2e-15)
        vp, vsp = C.post_collision(v, w, math.pi / 2, 0.0)
        assert np.allclose(vp, [0.0, 1.0, 0.0], atol=2e-15)
        assert np.allclose(vsp, [0.0, -1.0, 0.0], atol=2e-15)

    def test_gamma_vec_at_zero_phi_is_i(self):
        x = vec_batch(3, 50)
        i, _ = C.orthonormal_frame(x)
        assert np.array_equal(C.gamma_vec(x, np.zeros(50)), i)

    def test_norm_identity(self):
        # |a| = sin(theta/2) |v - v_*|, equivalently sqrt((1-cos theta)/2)|v - v_*|
        rng = RNG(5)
        n = 200000
        v = rng.normal(size=(n, 3)) * rng.lognormal(0, 2, size=(n, 1))
        w = rng.normal(size=(n, 3)) * rng.lognormal(0, 2, size=(n, 1))
        theta = rng.uniform(1e-12, math.pi / 2, size=n)
        phi = rng.uniform(0, 2 * math.pi, size=n)
        a = C.deviation(v, w, theta, phi)
        lhs = np.linalg.norm(a, axis=1)
        rhs = np.sin(theta / 2.0) * np.linalg.norm(v - w, axis=1)
        assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(rhs, 1e-300))

    def test_output_on_collision_sphere(self):
        rng = RNG(6)
        n = 50000
        v = rng.normal(size=(n, 3))
        w = rng.normal(size=(n, 3))
        theta = rng.uniform(0, math.pi / 2, size=n)
        phi = rng.uniform(0, 2 * math.pi, size=n)
        vp, vsp = C.post_collision(v, w, theta, phi)
        center = (v + w) / 2.0
        rad = np.linalg.norm(v - w, axis=1) / 2.0
        assert np.allclose(np.linalg.norm(vp - center, axis=1), rad, rtol=1e-10, atol=1e-14)
        assert np.allclose(np.linalg.norm(vsp - center, axis=1), rad, rtol=1e-10, atol=1e-14)

    def test_conservation_battery(self):
        rng = RNG(7)
        n = 200000
        v = rng.normal(size=(n, 3)) * rng.lognormal(0, 1, size=(n, 1))
        w = rng.normal(size=(n, 3)) * rng.lognormal(0, 1, size=(n, 1))
        theta = rng.uniform(0, math.pi / 2, size=n)
        phi = rng.uniform(0, 2 * math.pi, size=n)
        vp, vsp = C.post_collision(v, w, theta, phi)
        # roundoff from large components leaks into small ones, so the scale
        # is the vector magnitude, not the component
        scale = np.maximum(np.linalg.norm(v, axis=1), np.linalg.norm(w, axis=1))
        diff = np.abs((vp + vsp) - (v + w)).max(axis=1)
        assert np.all(diff <= 8e-16 * np.maximum(scale, 1e-300))
        e0 = np.sum(v * v, axis=1) + np.sum(w * w, axis=1)
        e1 = np.sum(vp * vp, axis=1) + np.sum(vsp * vsp, axis=1)
        assert np.all(np.abs(e1 - e0) <= 1e-10 * e0)


class TestSampleTheta:
    CS = C.CrossSection(gamma=0.5, nu=0.5)

    def test_boundaries(self):
        assert C.sample_theta(self.CS, 0.1, 0.0) == pytest.approx(0.1, rel=1e-12)
        assert C.sample_theta(self.CS, 0.1, 1.0) == pytest.approx(math.pi / 2, rel=1e-12)
        assert float(C.sample_theta(self.CS, 0.1, 0.0)) >= 0.1
        assert float(C.sample_theta(self.CS, 0.1, 1.0)) <= math.pi / 2

    def test_inverse_cdf_roundtrip(self):
        nu = self.CS.nu
        tmin = 0.02
        u = RNG(8).uniform(0, 1, size=10000)
        theta = C.sample_theta(self.CS, tmin, u)
        lo, hi = tmin ** (-nu), (math.pi / 2) ** (-nu)
        u_back = (lo - theta ** (-nu)) / (lo - hi)
        assert np.allclose(u_back, u, atol=1e-11)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            C.sample_theta(self.CS, 0.1, 1.5)
        with pytest.raises(ValueError):
            C.sample_theta(self.CS, 0.0, 0.5)
        with pytest.raises(ValueError):
            C.sample_theta(self.CS, 2.0, 0.5)

    def test_goodness_of_fit(self):
        # chi-squared against the truncated b density on equal-mass bins
        nu = 0.5
        tmin = 0.1
        n = 10**6
        u = RNG(9).uniform(0, 1, size=n)
        theta = np.asarray(C.sample_theta(self.CS, tmin, u))
        nbins = 40
        qs = np.linspace(0, 1, nbins + 1)
        lo, hi = tmin ** (-nu), (math.pi / 2) ** (-nu)
        edges = (lo - qs * (lo - hi)) ** (-1 / nu)
        edges[0], edges[-1] = tmin, math.pi / 2
        counts, _ = np.histogram(theta, bins=edges)
        res = stats.chisquare(counts)
        assert res.pvalue > 0.001


class TestTruncation:
    def test_inside_ball_unchanged(self):
        v = vec_batch(10, 1000, scale=2.0)
        v = v[np.linalg.norm(v, axis=1) <= 10.0]
        assert np.array_equal(C.h_trunc(v, 10.0), v)

    def test_outside_ball_rescaled(self):
        v = vec_batch(12, 1000, scale=30.0)
        out = C.h_trunc(v, 10.0)
        big = np.linalg.norm(v, axis=1) > 10.0
        assert np.any(big)
        assert np.allclose(np.linalg.norm(out[big], axis=1), 10.0, rtol=1e-12)
        unit_in = v[big] / np.linalg.norm(v[big], axis=1, keepdims=True)
        unit_out = out[big] / 10.0
        assert np.allclose(unit_in, unit_out, atol=1e-12)

    def test_zero(self):
        assert np.array_equal(C.h_trunc(np.zeros(3), 10.0), np.zeros(3))


def brute_force_alignment(x, y, n_delta=4096, n_phi=256):
    """Grid oracle: delta minimizing max_phi |Gamma(x,phi) - Gamma(y,phi+delta)|."""
    phis = np.linspace(0, 2 * math.pi, n_phi, endpoint=False)
    deltas = np.linspace(0, 2 * math.pi, n_delta, endpoint=False)
    gx = C.gamma_vec(np.broadcast_to(x, (n_phi, 3)), phis)
    best_val, best_delta = np.inf, 0.0
    for d in deltas:
        gy = C.gamma_vec(np.broadcast_to(y, (n_phi, 3)), phis + d)
        val = np.max(np.linalg.norm(gx - gy, axis=1))
        if val < best_val:
            best_val, best_delta = val, d
    return best_delta, best_val


class TestTanakaPhi0:
    def test_range_and_degenerate(self):
        x = vec_batch(13, 500)
        y = vec_batch(14, 500)
        phi0 = C.tanaka_phi0(x, y)
        assert np.all((phi0 >= 0.0) & (phi0 < 2 * math.pi))
        assert np.all(C.tanaka_phi0(x, x) == 0.0)
        assert np.all(C.tanaka_phi0(np.zeros_like(x), y) == 0.0)
        # exactly antiparallel: frames cancel, overlap is (0, 0)
        assert float(C.tanaka_phi0(np.array([1.0, 2.0, 3.0]), np.array([-1.0, -2.0, -3.0]))) == 0.0

    def test_matches_grid_oracle(self):
        rng = RNG(15)
        for _ in range(40):
            x = rng.normal(size=3)
            y = rng.normal(size=3)
            phi0 = float(C.tanaka_phi0(x, y))
            _, best_val = brute_force_alignment(x, y)
            phis = np.linspace(0, 2 * math.pi, 256, endpoint=False)
            gx = C.gamma_vec(np.broadcast_to(x, (256, 3)), phis)
            gy = C.gamma_vec(np.broadcast_to(y, (256, 3)), phis + phi0)
            val_at_phi0 = np.max(np.linalg.norm(gx - gy, axis=1))
            # phi0 must align at least as well as the best grid delta (up to grid slack)
            assert val_at_phi0 <= best_val + 1e-3 * (np.linalg.norm(x) + np.linalg.norm(y))
            assert val_at_phi0 <= np.linalg.norm(x - y) + 1e-12

    def test_alignment_bound_battery(self):
        rng = RNG(16)
        n = 100000
        x = rng.normal(size=(n, 3))
        y = x + rng.normal(size=(n, 3)) * rng.lognormal(-1, 2, size=(n, 1))
        phi0 = C.tanaka_phi0(x, y)
        phis = rng.uniform(0, 2 * math.pi, size=n)
        gap = np.linalg.norm(C.gamma_vec(x, phis) - C.gamma_vec(y, phis + phi0), axis=1)
        assert np.all(gap <= np.linalg.norm(x - y, axis=1) * (1 + 1e-10) + 1e-12)
