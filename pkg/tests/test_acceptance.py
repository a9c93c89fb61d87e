"""End-to-end verification battery.

Every guarantee the package advertises is pinned here at a fixed seed and a
fixed tolerance: collision-map invariants at the million-sample scale, the
frame-exchange and frame-alignment inequalities, conservation in the particle
schemes, the frozen-replay error rates, coercivity and inversion of the
velocity-jump symbol, the closed-form regularity exponents, the statistical
estimators against analytic oracles, and support spreading from a two-point
start. Thresholds are chosen once from theory or from seed sweeps recorded in
the development notes; none of them are tuned to the test seed.
"""

import json
import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from boltznc.cli import load_config, run
from boltznc.collision import (
    CrossSection,
    deviation,
    orthonormal_frame,
    post_collision,
    tanaka_phi0,
)
from boltznc.coupling import freeze_error_curve
from boltznc.levy import GridSpec, LevyCtx, invert_symbol, psi, verify_coercivity
from boltznc.simulate import SimConfig, simulate
from boltznc.stats import (
    EmpiricalMeasure,
    _closed_form_soft,
    _golden_max,
    _soft_objective,
    besov_estimate,
    entropy_knn,
    smoothness_exponent_hard,
    smoothness_exponent_soft,
)
from boltznc.support import default_probes, estimate_q, sphere_spread
from test_levy import GAUSS_GRAD_L1, periodized_oracle, stable_radial_profile

GAUSSIAN_ENTROPY = 1.5 * math.log(2.0 * math.pi * math.e)


def scaled_cloud(rng, n, scales=(0.3, 1.0, 3.0)):
    return rng.normal(size=(n, 3)) * rng.choice(scales, size=(n, 1))


def two_point_run(gamma, nu, n, seed, times, scheme="nanbu", cb=1.0):
    cs = CrossSection(gamma=gamma, nu=nu, c0=cb, cb=cb, k=10.0)
    cfg = SimConfig(
        n_particles=n, t_end=times[-1], cross_section=cs, scheme=scheme,
        seed=seed, snapshot_times=times, f0={"family": "two_point"},
    )
    return simulate(cfg), cs


@pytest.fixture(scope="module")
def battery():
    rng = np.random.default_rng(12345)
    n = 10**6
    v = scaled_cloud(rng, n)
    v_star = scaled_cloud(rng, n)
    theta = rng.uniform(1e-6, math.pi / 2.0, n)
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return v, v_star, theta, phi


class TestCollisionInvariants:
    """Momentum, energy, and the deviation-length law over 1e6 collisions."""

    def test_momentum_conserved_to_the_last_rounding(self, battery):
        v, v_star, theta, phi = battery
        vp, vsp = post_collision(v, v_star, theta, phi)
        scale = np.maximum(np.linalg.norm(v, axis=1), np.linalg.norm(v_star, axis=1))
        defect = np.abs((vp + vsp) - (v + v_star)).max(axis=1)
        # the only inexact operation is the final addition, one ulp of scale
        assert np.all(defect <= 8e-16 * scale)

    def test_energy_error_below_1e10_relative(self, battery):
        v, v_star, theta, phi = battery
        vp, vsp = post_collision(v, v_star, theta, phi)
        e0 = np.sum(v * v, axis=1) + np.sum(v_star * v_star, axis=1)
        e1 = np.sum(vp * vp, axis=1) + np.sum(vsp * vsp, axis=1)
        assert np.all(np.abs(e1 - e0) <= 1e-10 * e0)

    def test_deviation_length_is_the_half_angle_chord(self, battery):
        v, v_star, theta, phi = battery
        a = deviation(v, v_star, theta, phi)
        lhs = np.linalg.norm(a, axis=1)
        rhs = np.sin(theta / 2.0) * np.linalg.norm(v - v_star, axis=1)
        assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(rhs, 1e-300))


class TestExchangeIdentity:
    """Swapping the two vectors inside the azimuthal average changes nothing."""

    def test_azimuthal_averages_agree_for_three_test_functions(self):
        rng = np.random.default_rng(2718)
        m = 1000
        xi = scaled_cloud(rng, m, scales=(0.5, 1.0, 4.0))
        x = scaled_cloud(rng, m, scales=(0.5, 1.0, 4.0))
        nodes = 8192
        phis = np.arange(nodes) * (2.0 * math.pi / nodes)

        def projections(p, q):
            i_vec, j_vec = orthonormal_frame(q)
            a = np.sum(p * i_vec, axis=1, keepdims=True)
            b = np.sum(p * j_vec, axis=1, keepdims=True)
            return a * np.cos(phis)[None, :] + b * np.sin(phis)[None, :]

        forward = projections(xi, x)
        swapped = projections(x, xi)
        for func in (np.abs, np.square, np.cos):
            qa = func(forward).mean(axis=1)
            qb = func(swapped).mean(axis=1)
            rel = np.abs(qa - qb) / np.maximum(np.abs(qa), np.abs(qb))
            assert rel.max() <= 1e-6


class TestCouplingBound:
    """The aligned deviation difference never exceeds 2 theta times the gaps."""

    def test_one_million_random_tuples_zero_violations(self):
        rng = np.random.default_rng(12345)
        n = 10**6
        v = scaled_cloud(rng, n)
        v_star = scaled_cloud(rng, n)
        theta = rng.uniform(1e-6, math.pi / 2.0, n)
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        w = scaled_cloud(rng, n)
        w_star = scaled_cloud(rng, n)
        phi0 = tanaka_phi0(v - v_star, w - w_star)
        lhs = np.linalg.norm(
            deviation(v, v_star, theta, phi) - deviation(w, w_star, theta, phi + phi0),
            axis=1,
        )
        rhs = 2.0 * theta * (
            np.linalg.norm(v - w, axis=1) + np.linalg.norm(v_star - w_star, axis=1)
        )
        assert int(np.sum(lhs > rhs)) == 0


class TestSchemeConservation:
    """Energy bookkeeping of both particle schemes at N = 1e4, T = 1."""

    def test_pair_scheme_holds_energy_to_1e9_relative(self):
        snaps, _ = two_point_run(0.5, 0.5, 10_000, 3, (0.0, 1.0), scheme="symmetric_pair")
        e0, e1 = snaps[0].energy, snaps[-1].energy
        assert abs(e1 - e0) <= 1e-9 * e0
        assert float(np.linalg.norm(snaps[-1].momentum - snaps[0].momentum)) <= 1e-9

    def test_one_sided_scheme_drift_is_statistically_zero(self):
        drifts = []
        for seed in range(20):
            snaps, _ = two_point_run(0.5, 0.5, 10_000, seed, (1.0,))
            drifts.append(snaps[0].energy - 1.0)
        d = np.array(drifts)
        se = d.std(ddof=1) / math.sqrt(len(d))
        assert abs(d.mean()) <= 4.0 * se


class TestFreezeRates:
    """Replay error of the frozen-coefficient endpoint shrinks at the
    predicted power of the window length."""

    # a small angular constant keeps the in-window jump count order one
    # across the whole window grid; with cb = 1 the curve saturates long
    # before the largest window, see the notes ledger
    EPS = [0.4, 0.2, 0.1, 0.05]

    @staticmethod
    def background(gamma, nu, cb):
        times = tuple(np.round(np.linspace(0.0, 1.0, 21), 10))
        return two_point_run(gamma, nu, 10_000, 2024, times, cb=cb)

    def test_hard_potential_slope_at_least_1_5(self):
        bg, cs = self.background(0.5, 0.5, cb=0.1)
        curve = freeze_error_curve(bg, 1.0, cs, self.EPS, 2000, seed=31)
        assert np.all(curve.moments > 0.0)
        assert curve.slope >= 1.5

    def test_soft_potential_slope_clears_its_floor(self):
        gamma, nu = -0.5, 0.8
        bg, cs = self.background(gamma, nu, cb=0.3)
        curve = freeze_error_curve(bg, 1.0, cs, self.EPS, 2000, seed=31)
        assert np.all(curve.moments > 0.0)
        assert curve.slope >= 0.7 * (2.0 + gamma / nu)


class TestSymbolCoercivity:
    """The jump exponent dominates the two-regime comparator on a simulated
    background, vanishes at zero, and keeps a nonnegative real part."""

    @staticmethod
    def probe_grid():
        dirs = np.array(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]
        )
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        mags = np.geomspace(0.1, 10.0, 12)
        return (mags[:, None, None] * dirs[None, :, :]).reshape(-1, 3)

    @pytest.mark.parametrize("gamma,nu", [(0.5, 0.5), (-0.5, 0.8)])
    def test_positive_constant_on_simulated_background(self, gamma, nu):
        snaps, cs = two_point_run(gamma, nu, 2000, 77, (0.85, 0.9, 0.95, 1.0))
        ctx = LevyCtx(
            eps=0.1, t=1.0, v0=np.array([0.2, -0.4, 0.3]), background=snaps, cs=cs
        )
        grid = self.probe_grid()
        assert verify_coercivity(ctx, grid) > 0.0
        zero = psi(ctx, np.zeros(3))
        assert zero.psi_re == 0.0 and zero.psi_im == 0.0
        assert min(psi(ctx, row).psi_re for row in grid) >= 0.0


class TestSymbolInversion:
    """Lattice inversion reproduces two densities with known oracles."""

    def test_gaussian_symbol_gradient_mass_within_1_percent(self):
        grid = GridSpec(center=np.zeros(3), extent=8.0, n=48)
        res = invert_symbol(lambda p: np.einsum("ij,ij->i", p, p), grid)
        assert abs(res.grad_l1 - GAUSS_GRAD_L1) <= 0.01 * GAUSS_GRAD_L1
        assert abs(res.density.mass - 1.0) <= 1e-6

    def test_stable_symbol_density_within_3_percent_l1(self):
        nu = 0.95
        grid = GridSpec(center=np.zeros(3), extent=30.0, n=160)
        res = invert_symbol(lambda p: np.einsum("ij,ij->i", p, p) ** (nu / 2.0), grid)
        g = res.density.grid
        period = g.spacing * g.n
        profile = stable_radial_profile(nu, math.sqrt(3.0) * 3.5 * period, g.spacing)
        oracle = periodized_oracle(profile, g.axis(), period)
        l1 = float(np.abs(res.density.values - oracle).sum()) * g.spacing**3
        assert l1 <= 0.03


class TestSmoothnessExponents:
    """Golden-section suprema equal the closed forms on a 1000-point grid."""

    NUS = np.linspace(0.001, 0.999, 1000)

    def test_hard_search_matches_closed_form_to_1e10(self):
        for nu in self.NUS:
            _, val = _golden_max(lambda a: _soft_objective(a, 2.0), 1e-300, nu)
            assert abs(val - smoothness_exponent_hard(nu)) <= 1e-10

    def test_soft_search_matches_closed_form_to_1e10(self):
        gamma = -0.5
        for nu in np.linspace(0.5001, 0.999, 500):
            m = 2.0 + gamma / nu
            _, val = _golden_max(lambda a: _soft_objective(a, m), 1e-300, nu)
            assert abs(val - _closed_form_soft(gamma, nu)) <= 1e-10

    def test_zero_gamma_collapses_to_the_hard_form(self):
        for nu in self.NUS:
            gap = abs(smoothness_exponent_soft(0.0, nu) - smoothness_exponent_hard(nu))
            assert gap <= 1e-10


class TestBesovEstimator:
    """Finite-difference slope and prefactor against analytic densities."""

    def test_gaussian_slope_one_and_gradient_prefactor(self):
        rng = np.random.default_rng(1)
        m = EmpiricalMeasure.from_samples(rng.normal(size=(10**5, 3)))
        est = besov_estimate(m, r_set=[0.5, 0.7], h_set=[0.25, 0.35, 0.5, 0.65, 0.85])
        assert est.a_exp == pytest.approx(1.0, abs=0.1)
        # one-axis gradient mass of the standard normal is sqrt(2/pi)
        assert est.kappa == pytest.approx(math.sqrt(2.0 / math.pi), rel=0.15)
        assert est.monotone and not est.non_density

    def test_uniform_cube_slope_one(self):
        rng = np.random.default_rng(7)
        m = EmpiricalMeasure.from_samples(rng.uniform(0.0, 1.0, size=(10**5, 3)))
        est = besov_estimate(
            m, r_set=[0.15, 0.2], h_set=[0.06, 0.09, 0.12, 0.15], grid_n=96
        )
        assert est.a_exp == pytest.approx(1.0, abs=0.1)


class TestEntropyEstimator:
    """Nearest-neighbor entropy against the Gaussian value and under
    sample-size doubling of a simulated run."""

    def test_standard_gaussian_value(self):
        rng = np.random.default_rng(42)
        m = EmpiricalMeasure.from_samples(rng.normal(size=(10**5, 3)))
        assert entropy_knn(m, k=4) == pytest.approx(GAUSSIAN_ENTROPY, abs=0.05)

    def test_two_point_run_entropy_stable_under_doubling(self):
        times = (0.25, 0.5, 1.0)
        values = {}
        for n, seed in ((20_000, 31), (40_000, 32)):
            snaps, _ = two_point_run(0.5, 0.5, n, seed, times)
            with warnings.catch_warnings():
                # early snapshots keep a few never-collided duplicate atoms
                warnings.filterwarnings("ignore", message="duplicate samples")
                values[n] = [entropy_knn(s.measure, k=4) for s in snaps]
        for small, big in zip(values[20_000], values[40_000]):
            assert math.isfinite(small) and math.isfinite(big)
            assert abs(big - small) <= 0.1


class TestSupportSpreading:
    """Certified growth of the spread cloud and observed spreading of the
    simulated law, on the experiment shipped in configs/."""

    def test_certified_radius_formula_is_exact(self):
        for r0, seeds in ((1.0, [[1, 0, 0], [-1, 0, 0]]), (1.5, [[0, 0, 0], [0, 3, 0]])):
            pts = np.array(seeds, dtype=float)
            for its in (0, 1, 2, 5):
                res = sphere_spread(pts, its, 4, seed=0)
                assert res.guaranteed_radius == 2.0 ** (its / 2.0) * r0
                assert res.r0 == r0

    def test_shipped_experiment_covers_the_radius_two_ball(self, tmp_path):
        src = Path(__file__).resolve().parents[1] / "configs" / "support.json"
        doc = json.loads(src.read_text())
        doc["output_dir"] = str(tmp_path / "out")
        cfg_path = tmp_path / "support.json"
        cfg_path.write_text(json.dumps(doc, indent=2) + "\n")
        manifest = run(load_config(cfg_path))
        assert manifest.passed
        report = json.loads((tmp_path / "out" / "coverage.json").read_text())
        fracs = [row["fraction"] for row in report["series"]]
        assert all(b >= a - 0.01 for a, b in zip(fracs, fracs[1:]))
        assert fracs[-1] > 0.5
        assert report["threshold"] == 0.5

    def test_probe_mass_positive_on_late_window(self):
        snaps, _ = two_point_run(0.5, 0.5, 2000, 5, (0.5, 0.75, 1.0))
        assert estimate_q(snaps, default_probes()) > 0.0
