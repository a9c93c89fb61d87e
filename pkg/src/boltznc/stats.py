"""Statistics on weighted velocity samples.

Provides the empirical-measure container used by the simulator plus the
analysis tools: radial moments, grid KDE, k-nearest-neighbor differential
entropy, a finite-difference Besov-smoothness estimator, and the closed-form
smoothness exponents with their golden-section cross-check.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal
from scipy.spatial import cKDTree
from scipy.special import digamma


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted point cloud on R^3; weights are kept normalized to sum 1."""

    samples: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] == 0:
            raise ValueError("samples must have shape (n, 3) with n >= 1")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (s.shape[0],):
            raise ValueError("weights must have shape (n,)")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        tot = w.sum()
        if tot <= 0.0:
            raise ValueError("weights must have positive total mass")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "weights", w / tot)

    @classmethod
    def from_samples(cls, samples, weights=None):
        samples = np.asarray(samples, dtype=np.float64)
        if weights is None:
            weights = np.ones(samples.shape[0] if samples.ndim == 2 else 1)
        return cls(samples=samples, weights=np.asarray(weights, dtype=np.float64))

    def __len__(self):
        return self.samples.shape[0]

    def is_uniform(self, tol=1e-12):
        return np.all(np.abs(self.weights - 1.0 / len(self)) <= tol / len(self))

    def resample(self, n, rng):
        idx = rng.choice(len(self), size=n, replace=True, p=self.weights)
        return self.samples[idx]


@dataclass(frozen=True)
class GridSpec:
    """Cubic cell-centered grid: n**3 cells covering center +- extent."""

    center: np.ndarray
    extent: float
    n: int

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if c.shape != (3,):
            raise ValueError("grid center must be a 3-vector")
        if not self.extent > 0.0:
            raise ValueError("grid extent must be positive")
        if self.n < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        object.__setattr__(self, "center", c)

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def origin(self) -> np.ndarray:
        """Center of the first cell."""
        return self.center - self.extent + 0.5 * self.spacing

    def axis(self):
        return self.origin[0] + self.spacing * np.arange(self.n)

    def cell_centers(self):
        ax = [self.origin[d] + self.spacing * np.arange(self.n) for d in range(3)]
        return np.meshgrid(*ax, indexing="ij")


@dataclass(frozen=True)
class GridDensity:
    """Density values on a GridSpec; `mass` is the grid integral."""

    grid: GridSpec
    values: np.ndarray
    mass: float
    coverage: float
    coverage_warning: bool


def moment(measure: EmpiricalMeasure, p: float) -> float:
    """Weighted p-th radial moment, sum_i w_i |v_i|^p (0^0 = 1)."""
    if p < 0:
        raise ValueError("moment order must be nonnegative")
    speeds = np.linalg.norm(measure.samples, axis=1)
    return float(np.sum(measure.weights * speeds**p))


def silverman_bandwidth(measure: EmpiricalMeasure) -> float:
    """Silverman's rule in 3 dimensions with the mean per-axis deviation."""
    n = len(measure)
    mu = np.sum(measure.weights[:, None] * measure.samples, axis=0)
    var = np.sum(measure.weights[:, None] * (measure.samples - mu) ** 2, axis=0)
    sigma = math.sqrt(float(np.mean(var)))
    return sigma * (4.0 / 5.0) ** (1.0 / 7.0) * n ** (-1.0 / 7.0)


def _histogram_density(measure: EmpiricalMeasure, grid: GridSpec):
    """(density histogram, covered mass fraction)."""
    dx = grid.spacing
    lo = grid.center - grid.extent
    idx = np.floor((measure.samples - lo) / dx).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < grid.n), axis=1)
    counts = np.zeros((grid.n,) * 3)
    np.add.at(counts, tuple(idx[inside].T), measure.weights[inside])
    coverage = float(measure.weights[inside].sum())
    return counts / dx**3, coverage


def kde_density(measure: EmpiricalMeasure, bandwidth: float, grid: GridSpec) -> GridDensity:
    """Gaussian KDE evaluated on the grid (binned approximation).

    Samples are histogrammed at the grid resolution and smoothed with a
    Gaussian of standard deviation `bandwidth`; accurate when the bandwidth
    resolves a few cells. Mass falling outside the grid (or smoothed past its
    edge) is not recovered: the `coverage` field reports the fraction of
    sample mass inside, with a warning below 99.9 percent.
    """
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    hist, coverage = _histogram_density(measure, grid)
    warn = coverage < 0.999
    if warn:
        warnings.warn(
            f"grid covers only {coverage:.4%} of the sample mass", RuntimeWarning
        )
    vals = ndimage.gaussian_filter(
        hist, sigma=bandwidth / grid.spacing, mode="constant", truncate=8.0
    )
    raw_mass = float(vals.sum() * grid.spacing**3)
    if raw_mass > 0.0:
        vals = vals / raw_mass
    mass = float(vals.sum() * grid.spacing**3)
    return GridDensity(grid=grid, values=vals, mass=mass, coverage=coverage, coverage_warning=warn)


def entropy_knn(measure: EmpiricalMeasure, k: int = 4, seed: int = 0) -> float:
    """Kozachenko-Leonenko differential entropy (natural log, Euclidean).

    Weighted inputs are resampled to an unweighted cloud first. Exact
    duplicate neighbors have zero distance and would send the estimate to
    -inf; such points are jittered by a relative 1e-9 with a warning.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    x = measure.samples
    if not measure.is_uniform():
        rng = np.random.default_rng(seed)
        x = measure.resample(len(measure), rng)
    n = x.shape[0]
    if n <= k:
        raise ValueError("need more samples than neighbors")
    dist = cKDTree(x).query(x, k=k + 1, workers=-1)[0][:, k]
    if np.any(dist == 0.0):
        scale = max(float(np.std(x)), 1e-300)
        warnings.warn(
            "duplicate samples detected; jittering by 1e-9 of the data scale",
            RuntimeWarning,
        )
        rng = np.random.default_rng(seed + 1)
        x = x + rng.normal(scale=1e-9 * scale, size=x.shape)
        dist = cKDTree(x).query(x, k=k + 1, workers=-1)[0][:, k]
    v3 = 4.0 * math.pi / 3.0
    return float(
        digamma(n) - digamma(k) + math.log(v3) + 3.0 * np.mean(np.log(dist))
    )


def _ball_kernel(r_cells: float):
    """Voxelized indicator of a ball with radius r_cells (in cell units)."""
    m = int(math.ceil(r_cells))
    ax = np.arange(-m, m + 1)
    xx, yy, zz = np.meshgrid(ax, ax, ax, indexing="ij")
    ball = (xx**2 + yy**2 + zz**2 <= r_cells**2).astype(np.float64)
    return ball / ball.sum()


def _shift_l1(vals, m, dx):
    """Mean over the 3 axes of the L1 distance between vals and its m-cell shift."""
    out = 0.0
    for axis in range(3):
        a = np.moveaxis(vals, axis, 0)
        diff = np.abs(a[m:] - a[:-m]).sum() + np.abs(a[:m]).sum() + np.abs(a[-m:]).sum()
        out += diff * dx**3
    return out / 3.0


@dataclass(frozen=True)
class BesovEstimate:
    """Joint fit of D(h, r) ~ kappa * h^a_exp * r^(-alpha_fit)."""

    kappa: float
    a_exp: float
    alpha: float
    alpha_fit: float
    s_est: float | None
    fit_residual: float
    monotone: bool
    non_density: bool
    d_values: dict = field(default_factory=dict)


def besov_estimate(
    measure: EmpiricalMeasure,
    r_set,
    h_set,
    alpha: float = 0.1,
    grid_n: int = 64,
) -> BesovEstimate:
    """Smoothness exponent from mollified finite differences.

    The sample cloud is histogrammed on a cubic grid, mollified with the
    indicator of a ball of radius r (unit mass), and D(h, r) is the L1
    distance between the mollified density and its shift by h along a
    coordinate axis (averaged over the 3 axes). Shifts are snapped to whole
    cells so the differences are exact on the padded grid. A joint least
    squares fit of log D against (log h, -log r) gives the reported slope
    a_exp, prefactor kappa, and r-sensitivity alpha_fit; the smoothness
    estimate is s_est = a_exp - alpha.

    s_est is left unset when D is not increasing in h for some r (noise
    dominated) or when a_exp <= alpha. alpha_fit far above zero flags
    non-density behavior (an atom gives alpha_fit near 1).
    """
    r_set = sorted(float(r) for r in r_set)
    h_set = sorted(float(h) for h in h_set)
    if not r_set or not h_set:
        raise ValueError("r_set and h_set must be nonempty")
    if r_set[0] <= 0.0 or h_set[0] <= 0.0:
        raise ValueError("radii and shifts must be positive")
    if r_set[-1] >= 1.0 or h_set[-1] >= 1.0:
        raise ValueError("radii and shifts must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")

    w = measure.weights
    lo_q = np.array([_weighted_quantile(measure.samples[:, d], w, 0.0003) for d in range(3)])
    hi_q = np.array([_weighted_quantile(measure.samples[:, d], w, 0.9997) for d in range(3)])
    center = (lo_q + hi_q) / 2.0
    half = float(np.max(hi_q - lo_q)) / 2.0
    # margin: per-axis quantiles do not control the union of the three tails,
    # and degenerate clouds (single atom) still need enough extent that the
    # voxelized mollifier has a bounded cell radius
    extent = max(half * 1.12, 2.0 * r_set[-1], 1e-6)
    grid = GridSpec(center=center, extent=extent, n=grid_n)
    dx = grid.spacing
    if dx > r_set[0] / 4.0:
        raise ValueError(
            f"grid spacing {dx:.4g} exceeds min(r)/4 = {r_set[0] / 4.0:.4g}; "
            "increase grid_n or enlarge the radii"
        )

    shifts = sorted({max(1, int(round(h / dx))) for h in h_set})
    hist, coverage = _histogram_density(measure, grid)
    if coverage < 0.999:
        warnings.warn(
            f"besov grid covers only {coverage:.4%} of the sample mass", RuntimeWarning
        )

    pad = int(math.ceil(r_set[-1] / dx)) + shifts[-1] + 1
    padded = np.pad(hist, pad)

    d_values = {}
    rows, y = [], []
    monotone = True
    # center the radius regressor so kappa is read at the geometric mean of
    # r_set instead of extrapolated to r = 1 through the noisy alpha_fit
    log_r_mid = float(np.mean(np.log(r_set)))
    for r in r_set:
        ball = _ball_kernel(r / dx)
        g = signal.fftconvolve(padded, ball, mode="same")
        prev = -np.inf
        for m in shifts:
            d = _shift_l1(g, m, dx)
            d_values[(m * dx, r)] = d
            if d < prev:
                monotone = False
            prev = d
            rows.append([1.0, math.log(m * dx), -(math.log(r) - log_r_mid)])
            y.append(math.log(max(d, 1e-300)))

    coef, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(y), rcond=None)
    log_kappa, a_exp, alpha_fit = coef
    resid = float(np.sqrt(np.mean((np.asarray(rows) @ coef - np.asarray(y)) ** 2)))
    kappa = float(math.exp(log_kappa))
    non_density = alpha_fit > 0.5
    s_est = a_exp - alpha if (monotone and a_exp > alpha) else None
    return BesovEstimate(
        kappa=kappa,
        a_exp=float(a_exp),
        alpha=alpha,
        alpha_fit=float(alpha_fit),
        s_est=None if s_est is None else float(s_est),
        fit_residual=resid,
        monotone=monotone,
        non_density=bool(non_density),
        d_values=d_values,
    )


def _weighted_quantile(x, w, q):
    order = np.argsort(x)
    cw = np.cumsum(w[order])
    return float(np.interp(q, cw / cw[-1], x[order]))


def smoothness_exponent_hard(nu: float) -> float:
    """Best regularity exponent for gamma >= 0 as a function of nu only.

    Maximizes 2a/(1+2a) - a over a in (0, nu]: the interior optimum sits at
    (sqrt(2)-1)/2, so the value has two branches meeting there.
    """
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0, 1)")
    crit = (math.sqrt(2.0) - 1.0) / 2.0
    if nu >= crit:
        return (3.0 - 2.0 * math.sqrt(2.0)) / 2.0
    return nu * (1.0 - 2.0 * nu) / (1.0 + 2.0 * nu)


def _soft_objective(alpha, m):
    return m * alpha / (1.0 + m * alpha) - alpha


def _closed_form_soft(gamma, nu):
    m = 2.0 + gamma / nu
    a_star = (math.sqrt(m) - 1.0) / m
    if a_star <= nu:
        return (math.sqrt(m) - 1.0) ** 2 / m
    return _soft_objective(nu, m)


def _golden_max(f, lo, hi, tol=1e-12):
    """Golden-section maximizer for a concave f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def smoothness_exponent_soft(gamma: float, nu: float) -> float:
    """Best regularity exponent for moderately soft potentials.

    Maximizes m*a/(1+m*a) - a over a in (0, nu] with m = 2 + gamma/nu, by
    golden-section search refined to 1e-12 and cross-checked against the
    closed form (sqrt(m)-1)^2/m (interior) or the boundary value at nu.
    """
    if not -1.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (-1, 1)")
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0, 1)")
    if gamma + nu <= 0.0:
        raise ValueError("gamma + nu must be positive")
    m = 2.0 + gamma / nu
    _, val = _golden_max(lambda a: _soft_objective(a, m), 1e-300, nu)
    closed = _closed_form_soft(gamma, nu)
    if abs(val - closed) > 1e-9:
        raise AssertionError(
            f"golden-section value {val} disagrees with closed form {closed}"
        )
    return val
