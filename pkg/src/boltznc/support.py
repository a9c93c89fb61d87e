"""Support geometry: truncated test sets, mass infima, and sphere spreading.

Two geometric mechanisms drive the lower-bound argument this module makes
testable. First, sets K(w, zeta) of velocities that stay inside a fixed ball,
away from a center w, and angularly separated from a plane; every such set
contains a unit ball anchored two units from the origin, so empirical
measures spread over B(0, 3) give them positive mass. Second, the support of
a non-degenerate law grows under collisions: every pair (v1, v2) in the
support puts the whole sphere S((v1+v2)/2, |v1-v2|/2) inside it, and
iterating multiplies the reachable radius by sqrt(2) per step.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .collision import orthonormal_frame

SQRT2 = math.sqrt(2.0)


def _vec3(value, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite 3-vector")
    return arr


@dataclass(frozen=True)
class Kset:
    """Ball-confined velocities separated from w in distance and angle."""

    w: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", _vec3(self.w, "w"))
        object.__setattr__(self, "zeta", _vec3(self.zeta, "zeta"))


@dataclass(frozen=True)
class PointCloud:
    """Finite stack of velocity points standing in for a support set."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


def in_K(v, k: Kset):
    """Membership test; a single vector gives a bool, a stack gives a mask.

    All three conditions compare squared quantities, so no square roots
    enter and ties resolve the way the defining inequalities state them.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    pts = v[None, :] if single else v
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("v must be a 3-vector or an (n, 3) array")
    diff = pts - k.w[None, :]
    z2 = float(k.zeta @ k.zeta)
    mask = (
        (np.einsum("ij,ij->i", pts, pts) <= 9.0)
        & (np.einsum("ij,ij->i", diff, diff) >= 1.0)
        & ((diff @ k.zeta) ** 2 >= z2)
    )
    return bool(mask[0]) if single else mask


def anchor_point(k: Kset):
    """Center of a unit ball contained in the set.

    Two units from the origin along -zeta (sign matched against <w, zeta>,
    ties toward +1) the whole unit ball satisfies the three conditions:
    |v| <= 3 by the triangle inequality, |v - w| >= 1 because the signed
    choice makes <w, anchor> <= 0 and hence |w - anchor| >= 2, and the
    plane separation survives because |<w - anchor, zeta>| picks up 2|zeta|.
    Falls back to the direction opposite w, then to a fixed axis, when
    zeta or w vanish.
    """
    z_norm = float(np.linalg.norm(k.zeta))
    if z_norm > 0.0:
        sign = 1.0 if float(k.w @ k.zeta) >= 0.0 else -1.0
        return -2.0 * sign * k.zeta / z_norm
    w_norm = float(np.linalg.norm(k.w))
    if w_norm > 0.0:
        return -2.0 * k.w / w_norm
    return np.array([2.0, 0.0, 0.0])


def _sign_unique_directions():
    dirs = []
    for ix in (-1, 0, 1):
        for iy in (-1, 0, 1):
            for iz in (-1, 0, 1):
                d = np.array([ix, iy, iz], dtype=np.float64)
                if not d.any():
                    continue
                if any(np.allclose(d, -e) for e in dirs):
                    continue
                dirs.append(d)
    return [d / np.linalg.norm(d) for d in dirs]


def default_probes(
    w_shells=(0.5, 1.5, 3.0), zeta_mags=(0.5, 1.0, 2.0), ball_check=8, seed=0
):
    """Probe sets covering the quantifier range at desk scale.

    Centers w run over the origin plus lattice directions on three shells;
    zeta runs over sign-unique lattice directions at three magnitudes. Each
    probe's anchored unit ball is spot-checked for containment before the
    probe is admitted; a violation means the geometry itself regressed.
    """
    lattice = _sign_unique_directions()
    ws = [np.zeros(3)]
    for radius in w_shells:
        for d in lattice:
            ws.append(radius * d)
            ws.append(-radius * d)
    zetas = [mag * d for mag in zeta_mags for d in lattice]
    rng = np.random.default_rng(seed)
    probes = []
    for w in ws:
        for zeta in zetas:
            probe = Kset(w=w, zeta=zeta)
            if ball_check:
                g = rng.standard_normal((ball_check, 3))
                g /= np.linalg.norm(g, axis=1, keepdims=True)
                radii = rng.random(ball_check) ** (1.0 / 3.0)
                inside = anchor_point(probe) + radii[:, None] * g
                if not np.all(in_K(inside, probe)):
                    raise RuntimeError("anchored unit ball escaped its probe set")
            probes.append(probe)
    return probes


def estimate_q(snapshots, probes, probe_block=512):
    """Smallest empirical mass any snapshot gives any probe set.

    Factorizes the membership test over probe blocks so the sample cloud
    is scanned once per block instead of once per probe.
    """
    snapshots = list(snapshots)
    probes = list(probes)
    if not snapshots:
        raise ValueError("at least one snapshot is required")
    if not probes:
        raise ValueError("at least one probe is required")
    ws = np.stack([p.w for p in probes])
    zs = np.stack([p.zeta for p in probes])
    w2 = np.einsum("ij,ij->i", ws, ws)
    z2 = np.einsum("ij,ij->i", zs, zs)
    wz = np.einsum("ij,ij->i", ws, zs)
    best = math.inf
    for snap in snapshots:
        meas = snap.measure
        v = meas.samples
        weights = meas.weights
        v2 = np.einsum("ij,ij->i", v, v)
        confined = v2 <= 9.0
        for lo in range(0, len(probes), probe_block):
            sl = slice(lo, lo + probe_block)
            dist2 = v2[:, None] - 2.0 * (v @ ws[sl].T) + w2[None, sl]
            plane = v @ zs[sl].T - wz[None, sl]
            mask = confined[:, None] & (dist2 >= 1.0) & (plane**2 >= z2[None, sl])
            best = min(best, float((weights @ mask).min()))
    return best


def spanning_pair(x, r, v):
    """Pair on S(x, r) whose midpoint sphere passes through v.

    With alpha = |v - x| / r <= sqrt(2) and beta = sqrt(2 - alpha^2), the
    points x + r((alpha+beta)sigma +- (alpha-beta)tau)/2 sit on S(x, r),
    and v lies on the sphere around their midpoint with radius half their
    separation; both facts are exact identities of the construction.
    """
    x = _vec3(x, "x")
    v = _vec3(v, "v")
    if not r > 0.0:
        raise ValueError("r must be positive")
    d = v - x
    dist = float(np.linalg.norm(d))
    alpha = dist / r
    if alpha > SQRT2 * (1.0 + 1e-12):
        raise ValueError("v lies beyond the sqrt(2) r reach of S(x, r)")
    sigma = d / dist if dist > 0.0 else np.array([1.0, 0.0, 0.0])
    tau, _ = orthonormal_frame(sigma)
    beta = math.sqrt(max(2.0 - alpha * alpha, 0.0))
    plus = 0.5 * r * (alpha + beta)
    minus = 0.5 * r * (alpha - beta)
    return x + plus * sigma + minus * tau, x + plus * sigma - minus * tau


@dataclass(frozen=True)
class SpreadResult:
    """Augmented cloud plus the analytic radius the iteration certifies."""

    cloud: PointCloud
    x0: np.ndarray
    r0: float
    guaranteed_radius: float


def _farthest_pair(pts):
    best = (-1.0, 0, 0)
    block = max(1, 2_000_000 // max(len(pts), 1))
    for lo in range(0, len(pts), block):
        chunk = pts[lo : lo + block]
        d2 = np.einsum("ij,ij->i", chunk, chunk)[:, None] - 2.0 * (chunk @ pts.T)
        d2 += np.einsum("ij,ij->i", pts, pts)[None, :]
        flat = int(np.argmax(d2))
        i, j = divmod(flat, len(pts))
        if d2[i, j] > best[0]:
            best = (float(d2[i, j]), lo + i, j)
    return best


def _sphere_samples(rng, centers, radii, count):
    g = rng.standard_normal((centers.shape[0], count, 3))
    g /= np.linalg.norm(g, axis=2, keepdims=True)
    return (centers[:, None, :] + radii[:, None, None] * g).reshape(-1, 3)


def sphere_spread(
    points, iterations, samples_per_pair, *, pairs_per_iteration=None, seed=0
):
    """Grow a cloud by sampling midpoint spheres of support-point pairs.

    Two pair sources feed every round. Random cloud pairs, drawn with
    probability proportional to their separation (importance resampling
    over a uniform candidate pool), witness emergent growth. Spanning
    pairs on the previously certified sphere, built for uniform targets
    in the next certified ball, execute the growth identity itself; blind
    pair sampling alone stalls near half the certified radius because the
    extremal chords it needs compound in probability round over round.
    Each pair contributes samples_per_pair uniform points on its midpoint
    sphere. The certified radius around the farthest initial pair's
    midpoint multiplies by sqrt(2) per round regardless of sampling
    density; the returned cloud is the empirical witness of that ball.
    """
    cloud = points if isinstance(points, PointCloud) else PointCloud(points)
    if iterations < 0 or samples_per_pair < 1:
        raise ValueError("iterations must be >= 0 and samples_per_pair >= 1")
    pts = cloud.points
    d2_max, i0, j0 = _farthest_pair(pts)
    if d2_max <= 0.0:
        raise ValueError("all points coincide: a single point never spreads")
    x0 = 0.5 * (pts[i0] + pts[j0])
    r0 = 0.5 * math.sqrt(d2_max)

    rng = np.random.default_rng(seed)
    for round_idx in range(iterations):
        m = pts.shape[0]
        want = pairs_per_iteration or min(m, 1024)
        pool = rng.integers(0, m, size=(2, 4 * want))
        keep = pool[0] != pool[1]
        a, b = pool[0][keep], pool[1][keep]
        gaps = np.linalg.norm(pts[a] - pts[b], axis=1)
        fresh = [pts]
        total = float(gaps.sum())
        if total > 0.0:
            chosen = rng.choice(gaps.size, size=min(want, gaps.size), p=gaps / total)
            centers = 0.5 * (pts[a[chosen]] + pts[b[chosen]])
            fresh.append(
                _sphere_samples(rng, centers, 0.5 * gaps[chosen], samples_per_pair)
            )

        certified = 2.0 ** (round_idx / 2.0) * r0
        raw = rng.standard_normal((want, 3))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        reach = SQRT2 * certified * rng.random(want) ** (1.0 / 3.0)
        targets = x0[None, :] + reach[:, None] * raw
        alpha = reach / certified
        beta = np.sqrt(np.maximum(2.0 - alpha * alpha, 0.0))
        mids = x0[None, :] + 0.5 * certified * (alpha + beta)[:, None] * raw
        half_sep = 0.5 * certified * np.abs(alpha - beta)
        fresh.append(targets)
        fresh.append(_sphere_samples(rng, mids, half_sep, samples_per_pair))
        pts = np.concatenate(fresh)

    return SpreadResult(
        cloud=PointCloud(pts),
        x0=x0,
        r0=r0,
        guaranteed_radius=2.0 ** (iterations / 2.0) * r0,
    )


def coverage_report(cloud, center, radius, cell_size):
    """Fraction of ball cells with a cloud point within one cell diagonal."""
    cloud = cloud if isinstance(cloud, PointCloud) else PointCloud(cloud)
    center = _vec3(center, "center")
    if not (radius > 0.0 and cell_size > 0.0):
        raise ValueError("radius and cell_size must be positive")
    half = int(math.ceil(radius / cell_size))
    axis = (np.arange(-half, half + 1) + 0.5) * cell_size
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    cells = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    cells = cells[np.einsum("ij,ij->i", cells, cells) <= radius * radius] + center
    tol = math.sqrt(3.0) * cell_size
    dist, _ = cKDTree(cloud.points).query(cells, k=1, distance_upper_bound=tol * 1.0000001)
    covered = int(np.sum(np.isfinite(dist) & (dist <= tol)))
    return {
        "cells": int(cells.shape[0]),
        "covered": covered,
        "fraction": covered / cells.shape[0] if cells.shape[0] else 0.0,
        "radius": float(radius),
        "cell_size": float(cell_size),
        "tolerance": float(tol),
        "cloud_size": len(cloud),
    }
