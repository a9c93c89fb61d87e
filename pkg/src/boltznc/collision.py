"""Collision geometry for grazing binary collisions.

Velocities are numpy float64 arrays of shape (..., 3); every function here
broadcasts over leading axes. The scattering deviation is parametrized by a
polar angle theta in (0, pi/2] and an azimuth phi in [0, 2*pi) measured in an
orthonormal frame attached to the relative velocity.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class CrossSection:
    """Collision kernel parameters.

    The angular factor is b(theta) = cb * theta^(-1-nu) on (0, pi/2], zero
    beyond; the velocity factor is |v - v_*|^gamma. ``k`` is the optional
    truncation level: angles below 1/k are dropped and the velocity factor is
    capped at k (and evaluated at the radially truncated velocity H_k).
    """

    gamma: float
    nu: float
    c0: float = 1.0
    C0: float = 1.0
    cb: float = 1.0
    k: float | None = None

    def __post_init__(self):
        if not -1.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (-1, 1), got {self.gamma}")
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if self.gamma + self.nu <= 0.0:
            raise ValueError(
                f"gamma + nu must be positive, got {self.gamma + self.nu}"
            )
        if self.cb <= 0.0 or self.c0 <= 0.0 or self.C0 <= 0.0:
            raise ValueError("cb, c0, C0 must be positive")
        if self.c0 > self.cb or self.cb > self.C0:
            raise ValueError("need c0 <= cb <= C0")
        if self.k is not None:
            if not self.k > 2.0 / math.pi:
                raise ValueError(f"truncation k must exceed 2/pi, got {self.k}")

    def b(self, theta):
        """Angular density b(theta), zero outside (0, pi/2]."""
        theta = np.asarray(theta, dtype=np.float64)
        inside = (theta > 0.0) & (theta <= HALF_PI)
        safe = np.where(inside, theta, 1.0)
        return np.where(inside, self.cb * safe ** (-1.0 - self.nu), 0.0)

    def theta_mass(self, theta_min: float) -> float:
        """Integral of b over [theta_min, pi/2]."""
        if not 0.0 < theta_min < HALF_PI:
            raise ValueError(f"theta_min must lie in (0, pi/2), got {theta_min}")
        return self.cb * (theta_min ** (-self.nu) - HALF_PI ** (-self.nu)) / self.nu

    def c_theta(self) -> float:
        """Angular mass of the truncated kernel, c_b (k^nu - (pi/2)^-nu)/nu."""
        if self.k is None:
            raise ValueError("cross section has no truncation level k")
        return self.cb * (self.k**self.nu - HALF_PI ** (-self.nu)) / self.nu

    def candidate_rate(self) -> float:
        """Per-particle proposal rate of the truncated dynamics, 2*pi*k*c_theta."""
        if self.k is None:
            raise ValueError("cross section has no truncation level k")
        return 2.0 * math.pi * self.k * self.c_theta()


class CollisionAngles(NamedTuple):
    theta: float
    phi: float


@dataclass(frozen=True)
class Frame:
    """Orthonormal pair completing X/|X| to a basis, scaled by |X|."""

    i_vec: np.ndarray
    j_vec: np.ndarray


def orthonormal_frame(x):
    """Return (i_vec, j_vec) with |i|=|j|=|x|, i,j,x mutually orthogonal.

    The construction picks the coordinate axis least aligned with x (ties:
    lowest index), projects it orthogonal to x and rescales. x = 0 maps to
    (0, 0) so the frame of a zero relative velocity is identically zero.
    """
    x = np.asarray(x, dtype=np.float64)
    n = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    safe = np.where(n > 0.0, n, 1.0)
    xhat = x / safe
    axis = np.argmin(np.abs(xhat), axis=-1)
    e = np.zeros_like(x)
    np.put_along_axis(e, axis[..., None], 1.0, axis=-1)
    dot = np.sum(e * xhat, axis=-1, keepdims=True)
    proj = e - dot * xhat
    pn = np.sqrt(np.sum(proj * proj, axis=-1, keepdims=True))
    i_vec = np.where(n > 0.0, n * proj / np.where(pn > 0.0, pn, 1.0), 0.0)
    j_vec = np.cross(xhat, i_vec)
    j_vec = np.where(n > 0.0, j_vec, 0.0)
    return i_vec, j_vec


def frame(x) -> Frame:
    i_vec, j_vec = orthonormal_frame(x)
    return Frame(i_vec=i_vec, j_vec=j_vec)


def gamma_vec(x, phi):
    """Azimuthal direction cos(phi) I(x) + sin(phi) J(x); length |x|."""
    phi = np.asarray(phi, dtype=np.float64)
    i_vec, j_vec = orthonormal_frame(x)
    return np.cos(phi)[..., None] * i_vec + np.sin(phi)[..., None] * j_vec


def deviation(v, v_star, theta, phi):
    """Velocity jump of v in a collision with v_star at angles (theta, phi).

    Half-angle form of -(1-cos)/2 X + (sin/2) Gamma(X, phi) with X = v - v_star;
    exact for grazing theta where 1 - cos(theta) underflows.
    """
    v = np.asarray(v, dtype=np.float64)
    v_star = np.asarray(v_star, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    x = v - v_star
    s = np.sin(theta / 2.0)
    c = np.cos(theta / 2.0)
    return (-(s * s))[..., None] * x + (s * c)[..., None] * gamma_vec(x, phi)


def post_collision(v, v_star, theta, phi):
    """Both outgoing velocities; the pair sum is v + v_star by construction."""
    v = np.asarray(v, dtype=np.float64)
    v_star = np.asarray(v_star, dtype=np.float64)
    a = deviation(v, v_star, theta, phi)
    v_prime = v + a
    v_star_prime = (v + v_star) - v_prime
    return v_prime, v_star_prime


def sample_theta(cs: CrossSection, theta_min, u):
    """Inverse-CDF draw of theta from b restricted to [theta_min, pi/2].

    u = 0 returns theta_min, u = 1 returns pi/2. The closed form is
    (theta_min^-nu - u*(theta_min^-nu - (pi/2)^-nu))^(-1/nu); the result is
    clipped into [theta_min, pi/2] because the pow round trip can overshoot
    by an ulp.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("u must lie in [0, 1]")
    tm = np.asarray(theta_min, dtype=np.float64)
    if np.any((tm <= 0.0) | (tm >= HALF_PI)):
        raise ValueError("theta_min must lie in (0, pi/2)")
    lo = tm ** (-cs.nu)
    hi = HALF_PI ** (-cs.nu)
    theta = (lo - u * (lo - hi)) ** (-1.0 / cs.nu)
    return np.clip(theta, tm, HALF_PI)


def h_trunc(v, k):
    """Radial truncation H_k: scale v down to |v| = k when it is longer."""
    v = np.asarray(v, dtype=np.float64)
    n = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    scale = np.where(n > k, k / np.where(n > 0.0, n, 1.0), 1.0)
    return v * scale


def tanaka_phi0(x, y):
    """Azimuth shift aligning the frame of y with the frame of x.

    atan2 of the frame overlap, normalized to [0, 2*pi). Degenerate inputs
    (either frame zero, or exactly opposite frames) return 0.0; in particular
    phi0(x, x) is exactly 0.0, which the replay invariants rely on.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ix, jx = orthonormal_frame(x)
    iy, jy = orthonormal_frame(y)
    s = np.sum(ix * iy, axis=-1) + np.sum(jx * jy, axis=-1)
    t = np.sum(ix * jy, axis=-1) - np.sum(jx * iy, axis=-1)
    # degenerate overlap (zero or antiparallel arguments): (s, t) is roundoff
    # noise around (0, 0); define the shift as 0 there (any value satisfies
    # the alignment bound since |x - y| = |x| + |y|)
    scale = np.sqrt(np.sum(x * x, axis=-1) * np.sum(y * y, axis=-1))
    noise = np.hypot(s, t) <= 1e-12 * scale
    s = np.where(noise, 1.0, s)
    t = np.where(noise, 0.0, t)
    phi0 = np.arctan2(t, s)
    phi0 = np.where(phi0 < 0.0, phi0 + 2.0 * math.pi, phi0)
    # atan2(-0.0, s>0) gives -0.0 -> +2pi after the wrap; fold back to 0
    return np.where(phi0 >= 2.0 * math.pi, 0.0, phi0)
