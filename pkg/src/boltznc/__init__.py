"""Particle Monte Carlo and verification toolkit for grazing-collision dynamics."""

__version__ = "0.1.0"

from .collision import (
    CollisionAngles,
    CrossSection,
    Frame,
    deviation,
    frame,
    gamma_vec,
    h_trunc,
    orthonormal_frame,
    post_collision,
    sample_theta,
    tanaka_phi0,
)

__all__ = [
    "__version__",
    "CollisionAngles",
    "CrossSection",
    "Frame",
    "deviation",
    "frame",
    "gamma_vec",
    "h_trunc",
    "orthonormal_frame",
    "post_collision",
    "sample_theta",
    "tanaka_phi0",
]
