"""Mean-field particle simulation of the truncated non-cutoff dynamics.

N particles carry velocities; each step draws Poisson collision candidates
per particle at the constant k-uniformized rate, accepts with the truncated
velocity factor, and applies the grazing collision map. The Nanbu scheme
updates only the initiating particle (the direct discretization of the
one-particle jump SDE); the symmetric pair scheme updates both and conserves
momentum and energy exactly, which makes it the conservation diagnostic.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from ._backend import resolve_backend
from .collision import CrossSection, sample_theta
from .rng import KIND_INIT, KIND_STEP, stream
from .stats import EmpiricalMeasure, moment

_SCHEMES = ("nanbu", "symmetric_pair")

F0_FAMILIES = ("two_point", "gaussian", "uniform_ball", "pareto", "file")

_DIRAC_MESSAGE = (
    "initial law must not be a single atom: the dynamics cannot regularize "
    "a Dirac starting state"
)


class SimulationAbort(RuntimeError):
    """Raised when a step produces a non-finite velocity; carries the state."""

    def __init__(self, message, system):
        super().__init__(message)
        self.system = system


@dataclass(frozen=True)
class ParticleSystem:
    """Velocity swarm at a point in time; step_index keys the RNG stream."""

    velocities: np.ndarray
    time: float
    step_index: int = 0

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 2:
            raise ValueError("velocities must have shape (n, 3) with n >= 2")
        object.__setattr__(self, "velocities", v)

    @property
    def n(self) -> int:
        return self.velocities.shape[0]

    @property
    def momentum(self) -> np.ndarray:
        """Mean velocity vector."""
        return self.velocities.mean(axis=0)

    @property
    def energy(self) -> float:
        """Mean squared speed."""
        return float(np.mean(np.sum(self.velocities**2, axis=1)))


@dataclass(frozen=True)
class SimConfig:
    """Run parameters; dt='auto' resolves to 0.1 over the candidate rate."""

    n_particles: int
    t_end: float
    cross_section: CrossSection
    dt: float | str = "auto"
    scheme: str = "nanbu"
    seed: int = 0
    snapshot_times: tuple = ()
    f0: dict | None = None
    moment_orders: tuple = (2.0, 4.0)
    backend: str | None = None

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least 2 particles")
        if not (math.isfinite(self.t_end) and self.t_end >= 0.0):
            raise ValueError("t_end must be finite and nonnegative")
        if self.cross_section.k is None:
            raise ValueError("cross section must carry a finite truncation k")
        scheme = str(self.scheme).strip().lower().replace("-", "_")
        if scheme == "symmetricpair":
            scheme = "symmetric_pair"
        if scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        object.__setattr__(self, "scheme", scheme)
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        times = tuple(float(t) for t in self.snapshot_times) or (self.t_end,)
        if list(times) != sorted(set(times)):
            raise ValueError("snapshot_times must be strictly increasing")
        if times[0] < 0.0 or times[-1] > self.t_end:
            raise ValueError("snapshot_times must lie within [0, t_end]")
        object.__setattr__(self, "snapshot_times", times)
        object.__setattr__(self, "moment_orders", tuple(float(p) for p in self.moment_orders))
        if self.dt != "auto":
            dt = float(self.dt)
            if not (math.isfinite(dt) and dt > 0.0):
                raise ValueError("dt must be positive or 'auto'")
            lam = self.cross_section.candidate_rate()
            if scheme == "nanbu" and dt * lam > 0.1:
                # the pair sweep is dt-exact; only frozen partners bias
                warnings.warn(
                    f"dt * candidate rate = {dt * lam:.3g} > 0.1: the Nanbu step "
                    "holds partners frozen, large values bias the chain",
                    RuntimeWarning,
                )
            object.__setattr__(self, "dt", dt)

    @property
    def resolved_dt(self) -> float:
        if self.dt == "auto":
            return 0.1 / self.cross_section.candidate_rate()
        return float(self.dt)


@dataclass(frozen=True)
class Snapshot:
    """State of the empirical law at time t with its summary diagnostics."""

    t: float
    measure: EmpiricalMeasure
    momentum: np.ndarray
    energy: float
    moments: dict = field(default_factory=dict)

    @classmethod
    def from_state(cls, t, velocities, moment_orders=(2.0,)):
        m = EmpiricalMeasure.from_samples(np.array(velocities, dtype=np.float64))
        mom = np.sum(m.weights[:, None] * m.samples, axis=0)
        return cls(
            t=float(t),
            measure=m,
            momentum=mom,
            energy=moment(m, 2.0),
            moments={p: moment(m, p) for p in moment_orders},
        )


def _reject_dirac(points):
    spread = np.ptp(points, axis=0)
    if np.all(spread == 0.0):
        raise ValueError(_DIRAC_MESSAGE)


def init_system(f0_spec, config: SimConfig) -> ParticleSystem:
    """Draw N i.i.d. velocities from an initial-law descriptor.

    Families: two_point (two atoms, equal mass), gaussian (isotropic),
    uniform_ball, pareto (truncated power-law speeds, uniform directions),
    file (resampled from stored samples). A descriptor whose law is a single
    atom is rejected: the regularization results all assume a non-Dirac
    start.
    """
    spec = dict(f0_spec)
    family = str(spec.pop("family", "")).strip().lower()
    n = config.n_particles
    g = stream(config.seed, KIND_INIT)
    if family in ("point", "dirac"):
        raise ValueError(_DIRAC_MESSAGE)
    if family == "two_point":
        points = np.asarray(
            spec.pop("points", [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), dtype=np.float64
        )
        if points.shape != (2, 3):
            raise ValueError("two_point needs exactly two 3-vectors")
        _reject_dirac(points)
        picks = g.integers(0, 2, n)
        v = points[picks]
    elif family == "gaussian":
        mean = np.asarray(spec.pop("mean", [0.0, 0.0, 0.0]), dtype=np.float64)
        sigma = float(spec.pop("sigma", 1.0))
        if sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if sigma == 0.0:
            raise ValueError(_DIRAC_MESSAGE)
        v = mean + sigma * g.normal(size=(n, 3))
    elif family == "uniform_ball":
        center = np.asarray(spec.pop("center", [0.0, 0.0, 0.0]), dtype=np.float64)
        radius = float(spec.pop("radius", 1.0))
        if radius < 0.0:
            raise ValueError("radius must be nonnegative")
        if radius == 0.0:
            raise ValueError(_DIRAC_MESSAGE)
        d = g.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = radius * g.random(n) ** (1.0 / 3.0)
        v = center + r[:, None] * d
    elif family == "pareto":
        index = float(spec.pop("index", 2.5))
        s_min = float(spec.pop("s_min", 1.0))
        cap = float(spec.pop("cap", 1e3))
        if not (index > 0.0 and 0.0 < s_min < cap):
            raise ValueError("pareto needs index > 0 and 0 < s_min < cap")
        d = g.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        u = g.random(n)
        tail = (s_min / cap) ** index
        speeds = s_min * (1.0 - u * (1.0 - tail)) ** (-1.0 / index)
        v = speeds[:, None] * d
    elif family == "file":
        from .io import load_samples

        path = spec.pop("path", None)
        if path is None:
            raise ValueError("file family needs a 'path' entry")
        m = load_samples(path)
        _reject_dirac(m.samples)
        v = m.resample(n, g)
    else:
        raise ValueError(f"unknown initial-law family {family!r}, expected one of {F0_FAMILIES}")
    if spec:
        raise ValueError(f"unused initial-law keys: {sorted(spec)}")
    return ParticleSystem(velocities=v, time=0.0, step_index=0)


def _draw_candidates(g, n, lam, cs):
    """Fixed draw order: total count, owners, partners, theta, phi, acceptance.

    One global Poisson batch with i.i.d. owners realizes the uniformized jump
    chain: for the pair scheme the serial sweep then reproduces the
    continuous-time law for any dt, and for Nanbu the owner multiset has the
    same law as per-particle Poisson counts.
    """
    m = int(g.poisson(n * lam))
    own = g.integers(0, n, m)
    raw = g.integers(0, n - 1, m)
    partners = raw + (raw >= own)
    thetas = sample_theta(cs, 1.0 / cs.k, g.random(m))
    phis = (2.0 * math.pi) * g.random(m)
    u_acc = g.random(m)
    return own, partners, np.asarray(thetas), phis, u_acc


def step(system: ParticleSystem, dt: float, config: SimConfig) -> ParticleSystem:
    """Advance one time step; dt = 0 returns the system unchanged."""
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    if dt == 0.0:
        return system
    cs = config.cross_section
    backend = resolve_backend(config.backend)
    lam = cs.candidate_rate() * dt
    if config.scheme == "symmetric_pair":
        lam /= 2.0
    g = stream(config.seed, KIND_STEP, system.step_index)
    own, partners, thetas, phis, u_acc = _draw_candidates(g, system.n, lam, cs)
    v = system.velocities.copy()
    gamma, k = cs.gamma, float(cs.k)
    if config.scheme == "nanbu":
        if backend == "numba":
            _kernels.nanbu_chain_numba(v, system.velocities, own, partners, thetas, phis, u_acc, gamma, k)
        else:
            _kernels.nanbu_rounds_numpy(v, system.velocities, own, partners, thetas, phis, u_acc, gamma, k)
    else:
        if backend == "numba":
            _kernels.pair_chain_numba(v, own, partners, thetas, phis, u_acc, gamma, k)
        else:
            _kernels.pair_loop_python(v, own, partners, thetas, phis, u_acc, gamma, k)
    out = ParticleSystem(velocities=v, time=system.time + dt, step_index=system.step_index + 1)
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v).all(axis=1))[0])
        raise SimulationAbort(
            f"non-finite velocity for particle {bad} at t = {out.time:.6g} "
            f"(step {system.step_index}); aborted state attached",
            out,
        )
    return out


def _advance(system, target, config):
    """March to the target time in dt steps plus one partial step."""
    dt = config.resolved_dt
    while True:
        gap = target - system.time
        if gap <= 1e-12 * max(1.0, abs(target)):
            break
        system = step(system, min(dt, gap), config)
    return replace(system, time=target)


def simulate(config: SimConfig, f0_spec=None) -> list:
    """Run the chain and return snapshots at the configured times."""
    spec = f0_spec if f0_spec is not None else config.f0
    if spec is None:
        raise ValueError("no initial law: pass f0_spec or set config.f0")
    system = init_system(spec, config)
    snaps = []
    for target in config.snapshot_times:
        system = _advance(system, target, config)
        snaps.append(Snapshot.from_state(target, system.velocities.copy(), config.moment_orders))
    if config.t_end > config.snapshot_times[-1]:
        _advance(system, config.t_end, config)
    return snaps
