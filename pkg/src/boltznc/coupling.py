"""Tagged-particle jump paths and frozen-coefficient replays.

A tagged velocity is driven by a piecewise-constant-in-time background of
snapshots: collision proposals arrive at a dominating rate, thinning accepts
them with the truncated velocity factor, and every proposal inside the
recording window is kept as a mark (time, partner atom, angles, thinning
uniform). Replaying the same marks with the base point frozen at the window
time realizes the coupled frozen-coefficient approximation; the gap between
path and replay is the quantity whose epsilon-scaling the rate experiment
fits.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._backend import resolve_backend
from .collision import HALF_PI, CrossSection
from .rng import KIND_ANALYSIS, KIND_PATH, stream


@dataclass(frozen=True)
class MarkSet:
    """Marks recorded on the window, accepted and rejected alike."""

    times: np.ndarray
    partners: np.ndarray
    thetas: np.ndarray
    phis: np.ndarray
    us: np.ndarray
    pre: np.ndarray

    def __len__(self):
        return self.times.shape[0]

    def after(self, cutoff):
        """Marks strictly later than the cutoff time."""
        sel = self.times > cutoff
        return MarkSet(
            times=self.times[sel],
            partners=self.partners[sel],
            thetas=self.thetas[sel],
            phis=self.phis[sel],
            us=self.us[sel],
            pre=self.pre[sel],
        )


@dataclass(frozen=True)
class CoupledPath:
    """One tagged trajectory with its recorded window and replay endpoints."""

    cross_section: CrossSection
    t: float
    eps_max: float
    path_times: np.ndarray
    path_values: np.ndarray
    events: MarkSet
    v_t: np.ndarray
    v_t_eps: np.ndarray
    backend: str

    @property
    def win_start(self) -> float:
        return self.t - self.eps_max

    @property
    def v_path(self):
        """Trajectory record as (jump times, values after each jump)."""
        return self.path_times, self.path_values

    def value_at(self, s: float) -> np.ndarray:
        """Right-continuous path value at time s."""
        if s < 0.0 or s > self.t:
            raise ValueError("time outside the path interval")
        idx = int(np.searchsorted(self.path_times, s, side="right")) - 1
        return self.path_values[idx]


def _segment_tables(background, t):
    if not background:
        raise ValueError("background must contain at least one snapshot")
    times = [float(s.t) for s in background]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("background snapshots must be strictly increasing in time")
    if times[0] > 1e-12:
        raise ValueError("background must cover time 0")
    seg_times = np.array(times + [t + 1.0])
    seg_times[0] = min(seg_times[0], 0.0)
    atoms = []
    cdf = []
    offsets = [0]
    seg_vmax = []
    for snap in background:
        m = snap.measure
        atoms.append(m.samples)
        c = np.cumsum(m.weights)
        c[-1] = 1.0
        cdf.append(c)
        offsets.append(offsets[-1] + len(m))
        seg_vmax.append(float(np.linalg.norm(m.samples, axis=1).max()))
    return (
        seg_times,
        np.ascontiguousarray(np.concatenate(atoms)),
        np.concatenate(cdf),
        np.array(offsets, dtype=np.int64),
        np.array(seg_vmax),
    )


def tagged_path(
    background,
    v0,
    t: float,
    cs: CrossSection,
    seed: int,
    eps_max: float | None = None,
    path_index: int = 0,
    backend: str | None = None,
    buffer_hint: int | None = None,
) -> CoupledPath:
    """Simulate one tagged velocity on [0, t] and record its final window.

    The recording window is [t - eps_max, t] (eps_max defaults to t/2);
    coupled_freeze can replay any eps up to eps_max. The proposal buffer is
    sized from the worst-case level k (or buffer_hint) and regrown
    deterministically if a path exhausts it, so the result never depends on
    the initial size.
    """
    if cs.k is None:
        raise ValueError("tagged paths need a finite truncation k")
    if not t > 0.0:
        raise ValueError("t must be positive")
    eps_max = t / 2.0 if eps_max is None else float(eps_max)
    if not 0.0 < eps_max <= t:
        raise ValueError("eps_max must lie in (0, t]")
    backend = resolve_backend(backend)
    v0 = np.asarray(v0, dtype=np.float64).reshape(3).copy()
    win_start = t - eps_max
    seg_times, atoms, cdf, offsets, seg_vmax = _segment_tables(background, t)
    live = (seg_times[:-1] < t) & (seg_times[1:] > win_start)
    vmax_win = float(seg_vmax[live].max())
    k = float(cs.k)
    tm = 1.0 / k
    lo = tm ** (-cs.nu)
    hi = HALF_PI ** (-cs.nu)
    expo = -1.0 / cs.nu
    rate_base = 2.0 * math.pi * cs.c_theta()
    core = _kernels.tagged_core_numba if backend == "numba" else _kernels.tagged_core
    if buffer_hint is not None and buffer_hint > 0:
        cap = int(buffer_hint)
    else:
        cap = int(rate_base * k * t * 1.25) + 12 * int(math.sqrt(rate_base * k * t) + 1.0)
        cap += len(background) + 64
    l_floor = 0.0
    while True:
        g = stream(seed, KIND_PATH, path_index)
        uniforms = g.random((cap, 5))
        mark_t = np.empty(cap)
        mark_v = np.empty((cap, 3))
        mark_theta = np.empty(cap)
        mark_phi = np.empty(cap)
        mark_u = np.empty(cap)
        mark_pre = np.empty((cap, 3))
        jump_t = np.empty(cap)
        jump_v = np.empty((cap, 3))
        v_out = np.empty(3)
        status, n_marks, n_jumps, _ = core(
            v0, t, win_start, seg_times, atoms, cdf, offsets, seg_vmax, vmax_win,
            cs.gamma, k, lo, hi, expo, tm, rate_base, l_floor, uniforms,
            mark_t, mark_v, mark_theta, mark_phi, mark_u, mark_pre,
            jump_t, jump_v, v_out,
        )
        if status == _kernels.OK:
            break
        if status == _kernels.EXHAUSTED:
            cap *= 2
        elif status == _kernels.BOUND_EXCEEDED:
            # defensive: the per-segment level provably dominates, but the
            # contract is recompute-and-redo, and level k always dominates
            l_floor = k
        else:
            raise RuntimeError(f"tagged path kernel returned status {status}")
    events = MarkSet(
        times=mark_t[:n_marks].copy(),
        partners=mark_v[:n_marks].copy(),
        thetas=mark_theta[:n_marks].copy(),
        phis=mark_phi[:n_marks].copy(),
        us=mark_u[:n_marks].copy(),
        pre=mark_pre[:n_marks].copy(),
    )
    path = CoupledPath(
        cross_section=cs,
        t=t,
        eps_max=eps_max,
        path_times=np.concatenate([[0.0], jump_t[:n_jumps]]),
        path_values=np.vstack([v0[None, :], jump_v[:n_jumps]]),
        events=events,
        v_t=v_out.copy(),
        v_t_eps=np.empty(3),
        backend=backend,
    )
    object.__setattr__(path, "v_t_eps", _replay(path, path.win_start, fresh=False))
    return path


def _replay(path: CoupledPath, freeze_time: float, fresh: bool) -> np.ndarray:
    marks = path.events.after(freeze_time)
    base = np.ascontiguousarray(path.value_at(freeze_time))
    out = np.empty(3)
    core = _kernels.replay_core_numba if path.backend == "numba" else _kernels.replay_core
    core(
        base,
        np.ascontiguousarray(marks.pre),
        np.ascontiguousarray(marks.partners),
        marks.thetas,
        marks.phis,
        marks.us,
        path.cross_section.gamma,
        float(path.cross_section.k),
        fresh,
        out,
    )
    return out


def coupled_freeze(path: CoupledPath, eps: float):
    """Replay the recorded marks from the frozen base at t - eps.

    Returns (v_t, v_t_eps): the live endpoint and the frozen-coefficient
    endpoint built from the same marks with the coupling-angle shift.
    """
    if eps > path.t:
        raise ValueError("eps exceeds the path time")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if eps > path.eps_max * (1.0 + 1e-12):
        raise ValueError(
            f"eps = {eps:.6g} exceeds the recorded window eps_max = {path.eps_max:.6g}"
        )
    v_eps = _replay(path, path.t - min(eps, path.eps_max), fresh=False)
    return path.v_t.copy(), v_eps


def degenerate_replay(path: CoupledPath) -> np.ndarray:
    """Replay the window with per-mark freshness; must equal v_t exactly."""
    return _replay(path, path.win_start, fresh=True)


@dataclass(frozen=True)
class FreezeRateCurve:
    """Monte Carlo moments of |V_t - V_t^eps|^nu and their log-log slope."""

    eps: np.ndarray
    moments: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    n_paths: int


def freeze_error_curve(
    background,
    t: float,
    cs: CrossSection,
    eps_list,
    n_paths: int,
    seed: int = 0,
    backend: str | None = None,
) -> FreezeRateCurve:
    """Fit the epsilon-scaling of the frozen-replay error.

    Every path is recorded once with eps_max = max(eps_list) and replayed at
    each eps (common marks across the whole curve). Initial velocities are
    resampled from the earliest background snapshot.
    """
    eps = np.sort(np.asarray(list(eps_list), dtype=np.float64))[::-1]
    if eps.size < 2:
        raise ValueError("need at least two eps values to fit a slope")
    if not (eps > 0.0).all() or eps[0] > t:
        raise ValueError("eps values must lie in (0, t]")
    g = stream(seed, KIND_ANALYSIS, 0)
    v0s = background[0].measure.resample(n_paths, g)
    sums = np.zeros(eps.size)
    sums_sq = np.zeros(eps.size)
    for i in range(n_paths):
        path = tagged_path(
            background, v0s[i], t, cs, seed, eps_max=float(eps[0]),
            path_index=i, backend=backend,
        )
        for j, e in enumerate(eps):
            _, v_eps = coupled_freeze(path, float(e))
            d = float(np.linalg.norm(path.v_t - v_eps)) ** cs.nu
            sums[j] += d
            sums_sq[j] += d * d
    moments = sums / n_paths
    var = np.maximum(sums_sq / n_paths - moments**2, 0.0)
    errors = np.sqrt(var / n_paths)
    good = moments > 0.0
    if good.sum() < 2:
        raise RuntimeError("replay errors vanished; cannot fit a slope")
    a = np.vstack([np.ones(good.sum()), np.log(eps[good])]).T
    coef, *_ = np.linalg.lstsq(a, np.log(moments[good]), rcond=None)
    return FreezeRateCurve(
        eps=eps, moments=moments, errors=errors, slope=float(coef[1]),
        intercept=float(coef[0]), n_paths=n_paths,
    )
