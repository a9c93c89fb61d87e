"""Experiment harness: validated configs, study subcommands, manifests.

A run is described by one JSON file naming a subcommand, a seed, an output
directory, the particle-run parameters, and one optional table of study
parameters. Everything is checked before any computation starts, and every
diagnostic the run asserts about itself lands in manifest.json, written
atomically at the very end so interrupted runs leave no manifest at all.
"""

import argparse
import hashlib
import json
import math
import os
import re
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .collision import CrossSection
from .coupling import FreezeRateCurve, coupled_freeze, freeze_error_curve, tagged_path
from .io import load_samples, save_json, save_samples_csv, save_sweep_csv
from .levy import LevyCtx, lambda_moments, psi, symbol_sweep, verify_coercivity
from .rng import KIND_ANALYSIS, KIND_INIT, KIND_PATH, KIND_STEP, stream
from .simulate import SimConfig, simulate
from .stats import (
    EmpiricalMeasure,
    besov_estimate,
    entropy_knn,
    smoothness_exponent_hard,
    smoothness_exponent_soft,
)
from .support import coverage_report, default_probes, estimate_q, sphere_spread

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunManifest",
    "load_config",
    "load_samples",
    "run",
    "main",
]

SUBCOMMANDS = ("simulate", "rates", "psi", "besov", "support", "entropy", "exponents")

_AXES = np.array(
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]
)
_AXES /= np.linalg.norm(_AXES, axis=1, keepdims=True)


class ConfigError(ValueError):
    """Rejected configuration; the message carries file and line."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully validated run description."""

    subcommand: str
    seed: int
    output_dir: str
    sim: SimConfig | None
    params: dict
    config_sha256: str
    source: str


@dataclass(frozen=True)
class RunManifest:
    """Record of one run: provenance, self-checks, and result summary."""

    subcommand: str
    config_sha256: str
    code_version: str
    seed: int
    threads: int
    deterministic: bool
    wall_clock_s: float
    rng: dict
    summary: dict
    assertions: list

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config_sha256": self.config_sha256,
            "code_version": self.code_version,
            "seed": self.seed,
            "threads": self.threads,
            "deterministic": self.deterministic,
            "wall_clock_s": self.wall_clock_s,
            "rng": self.rng,
            "summary": self.summary,
            "assertions": self.assertions,
            "passed": self.passed,
            "failed": [a["name"] for a in self.assertions if not a["passed"]],
        }


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _anchor_key(message: str, table: dict) -> str | None:
    for key in table:
        if re.search(r"\b" + re.escape(key) + r"\b", message):
            return key
    return None


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_num(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def load_config(path, seed_override=None) -> ExperimentConfig:
    """Parse and validate one JSON run description.

    Unknown keys are rejected at every level, and every rejection message
    is anchored to the line where the offending key appears.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
        doc = json.loads(text)
    except UnicodeDecodeError:
        raise ConfigError(f"{path}:1: config is not valid UTF-8") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: the top level must be an object")

    def fail(key, msg):
        raise ConfigError(f"{path}:{_line_of(text, key)}: {msg}")

    sub = doc.get("subcommand")
    if sub is None:
        fail("subcommand", "missing required key 'subcommand'")
    if sub not in SUBCOMMANDS:
        fail(
            "subcommand",
            f"subcommand must be one of {', '.join(SUBCOMMANDS)}, got {sub!r}",
        )
    allowed = {"subcommand", "seed", "output_dir", "sim", sub}
    for key in doc:
        if key in allowed:
            continue
        hint = (
            " (parameter table for a different subcommand)"
            if key in SUBCOMMANDS
            else ""
        )
        fail(key, f"unknown key {key!r}{hint}")

    seed = doc.get("seed", 0)
    if not _is_int(seed) or not 0 <= seed < 2**64:
        fail("seed", "seed must be an integer in [0, 2^64)")
    if seed_override is not None:
        if not 0 <= int(seed_override) < 2**64:
            raise ConfigError(f"{path}:1: seed override must fit in 64 bits")
        seed = int(seed_override)

    outdir = doc.get("output_dir")
    if not isinstance(outdir, str) or not outdir:
        fail("output_dir", "output_dir must be a nonempty path string")

    sim = _parse_sim(doc.get("sim"), seed, fail) if "sim" in doc else None
    if sim is None and sub != "exponents":
        fail("subcommand", f"subcommand {sub!r} requires a 'sim' table")

    table = doc.get(sub, {})
    if not isinstance(table, dict):
        fail(sub, f"{sub!r} must be a table of parameters")
    params = _PARAM_PARSERS[sub](dict(table), sim, fail)

    return ExperimentConfig(
        subcommand=sub,
        seed=seed,
        output_dir=outdir,
        sim=sim,
        params=params,
        config_sha256=hashlib.sha256(raw).hexdigest(),
        source=path,
    )


_SIM_KEYS = {
    "n_particles",
    "t_end",
    "dt",
    "scheme",
    "snapshot_times",
    "f0",
    "moment_orders",
    "backend",
    "cross_section",
}
_CS_KEYS = {"gamma", "nu", "c0", "C0", "cb", "k"}


def _parse_sim(table, seed, fail) -> SimConfig:
    if not isinstance(table, dict):
        fail("sim", "'sim' must be a table")
    for key in table:
        if key == "seed":
            fail("seed", "the experiment seed is the single top-level 'seed'")
        if key not in _SIM_KEYS:
            fail(key, f"unknown key {key!r} in 'sim'")
    cs_table = table.get("cross_section")
    if not isinstance(cs_table, dict):
        fail("sim", "'sim' needs a 'cross_section' table")
    for key in cs_table:
        if key not in _CS_KEYS:
            fail(key, f"unknown key {key!r} in 'cross_section'")
    for key in ("gamma", "nu", "k"):
        if not _is_num(cs_table.get(key)):
            fail("cross_section", f"'cross_section' needs a numeric {key!r}")
    try:
        cs = CrossSection(**{k: float(v) for k, v in cs_table.items()})
    except ValueError as e:
        fail(_anchor_key(str(e), cs_table) or "cross_section", str(e))

    f0 = table.get("f0")
    if f0 is not None and (not isinstance(f0, dict) or "family" not in f0):
        fail("f0", "'f0' must be a table with a 'family' entry")

    kwargs = {
        "cross_section": cs,
        "seed": seed,
        "f0": f0,
    }
    for key in ("n_particles", "t_end", "dt", "scheme", "backend"):
        if key in table:
            kwargs[key] = table[key]
    for key in ("snapshot_times", "moment_orders"):
        if key in table:
            value = table[key]
            if not isinstance(value, list) or not all(_is_num(v) for v in value):
                fail(key, f"{key!r} must be a list of numbers")
            kwargs[key] = tuple(float(v) for v in value)
    try:
        return SimConfig(**kwargs)
    except (TypeError, ValueError) as e:
        fail(_anchor_key(str(e), table) or "sim", str(e))


def _take_int(table, key, default, fail, lo=None, hi=None):
    value = table.pop(key, default)
    if not _is_int(value):
        fail(key, f"{key!r} must be an integer")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        fail(key, f"{key!r} must lie in [{lo}, {hi}]")
    return value


def _take_float(table, key, default, fail, lo=None, hi=None, open_ends=False):
    value = table.pop(key, default)
    if not _is_num(value):
        fail(key, f"{key!r} must be a number")
    value = float(value)
    low_bad = lo is not None and (value <= lo if open_ends else value < lo)
    high_bad = hi is not None and (value >= hi if open_ends else value > hi)
    if low_bad or high_bad:
        bounds = f"({lo}, {hi})" if open_ends else f"[{lo}, {hi}]"
        fail(key, f"{key!r} must lie in {bounds}")
    return value


def _take_float_list(table, key, default, fail):
    value = table.pop(key, list(default))
    if not isinstance(value, list) or not value or not all(_is_num(v) for v in value):
        fail(key, f"{key!r} must be a nonempty list of numbers")
    return [float(v) for v in value]


def _reject_leftovers(table, where, fail):
    for key in table:
        fail(key, f"unknown key {key!r} in {where!r}")


def _match_snapshot_time(t, sim, key, fail):
    hits = [s for s in sim.snapshot_times if abs(s - t) <= 1e-9]
    if not hits:
        fail(key, f"time {t} is not one of the configured snapshot_times")
    return hits[0]


def _params_simulate(table, sim, fail) -> dict:
    _reject_leftovers(table, "simulate", fail)
    return {}


def _params_rates(table, sim, fail) -> dict:
    t = _take_float(table, "t", sim.t_end, fail)
    if not 0.0 < t <= sim.t_end:
        fail("t", "'t' must lie in (0, sim.t_end]")
    t0 = _take_float(table, "t0", t / 2.0, fail)
    if not 0.0 <= t0 < t:
        fail("t0", "'t0' must lie in [0, t)")
    eps = _take_float_list(table, "eps", (0.4, 0.2, 0.1, 0.05), fail)
    if len(eps) < 2:
        fail("eps", "'eps' needs at least two values to fit a slope")
    if any(not 0.0 < e <= t for e in eps):
        fail("eps", "'eps' values must lie in (0, t]")
    if max(eps) > t - t0 + 1e-12:
        fail("eps", "max(eps) must not exceed t - t0: the window starts at t0")
    n_paths = _take_int(table, "n_paths", 200, fail, lo=2)
    _reject_leftovers(table, "rates", fail)
    if abs(sim.snapshot_times[0]) > 1e-12:
        fail("snapshot_times", "rates replays need a snapshot at time 0")
    return {"t": t, "t0": t0, "eps": eps, "n_paths": n_paths}


def _params_psi(table, sim, fail) -> dict:
    t = _take_float(table, "t", sim.t_end, fail)
    if not 0.0 < t <= sim.t_end:
        fail("t", "'t' must lie in (0, sim.t_end]")
    eps = _take_float(table, "eps", 0.1, fail, lo=0.0, hi=1.0, open_ends=True)
    v0 = _take_float_list(table, "v0", (0.0, 0.0, 0.0), fail)
    if len(v0) != 3:
        fail("v0", "'v0' must be a 3-vector")
    xi_min = _take_float(table, "xi_min", 0.1, fail)
    xi_max = _take_float(table, "xi_max", 10.0, fail)
    if not 0.0 < xi_min < xi_max:
        fail("xi_min", "need 0 < xi_min < xi_max")
    n_xi = _take_int(table, "n_xi", 12, fail, lo=2)
    _reject_leftovers(table, "psi", fail)
    if sim.snapshot_times[0] > t - eps + 1e-12:
        fail("eps", "the first snapshot must sit at or before t - eps")
    return {
        "t": t,
        "eps": eps,
        "v0": v0,
        "xi_min": xi_min,
        "xi_max": xi_max,
        "n_xi": n_xi,
    }


def _params_besov(table, sim, fail) -> dict:
    t = _match_snapshot_time(
        _take_float(table, "time", sim.snapshot_times[-1], fail), sim, "time", fail
    )
    r_set = _take_float_list(table, "r_set", (0.5, 0.7), fail)
    h_set = _take_float_list(table, "h_set", (0.25, 0.35, 0.5, 0.65, 0.85), fail)
    for key, values in (("r_set", r_set), ("h_set", h_set)):
        if any(not 0.0 < v < 1.0 for v in values):
            fail(key, f"{key!r} values must lie in (0, 1)")
    alpha = _take_float(table, "alpha", 0.1, fail, lo=0.0, hi=1.0, open_ends=True)
    grid_n = _take_int(table, "grid_n", 64, fail, lo=8)
    _reject_leftovers(table, "besov", fail)
    return {"time": t, "r_set": r_set, "h_set": h_set, "alpha": alpha, "grid_n": grid_n}


def _params_support(table, sim, fail) -> dict:
    t1 = _take_float(table, "t1", sim.t_end, fail)
    t0 = _take_float(table, "t0", t1 / 2.0, fail)
    if not 0.0 <= t0 <= t1 <= sim.t_end:
        fail("t0", "need 0 <= t0 <= t1 <= sim.t_end")
    if not any(t0 - 1e-9 <= s <= t1 + 1e-9 for s in sim.snapshot_times):
        fail("t0", "no snapshot falls inside [t0, t1]")
    params = {
        "t0": t0,
        "t1": t1,
        "iterations": _take_int(table, "iterations", 4, fail, lo=0),
        "samples_per_pair": _take_int(table, "samples_per_pair", 16, fail, lo=1),
        "cell_size": _take_float(table, "cell_size", 0.25, fail, lo=0.0, open_ends=True),
        "coverage_radius": _take_float(
            table, "coverage_radius", 2.0, fail, lo=0.0, open_ends=True
        ),
        "coverage_threshold": _take_float(
            table, "coverage_threshold", 0.5, fail, lo=0.0, hi=1.0
        ),
    }
    _reject_leftovers(table, "support", fail)
    return params


def _params_entropy(table, sim, fail) -> dict:
    times = _take_float_list(table, "times", sim.snapshot_times, fail)
    times = [_match_snapshot_time(t, sim, "times", fail) for t in times]
    k = _take_int(table, "k", 4, fail, lo=1)
    if sim.n_particles // 2 <= k:
        fail("k", "'k' must be smaller than half the particle count")
    _reject_leftovers(table, "entropy", fail)
    return {"times": times, "k": k}


def _params_exponents(table, sim, fail) -> dict:
    nu_min = _take_float(table, "nu_min", 0.05, fail, lo=0.0, hi=1.0, open_ends=True)
    nu_max = _take_float(table, "nu_max", 0.95, fail, lo=0.0, hi=1.0, open_ends=True)
    if nu_min >= nu_max:
        fail("nu_min", "need nu_min < nu_max")
    n_nu = _take_int(table, "n_nu", 181, fail, lo=2)
    gammas = table.pop("gammas", [])
    if not isinstance(gammas, list) or not all(_is_num(g) for g in gammas):
        fail("gammas", "'gammas' must be a list of numbers")
    gammas = [float(g) for g in gammas]
    for g in gammas:
        if not -1.0 < g < 1.0:
            fail("gammas", f"gamma {g} must lie in (-1, 1)")
        if g + nu_min <= 0.0:
            fail("gammas", f"gamma {g} needs nu > {-g} on the whole grid")
    _reject_leftovers(table, "exponents", fail)
    return {"nu_min": nu_min, "nu_max": nu_max, "n_nu": n_nu, "gammas": gammas}


_PARAM_PARSERS = {
    "simulate": _params_simulate,
    "rates": _params_rates,
    "psi": _params_psi,
    "besov": _params_besov,
    "support": _params_support,
    "entropy": _params_entropy,
    "exponents": _params_exponents,
}


def _check(assertions, name, passed, detail):
    assertions.append({"name": name, "passed": bool(passed), "detail": detail})


def _snapshot_rows(snaps):
    return [
        {
            "t": s.t,
            "energy": s.energy,
            "momentum": [float(c) for c in s.momentum],
            "moments": {repr(p): float(v) for p, v in s.moments.items()},
        }
        for s in snaps
    ]


def _cmd_simulate(cfg, outdir, threads):
    snaps = simulate(cfg.sim)
    for i, s in enumerate(snaps):
        save_samples_csv(
            os.path.join(outdir, "snapshots", f"snap_{i:04d}.csv"),
            s.measure.samples,
            t=s.t,
        )
    assertions = []
    finite = all(bool(np.isfinite(s.measure.samples).all()) for s in snaps)
    _check(assertions, "velocities finite", finite, "all snapshot clouds finite")
    e0 = snaps[0].energy
    energy_drift = max(abs(s.energy - e0) for s in snaps) / max(e0, 1e-300)
    p0 = snaps[0].momentum
    momentum_drift = max(float(np.linalg.norm(s.momentum - p0)) for s in snaps)
    if cfg.sim.scheme == "symmetric_pair":
        _check(
            assertions,
            "pairwise energy conserved",
            energy_drift <= 1e-9,
            f"relative drift {energy_drift:.3e}",
        )
        _check(
            assertions,
            "momentum conserved",
            momentum_drift <= 1e-9 * max(1.0, math.sqrt(e0)),
            f"drift {momentum_drift:.3e}",
        )
    summary = {
        "snapshots": _snapshot_rows(snaps),
        "energy_drift": energy_drift,
        "momentum_drift": momentum_drift,
        "scheme": cfg.sim.scheme,
    }
    return summary, assertions


def _fit_rate_curve(eps, sums, sums_sq, n_paths) -> FreezeRateCurve:
    # mirrors the serial fit so threaded runs share one code path
    moments = sums / n_paths
    var = np.maximum(sums_sq / n_paths - moments**2, 0.0)
    errors = np.sqrt(var / n_paths)
    good = moments > 0.0
    if good.sum() < 2:
        raise RuntimeError("replay errors vanished; cannot fit a slope")
    a = np.vstack([np.ones(int(good.sum())), np.log(eps[good])]).T
    coef, *_ = np.linalg.lstsq(a, np.log(moments[good]), rcond=None)
    return FreezeRateCurve(
        eps=eps,
        moments=moments,
        errors=errors,
        slope=float(coef[1]),
        intercept=float(coef[0]),
        n_paths=n_paths,
    )


def _rate_curve(background, t, cs, eps_list, n_paths, seed, threads, backend):
    if threads <= 1:
        return freeze_error_curve(
            background, t, cs, eps_list, n_paths, seed=seed, backend=backend
        )
    eps = np.sort(np.asarray(list(eps_list), dtype=np.float64))[::-1]
    g = stream(seed, KIND_ANALYSIS, 0)
    v0s = background[0].measure.resample(n_paths, g)

    def block(bounds):
        lo, hi = bounds
        s = np.zeros(eps.size)
        s2 = np.zeros(eps.size)
        for i in range(lo, hi):
            path = tagged_path(
                background,
                v0s[i],
                t,
                cs,
                seed,
                eps_max=float(eps[0]),
                path_index=i,
                backend=backend,
            )
            for j, e in enumerate(eps):
                _, v_eps = coupled_freeze(path, float(e))
                d = float(np.linalg.norm(path.v_t - v_eps)) ** cs.nu
                s[j] += d
                s2[j] += d * d
        return s, s2

    edges = np.linspace(0, n_paths, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(block, zip(edges[:-1], edges[1:])))
    sums = np.sum([p[0] for p in parts], axis=0)
    sums_sq = np.sum([p[1] for p in parts], axis=0)
    return _fit_rate_curve(eps, sums, sums_sq, n_paths)


def _cmd_rates(cfg, outdir, threads):
    p = cfg.params
    snaps = simulate(cfg.sim)
    assertions = []
    try:
        curve = _rate_curve(
            snaps,
            p["t"],
            cfg.sim.cross_section,
            p["eps"],
            p["n_paths"],
            cfg.seed,
            threads,
            cfg.sim.backend,
        )
    except RuntimeError as e:
        _check(assertions, "rate curve fit", False, str(e))
        return {"t": p["t"], "t0": p["t0"], "n_paths": p["n_paths"]}, assertions
    ci = 1.96 * curve.errors
    save_sweep_csv(
        os.path.join(outdir, "sweeps", "rates.csv"),
        ["eps", "moment", "ci"],
        zip(curve.eps, curve.moments, ci),
    )
    _check(
        assertions,
        "replay error shrinks with eps",
        curve.slope > 0.0,
        f"fitted slope {curve.slope:.4f}",
    )
    _check(
        assertions,
        "moments finite",
        bool(np.isfinite(curve.moments).all()),
        "all eps rows finite",
    )
    summary = {
        "t": p["t"],
        "t0": p["t0"],
        "eps": [float(e) for e in curve.eps],
        "moments": [float(m) for m in curve.moments],
        "ci": [float(c) for c in ci],
        "slope": curve.slope,
        "intercept": curve.intercept,
        "n_paths": curve.n_paths,
    }
    return summary, assertions


def _cmd_psi(cfg, outdir, threads):
    p = cfg.params
    snaps = simulate(cfg.sim)
    bg = [s for s in snaps if s.t <= p["t"] + 1e-12]
    ctx = LevyCtx(
        eps=p["eps"],
        t=p["t"],
        v0=np.array(p["v0"]),
        background=bg,
        cs=cfg.sim.cross_section,
    )
    assertions = []
    zero = psi(ctx, np.zeros(3))
    _check(
        assertions,
        "symbol vanishes at zero frequency",
        zero.psi_re == 0.0 and zero.psi_im == 0.0,
        f"psi(0) = {zero.psi_re} + {zero.psi_im}i",
    )
    mags = np.geomspace(p["xi_min"], p["xi_max"], p["n_xi"])
    xis = (mags[None, :, None] * _AXES[:, None, :]).reshape(-1, 3)
    rows = symbol_sweep(ctx, xis)
    save_sweep_csv(
        os.path.join(outdir, "sweeps", "psi_sweep.csv"),
        ["xi_x", "xi_y", "xi_z", "psi_re", "psi_im"],
        rows,
    )
    re_min = float(rows[:, 3].min())
    _check(
        assertions,
        "real part nonnegative",
        re_min >= -1e-12,
        f"min Re over sweep {re_min:.3e}",
    )
    coer_grid = (
        np.geomspace(0.1, 10.0, 8)[None, :, None] * _AXES[:, None, :]
    ).reshape(-1, 3)
    chat = verify_coercivity(ctx, coer_grid)
    _check(assertions, "coercivity positive", chat > 0.0, f"c_hat = {chat:.6f}")
    summary = {
        "t": p["t"],
        "eps": p["eps"],
        "v0": p["v0"],
        "c_hat": chat,
        "re_min": re_min,
        "m1": lambda_moments(ctx, 1),
        "m4": lambda_moments(ctx, 4),
        "rows": int(rows.shape[0]),
    }
    return summary, assertions


def _cmd_besov(cfg, outdir, threads):
    p = cfg.params
    snaps = simulate(cfg.sim)
    s = next(s for s in snaps if abs(s.t - p["time"]) <= 1e-9)
    est = besov_estimate(
        s.measure, p["r_set"], p["h_set"], alpha=p["alpha"], grid_n=p["grid_n"]
    )
    save_sweep_csv(
        os.path.join(outdir, "sweeps", "besov.csv"),
        ["h", "r", "d"],
        [(h, r, d) for (h, r), d in sorted(est.d_values.items())],
    )
    assertions = []
    _check(
        assertions,
        "difference table monotone in h",
        est.monotone,
        "D(h, r) increasing for every r" if est.monotone else "noise dominates",
    )
    _check(
        assertions,
        "density-like r sensitivity",
        not est.non_density,
        f"alpha_fit = {est.alpha_fit:.4f}",
    )
    summary = {
        "time": p["time"],
        "kappa": est.kappa,
        "a_exp": est.a_exp,
        "alpha": est.alpha,
        "alpha_fit": est.alpha_fit,
        "s_est": est.s_est,
        "fit_residual": est.fit_residual,
    }
    return summary, assertions


def _cmd_support(cfg, outdir, threads):
    p = cfg.params
    snaps = simulate(cfg.sim)
    assertions = []
    series = []
    for s in snaps:
        rep = coverage_report(
            s.measure.samples, np.zeros(3), p["coverage_radius"], p["cell_size"]
        )
        series.append(
            {"t": s.t, "fraction": rep["fraction"], "covered": rep["covered"],
             "cells": rep["cells"]}
        )
    fracs = [row["fraction"] for row in series]
    dips = max(
        (fracs[i] - fracs[i + 1] for i in range(len(fracs) - 1)), default=0.0
    )
    _check(
        assertions,
        "coverage non-decreasing",
        dips <= 0.01,
        f"largest drop between snapshots {dips:.4f}",
    )
    _check(
        assertions,
        "coverage reaches threshold",
        fracs[-1] >= p["coverage_threshold"],
        f"final fraction {fracs[-1]:.4f} vs threshold {p['coverage_threshold']}",
    )

    window = [s for s in snaps if p["t0"] - 1e-9 <= s.t <= p["t1"] + 1e-9]
    q = estimate_q(window, default_probes())
    _check(assertions, "probe mass positive", q > 0.0, f"q estimate {q:.6f}")

    seeds = np.unique(snaps[0].measure.samples, axis=0)
    res = sphere_spread(
        seeds, p["iterations"], p["samples_per_pair"], seed=cfg.seed
    )
    save_samples_csv(os.path.join(outdir, "sweeps", "cloud.csv"), res.cloud.points)
    spread_rep = coverage_report(
        res.cloud, res.x0, 0.99 * res.guaranteed_radius, p["cell_size"]
    )
    _check(
        assertions,
        "spread cloud fills certified ball",
        spread_rep["fraction"] >= 0.9,
        f"fraction {spread_rep['fraction']:.4f} of cells within one diagonal",
    )
    spread = {
        "r0": res.r0,
        "x0": [float(c) for c in res.x0],
        "guaranteed_radius": res.guaranteed_radius,
        "cloud_size": len(res.cloud),
        "coverage": spread_rep,
    }
    save_json(
        os.path.join(outdir, "coverage.json"),
        {
            "radius": p["coverage_radius"],
            "cell_size": p["cell_size"],
            "threshold": p["coverage_threshold"],
            "series": series,
            "spread": spread,
        },
    )
    summary = {
        "series": series,
        "q_estimate": q,
        "window": [p["t0"], p["t1"]],
        "spread": spread,
    }
    return summary, assertions


def _cmd_entropy(cfg, outdir, threads):
    p = cfg.params
    snaps = simulate(cfg.sim)
    assertions = []
    rows = []
    for i, t in enumerate(p["times"]):
        s = next(s for s in snaps if abs(s.t - t) <= 1e-9)
        h = entropy_knn(s.measure, k=p["k"])
        g = stream(cfg.seed, KIND_ANALYSIS, 1000 + i)
        half = EmpiricalMeasure.from_samples(
            s.measure.resample(len(s.measure) // 2, g)
        )
        h_half = entropy_knn(half, k=p["k"])
        rows.append((t, h, h_half, h - h_half))
    save_sweep_csv(
        os.path.join(outdir, "sweeps", "entropy.csv"),
        ["t", "entropy", "entropy_half", "delta"],
        rows,
    )
    finite = all(math.isfinite(r[1]) and math.isfinite(r[2]) for r in rows)
    _check(assertions, "entropy finite", finite, "all estimates finite")
    summary = {
        "k": p["k"],
        "rows": [
            {"t": t, "entropy": h, "entropy_half": hh, "delta": d}
            for t, h, hh, d in rows
        ],
    }
    return summary, assertions


def _cmd_exponents(cfg, outdir, threads):
    p = cfg.params
    nus = np.linspace(p["nu_min"], p["nu_max"], p["n_nu"])
    header = ["nu", "s_nu"] + [f"s_gamma_{g}" for g in p["gammas"]]
    rows = []
    zero_gap = 0.0
    for nu in nus:
        nu = float(nu)
        hard = smoothness_exponent_hard(nu)
        row = [nu, hard]
        for g in p["gammas"]:
            row.append(smoothness_exponent_soft(g, nu))
        zero_gap = max(zero_gap, abs(smoothness_exponent_soft(0.0, nu) - hard))
        rows.append(row)
    save_sweep_csv(os.path.join(outdir, "sweeps", "exponents.csv"), header, rows)
    assertions = []
    _check(
        assertions,
        "zero-gamma column collapses to the hard form",
        zero_gap <= 1e-12,
        f"max gap {zero_gap:.3e}",
    )
    summary = {
        "nu_min": p["nu_min"],
        "nu_max": p["nu_max"],
        "n_nu": p["n_nu"],
        "gammas": p["gammas"],
        "max_zero_gamma_gap": zero_gap,
    }
    return summary, assertions


_DISPATCH = {
    "simulate": _cmd_simulate,
    "rates": _cmd_rates,
    "psi": _cmd_psi,
    "besov": _cmd_besov,
    "support": _cmd_support,
    "entropy": _cmd_entropy,
    "exponents": _cmd_exponents,
}


def run(config: ExperimentConfig, *, threads=1, deterministic=False) -> RunManifest:
    """Execute one validated config and write its manifest atomically.

    The manifest is the last artifact written; a run that dies midway
    leaves snapshots or sweeps behind but never a manifest, so the
    presence of manifest.json certifies a completed run.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if deterministic:
        threads = 1
    started = time.perf_counter()
    summary, assertions = _DISPATCH[config.subcommand](
        config, config.output_dir, threads
    )
    manifest = RunManifest(
        subcommand=config.subcommand,
        config_sha256=config.config_sha256,
        code_version=__version__,
        seed=config.seed,
        threads=threads,
        deterministic=deterministic,
        wall_clock_s=time.perf_counter() - started,
        rng={
            "family": "philox counter streams",
            "seed": config.seed,
            "kinds": {
                "init": KIND_INIT,
                "step": KIND_STEP,
                "path": KIND_PATH,
                "analysis": KIND_ANALYSIS,
            },
        },
        summary=summary,
        assertions=assertions,
    )
    save_json(os.path.join(config.output_dir, "manifest.json"), manifest.to_dict())
    return manifest


def main(argv=None) -> int:
    """Entry point; exit 0 pass, 1 failed check, 2 bad config, 3 crash."""
    parser = argparse.ArgumentParser(
        prog="boltznc",
        description="Run one configured study and write its manifest.",
    )
    parser.add_argument("--config", required=True, help="JSON run description")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument(
        "--threads", type=int, default=1, help="worker threads for path replication"
    )
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="force single-threaded, byte-stable output",
    )
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("threads must be >= 1", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config, seed_override=args.seed)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 2
    except OSError as e:
        print(f"{args.config}: {e.strerror or e}", file=sys.stderr)
        return 2
    try:
        manifest = run(config, threads=args.threads, deterministic=args.deterministic)
    except Exception:
        traceback.print_exc()
        return 3
    if not manifest.passed:
        for a in manifest.assertions:
            if not a["passed"]:
                print(f"failed: {a['name']}: {a['detail']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
