import math
import sys
import time

import numpy as np
from scipy import stats as sps

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.simulate import SimConfig, simulate
from boltznc.stats import EmpiricalMeasure, moment

# (a) Pareto m4 stability under N-refinement
print("== pareto m4 ==")
for k in (10.0, 20.0):
    cs = CrossSection(gamma=0.5, nu=0.5, k=k)
    for n in (2000, 8000, 32000):
        row = []
        for seed in (1, 2, 3):
            cfg = SimConfig(n_particles=n, t_end=1.0, cross_section=cs, seed=seed,
                            snapshot_times=(0.0, 0.5, 1.0), f0={"family": "pareto"},
                            scheme="nanbu")
            t0 = time.time()
            snaps = simulate(cfg)
            m4s = [moment(s.measure, 4.0) for s in snaps]
            row.append(m4s)
        r = np.array(row)
        print(f"k={k} N={n}: m4(0) {r[:,0].round(0)} m4(.5) {r[:,1].round(1)} m4(1) {r[:,2].round(1)}  [{time.time()-t0:.0f}s/run]")

# (b) k-refinement CF distance
print("== k refinement ==")
g = np.random.default_rng(0)
dirs = g.normal(size=(64, 3))
dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
xis = np.concatenate([r * dirs for r in (0.5, 1.0, 2.0, 3.0)])


def ecf(vel, xis):
    ph = vel @ xis.T
    return np.exp(1j * ph).mean(0)


for n in (16000, 64000):
    for seed in (2024, 7, 99):
        fs = {}
        for k in (5.0, 10.0, 20.0):
            cs = CrossSection(gamma=0.5, nu=0.5, k=k)
            cfg = SimConfig(n_particles=n, t_end=0.5, cross_section=cs, seed=seed,
                            snapshot_times=(0.5,), f0={"family": "two_point"},
                            scheme="nanbu")
            fs[k] = ecf(simulate(cfg)[0].measure.samples, xis)
        d510 = np.abs(fs[5.0] - fs[10.0]).mean()
        d1020 = np.abs(fs[10.0] - fs[20.0]).mean()
        print(f"N={n} seed={seed}: d(5,10)={d510:.5f} d(10,20)={d1020:.5f} ratio {d510/d1020:.2f}")

# (c) Maxwell jump-count chi-square
print("== maxwell chi2 ==")
cs0 = CrossSection(gamma=0.0, nu=0.5, k=10.0)
gm = np.random.default_rng(3)
m = EmpiricalMeasure.from_samples(gm.normal(size=(4000, 3)))


class Snap:
    def __init__(self, t, meas):
        self.t = t
        self.measure = meas


bgm = [Snap(0.0, m)]
lam = 2 * math.pi * cs0.c_theta() * 0.2
for seed in (101, 202, 303):
    counts = np.array([
        len(coupling.tagged_path(bgm, np.array([0.3, -0.2, 0.1]), 0.2, cs0,
                                 seed=seed, path_index=i).path_times) - 1
        for i in range(400)
    ])
    hi = int(sps.poisson.ppf(0.999, lam)) + 2
    edges = np.arange(hi + 1)
    probs = sps.poisson.pmf(edges, lam)
    # merge bins with expected < 5 into the tails
    exp = 400 * probs
    lo_cut = np.searchsorted(np.cumsum(exp), 5.0)
    hi_cut = hi - np.searchsorted(np.cumsum(exp[::-1]), 5.0)
    bins = [-0.5 + lo_cut] + list(np.arange(lo_cut, hi_cut) + 0.5) + [np.inf]
    obs, _ = np.histogram(counts, bins=[-np.inf] + bins[1:-1] + [np.inf])
    pk = np.diff(sps.poisson.cdf(np.array([bins[0]] + bins[1:-1] + [np.inf]), lam))
    pk0 = np.concatenate([[sps.poisson.cdf(bins[0], lam)], np.diff(sps.poisson.cdf(bins, lam))])
    expv = 400 * np.concatenate([[sps.poisson.cdf(bins[1], lam)],
                                 np.diff(sps.poisson.cdf(bins[1:], lam))])
    chi2 = ((obs - expv) ** 2 / expv).sum()
    p = sps.chi2.sf(chi2, len(obs) - 1)
    print(f"seed {seed}: chi2={chi2:.2f} dof={len(obs)-1} p={p:.4f} (exp per bin min {expv.min():.1f})")

# (d) Nanbu 20-seed energy drift
print("== nanbu drift ==")
cs = CrossSection(gamma=0.5, nu=0.5, k=10.0)
drifts = []
t0 = time.time()
for seed in range(20):
    cfg = SimConfig(n_particles=10_000, t_end=1.0, cross_section=cs, seed=seed,
                    snapshot_times=(0.0, 1.0), f0={"family": "two_point"},
                    scheme="nanbu")
    s0, s1 = simulate(cfg)
    drifts.append((s1.energy - s0.energy) / s0.energy)
d = np.array(drifts)
print(f"rel drifts: mean {d.mean():.2e} sd {d.std(ddof=1):.2e} "
      f"z={d.mean()/(d.std(ddof=1)/math.sqrt(20)):.2f}  [{time.time()-t0:.0f}s total]")
