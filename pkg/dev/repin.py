import math
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.simulate import SimConfig, simulate, init_system, step
from boltznc.stats import moment

HARD10 = CrossSection(gamma=0.5, nu=0.5, k=10.0)

# conservation + determinism + backend parity after the draw change
cfg = SimConfig(n_particles=2000, t_end=0.05, cross_section=HARD10, seed=12,
                f0={"family": "two_point"}, scheme="symmetric_pair")
s0 = init_system(cfg.f0, cfg)
s = s0
for _ in range(20):
    s = step(s, cfg.resolved_dt, cfg)
print("pair energy rel:", abs(s.energy - s0.energy) / s0.energy,
      "momentum:", np.abs(s.momentum - s0.momentum).max())
cfgN = SimConfig(n_particles=2000, t_end=0.05, cross_section=HARD10, seed=12,
                 f0={"family": "two_point"}, scheme="nanbu")
a = init_system(cfgN.f0, cfgN)
b = a
for _ in range(20):
    a = step(a, cfgN.resolved_dt, cfgN)
a2 = init_system(cfgN.f0, cfgN)
for _ in range(20):
    a2 = step(a2, cfgN.resolved_dt, cfgN)
print("nanbu rerun bitwise:", np.array_equal(a.velocities, a2.velocities))
cfgNp = SimConfig(n_particles=2000, t_end=0.05, cross_section=HARD10, seed=12,
                  f0={"family": "two_point"}, scheme="nanbu", backend="numpy")
c = init_system(cfgNp.f0, cfgNp)
for _ in range(20):
    c = step(c, cfgNp.resolved_dt, cfgNp)
print("numba vs numpy max diff:", np.abs(a.velocities - c.velocities).max())

# pareto m4, pair scheme, dt=0.25, k=20
cs20 = CrossSection(gamma=0.5, nu=0.5, k=20.0)
t0 = time.time()
for n in (2000, 4000, 8000):
    vals = []
    for seed in (1, 2, 3, 4, 5):
        c = SimConfig(n_particles=n, t_end=1.0, cross_section=cs20, seed=seed, dt=0.25,
                      snapshot_times=(0.5, 1.0), f0={"family": "pareto"},
                      scheme="symmetric_pair")
        snaps = simulate(c)
        vals.append([moment(sn.measure, 4.0) for sn in snaps])
    v = np.array(vals)
    print(f"pareto N={n}: m4(.5) {v[:,0].round(1)} m4(1) {v[:,1].round(1)} means "
          f"{v[:,0].mean():.1f}/{v[:,1].mean():.1f}")
print(f"pareto grid: {time.time()-t0:.1f}s")

# k-refinement re-pin
g = np.random.default_rng(0)
dirs = g.normal(size=(64, 3))
dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
xis = np.concatenate([r * dirs for r in (0.5, 1.0, 2.0, 3.0)])
for seed in (2024, 7, 99):
    fs = {}
    for k in (5.0, 10.0, 20.0):
        cs = CrossSection(gamma=0.5, nu=0.5, k=k)
        cfgk = SimConfig(n_particles=16000, t_end=0.5, cross_section=cs, seed=seed,
                         snapshot_times=(0.5,), f0={"family": "two_point"}, scheme="nanbu")
        vel = simulate(cfgk)[0].measure.samples
        fs[k] = np.exp(1j * (vel @ xis.T)).mean(0)
    d510 = np.abs(fs[5.0] - fs[10.0]).mean()
    d1020 = np.abs(fs[10.0] - fs[20.0]).mean()
    print(f"kref seed {seed}: d(5,10)={d510:.5f} d(10,20)={d1020:.5f} ratio {d510/d1020:.2f}")

# nanbu drift re-pin
drifts = []
for seed in range(20):
    cfgd = SimConfig(n_particles=10_000, t_end=1.0, cross_section=HARD10, seed=seed,
                     snapshot_times=(0.0, 1.0), f0={"family": "two_point"}, scheme="nanbu")
    sa, sb = simulate(cfgd)
    drifts.append((sb.energy - sa.energy) / sa.energy)
d = np.array(drifts)
print(f"nanbu drift: mean {d.mean():.2e} sd {d.std(ddof=1):.2e} "
      f"|mean|/(sd/sqrt20) = {abs(d.mean())/(d.std(ddof=1)/math.sqrt(20)):.2f}")

# pair conservation at acceptance scale, coarse dt
cfgp = SimConfig(n_particles=10_000, t_end=1.0, cross_section=HARD10, seed=0, dt=0.25,
                 snapshot_times=(0.0, 1.0), f0={"family": "two_point"},
                 scheme="symmetric_pair")
t0 = time.time()
sa, sb = simulate(cfgp)
print(f"pair N=1e4 T=1 dt=.25: energy rel {abs(sb.energy-sa.energy)/sa.energy:.2e} "
      f"[{time.time()-t0:.1f}s]")

# rates re-pin
EPS = [0.4, 0.2, 0.1, 0.05]
hard = CrossSection(gamma=0.5, nu=0.5, c0=0.1, C0=1.0, cb=0.1, k=10.0)
soft = CrossSection(gamma=-0.5, nu=0.8, c0=0.3, C0=1.0, cb=0.3, k=10.0)
for name, cs in (("hard", hard), ("soft", soft)):
    cfgr = SimConfig(n_particles=10_000, t_end=1.0, cross_section=cs, seed=2024,
                     snapshot_times=tuple(np.round(np.arange(0.0, 1.0001, 0.05), 10)),
                     f0={"family": "two_point"}, scheme="nanbu")
    snaps = simulate(cfgr)
    for seed in (31, 47, 93):
        cur = coupling.freeze_error_curve(snaps, 1.0, cs, EPS, n_paths=2000, seed=seed)
        print(f"rates {name} seed {seed}: slope {cur.slope:.3f} moments {np.round(cur.moments, 4)}")
