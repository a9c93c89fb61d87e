import math
import sys

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.simulate import SimConfig, init_system, simulate
from boltznc.stats import EmpiricalMeasure, moment

HARD = CrossSection(gamma=0.5, nu=0.5, k=10.0)

# init-family pins
cfg = SimConfig(n_particles=100_000, t_end=1.0, cross_section=HARD, seed=3)
s = init_system({"family": "two_point"}, cfg)
print("two_point |momentum|:", np.linalg.norm(s.momentum), "3/sqrt(n):", 3 / math.sqrt(s.n))
cfg5 = SimConfig(n_particles=100_000, t_end=1.0, cross_section=HARD, seed=5)
s = init_system({"family": "gaussian"}, cfg5)
print("gaussian m2:", float(np.mean(np.sum(s.velocities**2, 1))))
s = init_system({"family": "uniform_ball", "radius": 2.0}, cfg5)
m2 = float(np.mean(np.sum(s.velocities**2, 1)))
print("ball m2:", m2, "expect", 0.6 * 4, "max:", np.linalg.norm(s.velocities, axis=1).max())
s = init_system({"family": "pareto"}, cfg5)
sp = np.linalg.norm(s.velocities, axis=1)
print("pareto median:", np.median(sp), "expect", 2 ** (1 / 2.5), "min:", sp.min(), "max:", sp.max())

# pareto m4 seed-means with N=4000 included, k=20
cs20 = CrossSection(gamma=0.5, nu=0.5, k=20.0)
for n in (2000, 4000, 8000):
    vals = []
    for seed in (1, 2, 3):
        c = SimConfig(n_particles=n, t_end=1.0, cross_section=cs20, seed=seed,
                      snapshot_times=(0.5, 1.0), f0={"family": "pareto"}, scheme="nanbu")
        snaps = simulate(c)
        vals.append([moment(sn.measure, 4.0) for sn in snaps])
    v = np.array(vals).mean(0)
    print(f"pareto k=20 N={n}: seed-mean m4(0.5)={v[0]:.1f} m4(1)={v[1]:.1f}")


class Snap:
    def __init__(self, t, meas):
        self.t = t
        self.measure = meas


# maxwell energy pin at seed 77
cs0 = CrossSection(gamma=0.0, nu=0.5, k=10.0)
gm = np.random.default_rng(3)
m = EmpiricalMeasure.from_samples(gm.normal(size=(4000, 3)))
bgm = [Snap(0.0, m)]
es = []
for i in range(1500):
    v0 = m.samples[gm.integers(0, 4000)]
    es.append(float(np.sum(coupling.tagged_path(bgm, v0, 0.5, cs0, seed=77, path_index=i).v_t ** 2)))
bg_e = float((m.samples**2).sum(1).mean())
print(f"maxwell energy: {np.mean(es):.4f} se {np.std(es)/math.sqrt(1500):.4f} bg {bg_e:.4f}")

# tiny-window zero-marks check
p = coupling.tagged_path(bgm, np.array([0.3, -0.2, 0.1]), 0.5, cs0, seed=9, eps_max=1e-7)
print("tiny window marks:", len(p.events), "v_t==v_t_eps:", np.array_equal(p.v_t, p.v_t_eps))

# mid-size freeze curve, hard cb=0.3 for the non-acceptance regression test
csr = CrossSection(gamma=0.5, nu=0.5, c0=0.3, C0=1.0, cb=0.3, k=10.0)
c = SimConfig(n_particles=10_000, t_end=1.0, cross_section=csr, seed=2024,
              snapshot_times=tuple(np.round(np.arange(0.0, 1.0001, 0.1), 10)),
              f0={"family": "two_point"}, scheme="nanbu")
snaps = simulate(c)
for seed in (31, 47):
    cur = coupling.freeze_error_curve(snaps, 1.0, csr, [0.4, 0.2, 0.1, 0.05], n_paths=300, seed=seed)
    print(f"cb=0.3 300 paths seed {seed}: slope {cur.slope:.3f} moments {np.round(cur.moments,4)}")
