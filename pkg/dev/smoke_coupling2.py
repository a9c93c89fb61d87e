import math
import sys

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.stats import EmpiricalMeasure


class Snap:
    def __init__(self, t, m):
        self.t = t
        self.measure = m


cs0 = CrossSection(gamma=0.0, nu=0.5, k=10.0)
g = np.random.default_rng(3)
m = EmpiricalMeasure.from_samples(g.normal(size=(4000, 3)))
bgm = [Snap(0.0, m)]
rate = 2 * math.pi * cs0.c_theta()

for seed in (101, 202):
    counts = []
    for i in range(2000):
        pp = coupling.tagged_path(bgm, np.array([0.3, -0.2, 0.1]), 0.2, cs0, seed=seed, path_index=i)
        counts.append(len(pp.path_times) - 1)
    mu, se = np.mean(counts), np.std(counts) / math.sqrt(2000)
    print(f"seed {seed}: mean jumps {mu:.4f} expected {rate*0.2:.4f} z={(mu-rate*0.2)/se:+.2f}")

for seed in (77, 88):
    es = []
    for i in range(1500):
        v0 = m.samples[g.integers(0, 4000)]
        pq = coupling.tagged_path(bgm, v0, 0.5, cs0, seed=seed, path_index=i)
        es.append(float(pq.v_t @ pq.v_t))
    mu, se = np.mean(es), np.std(es) / math.sqrt(1500)
    print(f"seed {seed}: E|V_t|^2 {mu:.4f} bg {float((m.samples**2).sum(1).mean()):.4f} z={(mu-(m.samples**2).sum(1).mean())/se:+.2f}")
