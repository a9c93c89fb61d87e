import math
import os
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.stats import EmpiricalMeasure


class Snap:
    def __init__(self, t, m):
        self.t = t
        self.measure = m


# 1. Dirac-at-origin background: tagged particle started at origin never moves
cs = CrossSection(gamma=0.5, nu=0.5, k=10.0)
bg0 = [Snap(0.0, EmpiricalMeasure.from_samples(np.zeros((1, 3))))]
t0 = time.time()
p = coupling.tagged_path(bg0, np.zeros(3), 1.0, cs, seed=7)
print(f"compile+run: {time.time()-t0:.2f} s")
print("dirac v_t:", p.v_t, "jumps:", len(p.path_times) - 1, "marks:", len(p.events))
print("dirac v_t_eps:", p.v_t_eps)

# 2. Maxwell jump count vs Poisson mean
cs0 = CrossSection(gamma=0.0, nu=0.5, k=10.0)
g = np.random.default_rng(3)
m = EmpiricalMeasure.from_samples(g.normal(size=(4000, 3)))
bgm = [Snap(0.0, m)]
rate = 2 * math.pi * cs0.c_theta()
counts = []
for i in range(400):
    pp = coupling.tagged_path(bgm, np.array([0.3, -0.2, 0.1]), 0.2, cs0, seed=11, path_index=i)
    counts.append(len(pp.path_times) - 1)
mean_count = np.mean(counts)
print(f"mean jumps: {mean_count:.3f} expected: {rate*0.2:.3f} (se {np.std(counts)/20:.3f})")

# 3. degenerate replay bitwise, both backends
dr = coupling.degenerate_replay(pp)
print("degenerate exact (default backend):", np.array_equal(dr, pp.v_t))
pn = coupling.tagged_path(bgm, np.array([0.3, -0.2, 0.1]), 0.2, cs0, seed=11, path_index=399, backend="numpy")
print("degenerate exact (numpy):", np.array_equal(coupling.degenerate_replay(pn), pn.v_t))
same = coupling.tagged_path(bgm, np.array([0.3, -0.2, 0.1]), 0.2, cs0, seed=11, path_index=399)
print("numba vs numpy same path:", np.array_equal(same.v_t, pn.v_t), np.max(np.abs(same.v_t - pn.v_t)))

# 4. Maxwell energy preservation against static background
es = []
for i in range(500):
    v0 = m.samples[g.integers(0, 4000)]
    pq = coupling.tagged_path(bgm, v0, 0.5, cs0, seed=23, path_index=i)
    es.append(float(pq.v_t @ pq.v_t))
bg_energy = float((m.samples**2).sum(1).mean())
print(f"E|V_t|^2: {np.mean(es):.3f} +- {np.std(es)/math.sqrt(500):.3f}  bg: {bg_energy:.3f}")

# 5. hard potential: coupled_freeze errors shrink with eps
two = np.vstack([np.eye(3)[0][None, :].repeat(500, 0), -np.eye(3)[0][None, :].repeat(500, 0)])
two = two + 0.05 * g.normal(size=two.shape)
bgh = [Snap(0.0, EmpiricalMeasure.from_samples(two))]
t0 = time.time()
curve = coupling.freeze_error_curve(bgh, 1.0, cs, [0.4, 0.2, 0.1, 0.05], n_paths=200, seed=5)
print(f"curve time: {time.time()-t0:.2f} s")
print("eps:", curve.eps, "moments:", curve.moments)
print("slope:", curve.slope)

# 6. domain errors
try:
    coupling.coupled_freeze(p, 2.0)
except ValueError as e:
    print("eps>t:", e)
try:
    coupling.coupled_freeze(p, 0.7)
except ValueError as e:
    print("eps>eps_max:", e)
