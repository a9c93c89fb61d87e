import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.simulate import SimConfig, simulate

EPS = [0.4, 0.2, 0.1, 0.05]


def curve_for(cs, n_paths, seed=31):
    cfg = SimConfig(
        n_particles=10_000,
        t_end=1.0,
        cross_section=cs,
        seed=2024,
        snapshot_times=tuple(np.round(np.arange(0.0, 1.0001, 0.05), 10)),
        f0={"family": "two_point"},
        scheme="nanbu",
    )
    t0 = time.time()
    snaps = simulate(cfg)
    t1 = time.time()
    curve = coupling.freeze_error_curve(snaps, 1.0, cs, EPS, n_paths=n_paths, seed=seed)
    t2 = time.time()
    return curve, t1 - t0, t2 - t1


for cb in (1.0, 0.3, 0.1, 0.03):
    cs = CrossSection(gamma=0.5, nu=0.5, c0=min(cb, 1.0), C0=1.0, cb=cb, k=10.0)
    curve, ts, tc = curve_for(cs, 500)
    with np.printoptions(precision=4):
        print(f"hard cb={cb}: slope {curve.slope:.3f}  moments {curve.moments}  rel-err {curve.errors/curve.moments}  sim {ts:.0f}s curve {tc:.0f}s")

for cb in (1.0, 0.3, 0.1, 0.03):
    cs = CrossSection(gamma=-0.5, nu=0.8, c0=min(cb, 1.0), C0=1.0, cb=cb, k=10.0)
    curve, ts, tc = curve_for(cs, 500)
    with np.printoptions(precision=4):
        print(f"soft cb={cb}: slope {curve.slope:.3f}  moments {curve.moments}  rel-err {curve.errors/curve.moments}  sim {ts:.0f}s curve {tc:.0f}s")
