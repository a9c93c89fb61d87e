import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from boltznc import coupling
from boltznc.collision import CrossSection
from boltznc.simulate import SimConfig, simulate

EPS = [0.4, 0.2, 0.1, 0.05]


def background(cs, sim_seed):
    cfg = SimConfig(
        n_particles=10_000,
        t_end=1.0,
        cross_section=cs,
        seed=sim_seed,
        snapshot_times=tuple(np.round(np.arange(0.0, 1.0001, 0.05), 10)),
        f0={"family": "two_point"},
        scheme="nanbu",
    )
    return simulate(cfg)


hard = CrossSection(gamma=0.5, nu=0.5, c0=0.1, C0=1.0, cb=0.1, k=10.0)
soft = CrossSection(gamma=-0.5, nu=0.8, c0=0.3, C0=1.0, cb=0.3, k=10.0)

for name, cs in (("hard", hard), ("soft", soft)):
    snaps = background(cs, 2024)
    for seed in (31, 47, 93):
        t0 = time.time()
        c = coupling.freeze_error_curve(snaps, 1.0, cs, EPS, n_paths=2000, seed=seed)
        with np.printoptions(precision=4):
            print(f"{name} seed {seed}: slope {c.slope:.3f}  moments {c.moments}  "
                  f"rel-err {c.errors/np.maximum(c.moments,1e-300)}  {time.time()-t0:.0f}s")
