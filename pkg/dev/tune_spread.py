"""Measure sphere_spread coverage to size the dense-sampling example."""

import time

import numpy as np

from boltznc.support import coverage_report, sphere_spread

pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])

for spp, ppi in [(24, None), (32, 2048), (64, 4096)]:
    for seed in (3, 7):
        t0 = time.time()
        res = sphere_spread(
            pts, iterations=4, samples_per_pair=spp, pairs_per_iteration=ppi, seed=seed
        )
        radii = np.linalg.norm(res.cloud.points, axis=1)
        line = f"spp={spp} ppi={ppi} seed={seed} m={len(res.cloud)} rmax={radii.max():.3f} q99={np.quantile(radii, 0.99):.3f}"
        for cell in (0.4, 0.5, 0.75, 1.0):
            rep = coverage_report(res.cloud, np.zeros(3), 0.99 * res.guaranteed_radius, cell)
            line += f" | c{cell}: {rep['fraction']:.3f}"
        print(line, f"({time.time() - t0:.1f}s)")
