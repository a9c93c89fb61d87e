"""Sweep reference contexts to freeze the gradient-bound prefactor."""
import time
from types import SimpleNamespace

import numpy as np

from boltznc.collision import CrossSection
from boltznc.levy import LevyCtx, invert_symbol, lambda_moments
from boltznc.stats import EmpiricalMeasure, GridSpec


def snap(t, samples):
    return SimpleNamespace(t=t, measure=EmpiricalMeasure.from_samples(samples))


def gaussian_bg(seed, n, times, sigma):
    rng = np.random.default_rng(seed)
    return tuple(snap(t, sigma * rng.standard_normal((n, 3))) for t in times)


V0 = np.array([0.3, -0.2, 0.5])
CASES = [
    ("hard weak bg L40", 0.5, 0.5, 0.10, 0.3, 40.0),
    ("hard weak bg L60", 0.5, 0.5, 0.10, 0.3, 60.0),
    ("soft weak bg L28", -0.5, 0.8, 0.10, 0.3, 28.0),
    ("soft weak bg L40", -0.5, 0.8, 0.10, 0.3, 40.0),
    ("hard sigma.5 L24", 0.5, 0.5, 0.10, 0.5, 24.0),
]

worst = 0.0
for name, g, nu, eps, sigma, ext in CASES:
    cs = CrossSection(g, nu, k=10.0)
    bg = gaussian_bg(23, 128, (1.0 - eps - 0.02, 1.0 - eps / 2, 1.0), sigma)
    ctx = LevyCtx(eps=eps, t=1.0, v0=V0, background=bg, cs=cs)
    m1 = lambda_moments(ctx, 1)
    m4 = lambda_moments(ctx, 4)
    grid = GridSpec(center=np.zeros(3), extent=ext, n=24)
    t0 = time.time()
    try:
        res = invert_symbol(ctx, grid, max_atoms=None, n_theta=96)
    except ValueError as exc:
        print(f"{name}: refused ({exc})")
        continue
    ratio = res.grad_l1 / ((1.0 + m1**4 + m4) * (res.weighted_integral + res.tail_mass))
    worst = max(worst, ratio)
    print(
        f"{name}: m1={m1:.3f} m4={m4:.3f} grad={res.grad_l1:.4f} "
        f"I={res.weighted_integral:.3f} tail={res.tail_mass:.1e} "
        f"min={res.density.values.min():.1e} mass={res.density.mass:.4f} "
        f"ratio={ratio:.3e} t={time.time()-t0:.0f}s"
    )

print("\nworst ratio:", worst)
print("suggested prefactor (4x, one digit up):", float(f"{4.0 * worst:.1g}"))
