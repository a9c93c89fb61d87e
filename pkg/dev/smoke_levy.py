"""Smoke: Gaussian symbol -> heat kernel, stable nonneg, exact psi sanity."""
import time

import numpy as np

from boltznc.levy import invert_symbol
from boltznc.stats import GridSpec

t0 = time.time()

# Gaussian: Phi = |xi|^2 -> k(x) = (4 pi)^{-3/2} e^{-|x|^2/4}, ||grad k||_1 = 2/sqrt(pi)
grid = GridSpec(center=np.zeros(3), extent=8.0, n=48)
res = invert_symbol(lambda p: np.einsum("ij,ij->i", p, p), grid)
print("gauss: tail", res.tail_mass, "imag", res.imag_max, "mass", res.density.mass)
print("grad_l1", res.grad_l1, "expected", 2.0 / np.sqrt(np.pi),
      "rel", abs(res.grad_l1 - 2.0 / np.sqrt(np.pi)) / (2.0 / np.sqrt(np.pi)))

# pointwise density check at a few radii
g = res.density.grid
ax = g.axis()
kk = res.density.values
an = (4.0 * np.pi) ** (-1.5) * np.exp(-(ax**2) / 4.0)
mid = g.n // 2
line = kk[:, mid, mid]
x0 = ax[mid]
print("x0 (should be 0):", x0)
an3 = (4.0 * np.pi) ** (-1.5) * np.exp(
    -((ax - 0.0) ** 2 + x0**2 + x0**2) / 4.0
)
err = np.max(np.abs(line - an3))
print("line max err", err, "peak", an3.max())

# stable nu=0.5 on a wide coarse lattice: nonnegativity
grid2 = GridSpec(center=np.zeros(3), extent=1600.0, n=64)
res2 = invert_symbol(lambda p: np.einsum("ij,ij->i", p, p) ** 0.25, grid2)
print("stable: tail", res2.tail_mass, "min value", res2.density.values.min(),
      "mass", res2.density.mass)

print("elapsed", time.time() - t0)
