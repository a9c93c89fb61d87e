"""Exercise LevyCtx paths: psi properties, coercivity, moments, inversion."""
import time
import warnings
from types import SimpleNamespace

import numpy as np

from boltznc.collision import CrossSection
from boltznc.levy import (
    invert_symbol,
    lambda_moments,
    psi,
    psi_with_error,
    rescaled_symbol_lattice,
    verify_coercivity,
)
from boltznc.stats import EmpiricalMeasure, GridSpec


def snap(t, samples):
    return SimpleNamespace(t=t, measure=EmpiricalMeasure.from_samples(samples))


def gaussian_bg(seed, n=4000, times=(0.85, 0.9, 0.95, 1.0), sigma=1.0, drift=0.0):
    rng = np.random.default_rng(seed)
    out = []
    for i, t in enumerate(times):
        out.append(snap(t, drift + sigma * rng.standard_normal((n, 3))))
    return tuple(out)


from boltznc.levy import LevyCtx

cs_hard = CrossSection(0.5, 0.5, k=10.0)
cs_soft = CrossSection(-0.5, 0.8, k=10.0)

bg = gaussian_bg(11)
ctx = LevyCtx(eps=0.1, t=1.0, v0=np.array([0.3, -0.2, 0.5]), background=bg, cs=cs_hard)

t0 = time.time()
print("psi(0):", psi(ctx, np.zeros(3)).value)
xi = np.array([2.0, -1.0, 0.5])
v, e = psi_with_error(ctx, xi)
print("psi(xi):", v.value, "err", e, "t", time.time() - t0)

vm = psi(ctx, -xi)
print("conj symmetry:", abs(v.value.conjugate() - vm.value))

vu = psi(ctx, xi, phi_rule="uniform")
print("uniform-vs-closed:", abs(v.value - vu.value), "scale", abs(v.value))

# additivity over time subintervals
w1 = psi(ctx, xi, window=(0.9, 0.95)).value
w2 = psi(ctx, xi, window=(0.95, 1.0)).value
print("additivity:", abs((w1 + w2) - v.value), "scale", abs(v.value))

# large rescaled frequency, real part sign
scale = ctx.eps ** (-1.0 / ctx.cs.nu)
big = psi(ctx, scale * np.array([10.0, 3.0, -7.0]))
print("big-xi re:", big.psi_re, ">= 0")

# Dirac at v0
dbg = (snap(0.85, np.tile(ctx.v0, (5, 1))), snap(1.0, np.tile(ctx.v0, (5, 1))))
dctx = LevyCtx(eps=0.1, t=1.0, v0=ctx.v0, background=dbg, cs=cs_hard)
print("dirac psi:", psi(dctx, xi).value, "m1", lambda_moments(dctx, 1))
with warnings.catch_warnings(record=True) as rec:
    warnings.simplefilter("always")
    c0 = verify_coercivity(dctx, np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))
print("dirac c:", c0, "warned:", [str(w.message) for w in rec])

# coercivity sweep
t0 = time.time()
rng = np.random.default_rng(5)
dirs = rng.standard_normal((6, 3))
dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
radii = np.geomspace(0.1, 10.0, 7)
grid_pts = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, 3)
ch = verify_coercivity(ctx, grid_pts)
print("hard c_hat:", ch, "t", time.time() - t0, "n_xi", len(grid_pts))

ctx_soft = LevyCtx(eps=0.1, t=1.0, v0=ctx.v0, background=bg, cs=cs_soft)
t0 = time.time()
cs_ = verify_coercivity(ctx_soft, grid_pts)
print("soft c_hat:", cs_, "t", time.time() - t0)

# shrinking background -> c_hat drops
base = np.random.default_rng(3).standard_normal((2000, 3))
for s in (0.4, 0.2, 0.1, 0.05):
    bgs = (snap(0.85, ctx.v0 + s * base), snap(1.0, ctx.v0 + s * base))
    cctx = LevyCtx(eps=0.1, t=1.0, v0=ctx.v0, background=bgs, cs=cs_hard)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        print("  sigma", s, "c_hat", verify_coercivity(cctx, grid_pts[::4]))

# moments
m1 = lambda_moments(ctx, 1)
m4 = lambda_moments(ctx, 4)
print("m1", m1, "m4", m4)
for eps in (0.4, 0.2, 0.1, 0.05):
    bg_e = gaussian_bg(11, times=(1.0 - eps - 0.05, 1.0 - eps / 2, 1.0))
    ctx_e = LevyCtx(eps=eps, t=1.0, v0=ctx.v0, background=bg_e, cs=cs_hard)
    print("  eps", eps, "m1", lambda_moments(ctx_e, 1))

# explicit-constant bound: m_n <= 2 pi eps^{1-n/nu} T_n 2^{max(g+n-1,0)} sup_s int(|v|^{g+n}+|v0|^{g+n})
from boltznc.levy import _sin_half_moment

for n_ in (1, 4):
    tn = _sin_half_moment(ctx.cs, ctx.eps ** (1.0 / ctx.cs.nu), n_)
    cexp = (
        2.0 * np.pi * ctx.eps ** (1.0 - n_ / ctx.cs.nu) * tn
        * 2.0 ** max(ctx.cs.gamma + n_ - 1.0, 0.0)
    )
    sup = 0.0
    for s in bg:
        sp = np.linalg.norm(s.measure.samples, axis=1)
        sup = max(
            sup,
            float(
                np.sum(
                    s.measure.weights
                    * (sp ** (ctx.cs.gamma + n_) + np.linalg.norm(ctx.v0) ** (ctx.cs.gamma + n_))
                )
            ),
        )
    mn = lambda_moments(ctx, n_)
    print(f"  bound n={n_}: m={mn:.4f} <= {cexp * sup:.4f}", mn <= cexp * sup)

# lattice path vs pointwise psi (fixed rule vs adaptive rule), shared atoms
bg_small = gaussian_bg(17, n=64, times=(0.88, 0.95, 1.0))
ctx_small = LevyCtx(eps=0.1, t=1.0, v0=ctx.v0, background=bg_small, cs=cs_hard)
t0 = time.time()
grid = GridSpec(center=np.zeros(3), extent=12.0, n=24)
phi = rescaled_symbol_lattice(ctx_small, grid, max_atoms=None)
print("lattice t:", time.time() - t0)
ax = grid.spacing * (np.arange(grid.n) - grid.n // 2)
rng = np.random.default_rng(0)
errs = []
for _ in range(8):
    i, j, l = rng.integers(0, grid.n, 3)
    xi_l = np.array([ax[i], ax[j], ax[l]])
    exact = psi(ctx_small, scale * xi_l).value
    got = phi[i, j, l]
    errs.append(abs(got - exact) / max(abs(exact), 1e-300))
print("lattice-vs-psi rel err max:", max(errs))
print("origin entry:", phi[grid.n // 2, grid.n // 2, grid.n // 2])
print("re min:", phi.real.min())

# ctx inversion + calibration ratio
bg_cal = gaussian_bg(23, n=256, times=(0.88, 0.95, 1.0))
ctx_cal = LevyCtx(eps=0.1, t=1.0, v0=ctx.v0, background=bg_cal, cs=cs_hard)
m1c = lambda_moments(ctx_cal, 1)
m4c = lambda_moments(ctx_cal, 4)
print("cal moments:", m1c, m4c)
for next_, L in ((24, 12.0), (32, 12.0), (32, 16.0)):
    t0 = time.time()
    g2 = GridSpec(center=np.zeros(3), extent=L, n=next_)
    try:
        res = invert_symbol(ctx_cal, g2, max_atoms=None)
    except ValueError as exc:
        print(f"n={next_} L={L}: refused: {exc}")
        continue
    ratio = res.grad_l1 / ((1.0 + m1c**4 + m4c) * (res.weighted_integral + res.tail_mass))
    print(
        f"n={next_} L={L}: tail={res.tail_mass:.2e} grad={res.grad_l1:.4f} "
        f"mass={res.density.mass:.4f} min={res.density.values.min():.2e} "
        f"imag={res.imag_max:.1e} ratio={ratio:.6f} t={time.time()-t0:.1f}s"
    )
