"""Hot-loop kernels for the particle step and tagged-path thinning.

Each kernel exists twice. The scalar-loop versions below are compiled with
numba when it is enabled (see _backend); the module also provides a
vectorized numpy implementation of the Nanbu chain and a plain-python pair
chain built on the public collision API, which serve as the fallback backend
and as the benchmark comparison. The tagged-path core and its replay share
one source, so within a backend the replay arithmetic is bit-identical to
the path arithmetic, which the degenerate-replay invariant relies on.

Scalar helpers mirror the vectorized collision functions operation for
operation. Cross-backend bitwise equality is still not guaranteed (libm and
numpy ufuncs may differ in the last ulp), only per-backend determinism.
"""

import math

import numpy as np

from . import collision as col
from ._backend import NUMBA_AVAILABLE, njit

HALF_PI = math.pi / 2.0

# thinning-kernel status codes
OK = 0
EXHAUSTED = 1
BOUND_EXCEEDED = 4


def _frame6(x0, x1, x2):
    """Scalar orthonormal_frame: returns I and J columns scaled by |x|."""
    n = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
    if n == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    h0 = x0 / n
    h1 = x1 / n
    h2 = x2 / n
    a0 = abs(h0)
    a1 = abs(h1)
    a2 = abs(h2)
    # argmin with first-index tie-break, as np.argmin resolves it
    if a0 <= a1 and a0 <= a2:
        e0, e1, e2 = 1.0, 0.0, 0.0
        dot = h0
    elif a1 <= a2:
        e0, e1, e2 = 0.0, 1.0, 0.0
        dot = h1
    else:
        e0, e1, e2 = 0.0, 0.0, 1.0
        dot = h2
    p0 = e0 - dot * h0
    p1 = e1 - dot * h1
    p2 = e2 - dot * h2
    pn = math.sqrt(p0 * p0 + p1 * p1 + p2 * p2)
    i0 = n * p0 / pn
    i1 = n * p1 / pn
    i2 = n * p2 / pn
    j0 = h1 * i2 - h2 * i1
    j1 = h2 * i0 - h0 * i2
    j2 = h0 * i1 - h1 * i0
    return i0, i1, i2, j0, j1, j2


def _dev3(x0, x1, x2, theta, phi):
    """Scalar deviation from the relative velocity X = v - v_star."""
    i0, i1, i2, j0, j1, j2 = _frame6(x0, x1, x2)
    s = math.sin(theta / 2.0)
    c = math.cos(theta / 2.0)
    cp = math.cos(phi)
    sp = math.sin(phi)
    ms2 = -(s * s)
    sc = s * c
    a0 = ms2 * x0 + sc * (cp * i0 + sp * j0)
    a1 = ms2 * x1 + sc * (cp * i1 + sp * j1)
    a2 = ms2 * x2 + sc * (cp * i2 + sp * j2)
    return a0, a1, a2


def _htrunc3(v0, v1, v2, k):
    n = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    if n > k:
        s = k / n
        return v0 * s, v1 * s, v2 * s
    return v0, v1, v2


def _phi0_scalar(x0, x1, x2, y0, y1, y2):
    """Scalar tanaka_phi0 with the same degenerate-overlap snap."""
    ix0, ix1, ix2, jx0, jx1, jx2 = _frame6(x0, x1, x2)
    iy0, iy1, iy2, jy0, jy1, jy2 = _frame6(y0, y1, y2)
    s = (ix0 * iy0 + ix1 * iy1 + ix2 * iy2) + (jx0 * jy0 + jx1 * jy1 + jx2 * jy2)
    t = (ix0 * jy0 + ix1 * jy1 + ix2 * jy2) - (jx0 * iy0 + jx1 * iy1 + jx2 * iy2)
    scale = math.sqrt(
        (x0 * x0 + x1 * x1 + x2 * x2) * (y0 * y0 + y1 * y1 + y2 * y2)
    )
    if math.hypot(s, t) <= 1e-12 * scale:
        return 0.0
    phi0 = math.atan2(t, s)
    if phi0 < 0.0:
        phi0 = phi0 + 2.0 * math.pi
    if phi0 >= 2.0 * math.pi:
        return 0.0
    return phi0


def _theta_inv(lo, hi, expo, tm, u):
    """Inverse-CDF theta draw; lo = tm^-nu, hi = (pi/2)^-nu, expo = -1/nu."""
    theta = (lo - u * (lo - hi)) ** expo
    if theta < tm:
        return tm
    if theta > HALF_PI:
        return HALF_PI
    return theta


def _acc_value(r, gamma, k):
    """Truncated velocity factor |x|^gamma ∧ k at relative distance r."""
    if r == 0.0:
        if gamma > 0.0:
            return 0.0
        if gamma == 0.0:
            return 1.0 if 1.0 < k else k
        return k
    val = r**gamma
    return val if val < k else k


def _bound_level(v0, v1, v2, vmax, gamma, k):
    """Dominating level for |H_k(V) - v|^gamma ∧ k over atoms with |v| <= vmax."""
    if gamma > 0.0:
        sv = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
        if sv > k:
            sv = k
        lev = (sv + vmax) ** gamma
        return lev if lev < k else k
    if gamma == 0.0:
        return 1.0 if 1.0 < k else k
    return k


def nanbu_chain(v, prev, own, partners, thetas, phis, u_acc, gamma, k):
    """Apply Nanbu candidates in order: own velocity live, partner frozen."""
    m = own.shape[0]
    for c in range(m):
        i = own[c]
        j = partners[c]
        w0, w1, w2 = _htrunc3(v[i, 0], v[i, 1], v[i, 2], k)
        x0 = w0 - prev[j, 0]
        x1 = w1 - prev[j, 1]
        x2 = w2 - prev[j, 2]
        r = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        if u_acc[c] * k <= _acc_value(r, gamma, k):
            a0, a1, a2 = _dev3(x0, x1, x2, thetas[c], phis[c])
            v[i, 0] += a0
            v[i, 1] += a1
            v[i, 2] += a2


def pair_chain(v, own, partners, thetas, phis, u_acc, gamma, k):
    """Apply symmetric pair candidates serially on live values.

    Acceptance uses the truncated difference H_k(V_i) - V_j like the Nanbu
    chain, but the deviation is computed from the untruncated live difference
    so that v' + v'_* and |v'|^2 + |v'_*|^2 are conserved exactly.
    """
    m = own.shape[0]
    for c in range(m):
        i = own[c]
        j = partners[c]
        vi0, vi1, vi2 = v[i, 0], v[i, 1], v[i, 2]
        vj0, vj1, vj2 = v[j, 0], v[j, 1], v[j, 2]
        w0, w1, w2 = _htrunc3(vi0, vi1, vi2, k)
        t0 = w0 - vj0
        t1 = w1 - vj1
        t2 = w2 - vj2
        r = math.sqrt(t0 * t0 + t1 * t1 + t2 * t2)
        if u_acc[c] * k <= _acc_value(r, gamma, k):
            x0 = vi0 - vj0
            x1 = vi1 - vj1
            x2 = vi2 - vj2
            a0, a1, a2 = _dev3(x0, x1, x2, thetas[c], phis[c])
            n0 = vi0 + a0
            n1 = vi1 + a1
            n2 = vi2 + a2
            v[i, 0] = n0
            v[i, 1] = n1
            v[i, 2] = n2
            v[j, 0] = (vi0 + vj0) - n0
            v[j, 1] = (vi1 + vj1) - n1
            v[j, 2] = (vi2 + vj2) - n2


def tagged_core(
    v_init,
    t_end,
    win_start,
    seg_times,
    atoms,
    cdf,
    offsets,
    seg_vmax,
    vmax_win,
    gamma,
    k,
    lo,
    hi,
    expo,
    tm,
    rate_base,
    l_floor,
    uniforms,
    mark_t,
    mark_v,
    mark_theta,
    mark_phi,
    mark_u,
    mark_pre,
    jump_t,
    jump_v,
    v_out,
):
    """Thinned jump path against a piecewise-constant background.

    One uniform row per proposal attempt: (gap, atom, theta, phi, accept).
    Attempts that cross a boundary (segment change, window entry, end time)
    consume their row and restart, which the exponential law permits. Inside
    the recording window the dominating level only ratchets upward and uses
    the largest atom speed of any window segment, so every recorded u covers
    the acceptance level of any later freeze point; marks are recorded for
    accepted and rejected proposals alike.
    """
    p0, p1, p2 = v_init[0], v_init[1], v_init[2]
    s = 0.0
    n_cap = uniforms.shape[0]
    seg = 0
    while seg_times[seg + 1] <= s:
        seg += 1
    in_win = win_start <= 0.0
    vmax = vmax_win if in_win else seg_vmax[seg]
    level = _bound_level(p0, p1, p2, vmax, gamma, k)
    if level < l_floor:
        level = l_floor
    n_marks = 0
    n_jumps = 0
    used = 0
    while True:
        if used >= n_cap:
            return EXHAUSTED, n_marks, n_jumps, used
        rate = rate_base * level
        if rate > 0.0:
            s_prop = s - math.log1p(-uniforms[used, 0]) / rate
        else:
            s_prop = math.inf
        next_bound = seg_times[seg + 1]
        if t_end < next_bound:
            next_bound = t_end
        if not in_win and win_start < next_bound:
            next_bound = win_start
        if s_prop > next_bound:
            used += 1
            s = next_bound
            if s >= t_end:
                break
            if not in_win and s >= win_start:
                in_win = True
                lev = _bound_level(p0, p1, p2, vmax_win, gamma, k)
                if lev > level:
                    level = lev
            while seg_times[seg + 1] <= s:
                seg += 1
            if not in_win:
                level = _bound_level(p0, p1, p2, seg_vmax[seg], gamma, k)
                if level < l_floor:
                    level = l_floor
            continue
        s = s_prop
        u_atom = uniforms[used, 1]
        theta = _theta_inv(lo, hi, expo, tm, uniforms[used, 2])
        phi = 2.0 * math.pi * uniforms[used, 3]
        u_mark = uniforms[used, 4] * level
        used += 1
        o0 = offsets[seg]
        o1 = offsets[seg + 1]
        idx = o0 + np.searchsorted(cdf[o0:o1], u_atom)
        b0 = atoms[idx, 0]
        b1 = atoms[idx, 1]
        b2 = atoms[idx, 2]
        w0, w1, w2 = _htrunc3(p0, p1, p2, k)
        x0 = w0 - b0
        x1 = w1 - b1
        x2 = w2 - b2
        r = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        acc = _acc_value(r, gamma, k)
        if acc > level:
            return BOUND_EXCEEDED, n_marks, n_jumps, used
        if in_win:
            mark_t[n_marks] = s
            mark_v[n_marks, 0] = b0
            mark_v[n_marks, 1] = b1
            mark_v[n_marks, 2] = b2
            mark_theta[n_marks] = theta
            mark_phi[n_marks] = phi
            mark_u[n_marks] = u_mark
            mark_pre[n_marks, 0] = p0
            mark_pre[n_marks, 1] = p1
            mark_pre[n_marks, 2] = p2
            n_marks += 1
        if u_mark <= acc:
            a0, a1, a2 = _dev3(x0, x1, x2, theta, phi)
            p0 += a0
            p1 += a1
            p2 += a2
            jump_t[n_jumps] = s
            jump_v[n_jumps, 0] = p0
            jump_v[n_jumps, 1] = p1
            jump_v[n_jumps, 2] = p2
            n_jumps += 1
            if in_win:
                lev = _bound_level(p0, p1, p2, vmax_win, gamma, k)
                if lev > level:
                    level = lev
            else:
                level = _bound_level(p0, p1, p2, seg_vmax[seg], gamma, k)
                if level < l_floor:
                    level = l_floor
    v_out[0] = p0
    v_out[1] = p1
    v_out[2] = p2
    return OK, n_marks, n_jumps, used


def replay_core(v_frozen, pre, atoms, thetas, phis, us, gamma, k, fresh, v_out):
    """Accumulate frozen-coefficient jumps over recorded marks.

    With fresh=False the base point stays at v_frozen for acceptance,
    deviation, and the coupling-angle shift. With fresh=True the base is the
    running replay value, which reproduces the live path exactly because the
    coupling angle of identical frames is exactly zero.
    """
    q0, q1, q2 = v_frozen[0], v_frozen[1], v_frozen[2]
    m = pre.shape[0]
    for c in range(m):
        if fresh:
            f0, f1, f2 = q0, q1, q2
        else:
            f0, f1, f2 = v_frozen[0], v_frozen[1], v_frozen[2]
        wf0, wf1, wf2 = _htrunc3(f0, f1, f2, k)
        xf0 = wf0 - atoms[c, 0]
        xf1 = wf1 - atoms[c, 1]
        xf2 = wf2 - atoms[c, 2]
        r = math.sqrt(xf0 * xf0 + xf1 * xf1 + xf2 * xf2)
        if us[c] <= _acc_value(r, gamma, k):
            ws0, ws1, ws2 = _htrunc3(pre[c, 0], pre[c, 1], pre[c, 2], k)
            xs0 = ws0 - atoms[c, 0]
            xs1 = ws1 - atoms[c, 1]
            xs2 = ws2 - atoms[c, 2]
            shift = _phi0_scalar(xs0, xs1, xs2, xf0, xf1, xf2)
            a0, a1, a2 = _dev3(xf0, xf1, xf2, thetas[c], phis[c] + shift)
            q0 += a0
            q1 += a1
            q2 += a2
    v_out[0] = q0
    v_out[1] = q1
    v_out[2] = q2


if NUMBA_AVAILABLE:
    _frame6 = njit(cache=True)(_frame6)
    _dev3 = njit(cache=True)(_dev3)
    _htrunc3 = njit(cache=True)(_htrunc3)
    _phi0_scalar = njit(cache=True)(_phi0_scalar)
    _theta_inv = njit(cache=True)(_theta_inv)
    _acc_value = njit(cache=True)(_acc_value)
    _bound_level = njit(cache=True)(_bound_level)
    nanbu_chain_numba = njit(cache=True)(nanbu_chain)
    pair_chain_numba = njit(cache=True)(pair_chain)
    tagged_core_numba = njit(cache=True)(tagged_core)
    replay_core_numba = njit(cache=True)(replay_core)
else:
    nanbu_chain_numba = None
    pair_chain_numba = None
    tagged_core_numba = None
    replay_core_numba = None


def nanbu_rounds_numpy(v, prev, own, partners, thetas, phis, u_acc, gamma, k):
    """Vectorized Nanbu chain: candidates applied in per-particle rounds.

    Round r applies the r-th candidate of every particle at once; within a
    round each particle is touched at most once, so the update order per
    particle matches the scalar chain.
    """
    m = own.shape[0]
    if m == 0:
        return
    # rounds survive interleaved owners: candidate c is its owner's r-th
    order = np.argsort(own, kind="stable")
    so = own[order]
    first = np.ones(m, dtype=bool)
    first[1:] = so[1:] != so[:-1]
    group_start = np.flatnonzero(first)[np.cumsum(first) - 1]
    within = np.empty(m, dtype=np.int64)
    within[order] = np.arange(m) - group_start
    at_zero = 0.0 if gamma > 0.0 else min(1.0, k) if gamma == 0.0 else k
    for r in range(int(within.max()) + 1):
        sel = np.flatnonzero(within == r)
        i = own[sel]
        x = col.h_trunc(v[i], k) - prev[partners[sel]]
        dist = np.linalg.norm(x, axis=1)
        with np.errstate(divide="ignore"):
            val = np.where(dist > 0.0, dist**gamma, at_zero)
        acc = u_acc[sel] * k <= np.minimum(val, k)
        if not np.any(acc):
            continue
        xa = x[acc]
        th = thetas[sel][acc]
        s = np.sin(th / 2.0)
        c = np.cos(th / 2.0)
        a = (-(s * s))[:, None] * xa + (s * c)[:, None] * col.gamma_vec(xa, phis[sel][acc])
        v[i[acc]] += a


def pair_loop_python(v, own, partners, thetas, phis, u_acc, gamma, k):
    """Reference pair chain on the public collision API, one candidate at a time."""
    for c in range(own.shape[0]):
        i, j = own[c], partners[c]
        diff = col.h_trunc(v[i], k) - v[j]
        dist = float(np.linalg.norm(diff))
        if dist > 0.0:
            val = min(dist**gamma, k)
        else:
            val = 0.0 if gamma > 0.0 else min(1.0, k) if gamma == 0.0 else k
        if u_acc[c] * k <= val:
            vp, vsp = col.post_collision(v[i], v[j], thetas[c], phis[c])
            v[i] = vp
            v[j] = vsp
