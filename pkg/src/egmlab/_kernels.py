"""Optional numba-fused time-step kernel.

Semantically identical to the numpy path in solver._advance (same stencil,
same ionic model, same mirror-ghost tangential gradients); the two are
cross-checked in the test suite. Cells are updated pointwise with no shared
writes, so results are deterministic regardless of thread count. Falls back
silently when numba is unavailable.
"""
from __future__ import annotations

import math
import warnings

try:
    with warnings.catch_warnings():
        # some images ship a TBB too old for numba's TBB layer; numba falls
        # back to another threading layer and warns, which is just noise here
        warnings.simplefilter("ignore")
        from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    HAVE_NUMBA = False

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def fused_step(u, v, w, axx, ayy, cx, cy, inv_dx, half_inv_dx, dt,
                   stim, stim_on, ionic,
                   tau_v_plus, tau_v1m, tau_v2m, tau_w_plus, tau_w_minus,
                   tau_d, tau_0, tau_r, tau_si, u_c, u_v, u_c_si, k,
                   fx, fy, un, vn, wn):
        ny, nx = u.shape
        for i in prange(ny):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < ny - 1 else ny - 1
            for j in range(nx - 1):
                uy_l = (u[ip, j] - u[im, j]) * half_inv_dx
                uy_r = (u[ip, j + 1] - u[im, j + 1]) * half_inv_dx
                fx[i, j] = axx[i, j] * (u[i, j + 1] - u[i, j]) + cx[i, j] * (uy_l + uy_r)
        for i in prange(ny - 1):
            for j in range(nx):
                jm = j - 1 if j > 0 else 0
                jp = j + 1 if j < nx - 1 else nx - 1
                ux_t = (u[i, jp] - u[i, jm]) * half_inv_dx
                ux_b = (u[i + 1, jp] - u[i + 1, jm]) * half_inv_dx
                fy[i, j] = ayy[i, j] * (u[i + 1, j] - u[i, j]) + cy[i, j] * (ux_t + ux_b)
        for i in prange(ny):
            for j in range(nx):
                div = 0.0
                if j < nx - 1:
                    div += fx[i, j]
                if j > 0:
                    div -= fx[i, j - 1]
                if i < ny - 1:
                    div += fy[i, j]
                if i > 0:
                    div -= fy[i - 1, j]
                du = div * inv_dx
                uu = u[i, j]
                if ionic:
                    vv = v[i, j]
                    ww = w[i, j]
                    above = 1.0 if uu >= u_c else 0.0
                    below = 1.0 if uu <= u_c else 0.0
                    j_fi = -above * (1.0 - uu) * (uu - u_c) * vv / tau_d
                    j_so = below * uu / tau_0 + above / tau_r
                    j_si = -(1.0 + math.tanh(k * (uu - u_c_si))) * ww / (2.0 * tau_si)
                    du -= j_fi + j_so + j_si
                    tvm = tau_v1m if uu >= u_v else tau_v2m
                    vn[i, j] = vv + dt * (below * (1.0 - vv) / tvm - above * vv / tau_v_plus)
                    wn[i, j] = ww + dt * (below * (1.0 - ww) / tau_w_minus - above * ww / tau_w_plus)
                else:
                    vn[i, j] = v[i, j]
                    wn[i, j] = w[i, j]
                if stim_on:
                    du += stim[i, j]
                un[i, j] = uu + dt * du

else:  # pragma: no cover
    fused_step = None
