"""Independent oracle implementations used to cross-check the library.

These deliberately re-derive results with different machinery (scalar loops,
sparse matrix assembly, FFT autocorrelation) than the code under test.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import gaussian_filter

from egmlab.substrate import DiffusionTensorField


def fk_rates_scalar(u, v, w, p):
    """Straight scalar transcription of the ionic model equations."""
    def H(x):
        return 1.0 if x >= 0 else 0.0

    j_fi = -H(u - p.u_c) * (1.0 - u) * (u - p.u_c) * v / p.tau_d
    j_so = H(p.u_c - u) * u / p.tau_0 + H(u - p.u_c) / p.tau_r
    j_si = -(1.0 + math.tanh(p.k * (u - p.u_c_si))) * w / (2.0 * p.tau_si)
    du = -(j_fi + j_so + j_si)
    tau_v_minus = p.tau_v1_minus if u >= p.u_v else p.tau_v2_minus
    dv = H(p.u_c - u) * (1.0 - v) / tau_v_minus - H(u - p.u_c) * v / p.tau_v_plus
    dw = H(p.u_c - u) * (1.0 - w) / p.tau_w_minus - H(u - p.u_c) * w / p.tau_w_plus
    return du, dv, dw


def naive_phi_e(vm: np.ndarray, dx: float, probe, sigma_e: float) -> float:
    """Rectangle-rule electrode integral as an explicit double loop.

    Gradients are hand-coded second-order differences (central inside,
    one-sided at the borders), independent of np.gradient.
    """
    px, py, pz = probe
    ny, nx = vm.shape
    total = 0.0
    for iy in range(ny):
        for ix in range(nx):
            if 0 < ix < nx - 1:
                gx = (vm[iy, ix + 1] - vm[iy, ix - 1]) / (2 * dx)
            elif ix == 0:
                gx = (-3 * vm[iy, 0] + 4 * vm[iy, 1] - vm[iy, 2]) / (2 * dx)
            else:
                gx = (3 * vm[iy, -1] - 4 * vm[iy, -2] + vm[iy, -3]) / (2 * dx)
            if 0 < iy < ny - 1:
                gy = (vm[iy + 1, ix] - vm[iy - 1, ix]) / (2 * dx)
            elif iy == 0:
                gy = (-3 * vm[0, ix] + 4 * vm[1, ix] - vm[2, ix]) / (2 * dx)
            else:
                gy = (3 * vm[-1, ix] - 4 * vm[-2, ix] + vm[-3, ix]) / (2 * dx)
            rx = px - (ix + 0.5) * dx
            ry = py - (iy + 0.5) * dx
            r3 = (rx * rx + ry * ry + pz * pz) ** 1.5
            total += (gx * rx + gy * ry) / r3
    return total * dx * dx / (4.0 * math.pi * sigma_e)


def assemble_diffusion_matrix(tensor: DiffusionTensorField, dx: float) -> sp.csr_matrix:
    """Sparse matrix of the zero-flux anisotropic diffusion operator,
    assembled face by face (independent of the vectorized implementation)."""
    ny, nx = tensor.shape
    n_cells = ny * nx
    a = sp.lil_matrix((n_cells, n_cells))
    dxx, dyy, dxy = tensor.d_xx, tensor.d_yy, tensor.d_xy

    def idx(i, j):
        return i * nx + j

    def add_grad_y(row, i, j, coef):
        # coefficient of the mirrored central derivative du/dy at cell (i, j)
        ip, im = min(i + 1, ny - 1), max(i - 1, 0)
        a[row, idx(ip, j)] += coef / (2 * dx)
        a[row, idx(im, j)] -= coef / (2 * dx)

    def add_grad_x(row, i, j, coef):
        jp, jm = min(j + 1, nx - 1), max(j - 1, 0)
        a[row, idx(i, jp)] += coef / (2 * dx)
        a[row, idx(i, jm)] -= coef / (2 * dx)

    for i in range(ny):
        for j in range(nx - 1):
            axx = 0.5 * (dxx[i, j] + dxx[i, j + 1]) / dx
            cxy = 0.25 * (dxy[i, j] + dxy[i, j + 1])
            for row, sgn in ((idx(i, j), 1.0), (idx(i, j + 1), -1.0)):
                a[row, idx(i, j + 1)] += sgn * axx / dx
                a[row, idx(i, j)] -= sgn * axx / dx
                add_grad_y(row, i, j, sgn * cxy / dx)
                add_grad_y(row, i, j + 1, sgn * cxy / dx)
    for i in range(ny - 1):
        for j in range(nx):
            ayy = 0.5 * (dyy[i, j] + dyy[i + 1, j]) / dx
            cxy = 0.25 * (dxy[i, j] + dxy[i + 1, j])
            for row, sgn in ((idx(i, j), 1.0), (idx(i + 1, j), -1.0)):
                a[row, idx(i + 1, j)] += sgn * ayy / dx
                a[row, idx(i, j)] -= sgn * ayy / dx
                add_grad_x(row, i, j, sgn * cxy / dx)
                add_grad_x(row, i + 1, j, sgn * cxy / dx)
    return a.tocsr()


def smooth_field(rng: np.random.Generator, n: int, sigma: float = 4.0,
                 lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    f = gaussian_filter(rng.normal(size=(n, n)), sigma=sigma)
    f -= f.min()
    if f.max() > 0:
        f /= f.max()
    return lo + (hi - lo) * f


def random_spd_tensor(rng: np.random.Generator, n: int, dx: float = 0.01,
                      d_scale: float = 1e-3) -> DiffusionTensorField:
    """Random smooth SPD tensor field via rotation of positive eigenvalues."""
    d_l = smooth_field(rng, n, lo=0.4, hi=1.2) * d_scale
    lam = smooth_field(rng, n, lo=1.0, hi=4.0)
    d_t = d_l / lam
    alpha = smooth_field(rng, n, lo=-0.5 * np.pi, hi=0.5 * np.pi)
    c, s = np.cos(alpha), np.sin(alpha)
    return DiffusionTensorField(
        d_xx=d_l * c**2 + d_t * s**2,
        d_yy=d_l * s**2 + d_t * c**2,
        d_xy=(d_l - d_t) * s * c,
        dx=dx,
    )


def radial_autocorrelation(f: np.ndarray, max_lag: int = 10) -> np.ndarray:
    """Ring-averaged spatial autocorrelation at integer lags 1..max_lag."""
    f = f - f.mean()
    n = f.shape[0]
    spec = np.fft.rfft2(f, s=(2 * n, 2 * n))
    ac = np.fft.irfft2(spec * np.conj(spec), s=(2 * n, 2 * n))[:n, :n]
    ac /= ac[0, 0]
    yy, xx = np.mgrid[0:n, 0:n]
    r = np.sqrt(yy**2 + xx**2)
    return np.array([ac[(r >= lag - 0.5) & (r < lag + 0.5)].mean()
                     for lag in range(1, max_lag + 1)])
