"""Monodomain reaction-diffusion solver for the three-variable ionic model.

State fields u (dimensionless transmembrane potential), v, w (gates) live on
a regular n x n cell-centered grid, indexed ``[iy, ix]``. Spatial derivatives
are second-order central differences; the divergence of the anisotropic flux
D grad(u) is evaluated in conservation form with face-averaged tensor
components and zero total normal flux through boundary faces (Neumann).
Time integration is forward Euler.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalInstabilityError
from .substrate import DiffusionTensorField

U_SOFT_MIN, U_SOFT_MAX = -0.1, 1.2


@dataclass(frozen=True)
class FkParams:
    """Time constants (ms), thresholds and potentials of the ionic model."""

    tau_v_plus: float
    tau_v1_minus: float  # recovery time constant for u >= u_v
    tau_v2_minus: float  # recovery time constant for u < u_v
    tau_w_plus: float
    tau_w_minus: float
    tau_d: float
    tau_0: float
    tau_r: float
    tau_si: float
    u_c: float
    u_v: float
    u_c_si: float
    k: float
    V_0: float = -85.0
    V_fi: float = 15.0
    C_m: float = 1.0
    # Cellular surface-to-volume ratio (1/cm). Only relevant when deriving D
    # from a conductivity G via D = G/(beta*C_m); unused here because all
    # experiments specify D directly.
    beta: float | None = None

    def __post_init__(self):
        for name in ("tau_v_plus", "tau_v1_minus", "tau_v2_minus", "tau_w_plus",
                     "tau_w_minus", "tau_d", "tau_0", "tau_r", "tau_si"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.u_c < 1.0:
            raise ConfigError("u_c must lie in (0, 1)")

    def min_tau(self) -> float:
        return min(self.tau_v_plus, self.tau_v1_minus, self.tau_v2_minus,
                   self.tau_w_plus, self.tau_w_minus)


def default_fk_params() -> FkParams:
    """Load the packaged parameter set (versioned JSON, treated as data)."""
    text = resources.files("egmlab.data").joinpath("fk_params_br.json").read_text()
    doc = json.loads(text)
    if doc.get("format_version") != 1:
        raise ConfigError("unsupported fk params file version")
    return FkParams(**doc["params"])


@dataclass
class SimState:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0


def rest_state(shape: tuple[int, int]) -> SimState:
    return SimState(u=np.zeros(shape), v=np.ones(shape), w=np.ones(shape), t=0.0)


@dataclass
class StimulusProtocol:
    """Periodic pulse-train current injected into a rectangular region."""

    region: tuple[float, float, float, float]  # (x0, y0, x1, y1) in cm
    period: float = 150.0      # ms
    pulse_width: float = 2.0   # ms
    amplitude: float = 0.2     # du/dt while active (1/ms)

    def __post_init__(self):
        if not self.period > self.pulse_width > 0:
            raise ConfigError("need period > pulse_width > 0")

    def cell_mask(self, shape: tuple[int, int], dx: float) -> np.ndarray:
        ny, nx = shape
        x = (np.arange(nx) + 0.5) * dx
        y = (np.arange(ny) + 0.5) * dx
        x0, y0, x1, y1 = self.region
        if x1 > nx * dx + 1e-9 or y1 > ny * dx + 1e-9 or x0 < -1e-9 or y0 < -1e-9:
            raise ConfigError("stimulus region extends outside the domain")
        mx = (x >= x0) & (x <= x1)
        my = (y >= y0) & (y <= y1)
        return np.outer(my, mx)

    def active(self, t: float) -> bool:
        return math.fmod(t, self.period) < self.pulse_width


@dataclass
class SimConfig:
    tensor: DiffusionTensorField
    params: FkParams
    stimulus: StimulusProtocol | None = None
    dx: float = 0.01        # cm
    dt: float = 0.01        # ms
    duration: float = 1000.0  # ms
    record_every: float = 1.0  # ms
    ionic: bool = True      # disable for pure-diffusion conservation checks
    dtype: type = np.float64  # float32 halves memory traffic in long runs
    backend: str = "auto"   # "numpy", "numba", or "auto" (numba when available)

    def validate(self) -> None:
        limit = self.dx**2 / (4.0 * self.tensor.max_eigenvalue())
        if self.dt > limit * (1 + 1e-12):
            raise ConfigError(
                f"dt = {self.dt} violates the explicit stability bound {limit:.4g} ms"
            )
        if self.record_every < self.dt - 1e-12:
            raise ConfigError("record_every must be >= dt")
        stride = self.record_every / self.dt
        if abs(stride - round(stride)) > 1e-9:
            raise ConfigError("record_every must be an integer multiple of dt")

    @property
    def shape(self) -> tuple[int, int]:
        return self.tensor.shape


def _float_dtype(u: np.ndarray):
    return u.dtype if u.dtype.kind == "f" else np.dtype(np.float64)


def ionic_currents(u, v, w, p: FkParams):
    """The three membrane currents, dimensionless form, H(0) = 1 convention."""
    u = np.asarray(u)
    fd = _float_dtype(u)
    v = np.asarray(v, dtype=fd)
    w = np.asarray(w, dtype=fd)
    above = (u >= p.u_c).astype(fd)
    below = (u <= p.u_c).astype(fd)
    j_fi = -above * (1.0 - u) * (u - p.u_c) * v / p.tau_d
    j_so = below * u / p.tau_0 + above / p.tau_r
    j_si = -(1.0 + np.tanh(p.k * (u - p.u_c_si))) * w / (2.0 * p.tau_si)
    return j_fi, j_so, j_si


def reaction_rates(u, v, w, p: FkParams):
    """Right-hand sides: du from ionic currents and the two gate ODEs (1/ms)."""
    u = np.asarray(u)
    fd = _float_dtype(u)
    v = np.asarray(v, dtype=fd)
    w = np.asarray(w, dtype=fd)
    above = (u >= p.u_c).astype(fd)
    below = (u <= p.u_c).astype(fd)
    j_fi, j_so, j_si = ionic_currents(u, v, w, p)
    du_ion = -(j_fi + j_so + j_si)
    tau_v_minus = np.where(u >= p.u_v, fd.type(p.tau_v1_minus), fd.type(p.tau_v2_minus))
    dv = below * (1.0 - v) / tau_v_minus - above * v / p.tau_v_plus
    dw = below * (1.0 - w) / p.tau_w_minus - above * w / p.tau_w_plus
    return du_ion, dv, dw


class DiffusionOperator:
    """div(D grad u) with heterogeneous anisotropic D, zero-flux boundaries.

    Fluxes are built on cell faces: axis components use face-averaged
    d_xx/d_yy with the across-face difference, cross components use
    face-averaged d_xy with the tangential derivative averaged onto the face
    (this reduces to the standard centered 4-point cross stencil where D is
    homogeneous). Boundary faces carry exactly zero flux, so the discrete
    operator telescopes and conserves sum(u). Face-averaged coefficients are
    precomputed once; apply() reuses caller-owned scratch buffers.
    """

    def __init__(self, tensor: DiffusionTensorField, dx: float, dtype=np.float64):
        dtype = np.dtype(dtype)
        dxx = tensor.d_xx.astype(dtype)
        dyy = tensor.d_yy.astype(dtype)
        dxy = tensor.d_xy.astype(dtype)
        self.shape = tensor.shape
        self.dx = dx
        inv_dx = dtype.type(1.0 / dx)
        self._axx = (0.5 * (dxx[:, :-1] + dxx[:, 1:]) * inv_dx).astype(dtype)
        self._ayy = (0.5 * (dyy[:-1, :] + dyy[1:, :]) * inv_dx).astype(dtype)
        # cross coefficients absorb the 1/2 face average of the tangential slopes
        self._cx = (0.25 * (dxy[:, :-1] + dxy[:, 1:])).astype(dtype)
        self._cy = (0.25 * (dxy[:-1, :] + dxy[1:, :])).astype(dtype)
        self._inv_dx = inv_dx
        self._half_inv_dx = dtype.type(0.5 / dx)

    def _grad0(self, u, out):
        """Central d/dy with mirrored ghost rows (halved one-sided at edges)."""
        np.subtract(u[2:, :], u[:-2, :], out=out[1:-1, :])
        np.subtract(u[1, :], u[0, :], out=out[0, :])
        np.subtract(u[-1, :], u[-2, :], out=out[-1, :])
        out *= self._half_inv_dx
        return out

    def _grad1(self, u, out):
        np.subtract(u[:, 2:], u[:, :-2], out=out[:, 1:-1])
        np.subtract(u[:, 1], u[:, 0], out=out[:, 0])
        np.subtract(u[:, -1], u[:, -2], out=out[:, -1])
        out *= self._half_inv_dx
        return out

    def apply(self, u: np.ndarray, out: np.ndarray, scratch: np.ndarray) -> np.ndarray:
        if u.shape != self.shape:
            raise ConfigError(f"field {u.shape} vs tensor {self.shape} shape mismatch")
        ny, nx = u.shape
        uy = self._grad0(u, scratch)
        fx = self._axx * (u[:, 1:] - u[:, :-1])
        fx += self._cx * (uy[:, :-1] + uy[:, 1:])
        ux = self._grad1(u, scratch)  # uy no longer needed; reuse the buffer
        fy = self._ayy * (u[1:, :] - u[:-1, :])
        fy += self._cy * (ux[:-1, :] + ux[1:, :])
        out[:] = 0.0
        out[:, :-1] += fx
        out[:, 1:] -= fx
        out[:-1, :] += fy
        out[1:, :] -= fy
        out *= self._inv_dx
        return out


def diffusion_term(u: np.ndarray, tensor: DiffusionTensorField, dx: float) -> np.ndarray:
    """div(D grad u); see DiffusionOperator for the discretization."""
    u = np.asarray(u, dtype=np.float64)
    op = DiffusionOperator(tensor, dx)
    return op.apply(u, np.empty_like(u), np.empty_like(u))


def _advance(u, v, w, t, cfg: SimConfig, stim_mask, op: DiffusionOperator,
             du_buf, scratch):
    du = op.apply(u, du_buf, scratch)
    if cfg.ionic:
        du_ion, dv, dw = reaction_rates(u, v, w, cfg.params)
        du += du_ion
        v = v + cfg.dt * dv
        w = w + cfg.dt * dw
    if stim_mask is not None and cfg.stimulus.active(t):
        du += stim_mask * (cfg.stimulus.amplitude / cfg.params.C_m)
    u = u + cfg.dt * du
    return u, v, w


def _check_finite(u: np.ndarray, step: int, t: float) -> float:
    s = float(u.sum())
    if not math.isfinite(s):
        raise NumericalInstabilityError(step, t)
    return s


def step(s: SimState, cfg: SimConfig, step_index: int = 0) -> SimState:
    """Advance one forward-Euler step; raises on NaN/Inf in the new state."""
    stim_mask = None
    if cfg.stimulus is not None:
        stim_mask = cfg.stimulus.cell_mask(s.u.shape, cfg.dx)
    op = DiffusionOperator(cfg.tensor, cfg.dx)
    u, v, w = _advance(s.u, s.v, s.w, s.t, cfg, stim_mask, op,
                       np.empty_like(s.u), np.empty_like(s.u))
    _check_finite(u, step_index + 1, s.t + cfg.dt)
    return SimState(u=u, v=v, w=w, t=s.t + cfg.dt)


@dataclass
class RunSummary:
    steps: int
    frames: int
    min_u: float
    max_u: float
    activation_fraction: float  # cells whose u ever reached 0.5, record cadence
    wall_time_s: float


def to_vm(u: np.ndarray, p: FkParams) -> np.ndarray:
    """Dimensional transmembrane potential V_m = u (V_fi - V_0) + V_0, mV."""
    return u * (p.V_fi - p.V_0) + p.V_0


def run(cfg: SimConfig, sink=None) -> RunSummary:
    """Advance from rest for the configured duration, streaming V_m frames.

    ``sink(t_ms, vm_frame)`` is called once per ``record_every`` interval with
    a fresh float array. Field extrema and activation coverage are sampled at
    the same cadence.
    """
    cfg.validate()
    shape = cfg.shape
    dtype = np.dtype(cfg.dtype)
    backend = cfg.backend
    if backend == "auto":
        # below ~200^2 cells the vectorized path beats the threaded kernel
        big = shape[0] * shape[1] >= 40_000
        backend = "numba" if (_kernels.HAVE_NUMBA and big) else "numpy"
    if backend == "numba" and not _kernels.HAVE_NUMBA:
        raise ConfigError("numba backend requested but numba is not importable")
    if backend not in ("numba", "numpy"):
        raise ConfigError(f"unknown backend {backend!r}")

    u = np.zeros(shape, dtype=dtype)
    v = np.ones(shape, dtype=dtype)
    w = np.ones(shape, dtype=dtype)
    stim_mask = None
    if cfg.stimulus is not None:
        stim_mask = cfg.stimulus.cell_mask(shape, cfg.dx).astype(dtype)
    op = DiffusionOperator(cfg.tensor, cfg.dx, dtype=dtype)
    du_buf = np.empty(shape, dtype=dtype)
    scratch = np.empty(shape, dtype=dtype)
    if backend == "numba":
        p = cfg.params
        stim_scaled = (stim_mask * (cfg.stimulus.amplitude / p.C_m)
                       if stim_mask is not None else np.zeros(shape, dtype=dtype))
        fx = np.empty((shape[0], shape[1] - 1), dtype=dtype)
        fy = np.empty((shape[0] - 1, shape[1]), dtype=dtype)
        bufs = (np.empty(shape, dtype=dtype), np.empty(shape, dtype=dtype),
                np.empty(shape, dtype=dtype))

    n_steps = int(round(cfg.duration / cfg.dt))
    stride = int(round(cfg.record_every / cfg.dt))
    started = time.perf_counter()

    min_u, max_u = 0.0, 0.0
    activated = np.zeros(shape, dtype=bool)
    frames = 0
    warned_soft = False
    t = 0.0
    for i in range(1, n_steps + 1):
        if backend == "numba":
            un, vn, wn = bufs
            stim_on = stim_mask is not None and cfg.stimulus.active(t)
            _kernels.fused_step(
                u, v, w, op._axx, op._ayy, op._cx, op._cy,
                float(op._inv_dx), float(op._half_inv_dx), cfg.dt,
                stim_scaled, stim_on, cfg.ionic,
                p.tau_v_plus, p.tau_v1_minus, p.tau_v2_minus, p.tau_w_plus,
                p.tau_w_minus, p.tau_d, p.tau_0, p.tau_r, p.tau_si,
                p.u_c, p.u_v, p.u_c_si, p.k, fx, fy, un, vn, wn)
            bufs = (u, v, w)
            u, v, w = un, vn, wn
        else:
            u, v, w = _advance(u, v, w, t, cfg, stim_mask, op, du_buf, scratch)
        t = i * cfg.dt
        _check_finite(u, i, t)
        if i % stride == 0:
            lo, hi = float(u.min()), float(u.max())
            min_u, max_u = min(min_u, lo), max(max_u, hi)
            if not warned_soft and (lo < U_SOFT_MIN or hi > U_SOFT_MAX):
                warnings.warn(
                    f"u left the soft range [{U_SOFT_MIN}, {U_SOFT_MAX}] "
                    f"(min {lo:.3g}, max {hi:.3g} at t = {t:.3g} ms)",
                    RuntimeWarning,
                    stacklevel=2,
                )
                warned_soft = True
            activated |= u >= 0.5
            if sink is not None:
                sink(t, to_vm(u, cfg.params))
            frames += 1
    return RunSummary(
        steps=n_steps,
        frames=frames,
        min_u=min_u,
        max_u=max_u,
        activation_fraction=float(activated.mean()),
        wall_time_s=time.perf_counter() - started,
    )
