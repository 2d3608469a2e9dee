"""Unipolar extracellular potentials at a grid of virtual point electrodes.

The potential at probe position x is the rectangle-rule integral over the
tissue sheet of grad(V_m) . (x - x') / (4 pi sigma_e |x - x'|^3). Probes sit
z > 0 above the sheet; the in-plane gradient uses second-order central
differences (one-sided second-order at the domain border). Per-electrode
weight fields are precomputed once and reused across frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SIGMA_E_DEFAULT = 20.0  # mS/cm


@dataclass
class ElectrodeGrid:
    rows: int = 29
    cols: int = 29
    spacing: float = 0.4  # cm
    z: float = 0.1        # cm above the tissue sheet
    origin: tuple[float, float] | None = None  # (x0, y0) of electrode [0, 0], cm

    def __post_init__(self):
        if self.z <= 0:
            raise ConfigError("electrode height z must be positive to avoid the kernel singularity")

    def centered(self, domain_cm: float) -> "ElectrodeGrid":
        """Return a copy whose footprint is centered in a square domain."""
        span_x = (self.cols - 1) * self.spacing
        span_y = (self.rows - 1) * self.spacing
        if span_x > domain_cm or span_y > domain_cm:
            raise ConfigError("electrode grid footprint exceeds the domain")
        origin = ((domain_cm - span_x) / 2.0, (domain_cm - span_y) / 2.0)
        return ElectrodeGrid(self.rows, self.cols, self.spacing, self.z, origin)

    def positions(self) -> np.ndarray:
        """(rows, cols, 2) array of (x, y) electrode positions, row-major."""
        if self.origin is None:
            raise ConfigError("electrode grid origin not set; call centered() or set origin")
        x = self.origin[0] + np.arange(self.cols) * self.spacing
        y = self.origin[1] + np.arange(self.rows) * self.spacing
        xx, yy = np.meshgrid(x, y)
        return np.stack([xx, yy], axis=-1)


@dataclass
class EgmArray:
    data: np.ndarray          # (T, rows, cols)
    sample_interval: float    # ms
    grid: ElectrodeGrid
    sigma_e: float = SIGMA_E_DEFAULT

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]


def _coarsen(frame: np.ndarray, c: int) -> np.ndarray:
    ny, nx = frame.shape
    return frame.reshape(ny // c, c, nx // c, c).mean(axis=(1, 3))


def _gradient(frame: np.ndarray, dx: float) -> tuple[np.ndarray, np.ndarray]:
    gy, gx = np.gradient(frame, dx, edge_order=2)
    return gx, gy


def _kernels(probe, shape: tuple[int, int], dx: float, sigma_e: float):
    """Weight fields (k_x, k_y) so phi = sum(k_x * dVm/dx + k_y * dVm/dy)."""
    px, py, pz = probe
    if pz <= 0:
        raise ConfigError("probe height must be positive (singularity at z = 0)")
    if sigma_e <= 0:
        raise ConfigError("sigma_e must be positive")
    ny, nx = shape
    cx = (np.arange(nx) + 0.5) * dx
    cy = (np.arange(ny) + 0.5) * dx
    rx = px - cx[None, :]
    ry = py - cy[:, None]
    r3 = (rx**2 + ry**2 + pz**2) ** 1.5
    scale = dx * dx / (4.0 * np.pi * sigma_e)
    return scale * rx / r3, scale * ry / r3


def phi_e_at(vm_frame: np.ndarray, dx: float, probe, sigma_e: float = SIGMA_E_DEFAULT) -> float:
    """Extracellular potential of one frame at one 3-D probe position."""
    kx, ky = _kernels(probe, vm_frame.shape, dx, sigma_e)
    gx, gy = _gradient(vm_frame, dx)
    return float(np.sum(kx * gx) + np.sum(ky * gy))


class EgmRecorder:
    """Streaming EGM sampler with shared per-electrode kernel precomputation.

    ``coarsen`` > 1 evaluates the integral on a block-averaged copy of each
    frame (c x c cells per block), trading accuracy for kernel memory and
    speed; the frame grid must be divisible by it.
    """

    def __init__(self, grid: ElectrodeGrid, field_shape: tuple[int, int], dx: float,
                 sigma_e: float = SIGMA_E_DEFAULT, sample_interval: float = 1.0,
                 frame_interval: float = 1.0, coarsen: int = 1):
        if coarsen < 1 or field_shape[0] % coarsen or field_shape[1] % coarsen:
            raise ConfigError("coarsening factor must divide the field shape")
        ratio = sample_interval / frame_interval
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(
                f"frame cadence {frame_interval} ms incompatible with "
                f"sample interval {sample_interval} ms"
            )
        self._stride = int(round(ratio))
        self.grid = grid
        self.sigma_e = sigma_e
        self.sample_interval = sample_interval
        self._dx_int = dx * coarsen
        self._coarsen = coarsen
        self._shape_int = (field_shape[0] // coarsen, field_shape[1] // coarsen)
        pos = grid.positions().reshape(-1, 2)
        n_int = self._shape_int[0] * self._shape_int[1]
        # one (E, 2*n) weight matrix; gradients are batched into a (2*n, F)
        # block so sampling is a GEMM that reads the kernels once per chunk
        # instead of once per frame
        self._weights = np.empty((len(pos), 2 * n_int))
        for e, (px, py) in enumerate(pos):
            kx, ky = _kernels((px, py, grid.z), self._shape_int, self._dx_int, sigma_e)
            self._weights[e, :n_int] = kx.ravel()
            self._weights[e, n_int:] = ky.ravel()
        self._chunk = np.empty((2 * n_int, 32))
        self._chunk_fill = 0
        self._samples: list[np.ndarray] = []
        self._frames_seen = 0

    def _flush(self) -> None:
        if self._chunk_fill == 0:
            return
        phi = self._weights @ self._chunk[:, :self._chunk_fill]
        for col in range(self._chunk_fill):
            self._samples.append(phi[:, col].reshape(self.grid.rows, self.grid.cols))
        self._chunk_fill = 0

    def consume(self, t_ms: float, vm_frame: np.ndarray) -> None:
        self._frames_seen += 1
        if (self._frames_seen - 1) % self._stride:
            return
        if self._coarsen > 1:
            vm_frame = _coarsen(vm_frame, self._coarsen)
        gx, gy = _gradient(np.asarray(vm_frame, dtype=np.float64), self._dx_int)
        n_int = gx.size
        self._chunk[:n_int, self._chunk_fill] = gx.ravel()
        self._chunk[n_int:, self._chunk_fill] = gy.ravel()
        self._chunk_fill += 1
        if self._chunk_fill == self._chunk.shape[1]:
            self._flush()

    def result(self) -> EgmArray:
        self._flush()
        data = np.stack(self._samples) if self._samples else np.zeros(
            (0, self.grid.rows, self.grid.cols))
        return EgmArray(data=data, sample_interval=self.sample_interval,
                        grid=self.grid, sigma_e=self.sigma_e)


def record_grid(frames, grid: ElectrodeGrid, dx: float, sigma_e: float = SIGMA_E_DEFAULT,
                frame_interval: float = 1.0, sample_interval: float = 1.0,
                coarsen: int = 1) -> EgmArray:
    """Sample a V_m frame stream (iterable or (T, ny, nx) array) on the grid."""
    if isinstance(frames, np.ndarray):
        if frames.ndim != 3:
            raise ConfigError("expected a (T, ny, nx) frame stack")
        frames = list(frames)
    else:
        frames = list(frames)
    if not frames:
        raise ConfigError("empty frame stream")
    rec = EgmRecorder(grid, frames[0].shape, dx, sigma_e, sample_interval,
                      frame_interval, coarsen)
    for i, f in enumerate(frames):
        rec.consume((i + 1) * frame_interval, f)
    return rec.result()
