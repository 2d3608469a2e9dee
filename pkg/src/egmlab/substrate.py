"""Randomized conductivity substrates.

Three substrate families are generated on an n x n cell grid:

* heterogeneous isotropic scar maps (compact low-conductivity blobs),
* homogeneous anisotropic fibre-orientation fields (spline-driven angles),
* their superposition (scar conductivity + fibre angles).

All randomness flows through explicit integer seeds; every generator is a
pure function of (seed, config). Fields are indexed ``[iy, ix]`` (row = y).
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import gaussian_filter
from scipy.spatial import cKDTree

from .errors import ConfigError, GenerationError

D_HEALTHY = 1e-3  # cm^2/ms, healthy-tissue diffusivity
D_SCAR = 1e-4     # cm^2/ms, scar diffusivity (90% reduction)
LAMBDA_DEFAULT = 4.0  # longitudinal/transverse anisotropy ratio

N_CONTROL_POINTS = 5
CONTROL_Y_STD = 0.3  # y_i ~ N(0, 0.09) in units of field height


@dataclass
class ScarCfg:
    """Controls for the compact-blob scar generator.

    The spatial numbers are in units of the field size (fractions), so one
    config scales across grid resolutions. Defaults are tuned by eye to give
    compact blob patterns; there is no published reference for them.
    """

    n: int = 96
    count_range: tuple[int, int] = (1, 3)
    # ellipse semi-axes as fractions of the field size
    radius_range: tuple[float, float] = (0.06, 0.16)
    fraction_bounds: tuple[float, float] = (0.02, 0.25)
    smooth_sigma: float = 1.5  # cells, applied before thresholding at 0.5
    margin: float = 0.1       # keep blob centers this fraction away from borders
    max_retries: int = 20
    d_healthy: float = D_HEALTHY
    d_scar: float = D_SCAR


@dataclass
class ScarMap:
    mask: np.ndarray  # uint8, 1 = scar
    d_healthy: float = D_HEALTHY
    d_scar: float = D_SCAR

    def __post_init__(self):
        if self.d_scar >= self.d_healthy:
            raise ConfigError("d_scar must be below d_healthy")

    @property
    def fraction(self) -> float:
        return float(self.mask.mean())

    def diffusivity(self) -> np.ndarray:
        return np.where(self.mask > 0, self.d_scar, self.d_healthy)


@dataclass
class FibreAngleField:
    alpha: np.ndarray  # degrees, n x n
    control_points: np.ndarray  # (5, 2) array of (x_i, y_i), normalized units


@dataclass
class AnisotropyParams:
    d_l: float | np.ndarray = D_HEALTHY
    lam: float | np.ndarray = LAMBDA_DEFAULT

    def __post_init__(self):
        if np.any(np.asarray(self.lam) < 1.0):
            raise ConfigError("anisotropy ratio must be >= 1 everywhere")


@dataclass
class DiffusionTensorField:
    """Per-cell symmetric 2x2 tensor stored as three component fields."""

    d_xx: np.ndarray
    d_yy: np.ndarray
    d_xy: np.ndarray
    dx: float = 0.01  # cm

    @property
    def n(self) -> int:
        return self.d_xx.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.d_xx.shape

    def max_eigenvalue(self) -> float:
        half_tr = 0.5 * (self.d_xx + self.d_yy)
        disc = np.sqrt((0.5 * (self.d_xx - self.d_yy)) ** 2 + self.d_xy**2)
        return float(np.max(half_tr + disc))

    def is_spd(self) -> bool:
        det = self.d_xx * self.d_yy - self.d_xy**2
        return bool(np.all(self.d_xx > 0) and np.all(self.d_yy > 0) and np.all(det > 0))

    def components(self) -> np.ndarray:
        return np.stack([self.d_xx, self.d_yy, self.d_xy])


def _render_ellipses(rng: np.random.Generator, cfg: ScarCfg) -> np.ndarray:
    """Union of K random ellipses, smoothed and thresholded at 0.5."""
    n = cfg.n
    k = int(rng.integers(cfg.count_range[0], cfg.count_range[1] + 1))
    canvas = np.zeros((n, n), dtype=bool)
    if k == 0:
        return canvas.astype(np.uint8)
    yy, xx = np.mgrid[0:n, 0:n]
    yy = (yy + 0.5) / n
    xx = (xx + 0.5) / n
    for _ in range(k):
        cx, cy = rng.uniform(cfg.margin, 1.0 - cfg.margin, size=2)
        a, b = rng.uniform(*cfg.radius_range, size=2)
        theta = rng.uniform(0.0, np.pi)
        ct, st = np.cos(theta), np.sin(theta)
        xr = (xx - cx) * ct + (yy - cy) * st
        yr = -(xx - cx) * st + (yy - cy) * ct
        canvas |= (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
    smooth = gaussian_filter(canvas.astype(np.float64), sigma=cfg.smooth_sigma)
    return (smooth >= 0.5).astype(np.uint8)


def gen_scar_map(seed: int, cfg: ScarCfg | None = None) -> ScarMap:
    """Generate a compact-blob scar mask whose area fraction lies in bounds.

    Deterministic for fixed (seed, cfg). If the drawn pattern misses the
    configured area-fraction bounds, retries with sub-seeds derived from the
    master seed, up to ``cfg.max_retries``.
    """
    cfg = cfg or ScarCfg()
    lo, hi = cfg.fraction_bounds
    streams = np.random.SeedSequence(seed).spawn(cfg.max_retries + 1)
    for ss in streams:
        mask = _render_ellipses(np.random.default_rng(ss), cfg)
        frac = mask.mean()
        if lo <= frac <= hi:
            return ScarMap(mask=mask, d_healthy=cfg.d_healthy, d_scar=cfg.d_scar)
    raise GenerationError(
        f"scar fraction bounds {cfg.fraction_bounds} unsatisfied after "
        f"{cfg.max_retries + 1} attempts (seed {seed})"
    )


def _spline_from_controls(ys: np.ndarray) -> CubicSpline:
    if len(ys) != N_CONTROL_POINTS:
        raise ConfigError(f"expected {N_CONTROL_POINTS} control points")
    xs = np.linspace(0.0, 1.0, N_CONTROL_POINTS)
    return CubicSpline(xs, ys, bc_type="natural")


def fibre_field_from_controls(ys: np.ndarray, n: int,
                              projection: str = "nearest") -> FibreAngleField:
    """Angle field induced by a spline path through five control offsets.

    ``ys`` are vertical offsets (units of field height) of the five
    equidistant control points; the path runs border to border at mid-height.
    Each cell takes the tangent angle at its projection onto the path:
    ``projection="nearest"`` uses the closest path point, ``"vertical"``
    copies the tangent at the cell's own x.
    """
    if n < 16:
        raise ConfigError("fibre fields need n >= 16")
    ys = np.asarray(ys, dtype=np.float64)
    spline = _spline_from_controls(ys)
    centers = (np.arange(n) + 0.5) / n
    dense_x = np.linspace(0.0, 1.0, max(2048, 8 * n))
    dense_y = 0.5 + spline(dense_x)
    tangents = np.degrees(np.arctan(spline(dense_x, 1)))

    if projection == "vertical":
        alpha_line = np.degrees(np.arctan(spline(centers, 1)))
        alpha = np.tile(alpha_line, (n, 1))
    elif projection == "nearest":
        tree = cKDTree(np.column_stack([dense_x, dense_y]))
        gx, gy = np.meshgrid(centers, centers)  # [iy, ix]
        _, idx = tree.query(np.column_stack([gx.ravel(), gy.ravel()]))
        alpha = tangents[idx].reshape(n, n)
    else:
        raise ConfigError(f"unknown projection {projection!r}")

    xs = np.linspace(0.0, 1.0, N_CONTROL_POINTS)
    controls = np.column_stack([xs, ys])
    return FibreAngleField(alpha=alpha, control_points=controls)


def gen_fibre_field(seed: int, n: int, projection: str = "nearest") -> FibreAngleField:
    """Random fibre-orientation field; control offsets drawn N(0, 0.09)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ys = rng.normal(0.0, CONTROL_Y_STD, size=N_CONTROL_POINTS)
    return fibre_field_from_controls(ys, n, projection=projection)


def tensor_from(scar: ScarMap | None, fibre: FibreAngleField | None,
                aniso: AnisotropyParams | None = None) -> DiffusionTensorField:
    """Assemble D = R(alpha) diag(d_l, d_t) R(alpha)^T per cell, d_t = d_l/lambda.

    With no fibre field the result is isotropic (alpha = 0, lambda = 1); with
    no scar map the longitudinal diffusivity is homogeneous. A scar map sets
    d_l to d_scar inside the mask and d_healthy outside.
    """
    if scar is None and fibre is None:
        raise ConfigError("tensor_from needs at least one of scar/fibre")
    aniso = aniso or AnisotropyParams()

    if scar is not None and fibre is not None and scar.mask.shape != fibre.alpha.shape:
        raise ConfigError(
            f"scar {scar.mask.shape} and fibre {fibre.alpha.shape} shapes disagree"
        )
    shape = scar.mask.shape if scar is not None else fibre.alpha.shape

    if scar is not None:
        d_l = scar.diffusivity().astype(np.float64)
    else:
        d_l = np.broadcast_to(np.asarray(aniso.d_l, dtype=np.float64), shape).copy()
    if np.any(d_l <= 0):
        raise ConfigError("longitudinal diffusivity must be positive")

    if fibre is not None:
        alpha = np.radians(fibre.alpha)
        lam = np.broadcast_to(np.asarray(aniso.lam, dtype=np.float64), shape)
    else:
        alpha = np.zeros(shape)
        lam = np.ones(shape)

    d_t = d_l / lam
    c, s = np.cos(alpha), np.sin(alpha)
    d_xx = d_l * c**2 + d_t * s**2
    d_yy = d_l * s**2 + d_t * c**2
    d_xy = (d_l - d_t) * s * c
    if fibre is None:
        # exact isotropy, not merely cos/sin roundoff away from it
        d_xy = np.zeros(shape)
        d_yy = d_xx.copy()
    return DiffusionTensorField(d_xx=d_xx, d_yy=d_yy, d_xy=d_xy)


def _overlap_weights(n: int, m: int) -> np.ndarray:
    """Row-stochastic (m, n) matrix of interval overlaps for area-weighted averaging."""
    fine_edges = np.arange(n + 1) / n
    coarse_edges = np.arange(m + 1) / m
    lo = np.maximum(coarse_edges[:-1, None], fine_edges[None, :-1])
    hi = np.minimum(coarse_edges[1:, None], fine_edges[None, 1:])
    w = np.clip(hi - lo, 0.0, None)
    return w / w.sum(axis=1, keepdims=True)


def resample_tensor_field(f: DiffusionTensorField, m: int) -> DiffusionTensorField:
    """Block-average the field down to m x m, preserving extent and SPD-ness.

    When m divides n this is plain block averaging; otherwise cells are
    combined with area weights. Either way each coarse tensor is a convex
    combination of fine SPD tensors, hence SPD.
    """
    n = f.n
    if m > n:
        raise ConfigError(f"resample target {m} exceeds source size {n}")
    if m == n:
        return DiffusionTensorField(f.d_xx.copy(), f.d_yy.copy(), f.d_xy.copy(), dx=f.dx)
    w = _overlap_weights(n, m)
    out = [w @ comp @ w.T for comp in (f.d_xx, f.d_yy, f.d_xy)]
    return DiffusionTensorField(*out, dx=f.dx * n / m)


def scar_cfg_to_dict(cfg: ScarCfg) -> dict:
    d = asdict(cfg)
    d["count_range"] = list(cfg.count_range)
    d["radius_range"] = list(cfg.radius_range)
    d["fraction_bounds"] = list(cfg.fraction_bounds)
    return d
