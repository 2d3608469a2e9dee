"""Named pipeline geometries.

``paper`` matches the full-scale setup (12 cm domain at dx = 0.01 cm, 1 s
pacing at 150 ms period, 29 x 29 electrodes at 4 mm spacing, 1 kHz sampling).
``desk`` is a scaled-down configuration that keeps the same physics and cell
size on a 3 cm domain so the whole pipeline runs in minutes; ``mini`` is a
sub-centimeter smoke-test geometry for CI. The electrode integral for the
paper grid is evaluated on a block-averaged field (coarsen=4) to keep the
precomputed kernels in memory; desk/mini integrate at full resolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, asdict

from .dataset import SampleSpec
from .errors import ConfigError


@dataclass(frozen=True)
class Preset:
    name: str
    grid_n: int
    dx: float
    dt: float
    duration: float          # ms; also the EGM recording length L
    stim_region: tuple[float, float, float, float]
    rows: int
    cols: int
    spacing: float
    z: float = 0.1
    record_every: float = 1.0
    stim_period: float = 150.0
    stim_width: float = 2.0
    stim_amplitude: float = 0.3
    sigma_e: float = 20.0
    egm_coarsen: int = 1
    sample: SampleSpec = dc_field(default_factory=SampleSpec)
    folds: int = 10
    target_size: int = 96

    @property
    def domain_cm(self) -> float:
        return self.grid_n * self.dx

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stim_region"] = list(self.stim_region)
        return d


PRESETS = {
    "paper": Preset(
        name="paper",
        grid_n=1200,
        dx=0.01,
        dt=0.01,
        duration=1000.0,
        stim_region=(0.0, 0.0, 1.0, 1.0),
        rows=29,
        cols=29,
        spacing=0.4,
        egm_coarsen=4,
        sample=SampleSpec(n_points=10, stride=5, hop=25, length=1000),
        folds=10,
    ),
    "desk": Preset(
        name="desk",
        grid_n=300,
        dx=0.01,
        dt=0.01,
        duration=200.0,
        stim_region=(0.0, 0.0, 0.25, 0.25),
        rows=15,
        cols=15,
        spacing=0.2,
        sample=SampleSpec(n_points=10, stride=5, hop=25, length=200),
        folds=10,
    ),
    "mini": Preset(
        name="mini",
        grid_n=80,
        dx=0.01,
        dt=0.01,
        duration=60.0,
        stim_region=(0.0, 0.0, 0.12, 0.12),
        rows=8,
        cols=8,
        spacing=0.08,
        sample=SampleSpec(n_points=5, stride=2, hop=10, length=60),
        folds=2,
        target_size=32,
    ),
}


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]


def preset_from_dict(doc: dict) -> Preset:
    doc = dict(doc)
    doc["sample"] = SampleSpec(**doc["sample"])
    doc["stim_region"] = tuple(doc["stim_region"])
    try:
        return Preset(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad preset document: {exc}") from None
