"""CoordConv encoder-decoder mapping electrogram stacks to tensor fields.

The network is fully convolutional: an input of (N+2) channels (N time
points plus two normalized electrode-coordinate channels) at any H x W is
encoded through feature depths 60/120/240, decoded through 120/60/30/15 with
transposed convolutions plus a final bilinear upsampling to 96 x 96, and
projected to 5 output channels: the three tensor components d_xx, d_yy, d_xy
and two coordinate channels. The first layer is a CoordConv by virtue of the
coordinate input channels; the last layer concatenates a fixed 96 x 96
coordinate grid before the output convolution. Batch norm + ReLU follow
every hidden convolution; the output convolution is bare.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

OUTPUT_SIZE = 96


@dataclass(frozen=True)
class ModelSpec:
    encoder_depths: tuple[int, ...] = (60, 120, 240)
    decoder_depths: tuple[int, ...] = (120, 60, 30, 15)
    output_size: int = OUTPUT_SIZE
    coordconv: bool = True  # False drops coordinate channels at both ends

    @property
    def in_extra(self) -> int:
        return 2 if self.coordconv else 0

    @property
    def out_channels(self) -> int:
        return 5 if self.coordconv else 3


def coordinate_grid(size: int) -> torch.Tensor:
    """(1, 2, size, size) tensor of normalized x/y positions in [0, 1]."""
    axis = torch.linspace(0.0, 1.0, size)
    yy, xx = torch.meshgrid(axis, axis, indexing="ij")
    return torch.stack([xx, yy]).unsqueeze(0)


def _block(conv: nn.Module, depth: int) -> nn.Sequential:
    return nn.Sequential(conv, nn.BatchNorm2d(depth), nn.ReLU(inplace=True))


class CoordConvEncoderDecoder(nn.Module):
    def __init__(self, spec: ModelSpec, n_time_points: int):
        super().__init__()
        if n_time_points < 1:
            raise ValueError("need at least one time-point channel")
        self.spec = spec
        self.n_time_points = n_time_points
        e1, e2, e3 = spec.encoder_depths
        d1, d2, d3, d4 = spec.decoder_depths
        in_ch = n_time_points + spec.in_extra

        self.encoder = nn.Sequential(
            _block(nn.Conv2d(in_ch, e1, 3, stride=2, padding=1), e1),
            _block(nn.Conv2d(e1, e2, 3, stride=2, padding=1), e2),
            _block(nn.Conv2d(e2, e3, 3, stride=1, padding=1), e3),
        )
        self.decoder = nn.Sequential(
            _block(nn.ConvTranspose2d(e3, d1, 4, stride=2, padding=1), d1),
            _block(nn.ConvTranspose2d(d1, d2, 4, stride=2, padding=1), d2),
            _block(nn.ConvTranspose2d(d2, d3, 4, stride=2, padding=1), d3),
            nn.Upsample(size=(spec.output_size, spec.output_size),
                        mode="bilinear", align_corners=False),
            _block(nn.Conv2d(d3, d4, 3, padding=1), d4),
        )
        out_in = d4 + (2 if spec.coordconv else 0)
        self.head = nn.Conv2d(out_in, spec.out_channels, 3, padding=1)
        if spec.coordconv:
            self.register_buffer("out_coords", coordinate_grid(spec.output_size))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.decoder(self.encoder(x))
        if self.spec.coordconv:
            coords = self.out_coords.expand(h.shape[0], -1, -1, -1)
            h = torch.cat([h, coords], dim=1)
        return self.head(h)


def build_model(spec: ModelSpec, n_time_points: int) -> CoordConvEncoderDecoder:
    return CoordConvEncoderDecoder(spec, n_time_points)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
