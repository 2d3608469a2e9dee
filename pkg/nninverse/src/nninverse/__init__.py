"""Inverse model: CoordConv encoder-decoder from electrograms to tensor fields."""

from .data import EgmDataset, SampleInput, noise_seed, save_field
from .model import (CoordConvEncoderDecoder, ModelSpec, build_model,
                    coordinate_grid, parameter_count)
from .train import (TrainConfig, cross_validate, evaluate_rmse, predict_field,
                    rmse_loss, train)

__version__ = "0.1.0"
