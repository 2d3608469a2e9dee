"""Synthetic cardiac electrophysiology toolkit.

Generates randomized conductivity substrates, simulates action-potential
propagation with a three-variable monodomain model, records unipolar contact
electrograms on a virtual electrode grid, packages supervised datasets, and
statistically evaluates inverse-model predictions of the diffusion tensor
field (RMSE, Jaccard, wavelet surrogate testing).
"""

from .dataset import (DatasetReader, Sample, SampleSpec, SimRecord, add_noise,
                      build_dataset, coordinate_channels, count_samples,
                      extract_samples, noise_seed, normalize)
from .dtcwt import WaveletPyramid, dtcwt_forward, dtcwt_inverse
from .electrogram import EgmArray, EgmRecorder, ElectrodeGrid, phi_e_at, record_grid
from .errors import (ConfigError, EgmlabError, GenerationError,
                     NumericalInstabilityError, StaleArtifactError)
from .presets import PRESETS, Preset, get_preset
from .solver import (DiffusionOperator, FkParams, RunSummary, SimConfig, SimState,
                     StimulusProtocol, default_fk_params, diffusion_term,
                     ionic_currents, reaction_rates, rest_state, run, step, to_vm)
from .stats import (SurrogateTestResult, aggregate_surrogate_results, jaccard,
                    make_surrogate, rmse, scar_mask, surrogate_test)
from .substrate import (AnisotropyParams, DiffusionTensorField, FibreAngleField,
                        ScarCfg, ScarMap, fibre_field_from_controls,
                        gen_fibre_field, gen_scar_map, resample_tensor_field,
                        tensor_from)

__version__ = "0.1.0"
