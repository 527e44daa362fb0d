"""Sequential recommendation with a learnable discrete-wavelet time-frequency filter."""
from .wavelets import (
    SUPPORTED_WAVELETS,
    CoeffPyramid,
    FilterBank,
    coeff_lengths,
    dwt_single,
    load_filter_bank,
    mwd,
    mwd_matrix,
    reconstruct,
    reconstruct_matrix,
)
from .model import ModelConfig, init_params, model_backward, model_forward, param_count
from .training import TrainConfig, train

__version__ = "0.1.0"
