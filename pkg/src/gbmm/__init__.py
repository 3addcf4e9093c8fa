"""Beamspace index modulation with multiplexing for mmWave MIMO.

The package covers the full pipeline: clustered channel generation, beamspace
precoder families, exact and bounded spectral-efficiency metrics, a barrier
ascent for the lower bound, a closed-form high-SNR design, hybrid
factorizations, a codebook partitioner, and reproducible experiment runners.
"""

from .ascent import BarrierConfig
from .ascent import optimize as optimize_lower_bound
from .channel import (
    ArrayGeometry,
    ChannelConfig,
    ChannelDecomposition,
    ChannelRealization,
    PathParameter,
    assemble_channel,
    decompose,
    generate_channel,
    sample_paths,
    steering_vector,
)
from .closed_form import activation_distribution
from .closed_form import optimize as optimize_upper_bound
from .closed_form import water_fill
from .codec import build_partition, codec_report, encode
from .config import ExperimentConfig, load_config
from .family import (
    PrecoderFamily,
    build_precoder,
    enumerate_selections,
    normalize_family_power,
    per_precoder_capacity,
    prune_family,
    receive_covariance,
    validate_family,
)
from .metrics import (
    Mixture,
    SeEstimate,
    exact_se_monte_carlo,
    lower_bound,
    lower_bound_plus_gap,
    pairwise_log_z,
    se_fixed_precoder,
    upper_bound,
    wf_capacity,
)

__version__ = "0.1.0"
