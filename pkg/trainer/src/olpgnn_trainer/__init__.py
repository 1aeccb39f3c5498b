"""Supervised trainer for the precoder network.

Learns to map channel features to near-optimal max-min-SINR precoders
from solver-labeled datasets, and exports weights in the toolkit's
portable artifact format.  Interacts with the inference toolkit only
through its documented file formats and command line.
"""

from .formats import (
    Dataset,
    FormatError,
    Sample,
    expected_parameter_shapes,
    read_dataset,
    read_weights,
    write_weights,
)
from .gradcheck import CoordinateCheck, GradCheckReport, finite_difference_check
from .graphdata import (
    FeatureStats,
    GraphBatch,
    build_edges,
    input_features_raw,
    neighbor_tables,
    sinr_db,
    split_precoder,
    target_features_raw,
)
from .loss import batch_loss, postprocess, sinr_db_loss, sinr_db_torch
from .model import DEFAULT_CONFIG, PrecoderGnn
from .training import PRESETS, LossRecord, TrainConfig, TrainResult, train

__version__ = "0.1.0"
