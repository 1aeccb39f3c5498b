"""Cell-free massive MIMO downlink precoding toolkit.

Computes the max-min-SINR optimal linear precoder by bisection over
second-order-cone feasibility programs, zero-forcing and maximum-ratio
baselines, and a small graph-transformer network that approximates the
optimal precoder from channel features; plus portable dataset / weights
formats and a command-line harness for generation, evaluation and
benchmarking.
"""

from .baselines import maximum_ratio, maximum_ratio_result, zero_forcing
from .channel_sim import (
    EnvironmentKind,
    EnvironmentSpec,
    FastFading,
    Scenario,
    default_rho_d,
    draw_fast_fading,
    environment_preset,
    fraction_in_window,
    generate_scenario,
    large_scale_gain,
    place_uniform_disc,
)
from .dataset_io import (
    ChecksumMismatchError,
    DatasetIOError,
    DatasetManifest,
    FormatVersionError,
    MissingParameterError,
    SampleRecord,
    SampleValidationError,
    TruncatedDatasetError,
    WeightsArtifact,
    WeightShapeError,
    read_dataset,
    read_weights,
    record_channel,
    validate_record,
    write_dataset,
    write_weights,
)
from .gnn_inference import (
    GnnConfig,
    GnnWeights,
    apply_network,
    attention_coefficients,
    count_parameters,
    expected_parameter_shapes,
    forward,
    layer_forward,
    random_weights,
    weights_from_params,
    weights_to_params,
)
from .graph_builder import (
    CfGraph,
    FeatureStats,
    build_graph,
    deprocess_and_postprocess,
    deprocess_features,
    input_features,
    input_features_raw,
    node_index,
    permute_graph,
    target_features,
    target_features_raw,
)
from .metrics import MetricsReport, PrecoderMetrics, build_report, cdf_rows, pooled_quantile
from .olp_socp import (
    BisectionResult,
    FeasibilityProblem,
    FeasibilityVerdict,
    OlpSolverError,
    SolverConfig,
    SolverStatus,
    constraint_residual,
    decompose_precoder,
    sinr_upper_bound,
    socp_feasible,
    solve_olp,
)
from .system_model import (
    ChannelMatrix,
    EffectiveChannel,
    Precoder,
    RankDeficientChannelError,
    SystemConfig,
    UserMetrics,
    effective_channel,
    min_sinr,
    null_projector,
    project_power,
    pseudo_inverse,
    sinr,
)
from .tolerances import TOL, Tolerances

__version__ = "0.1.0"
