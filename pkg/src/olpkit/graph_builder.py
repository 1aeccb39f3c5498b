"""Heterogeneous AP/UE link graph and feature pre/postprocessing.

Every channel coefficient (AP ``m``, UE ``k``) becomes one graph node,
indexed row-major as ``m * K + k``.  Two nodes are connected iff they share
an AP (same row, "AP"-type edge) or a UE (same column, "UE"-type edge), so
each node has exactly ``K - 1`` AP-neighbors and ``M - 1`` UE-neighbors.

Features live in the log-magnitude / phase domain: magnitudes are clamped
at ``2**-60`` and log2-transformed (phases of clamped entries are defined
as 0), phases use the [0, 2*pi) convention, and all features are
standardized to zero mean and unit variance (population statistics, fixed
on the training set and frozen into the weights artifact).  This module is
the single normative definition of those conventions; any training-side
code must mirror it exactly (see docs/CONVENTIONS.md).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .olp_socp import decompose_precoder
from .system_model import ChannelMatrix, Precoder, project_power
from .tolerances import TOL

__all__ = [
    "CfGraph",
    "FeatureStats",
    "node_index",
    "build_graph",
    "log_mag_phase",
    "input_features_raw",
    "input_features",
    "target_features_raw",
    "target_features",
    "deprocess_features",
    "deprocess_and_postprocess",
    "permute_graph",
]

#: Normative feature layouts (see docs/CONVENTIONS.md): inputs are
#: (log2|g|, phase(g), log2|pinv|, phase(pinv)) per node, outputs are
#: (log2 magnitude, phase) of the signal, interference and null-space
#: precoder components, in that order.
NUM_INPUT_FEATURES = 4
NUM_OUTPUT_FEATURES = 6

#: Ceiling on decoded log2 magnitudes: far above any legitimate precoder
#: component (entries are O(1)) but low enough that squared row norms
#: cannot overflow, so even adversarial raw outputs postprocess to a
#: finite feasible precoder.
LOG_MAG_CEIL = 256.0


def node_index(m: int, k: int, num_ues: int) -> int:
    """Row-major node id of the (AP m, UE k) pair."""
    return m * num_ues + k


@dataclass(frozen=True)
class CfGraph:
    """Link graph: typed directed edge lists plus optional node features.

    Edge lists are ``(E, 2)`` integer arrays of (source, target) pairs in
    lexicographic order.  Both directions of every edge are present.
    """

    num_aps: int
    num_ues: int
    edges_ap: np.ndarray
    edges_ue: np.ndarray
    node_features: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return self.num_aps * self.num_ues

    @property
    def num_edges(self) -> int:
        return self.edges_ap.shape[0] + self.edges_ue.shape[0]

    def with_features(self, features: np.ndarray) -> "CfGraph":
        if features.shape[0] != self.num_nodes:
            raise ValueError(
                f"features have {features.shape[0]} rows, graph has {self.num_nodes} nodes"
            )
        return CfGraph(self.num_aps, self.num_ues, self.edges_ap, self.edges_ue, features)


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature standardization statistics in the log/phase domain.

    Means and (population) standard deviations for the 4 input and 6
    output features.  Computed once over a training set and stored with
    the network weights; inference never recomputes them.
    """

    input_mean: np.ndarray
    input_std: np.ndarray
    output_mean: np.ndarray
    output_std: np.ndarray

    def __post_init__(self) -> None:
        for name, arr, size in (
            ("input_mean", self.input_mean, NUM_INPUT_FEATURES),
            ("input_std", self.input_std, NUM_INPUT_FEATURES),
            ("output_mean", self.output_mean, NUM_OUTPUT_FEATURES),
            ("output_std", self.output_std, NUM_OUTPUT_FEATURES),
        ):
            arr = np.asarray(arr, dtype=np.float64).reshape(size)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.input_std <= 0) or np.any(self.output_std <= 0):
            raise ValueError("feature standard deviations must be strictly positive")

    @classmethod
    def identity(cls) -> "FeatureStats":
        """No-op statistics (zero means, unit deviations)."""
        return cls(
            np.zeros(NUM_INPUT_FEATURES),
            np.ones(NUM_INPUT_FEATURES),
            np.zeros(NUM_OUTPUT_FEATURES),
            np.ones(NUM_OUTPUT_FEATURES),
        )

    @classmethod
    def from_features(cls, input_features: np.ndarray, output_features: np.ndarray) -> "FeatureStats":
        """Statistics of pooled raw (unstandardized) feature rows."""
        return cls(
            input_features.mean(axis=0),
            input_features.std(axis=0),
            output_features.mean(axis=0),
            output_features.std(axis=0),
        )


def build_graph(num_aps: int, num_ues: int) -> CfGraph:
    """Construct the link-graph topology for an ``M x K`` system.

    Produces ``M*K*(K-1)`` AP-type and ``M*K*(M-1)`` UE-type directed
    edges, no self loops, each list sorted lexicographically by
    (source, target).
    """
    if num_aps < 1 or num_ues < 1:
        raise ValueError("num_aps and num_ues must be >= 1")
    m, k = num_aps, num_ues
    nodes = np.arange(m * k, dtype=np.int64).reshape(m, k)

    # AP-type: (m, k) -> (m, k') for every k' != k
    src = np.broadcast_to(nodes[:, :, None], (m, k, k))
    dst = np.broadcast_to(nodes[:, None, :], (m, k, k))
    keep = ~np.eye(k, dtype=bool)
    edges_ap = np.stack([src[:, keep], dst[:, keep]], axis=-1).reshape(-1, 2)

    # UE-type: (m, k) -> (m', k) for every m' != m
    src = np.broadcast_to(nodes[:, :, None], (m, k, m))
    dst = np.broadcast_to(nodes.T[None, :, :], (m, k, m))
    keep = np.broadcast_to(~np.eye(m, dtype=bool)[:, None, :], (m, k, m))
    edges_ue = np.stack([src[keep], dst[keep]], axis=-1).reshape(-1, 2)

    return CfGraph(m, k, edges_ap, edges_ue)


def log_mag_phase(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clamped log2 magnitude and [0, 2*pi) phase of a complex array.

    Entries with magnitude below the clamp get log-magnitude
    ``log2(clamp)`` and phase 0.
    """
    mags = np.abs(values)
    clamped = mags < TOL.mag_clamp
    log_mag = np.log2(np.maximum(mags, TOL.mag_clamp))
    phase = np.angle(values)
    phase = np.where(phase < 0, phase + 2.0 * np.pi, phase)
    phase = np.where(clamped, 0.0, phase)
    return log_mag, phase


def input_features_raw(channel: ChannelMatrix) -> np.ndarray:
    """Unstandardized ``(M*K, 4)`` node inputs.

    Node ``(m, k)`` carries the log-magnitude and phase of the channel
    entry ``g[m, k]`` and of the pseudo-inverse entry ``pinv[m, k]``.
    """
    lm_g, ph_g = log_mag_phase(channel.entries)
    lm_p, ph_p = log_mag_phase(channel.pinv)
    return np.stack([lm_g.ravel(), ph_g.ravel(), lm_p.ravel(), ph_p.ravel()], axis=1)


def input_features(channel: ChannelMatrix, stats: FeatureStats) -> np.ndarray:
    """Standardized network inputs, ``(M*K, 4)``."""
    return (input_features_raw(channel) - stats.input_mean) / stats.input_std


def target_features_raw(channel: ChannelMatrix, precoder: Precoder) -> np.ndarray:
    """Unstandardized ``(M*K, 6)`` regression targets.

    The precoder is split into its signal, interference and null-space
    components; each contributes a (log2 magnitude, phase) pair per node.
    """
    parts = decompose_precoder(channel, precoder)
    columns = []
    for part in parts:
        log_mag, phase = log_mag_phase(part)
        columns.append(log_mag.ravel())
        columns.append(phase.ravel())
    return np.stack(columns, axis=1)


def target_features(channel: ChannelMatrix, precoder: Precoder, stats: FeatureStats) -> np.ndarray:
    """Standardized regression targets, ``(M*K, 6)``."""
    return (target_features_raw(channel, precoder) - stats.output_mean) / stats.output_std


def deprocess_features(
    raw_output: np.ndarray, stats: FeatureStats, num_aps: int, num_ues: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Invert standardization and the log/phase transform.

    Returns the three complex ``(M, K)`` precoder components encoded in a
    ``(M*K, 6)`` network output.
    """
    if raw_output.shape != (num_aps * num_ues, NUM_OUTPUT_FEATURES):
        raise ValueError(
            f"raw output has shape {raw_output.shape}, expected"
            f" ({num_aps * num_ues}, {NUM_OUTPUT_FEATURES})"
        )
    values = raw_output * stats.output_std + stats.output_mean
    parts = []
    for j in range(3):
        mags = np.exp2(np.minimum(values[:, 2 * j], LOG_MAG_CEIL))
        phases = values[:, 2 * j + 1]
        parts.append((mags * np.exp(1j * phases)).reshape(num_aps, num_ues))
    return parts[0], parts[1], parts[2]


def deprocess_and_postprocess(
    channel: ChannelMatrix, raw_output: np.ndarray, stats: FeatureStats
) -> Precoder:
    """Turn a raw network output into a feasible precoder.

    After inverting the feature transform, two algebraic corrections are
    applied: the signal component is replaced by ``pinv @ D`` with ``D``
    the real part of the diagonal it induces (so its effective channel is
    exactly real diagonal), and the interference component is replaced by
    ``pinv @ offdiag(...)`` (so it induces exactly zero diagonal).  The
    per-AP power constraint is then enforced by row-norm projection.
    """
    y1, y2, y3 = deprocess_features(raw_output, stats, channel.num_aps, channel.num_ues)
    gt = channel.entries.T
    pinv = channel.pinv
    signal_diag = np.real(np.diag(gt @ y1))
    y1p = pinv * signal_diag[None, :]
    b = gt @ y2
    y2p = pinv @ (b - np.diag(np.diag(b)))
    return project_power(Precoder(y1p + y2p + y3))


def permute_graph(graph: CfGraph, row_perm, col_perm) -> CfGraph:
    """Relabel APs and UEs: node ``(m, k)`` becomes ``(row_perm[m], col_perm[k])``.

    Edge lists are relabeled and re-sorted into canonical (lexicographic)
    order; features follow their nodes.  The result is isomorphic to (in
    fact, identical in topology to) the freshly built graph.
    """
    row_perm = np.asarray(row_perm, dtype=np.int64)
    col_perm = np.asarray(col_perm, dtype=np.int64)
    m, k = graph.num_aps, graph.num_ues
    if sorted(row_perm.tolist()) != list(range(m)) or sorted(col_perm.tolist()) != list(range(k)):
        raise ValueError("row_perm and col_perm must be permutations of range(M) / range(K)")
    new_of_old = (row_perm[:, None] * k + col_perm[None, :]).reshape(-1)

    def relabel(edges: np.ndarray) -> np.ndarray:
        if edges.size == 0:
            return edges
        mapped = new_of_old[edges]
        order = np.lexsort((mapped[:, 1], mapped[:, 0]))
        return mapped[order]

    features = None
    if graph.node_features is not None:
        features = np.empty_like(graph.node_features)
        features[new_of_old] = graph.node_features
    return CfGraph(m, k, relabel(graph.edges_ap), relabel(graph.edges_ue), features)
