"""Forward pass of the graph-transformer precoder network.

The network runs a fixed number of attention layers over the AP/UE link
graph.  Each layer applies, per edge type, a self map plus an
attention-weighted sum of neighbor messages; the two edge-type results are
added, passed through ReLU and layer-normalized.  A final linear map
produces the 6 output features per node that postprocessing turns into a
feasible precoder.  A single attention head is used per edge type.

Weights are plain numpy arrays (float64) grouped per layer and edge type;
they are immutable after construction and shareable across threads.
Neighbor aggregation uses a fixed (lexicographic) neighbor order so
forward passes are bit-stable on one platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph_builder import (
    NUM_INPUT_FEATURES,
    NUM_OUTPUT_FEATURES,
    CfGraph,
    FeatureStats,
    build_graph,
    deprocess_and_postprocess,
    input_features,
)
from .system_model import ChannelMatrix, Precoder

__all__ = [
    "GnnConfig",
    "EdgeTypeWeights",
    "LayerWeights",
    "GnnWeights",
    "expected_parameter_shapes",
    "count_parameters",
    "weights_from_params",
    "weights_to_params",
    "random_weights",
    "attention_coefficients",
    "layer_forward",
    "apply_network",
    "forward",
]

EDGE_TYPES = ("ap", "ue")


@dataclass(frozen=True)
class GnnConfig:
    """Architecture hyperparameters.

    The default width of 22 puts the trainable parameter count (which is
    dominated by ``40 * hidden_dim**2``) near 21k.
    """

    num_layers: int = 6
    hidden_dim: int = 22
    in_dim: int = NUM_INPUT_FEATURES
    out_dim: int = NUM_OUTPUT_FEATURES
    edge_types: tuple[str, ...] = EDGE_TYPES
    layer_norm_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be >= 1")
        if tuple(self.edge_types) != EDGE_TYPES:
            raise ValueError(f"edge_types must be {EDGE_TYPES}")

    def layer_in_dim(self, layer: int) -> int:
        return self.in_dim if layer == 0 else self.hidden_dim

    def to_json_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "hidden_dim": self.hidden_dim,
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "edge_types": list(self.edge_types),
            "layer_norm_eps": self.layer_norm_eps,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GnnConfig":
        return cls(
            num_layers=int(data["num_layers"]),
            hidden_dim=int(data["hidden_dim"]),
            in_dim=int(data["in_dim"]),
            out_dim=int(data["out_dim"]),
            edge_types=tuple(data["edge_types"]),
            layer_norm_eps=float(data["layer_norm_eps"]),
        )


@dataclass(frozen=True)
class EdgeTypeWeights:
    """Four linear maps of one (layer, edge type) pair.

    ``l1`` (self) and ``l2`` (message) carry biases; the attention query
    ``l3`` and key ``l4`` do not, since a shared bias shifts all logits of
    a node equally and cancels in the softmax.
    """

    l1_weight: np.ndarray
    l1_bias: np.ndarray
    l2_weight: np.ndarray
    l2_bias: np.ndarray
    l3_weight: np.ndarray
    l4_weight: np.ndarray


@dataclass(frozen=True)
class LayerWeights:
    ap: EdgeTypeWeights
    ue: EdgeTypeWeights
    norm_gain: np.ndarray
    norm_offset: np.ndarray


@dataclass(frozen=True)
class GnnWeights:
    """All parameters of the network plus the frozen feature statistics."""

    config: GnnConfig
    layers: tuple[LayerWeights, ...]
    final_weight: np.ndarray
    final_bias: np.ndarray
    feature_stats: FeatureStats = field(default_factory=FeatureStats.identity)


def expected_parameter_shapes(config: GnnConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter names and shapes, in canonical order."""
    d = config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(config.num_layers):
        din = config.layer_in_dim(layer)
        for et in config.edge_types:
            prefix = f"layers.{layer}.{et}"
            shapes[f"{prefix}.l1.weight"] = (d, din)
            shapes[f"{prefix}.l1.bias"] = (d,)
            shapes[f"{prefix}.l2.weight"] = (d, din)
            shapes[f"{prefix}.l2.bias"] = (d,)
            shapes[f"{prefix}.l3.weight"] = (d, din)
            shapes[f"{prefix}.l4.weight"] = (d, din)
        shapes[f"layers.{layer}.norm.gain"] = (d,)
        shapes[f"layers.{layer}.norm.offset"] = (d,)
    shapes["final.weight"] = (config.out_dim, d)
    shapes["final.bias"] = (config.out_dim,)
    return shapes


def count_parameters(config: GnnConfig) -> int:
    """Exact number of trainable scalars (feature statistics excluded)."""
    return sum(int(np.prod(shape)) for shape in expected_parameter_shapes(config).values())


def _freeze(arr: np.ndarray, name: str, shape: tuple[int, ...]) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    if out.shape != shape:
        raise ValueError(f"parameter '{name}' has shape {out.shape}, expected {shape}")
    out.setflags(write=False)
    return out


def weights_from_params(
    config: GnnConfig, params: dict[str, np.ndarray], feature_stats: FeatureStats | None = None
) -> GnnWeights:
    """Assemble :class:`GnnWeights` from a flat name -> array mapping.

    Raises ``ValueError`` naming the first missing or wrongly shaped
    parameter (in canonical order), or any unexpected extra name.
    """
    expected = expected_parameter_shapes(config)
    for name, shape in expected.items():
        if name not in params:
            raise ValueError(f"missing parameter '{name}'")
        _freeze(params[name], name, shape)
    extras = sorted(set(params) - set(expected))
    if extras:
        raise ValueError(f"unexpected parameter '{extras[0]}'")

    def edge(layer: int, et: str) -> EdgeTypeWeights:
        p = f"layers.{layer}.{et}"
        din = config.layer_in_dim(layer)
        d = config.hidden_dim
        return EdgeTypeWeights(
            l1_weight=_freeze(params[f"{p}.l1.weight"], f"{p}.l1.weight", (d, din)),
            l1_bias=_freeze(params[f"{p}.l1.bias"], f"{p}.l1.bias", (d,)),
            l2_weight=_freeze(params[f"{p}.l2.weight"], f"{p}.l2.weight", (d, din)),
            l2_bias=_freeze(params[f"{p}.l2.bias"], f"{p}.l2.bias", (d,)),
            l3_weight=_freeze(params[f"{p}.l3.weight"], f"{p}.l3.weight", (d, din)),
            l4_weight=_freeze(params[f"{p}.l4.weight"], f"{p}.l4.weight", (d, din)),
        )

    layers = tuple(
        LayerWeights(
            ap=edge(t, "ap"),
            ue=edge(t, "ue"),
            norm_gain=_freeze(params[f"layers.{t}.norm.gain"], f"layers.{t}.norm.gain", (config.hidden_dim,)),
            norm_offset=_freeze(
                params[f"layers.{t}.norm.offset"], f"layers.{t}.norm.offset", (config.hidden_dim,)
            ),
        )
        for t in range(config.num_layers)
    )
    return GnnWeights(
        config=config,
        layers=layers,
        final_weight=_freeze(params["final.weight"], "final.weight", (config.out_dim, config.hidden_dim)),
        final_bias=_freeze(params["final.bias"], "final.bias", (config.out_dim,)),
        feature_stats=feature_stats if feature_stats is not None else FeatureStats.identity(),
    )


def weights_to_params(weights: GnnWeights) -> dict[str, np.ndarray]:
    """Flatten :class:`GnnWeights` into the canonical name -> array mapping."""
    params: dict[str, np.ndarray] = {}
    for t, layer in enumerate(weights.layers):
        for et in weights.config.edge_types:
            etw: EdgeTypeWeights = getattr(layer, et)
            p = f"layers.{t}.{et}"
            params[f"{p}.l1.weight"] = etw.l1_weight
            params[f"{p}.l1.bias"] = etw.l1_bias
            params[f"{p}.l2.weight"] = etw.l2_weight
            params[f"{p}.l2.bias"] = etw.l2_bias
            params[f"{p}.l3.weight"] = etw.l3_weight
            params[f"{p}.l4.weight"] = etw.l4_weight
        params[f"layers.{t}.norm.gain"] = layer.norm_gain
        params[f"layers.{t}.norm.offset"] = layer.norm_offset
    params["final.weight"] = weights.final_weight
    params["final.bias"] = weights.final_bias
    return params


def random_weights(
    config: GnnConfig = GnnConfig(),
    rng: np.random.Generator | None = None,
    feature_stats: FeatureStats | None = None,
) -> GnnWeights:
    """Glorot-initialized weights (norm gains 1, offsets and biases 0)."""
    if rng is None:
        rng = np.random.default_rng()
    params: dict[str, np.ndarray] = {}
    for name, shape in expected_parameter_shapes(config).items():
        if name.endswith(".bias") or name.endswith("norm.offset"):
            params[name] = np.zeros(shape)
        elif name.endswith("norm.gain"):
            params[name] = np.ones(shape)
        else:
            scale = math.sqrt(2.0 / (shape[0] + shape[1]))
            params[name] = rng.normal(0.0, scale, size=shape)
    return weights_from_params(config, params, feature_stats)


def _neighbor_table(graph: CfGraph, edge_type: str) -> np.ndarray:
    """Neighbor ids as an ``(N, degree)`` array.

    Degrees are uniform (``K - 1`` for AP edges, ``M - 1`` for UE edges)
    and edge lists are sorted by source, so the target column reshapes
    directly; this fixes a deterministic aggregation order per node.
    """
    edges = graph.edges_ap if edge_type == "ap" else graph.edges_ue
    n = graph.num_nodes
    if edges.shape[0] == 0:
        return np.empty((n, 0), dtype=np.int64)
    degree = edges.shape[0] // n
    return edges[:, 1].reshape(n, degree)


def _attention_matrix(
    etw: EdgeTypeWeights, neighbors: np.ndarray, h: np.ndarray, scale: float
) -> np.ndarray:
    """Softmax attention over each node's neighbors, shape ``(N, degree)``."""
    queries = h @ etw.l3_weight.T
    keys = h @ etw.l4_weight.T
    logits = np.einsum("nd,njd->nj", queries, keys[neighbors]) / scale
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def attention_coefficients(
    weights: GnnWeights, layer: int, edge_type: str, graph: CfGraph, h: np.ndarray
) -> np.ndarray:
    """Per-edge attention coefficients, aligned with the edge-list order.

    For every node with a nonempty neighborhood the coefficients are
    nonnegative and sum to 1 over its neighbors.
    """
    etw: EdgeTypeWeights = getattr(weights.layers[layer], edge_type)
    neighbors = _neighbor_table(graph, edge_type)
    if neighbors.shape[1] == 0:
        return np.empty(0)
    scale = math.sqrt(etw.l3_weight.shape[0])
    return _attention_matrix(etw, neighbors, h, scale).ravel()


def layer_forward(weights: GnnWeights, layer: int, graph: CfGraph, h: np.ndarray) -> np.ndarray:
    """One attention layer: per-type self + attention-aggregated messages,
    summed over edge types, then ReLU and layer normalization.

    Empty neighborhoods (single-AP or single-UE systems) contribute zero
    to the aggregation term.
    """
    lw = weights.layers[layer]
    total = np.zeros((graph.num_nodes, weights.config.hidden_dim))
    for edge_type in weights.config.edge_types:
        etw: EdgeTypeWeights = getattr(lw, edge_type)
        f = h @ etw.l1_weight.T + etw.l1_bias
        neighbors = _neighbor_table(graph, edge_type)
        if neighbors.shape[1] > 0:
            scale = math.sqrt(etw.l3_weight.shape[0])
            alpha = _attention_matrix(etw, neighbors, h, scale)
            messages = h @ etw.l2_weight.T + etw.l2_bias
            f = f + np.einsum("nj,njd->nd", alpha, messages[neighbors])
        total += f
    x = np.maximum(total, 0.0)
    mean = x.mean(axis=1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=1, keepdims=True)
    normed = (x - mean) / np.sqrt(var + weights.config.layer_norm_eps)
    return normed * lw.norm_gain + lw.norm_offset


def apply_network(weights: GnnWeights, graph: CfGraph, node_features: np.ndarray) -> np.ndarray:
    """Run all attention layers and the final linear map; ``(N, 6)`` output."""
    if node_features.shape != (graph.num_nodes, weights.config.in_dim):
        raise ValueError(
            f"node features have shape {node_features.shape}, expected"
            f" ({graph.num_nodes}, {weights.config.in_dim})"
        )
    h = node_features
    for layer in range(weights.config.num_layers):
        h = layer_forward(weights, layer, graph, h)
    return h @ weights.final_weight.T + weights.final_bias


def forward(channel: ChannelMatrix, weights: GnnWeights) -> Precoder:
    """Full pipeline: features -> attention layers -> feasible precoder."""
    graph = build_graph(channel.num_aps, channel.num_ues)
    h = input_features(channel, weights.feature_stats)
    raw = apply_network(weights, graph, h)
    return deprocess_and_postprocess(channel, raw, weights.feature_stats)
