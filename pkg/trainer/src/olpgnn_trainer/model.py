"""The trainable graph-transformer, matching the inference engine exactly.

Same update rule as the deployment engine: per edge type a self map plus
an attention-weighted neighbor aggregation (single head, exponential
scalar product scaled by the square root of the key width), edge-type
results summed, ReLU, layer normalization with learned gain/offset, and a
final linear map to the 6 output features.  Everything runs in float64 so
exported weights reproduce bit-comparable outputs in the numpy engine.

Attention uses the rectangular neighbor tables (degrees are uniform per
edge type, and a batch holds graphs of one size), so the softmax is a
plain dense softmax over the neighbor axis with a deterministic
aggregation order.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .formats import expected_parameter_shapes
from .graphdata import GraphBatch

DEFAULT_CONFIG = {
    "num_layers": 6,
    "hidden_dim": 22,
    "in_dim": 4,
    "out_dim": 6,
    "edge_types": ["ap", "ue"],
    "layer_norm_eps": 1e-5,
}


class _EdgeBlock(nn.Module):
    """The four linear maps of one (layer, edge type) pair."""

    def __init__(self, in_dim: int, out_dim: int) -> None:
        super().__init__()
        self.l1 = nn.Linear(in_dim, out_dim, dtype=torch.float64)
        self.l2 = nn.Linear(in_dim, out_dim, dtype=torch.float64)
        self.l3 = nn.Linear(in_dim, out_dim, bias=False, dtype=torch.float64)
        self.l4 = nn.Linear(in_dim, out_dim, bias=False, dtype=torch.float64)


class _AttentionLayer(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, eps: float) -> None:
        super().__init__()
        self.ap = _EdgeBlock(in_dim, out_dim)
        self.ue = _EdgeBlock(in_dim, out_dim)
        self.norm_gain = nn.Parameter(torch.ones(out_dim, dtype=torch.float64))
        self.norm_offset = nn.Parameter(torch.zeros(out_dim, dtype=torch.float64))
        self.eps = eps

    def _aggregate(self, block: _EdgeBlock, h: torch.Tensor, neighbors: torch.Tensor) -> torch.Tensor:
        out = block.l1(h)
        if neighbors.shape[1] == 0:
            return out
        queries = block.l3(h)
        keys = block.l4(h)[neighbors]  # (N, degree, d)
        scale = math.sqrt(queries.shape[1])
        logits = torch.einsum("nd,njd->nj", queries, keys) / scale
        alpha = torch.softmax(logits, dim=1)
        messages = block.l2(h)[neighbors]
        return out + torch.einsum("nj,njd->nd", alpha, messages)

    def forward(self, h: torch.Tensor, nbr_ap: torch.Tensor, nbr_ue: torch.Tensor) -> torch.Tensor:
        x = torch.relu(self._aggregate(self.ap, h, nbr_ap) + self._aggregate(self.ue, h, nbr_ue))
        normed = torch.nn.functional.layer_norm(
            x, (x.shape[1],), self.norm_gain, self.norm_offset, self.eps
        )
        return normed


class PrecoderGnn(nn.Module):
    """Stack of attention layers plus the final linear output map."""

    def __init__(self, config: dict | None = None) -> None:
        super().__init__()
        self.config = dict(DEFAULT_CONFIG if config is None else config)
        d = self.config["hidden_dim"]
        eps = self.config["layer_norm_eps"]
        layers = []
        for t in range(self.config["num_layers"]):
            in_dim = self.config["in_dim"] if t == 0 else d
            layers.append(_AttentionLayer(in_dim, d, eps))
        self.layers = nn.ModuleList(layers)
        self.final = nn.Linear(d, self.config["out_dim"], dtype=torch.float64)

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        h = batch.features
        for layer in self.layers:
            h = layer(h, batch.nbr_ap, batch.nbr_ue)
        return self.final(h)

    # --- canonical parameter naming (the weights-artifact contract) ---

    def _canonical_modules(self) -> dict[str, torch.Tensor]:
        out: dict[str, torch.Tensor] = {}
        for t, layer in enumerate(self.layers):
            for et in ("ap", "ue"):
                block: _EdgeBlock = getattr(layer, et)
                prefix = f"layers.{t}.{et}"
                out[f"{prefix}.l1.weight"] = block.l1.weight
                out[f"{prefix}.l1.bias"] = block.l1.bias
                out[f"{prefix}.l2.weight"] = block.l2.weight
                out[f"{prefix}.l2.bias"] = block.l2.bias
                out[f"{prefix}.l3.weight"] = block.l3.weight
                out[f"{prefix}.l4.weight"] = block.l4.weight
            out[f"layers.{t}.norm.gain"] = layer.norm_gain
            out[f"layers.{t}.norm.offset"] = layer.norm_offset
        out["final.weight"] = self.final.weight
        out["final.bias"] = self.final.bias
        return out

    def export_params(self) -> dict[str, np.ndarray]:
        """Trainable parameters under their canonical artifact names."""
        return {
            name: tensor.detach().cpu().numpy().astype(np.float64)
            for name, tensor in self._canonical_modules().items()
        }

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        """Load canonically named arrays (shapes must match the config)."""
        expected = expected_parameter_shapes(self.config)
        with torch.no_grad():
            for name, tensor in self._canonical_modules().items():
                arr = params[name]
                if tuple(arr.shape) != expected[name]:
                    raise ValueError(f"parameter '{name}' has shape {arr.shape}, expected {expected[name]}")
                tensor.copy_(torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float64)))

    def num_trainable_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())
