"""Differentiable postprocessing and the dB-SINR training loss.

The loss is measured on the final feasible precoder: raw network outputs
are de-standardized, recombined into complex components, algebraically
corrected (real-diagonal signal part, zero-diagonal interference part) and
projected onto the per-AP power constraint, exactly as at inference time.
Gradients flow through every step; the row-norm projection is
differentiable almost everywhere.  The loss itself is the mean squared
error of the per-user SINRs in dB against the targets, averaged over the
users of each graph and then over the batch.
"""

from __future__ import annotations

import torch

from .graphdata import GraphBatch, FeatureStats

#: Linear-SINR floor before the dB transform; together with the magnitude
#: clamp in the feature encoding this keeps the loss finite everywhere.
SINR_FLOOR = 1e-40

#: Ceiling on decoded log2 magnitudes (mirrors the toolkit): never binds
#: for sane outputs, prevents overflow of squared row norms.
LOG_MAG_CEIL = 256.0


def unprojected_precoder(raw: torch.Tensor, batch: GraphBatch, stats: FeatureStats) -> torch.Tensor:
    """Raw outputs ``(num_nodes, 6)`` to corrected precoders ``(B, M, K)``,
    before the power projection."""
    out_mean = torch.as_tensor(stats.output_mean, dtype=raw.dtype)
    out_std = torch.as_tensor(stats.output_std, dtype=raw.dtype)
    values = raw * out_std + out_mean
    mags = torch.exp2(torch.clamp(values[:, 0::2], max=LOG_MAG_CEIL))
    phases = values[:, 1::2]
    components = torch.polar(mags, phases)  # (num_nodes, 3) complex128
    components = components.reshape(batch.num_graphs, batch.num_aps, batch.num_ues, 3)
    y1, y2, y3 = components[..., 0], components[..., 1], components[..., 2]

    signal_diag = torch.diagonal(batch.gt @ y1, dim1=-2, dim2=-1).real
    y1p = batch.pinv * signal_diag.to(batch.pinv.dtype).unsqueeze(1)
    b = batch.gt @ y2
    b_diag = torch.diagonal(b, dim1=-2, dim2=-1)
    y2p = batch.pinv @ (b - torch.diag_embed(b_diag))
    return y1p + y2p + y3


def project_rows(delta: torch.Tensor) -> torch.Tensor:
    """Rescale rows with 2-norm >= 1 to unit norm (a.e. differentiable)."""
    norms = torch.linalg.vector_norm(delta, dim=2, keepdim=True)
    scale = torch.where(norms >= 1.0, 1.0 / norms, torch.ones_like(norms))
    return delta * scale.to(delta.dtype)


def postprocess(raw: torch.Tensor, batch: GraphBatch, stats: FeatureStats) -> torch.Tensor:
    """Raw outputs ``(num_nodes, 6)`` to feasible precoders ``(B, M, K)``."""
    return project_rows(unprojected_precoder(raw, batch, stats))


def sinr_db_torch(delta: torch.Tensor, gt: torch.Tensor, rho_d: float) -> torch.Tensor:
    """Per-user SINR in dB of precoders ``(B, M, K)``; returns ``(B, K)``."""
    a = gt @ delta
    diag = torch.diagonal(a, dim1=-2, dim2=-1)
    signal = diag.real**2 + diag.imag**2
    total = (a.real**2 + a.imag**2).sum(dim=-1)
    interference = total - signal
    linear = rho_d * signal / (1.0 + rho_d * interference)
    return 10.0 * torch.log10(torch.clamp(linear, min=SINR_FLOOR))


def sinr_db_loss(delta: torch.Tensor, target_db: torch.Tensor, gt: torch.Tensor, rho_d: float) -> torch.Tensor:
    """Mean over the batch of ``sum_k (target_k - predicted_k)^2 / K``."""
    predicted = sinr_db_torch(delta, gt, rho_d)
    return ((target_db - predicted) ** 2).mean(dim=1).mean()


def batch_loss(model, batch: GraphBatch, stats: FeatureStats) -> torch.Tensor:
    """Forward, postprocess and score one batch."""
    raw = model(batch)
    delta = postprocess(raw, batch, stats)
    return sinr_db_loss(delta, batch.target_sinr_db, batch.gt, batch.rho_d)
