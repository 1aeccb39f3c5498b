"""Graph topology and feature transforms, mirroring the toolkit conventions.

Implements the normative rules of the toolkit's docs/CONVENTIONS.md: row-
major node indexing, lexicographic typed edge lists, the clamped
log2-magnitude / [0, 2*pi)-phase encoding, population-statistics
standardization, and the three-way precoder split.  Any drift between this
module and the toolkit's graph builder breaks the cross-package parity
check, which is exercised in the tests through the toolkit CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .formats import Sample

MAG_CLAMP = 2.0 ** -60
NUM_INPUT_FEATURES = 4
NUM_OUTPUT_FEATURES = 6


def build_edges(num_aps: int, num_ues: int) -> tuple[np.ndarray, np.ndarray]:
    """Typed directed edge lists, lexicographic by (source, target)."""
    m, k = num_aps, num_ues
    nodes = np.arange(m * k, dtype=np.int64).reshape(m, k)

    src = np.broadcast_to(nodes[:, :, None], (m, k, k))
    dst = np.broadcast_to(nodes[:, None, :], (m, k, k))
    keep = ~np.eye(k, dtype=bool)
    edges_ap = np.stack([src[:, keep], dst[:, keep]], axis=-1).reshape(-1, 2)

    src = np.broadcast_to(nodes[:, :, None], (m, k, m))
    dst = np.broadcast_to(nodes.T[None, :, :], (m, k, m))
    keep = np.broadcast_to(~np.eye(m, dtype=bool)[:, None, :], (m, k, m))
    edges_ue = np.stack([src[keep], dst[keep]], axis=-1).reshape(-1, 2)
    return edges_ap, edges_ue


def log_mag_phase(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mags = np.abs(values)
    clamped = mags < MAG_CLAMP
    log_mag = np.log2(np.maximum(mags, MAG_CLAMP))
    phase = np.angle(values)
    phase = np.where(phase < 0, phase + 2.0 * np.pi, phase)
    phase = np.where(clamped, 0.0, phase)
    return log_mag, phase


def input_features_raw(channel: np.ndarray, pinv: np.ndarray) -> np.ndarray:
    """(M*K, 4) unstandardized inputs; uses the stored pseudo-inverse."""
    lm_g, ph_g = log_mag_phase(channel)
    lm_p, ph_p = log_mag_phase(pinv)
    return np.stack([lm_g.ravel(), ph_g.ravel(), lm_p.ravel(), ph_p.ravel()], axis=1)


def split_precoder(channel: np.ndarray, pinv: np.ndarray, precoder: np.ndarray):
    """Signal / interference / null-space components of a precoder."""
    a = channel.T @ precoder
    diag = np.diag(a)
    y1 = pinv * diag[None, :]
    y2 = pinv @ (a - np.diag(diag))
    y3 = precoder - y1 - y2
    return y1, y2, y3


def target_features_raw(channel: np.ndarray, pinv: np.ndarray, precoder: np.ndarray) -> np.ndarray:
    """(M*K, 6) unstandardized regression targets."""
    columns = []
    for part in split_precoder(channel, pinv, precoder):
        log_mag, phase = log_mag_phase(part)
        columns.append(log_mag.ravel())
        columns.append(phase.ravel())
    return np.stack(columns, axis=1)


def sinr_db(channel: np.ndarray, precoder: np.ndarray, rho_d: float) -> np.ndarray:
    """Per-user SINR in dB of a precoder (numpy; used for targets)."""
    a = channel.T @ precoder
    sig = np.abs(np.diag(a)) ** 2
    interf = np.sum(np.abs(a) ** 2, axis=1) - sig
    lin = rho_d * sig / (1.0 + rho_d * interf)
    return 10.0 * np.log10(np.maximum(lin, 1e-40))


@dataclass(frozen=True)
class FeatureStats:
    """Population (ddof=0) statistics of the training split, per feature."""

    input_mean: np.ndarray
    input_std: np.ndarray
    output_mean: np.ndarray
    output_std: np.ndarray

    @classmethod
    def from_rows(cls, input_rows: np.ndarray, output_rows: np.ndarray) -> "FeatureStats":
        stats = cls(
            input_rows.mean(axis=0),
            input_rows.std(axis=0),
            output_rows.mean(axis=0),
            output_rows.std(axis=0),
        )
        if np.any(stats.input_std <= 0) or np.any(stats.output_std <= 0):
            raise ValueError("degenerate feature: zero variance over the training split")
        return stats

    @classmethod
    def identity(cls) -> "FeatureStats":
        return cls(
            np.zeros(NUM_INPUT_FEATURES),
            np.ones(NUM_INPUT_FEATURES),
            np.zeros(NUM_OUTPUT_FEATURES),
            np.ones(NUM_OUTPUT_FEATURES),
        )

    def as_params(self) -> dict[str, np.ndarray]:
        return {
            "stats.input_mean": self.input_mean,
            "stats.input_std": self.input_std,
            "stats.output_mean": self.output_mean,
            "stats.output_std": self.output_std,
        }


def neighbor_tables(num_aps: int, num_ues: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-node neighbor ids as ``(N, degree)`` tables, one per edge type.

    Degrees are uniform (``K-1`` AP-type, ``M-1`` UE-type) and the edge
    lists are sorted by source, so the target column reshapes directly;
    this also fixes the deterministic aggregation order.
    """
    n = num_aps * num_ues
    edges_ap, edges_ue = build_edges(num_aps, num_ues)
    nbr_ap = edges_ap[:, 1].reshape(n, num_ues - 1) if edges_ap.size else np.empty((n, 0), np.int64)
    nbr_ue = edges_ue[:, 1].reshape(n, num_aps - 1) if edges_ue.size else np.empty((n, 0), np.int64)
    return nbr_ap, nbr_ue


class GraphBatch:
    """A stack of same-size graphs with concatenated node tensors.

    Holds everything one training step needs: standardized input features,
    globally indexed neighbor tables (uniform degrees let every graph in
    the batch share one rectangular table), the complex channel and
    pseudo-inverse stacks for the differentiable postprocessing, and the
    target per-user SINRs in dB.
    """

    def __init__(self, samples: list[Sample], rho_d: float, stats: FeatureStats) -> None:
        m, k = samples[0].channel.shape
        if any(s.channel.shape != (m, k) for s in samples):
            raise ValueError("a GraphBatch requires samples of one graph size")
        self.num_graphs = len(samples)
        self.num_aps = m
        self.num_ues = k
        n = m * k

        rows = [
            (input_features_raw(s.channel, s.pinv) - stats.input_mean) / stats.input_std
            for s in samples
        ]
        self.features = torch.from_numpy(np.concatenate(rows)).to(torch.float64)

        nbr_ap, nbr_ue = neighbor_tables(m, k)
        offsets = np.arange(self.num_graphs, dtype=np.int64)[:, None, None] * n
        self.nbr_ap = torch.from_numpy((nbr_ap[None, :, :] + offsets).reshape(self.num_graphs * n, -1))
        self.nbr_ue = torch.from_numpy((nbr_ue[None, :, :] + offsets).reshape(self.num_graphs * n, -1))

        self.gt = torch.from_numpy(
            np.stack([s.channel.T for s in samples])
        ).to(torch.complex128)
        self.pinv = torch.from_numpy(np.stack([s.pinv for s in samples])).to(torch.complex128)
        self.rho_d = float(rho_d)
        self.target_sinr_db = torch.from_numpy(
            np.stack([sinr_db(s.channel, s.precoder, rho_d) for s in samples])
        ).to(torch.float64)

    @property
    def num_nodes(self) -> int:
        return self.num_graphs * self.num_aps * self.num_ues
