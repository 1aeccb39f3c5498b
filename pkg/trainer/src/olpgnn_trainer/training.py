"""Training loop: Adam on the dB-SINR loss, with validation-based export.

Datasets (possibly of several graph sizes) are pooled; a deterministic
fraction of each size group is held out for validation.  Feature
statistics are computed over the training split only and frozen into the
exported artifact.  Mini-batches concatenate disjoint graphs and may mix
graph sizes: a step's samples are grouped by size into rectangular
sub-batches whose losses are combined sample-weighted, so one optimizer
step sees the whole mixed batch.  The exported parameters are the
best-validation snapshot (falling back to the final state when no
validation split is configured).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .formats import Dataset, read_dataset, write_weights
from .graphdata import FeatureStats, GraphBatch, input_features_raw, target_features_raw
from .loss import batch_loss
from .model import DEFAULT_CONFIG, PrecoderGnn

#: Named hyperparameter presets: the full-scale recipe and a desk-scale one
#: for small datasets and short runs.
PRESETS = {
    "paper": {"epochs": 1000},
    "desk": {"epochs": 100},
}


@dataclass(frozen=True)
class TrainConfig:
    datasets: tuple[str, ...]
    learning_rate: float = 7e-4
    batch_size: int = 16
    epochs: int = 1000
    val_fraction: float = 0.05
    seed: int = 0
    model_config: dict = field(default_factory=lambda: dict(DEFAULT_CONFIG))
    log_every: int = 10

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("hyperparameters must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")
        if not self.datasets:
            raise ValueError("at least one dataset directory is required")


@dataclass(frozen=True)
class LossRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    config: dict
    params: dict[str, np.ndarray]
    metadata: dict
    loss_records: list[LossRecord]

    def save(self, path) -> None:
        write_weights(path, self.config, self.params, self.metadata)

    def save_loss_curve(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss"])
            for record in self.loss_records:
                writer.writerow([record.epoch, repr(record.train_loss), repr(record.val_loss)])


def _split_indices(groups: dict, val_fraction: float, seed: int):
    """Deterministic per-size-group train/validation split."""
    rng = np.random.default_rng(seed)
    train, val = {}, {}
    for key, samples in groups.items():
        order = rng.permutation(len(samples))
        num_val = int(round(val_fraction * len(samples)))
        val[key] = [samples[i] for i in order[:num_val]]
        train[key] = [samples[i] for i in order[num_val:]]
        if not train[key]:
            raise ValueError(f"no training samples left for size {key}")
    return train, val


def _compute_stats(train_groups: dict) -> FeatureStats:
    input_rows, output_rows = [], []
    for samples in train_groups.values():
        for s in samples:
            input_rows.append(input_features_raw(s.channel, s.pinv))
            output_rows.append(target_features_raw(s.channel, s.pinv, s.precoder))
    return FeatureStats.from_rows(np.concatenate(input_rows), np.concatenate(output_rows))


def _grouped_batches(samples: list, rho_d_by_group: dict, stats: FeatureStats, batch_size: int) -> list[list[GraphBatch]]:
    """Chunk a (possibly shuffled, possibly size-mixed) sample list into
    mini-batches; each mini-batch becomes one rectangular sub-batch per
    graph size present in it."""
    batches = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        by_size: dict = {}
        for key, sample in chunk:
            by_size.setdefault(key, []).append(sample)
        batches.append(
            [GraphBatch(group, rho_d_by_group[key], stats) for key, group in by_size.items()]
        )
    return batches


def train(config: TrainConfig) -> TrainResult:
    """Run supervised training and return the exportable result."""
    torch.manual_seed(config.seed)

    datasets: list[Dataset] = [read_dataset(d) for d in config.datasets]
    groups: dict = {}
    rho_d_by_group: dict = {}
    for ds in datasets:
        key = (ds.num_aps, ds.num_ues)
        if key in rho_d_by_group and rho_d_by_group[key] != ds.rho_d:
            raise ValueError(f"datasets of size {key} disagree on rho_d")
        rho_d_by_group[key] = ds.rho_d
        groups.setdefault(key, []).extend(ds.samples)

    train_groups, val_groups = _split_indices(groups, config.val_fraction, config.seed)
    stats = _compute_stats(train_groups)

    model = PrecoderGnn(config.model_config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    train_samples = [(key, s) for key, group in train_groups.items() for s in group]
    val_samples = [(key, s) for key, group in val_groups.items() for s in group]
    val_batches = _grouped_batches(val_samples, rho_d_by_group, stats, config.batch_size)

    records: list[LossRecord] = []
    best_val = np.inf
    best_params = model.export_params()
    best_epoch = 0
    started = time.perf_counter()
    num_train = len(train_samples)

    for epoch in range(1, config.epochs + 1):
        epoch_rng = np.random.default_rng(config.seed + epoch)
        order = epoch_rng.permutation(num_train)
        shuffled = [train_samples[i] for i in order]
        model.train()
        running = 0.0
        for sub_batches in _grouped_batches(shuffled, rho_d_by_group, stats, config.batch_size):
            optimizer.zero_grad()
            count = sum(b.num_graphs for b in sub_batches)
            loss = sum(batch_loss(model, b, stats) * b.num_graphs for b in sub_batches) / count
            loss.backward()
            optimizer.step()
            running += float(loss.detach()) * count
        train_loss = running / num_train

        model.eval()
        if val_batches:
            with torch.no_grad():
                total = sum(
                    float(batch_loss(model, b, stats)) * b.num_graphs
                    for sub in val_batches
                    for b in sub
                )
            val_loss = total / len(val_samples)
        else:
            val_loss = train_loss
        records.append(LossRecord(epoch, train_loss, val_loss))

        if val_loss < best_val:
            best_val = val_loss
            best_params = model.export_params()
            best_epoch = epoch
        if config.log_every and (epoch % config.log_every == 0 or epoch == 1):
            print(
                f"epoch {epoch:4d}/{config.epochs}: train {train_loss:10.4f}  "
                f"val {val_loss:10.4f}  best {best_val:10.4f} @ {best_epoch} "
                f"({time.perf_counter() - started:.0f}s)",
                flush=True,
            )

    params = dict(best_params)
    params.update(stats.as_params())
    metadata = {
        "epochs": config.epochs,
        "best_epoch": best_epoch,
        "best_val_loss": None if not val_batches else best_val,
        "final_train_loss": records[-1].train_loss,
        "first_train_loss": records[0].train_loss,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "num_train_samples": num_train,
        "num_val_samples": sum(len(v) for v in val_groups.values()),
        "datasets": list(config.datasets),
        "trained_by": "olpgnn-trainer",
    }
    return TrainResult(dict(config.model_config), params, metadata, records)
