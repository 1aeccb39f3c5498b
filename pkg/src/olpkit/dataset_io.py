"""Persistent binary formats for labeled datasets and network weights.

These layouts are the normative cross-language contract between this
toolkit and any training code (see docs/FORMATS.md for a byte-level
walkthrough).  All numbers are little-endian 64-bit IEEE-754 (the per-
sample seed is a little-endian signed 64-bit integer), complex entries are
interleaved (real, imag) and matrices are stored row-major.  Writes are
deterministic: rewriting an unmodified dataset is byte-identical.

A dataset directory holds a ``manifest.json`` (metadata plus a SHA-256
checksum of the record file) and a ``samples.bin`` of fixed-size records.
A weights artifact is a single file: an 8-byte little-endian header length,
a JSON header (config, parameter names/shapes/offsets, metadata, blob
checksum), then one contiguous float64 blob.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel_sim import EnvironmentSpec
from .gnn_inference import GnnConfig, GnnWeights, expected_parameter_shapes, weights_from_params, weights_to_params
from .graph_builder import NUM_INPUT_FEATURES, NUM_OUTPUT_FEATURES, FeatureStats
from .olp_socp import SolverConfig
from .system_model import ChannelMatrix, Precoder, min_sinr

__all__ = [
    "FORMAT_VERSION",
    "DatasetIOError",
    "FormatVersionError",
    "ChecksumMismatchError",
    "TruncatedDatasetError",
    "MissingParameterError",
    "WeightShapeError",
    "SampleValidationError",
    "DatasetManifest",
    "SampleRecord",
    "record_channel",
    "validate_record",
    "write_dataset",
    "read_dataset",
    "WeightsArtifact",
    "write_weights",
    "read_weights",
]

FORMAT_VERSION = "1"

MANIFEST_NAME = "manifest.json"
SAMPLES_NAME = "samples.bin"

#: Shapes of the feature-statistics blobs stored alongside the trainable
#: parameters in a weights artifact.
STATS_SHAPES = {
    "stats.input_mean": (NUM_INPUT_FEATURES,),
    "stats.input_std": (NUM_INPUT_FEATURES,),
    "stats.output_mean": (NUM_OUTPUT_FEATURES,),
    "stats.output_std": (NUM_OUTPUT_FEATURES,),
}


class DatasetIOError(Exception):
    """Base class for persistent-format failures."""


class FormatVersionError(DatasetIOError):
    pass


class ChecksumMismatchError(DatasetIOError):
    pass


class TruncatedDatasetError(DatasetIOError):
    pass


class MissingParameterError(DatasetIOError):
    pass


class WeightShapeError(DatasetIOError):
    pass


class SampleValidationError(DatasetIOError):
    pass


@dataclass(frozen=True)
class DatasetManifest:
    """Dataset metadata; JSON field names are part of the format."""

    environment: EnvironmentSpec
    num_aps: int
    num_ues: int
    rho_d: float
    num_samples: int
    solver: SolverConfig
    seed_base: int
    created_by: str = "olpkit"
    format_version: str = FORMAT_VERSION
    checksums: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "environment": self.environment.to_json_dict(),
            "M": self.num_aps,
            "K": self.num_ues,
            "rho_d": self.rho_d,
            "num_samples": self.num_samples,
            "solver": {
                "epsilon": self.solver.epsilon,
                "feas_tol": self.solver.feas_tol,
                "max_bisection_iters": self.solver.max_bisection_iters,
                "margin": self.solver.margin,
                "conic_solver": self.solver.conic_solver,
            },
            "seed_base": self.seed_base,
            "created_by": self.created_by,
            "checksums": dict(self.checksums),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DatasetManifest":
        version = str(data.get("format_version"))
        if version != FORMAT_VERSION:
            raise FormatVersionError(
                f"unsupported dataset format_version {version!r}, expected {FORMAT_VERSION!r}"
            )
        sol = data["solver"]
        return cls(
            environment=EnvironmentSpec.from_json_dict(data["environment"]),
            num_aps=int(data["M"]),
            num_ues=int(data["K"]),
            rho_d=float(data["rho_d"]),
            num_samples=int(data["num_samples"]),
            solver=SolverConfig(
                epsilon=float(sol["epsilon"]),
                feas_tol=float(sol["feas_tol"]),
                max_bisection_iters=int(sol["max_bisection_iters"]),
                margin=float(sol["margin"]),
                conic_solver=str(sol["conic_solver"]),
            ),
            seed_base=int(data["seed_base"]),
            created_by=str(data["created_by"]),
            format_version=version,
            checksums=dict(data.get("checksums", {})),
        )


@dataclass(frozen=True)
class SampleRecord:
    """One labeled sample: channel, its pseudo-inverse, the optimal
    precoder and its certified max-min SINR, plus the generating seed."""

    channel: np.ndarray
    channel_pinv: np.ndarray
    precoder: np.ndarray
    t_star: float
    seed: int


def record_channel(record: SampleRecord) -> ChannelMatrix:
    """Channel with the stored pseudo-inverse injected (never recomputed)."""
    return ChannelMatrix(record.channel, pinv=record.channel_pinv)


def validate_record(record: SampleRecord, rho_d: float, index: int) -> None:
    """Re-check the stored-label invariants; raises on violation."""
    row_norms = np.linalg.norm(record.precoder, axis=1)
    if np.any(row_norms > 1.0 + 1e-6):
        raise SampleValidationError(
            f"sample {index}: precoder row norm {row_norms.max():.9f} exceeds the power constraint"
        )
    achieved = min_sinr(record_channel(record), Precoder(record.precoder), rho_d)
    if achieved < record.t_star - 1e-4 * (1.0 + record.t_star):
        raise SampleValidationError(
            f"sample {index}: recomputed min-SINR {achieved:.6g} falls short of the stored"
            f" bound {record.t_star:.6g}"
        )


def _record_size(num_aps: int, num_ues: int) -> int:
    return 3 * num_aps * num_ues * 16 + 8 + 8


def _pack_record(record: SampleRecord) -> bytes:
    parts = [
        np.ascontiguousarray(record.channel, dtype="<c16").tobytes(),
        np.ascontiguousarray(record.channel_pinv, dtype="<c16").tobytes(),
        np.ascontiguousarray(record.precoder, dtype="<c16").tobytes(),
        struct.pack("<d", float(record.t_star)),
        struct.pack("<q", int(record.seed)),
    ]
    return b"".join(parts)


def _unpack_record(buf: bytes, num_aps: int, num_ues: int) -> SampleRecord:
    n = num_aps * num_ues
    offset = 0
    matrices = []
    for _ in range(3):
        arr = np.frombuffer(buf, dtype="<c16", count=n, offset=offset).reshape(num_aps, num_ues)
        matrices.append(arr.astype(np.complex128))
        offset += n * 16
    (t_star,) = struct.unpack_from("<d", buf, offset)
    (seed,) = struct.unpack_from("<q", buf, offset + 8)
    return SampleRecord(matrices[0], matrices[1], matrices[2], t_star, seed)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_dataset(directory, manifest: DatasetManifest, records: list[SampleRecord]) -> None:
    """Write ``manifest.json`` and ``samples.bin`` into ``directory``."""
    if manifest.num_samples != len(records):
        raise ValueError(
            f"manifest declares {manifest.num_samples} samples but {len(records)} records given"
        )
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    samples_path = directory / SAMPLES_NAME
    with open(samples_path, "wb") as fh:
        for record in records:
            if record.channel.shape != (manifest.num_aps, manifest.num_ues):
                raise ValueError(
                    f"record shape {record.channel.shape} does not match manifest"
                    f" ({manifest.num_aps}, {manifest.num_ues})"
                )
            fh.write(_pack_record(record))
    payload = manifest.to_json_dict()
    payload["checksums"] = {SAMPLES_NAME: _sha256(samples_path)}
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(directory, verify: bool = False) -> tuple[DatasetManifest, list[SampleRecord]]:
    """Read a dataset directory; checksums are always verified.

    With ``verify=True`` the per-record label invariants (power constraint
    and certified min-SINR) are re-checked as well.
    """
    directory = Path(directory)
    with open(directory / MANIFEST_NAME, encoding="utf-8") as fh:
        manifest = DatasetManifest.from_json_dict(json.load(fh))
    samples_path = directory / SAMPLES_NAME
    expected_checksum = manifest.checksums.get(SAMPLES_NAME)
    actual_checksum = _sha256(samples_path)
    if expected_checksum != actual_checksum:
        raise ChecksumMismatchError(
            f"{SAMPLES_NAME}: manifest checksum {expected_checksum} != file checksum {actual_checksum}"
        )
    blob = samples_path.read_bytes()
    rec_size = _record_size(manifest.num_aps, manifest.num_ues)
    if len(blob) != rec_size * manifest.num_samples:
        raise TruncatedDatasetError(
            f"{SAMPLES_NAME} holds {len(blob)} bytes, expected {rec_size * manifest.num_samples}"
            f" for {manifest.num_samples} records of {rec_size} bytes"
        )
    records = [
        _unpack_record(blob[i * rec_size : (i + 1) * rec_size], manifest.num_aps, manifest.num_ues)
        for i in range(manifest.num_samples)
    ]
    if verify:
        for index, record in enumerate(records):
            validate_record(record, manifest.rho_d, index)
    return manifest, records


@dataclass(frozen=True)
class WeightsArtifact:
    """Portable network weights: config, named float64 blobs, metadata.

    ``params`` holds every trainable parameter under its canonical name
    plus the four ``stats.*`` feature-statistics vectors.
    """

    config: GnnConfig
    params: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def feature_stats(self) -> FeatureStats:
        return FeatureStats(
            input_mean=self.params["stats.input_mean"],
            input_std=self.params["stats.input_std"],
            output_mean=self.params["stats.output_mean"],
            output_std=self.params["stats.output_std"],
        )

    def to_weights(self) -> GnnWeights:
        trainable = {k: v for k, v in self.params.items() if not k.startswith("stats.")}
        return weights_from_params(self.config, trainable, self.feature_stats())

    @classmethod
    def from_weights(cls, weights: GnnWeights, metadata: dict | None = None) -> "WeightsArtifact":
        params = dict(weights_to_params(weights))
        stats = weights.feature_stats
        params["stats.input_mean"] = stats.input_mean
        params["stats.input_std"] = stats.input_std
        params["stats.output_mean"] = stats.output_mean
        params["stats.output_std"] = stats.output_std
        return cls(config=weights.config, params=params, metadata=dict(metadata or {}))


def _expected_artifact_shapes(config: GnnConfig) -> dict[str, tuple[int, ...]]:
    shapes = dict(expected_parameter_shapes(config))
    shapes.update(STATS_SHAPES)
    return shapes


def write_weights(path, artifact: WeightsArtifact) -> None:
    """Serialize a weights artifact to one file (header + float64 blob)."""
    expected = _expected_artifact_shapes(artifact.config)
    for name, shape in expected.items():
        if name not in artifact.params:
            raise MissingParameterError(f"missing parameter '{name}'")
        if tuple(artifact.params[name].shape) != shape:
            raise WeightShapeError(
                f"parameter '{name}' has shape {tuple(artifact.params[name].shape)}, expected {shape}"
            )
    entries = []
    blob_parts = []
    offset = 0
    for name, shape in expected.items():
        data = np.ascontiguousarray(artifact.params[name], dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(shape), "offset": offset})
        blob_parts.append(data)
        offset += len(data)
    blob = b"".join(blob_parts)
    header = {
        "format_version": FORMAT_VERSION,
        "config": artifact.config.to_json_dict(),
        "params": entries,
        "metadata": artifact.metadata,
        "blob_bytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def read_weights(path) -> WeightsArtifact:
    """Read and validate a weights artifact.

    Every parameter required by the declared config must be present
    exactly once with the matching shape; the blob checksum must match.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise TruncatedDatasetError(f"{path}: too short for a weights artifact")
    (header_len,) = struct.unpack_from("<Q", raw, 0)
    if len(raw) < 8 + header_len:
        raise TruncatedDatasetError(f"{path}: truncated header")
    header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    version = str(header.get("format_version"))
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported weights format_version {version!r}, expected {FORMAT_VERSION!r}"
        )
    blob = raw[8 + header_len :]
    if len(blob) != int(header["blob_bytes"]):
        raise TruncatedDatasetError(
            f"{path}: blob holds {len(blob)} bytes, header declares {header['blob_bytes']}"
        )
    if hashlib.sha256(blob).hexdigest() != header["blob_sha256"]:
        raise ChecksumMismatchError(f"{path}: weights blob checksum mismatch")
    config = GnnConfig.from_json_dict(header["config"])
    declared = {e["name"]: e for e in header["params"]}
    if len(declared) != len(header["params"]):
        raise WeightShapeError(f"{path}: duplicate parameter names in header")
    expected = _expected_artifact_shapes(config)
    for name, shape in expected.items():
        if name not in declared:
            raise MissingParameterError(f"missing parameter '{name}'")
        if tuple(declared[name]["shape"]) != shape:
            raise WeightShapeError(
                f"parameter '{name}' has shape {tuple(declared[name]['shape'])}, expected {shape}"
            )
    extras = sorted(set(declared) - set(expected))
    if extras:
        raise WeightShapeError(f"unexpected parameter '{extras[0]}'")
    params = {}
    for name, shape in expected.items():
        entry = declared[name]
        count = int(np.prod(shape))
        start = int(entry["offset"])
        if start + count * 8 > len(blob):
            raise TruncatedDatasetError(f"parameter '{name}' extends past the end of the blob")
        params[name] = (
            np.frombuffer(blob, dtype="<f8", count=count, offset=start)
            .reshape(shape)
            .astype(np.float64)
        )
    return WeightsArtifact(config=config, params=params, metadata=dict(header.get("metadata", {})))
