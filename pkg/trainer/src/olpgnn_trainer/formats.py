"""Reader/writer for the toolkit's portable binary formats.

Independent implementation of the dataset and weights layouts documented
in the toolkit's docs/FORMATS.md (little-endian float64, interleaved
complex, row-major matrices; JSON manifests/headers with SHA-256 blob
checksums).  The file formats are the only contract between this trainer
and the inference toolkit: nothing here imports it.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = "1"

MANIFEST_NAME = "manifest.json"
SAMPLES_NAME = "samples.bin"

STATS_NAMES = ("stats.input_mean", "stats.input_std", "stats.output_mean", "stats.output_std")


class FormatError(Exception):
    """Any violation of the documented file layouts."""


@dataclass(frozen=True)
class Sample:
    """One labeled training sample."""

    channel: np.ndarray
    pinv: np.ndarray
    precoder: np.ndarray
    t_star: float
    seed: int


@dataclass(frozen=True)
class Dataset:
    directory: str
    num_aps: int
    num_ues: int
    rho_d: float
    samples: list[Sample] = field(default_factory=list)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def read_dataset(directory) -> Dataset:
    """Load a labeled dataset, verifying version, checksum and size."""
    directory = Path(directory)
    with open(directory / MANIFEST_NAME, encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = str(manifest.get("format_version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported dataset format_version {version!r}")
    m, k = int(manifest["M"]), int(manifest["K"])
    num_samples = int(manifest["num_samples"])
    blob = (directory / SAMPLES_NAME).read_bytes()
    expected = manifest.get("checksums", {}).get(SAMPLES_NAME)
    if _sha256(blob) != expected:
        raise FormatError(f"{SAMPLES_NAME}: checksum mismatch")
    record_size = 3 * m * k * 16 + 16
    if len(blob) != record_size * num_samples:
        raise FormatError(
            f"{SAMPLES_NAME}: {len(blob)} bytes, expected {record_size * num_samples}"
        )
    samples = []
    for i in range(num_samples):
        offset = i * record_size
        matrices = []
        for j in range(3):
            arr = np.frombuffer(blob, dtype="<c16", count=m * k, offset=offset + j * m * k * 16)
            matrices.append(arr.reshape(m, k).astype(np.complex128))
        (t_star,) = struct.unpack_from("<d", blob, offset + 3 * m * k * 16)
        (seed,) = struct.unpack_from("<q", blob, offset + 3 * m * k * 16 + 8)
        samples.append(Sample(matrices[0], matrices[1], matrices[2], t_star, seed))
    return Dataset(str(directory), m, k, float(manifest["rho_d"]), samples)


def expected_parameter_shapes(config: dict) -> dict[str, tuple[int, ...]]:
    """Canonical parameter names/shapes for a config dict, in file order."""
    d = int(config["hidden_dim"])
    in_dim = int(config["in_dim"])
    out_dim = int(config["out_dim"])
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(int(config["num_layers"])):
        din = in_dim if layer == 0 else d
        for et in config["edge_types"]:
            prefix = f"layers.{layer}.{et}"
            shapes[f"{prefix}.l1.weight"] = (d, din)
            shapes[f"{prefix}.l1.bias"] = (d,)
            shapes[f"{prefix}.l2.weight"] = (d, din)
            shapes[f"{prefix}.l2.bias"] = (d,)
            shapes[f"{prefix}.l3.weight"] = (d, din)
            shapes[f"{prefix}.l4.weight"] = (d, din)
        shapes[f"layers.{layer}.norm.gain"] = (d,)
        shapes[f"layers.{layer}.norm.offset"] = (d,)
    shapes["final.weight"] = (out_dim, d)
    shapes["final.bias"] = (out_dim,)
    shapes["stats.input_mean"] = (in_dim,)
    shapes["stats.input_std"] = (in_dim,)
    shapes["stats.output_mean"] = (out_dim,)
    shapes["stats.output_std"] = (out_dim,)
    return shapes


def write_weights(path, config: dict, params: dict[str, np.ndarray], metadata: dict) -> None:
    """Write a weights artifact (header + contiguous float64 blob)."""
    shapes = expected_parameter_shapes(config)
    missing = [name for name in shapes if name not in params]
    if missing:
        raise FormatError(f"missing parameter '{missing[0]}'")
    entries = []
    parts = []
    offset = 0
    for name, shape in shapes.items():
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        if arr.shape != shape:
            raise FormatError(f"parameter '{name}' has shape {arr.shape}, expected {shape}")
        data = arr.tobytes()
        entries.append({"name": name, "shape": list(shape), "offset": offset})
        parts.append(data)
        offset += len(data)
    blob = b"".join(parts)
    header = {
        "format_version": FORMAT_VERSION,
        "config": dict(config),
        "params": entries,
        "metadata": dict(metadata),
        "blob_bytes": len(blob),
        "blob_sha256": _sha256(blob),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def read_weights(path) -> tuple[dict, dict[str, np.ndarray], dict]:
    """Read a weights artifact; returns (config, params, metadata)."""
    raw = Path(path).read_bytes()
    (header_len,) = struct.unpack_from("<Q", raw, 0)
    header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    if str(header.get("format_version")) != FORMAT_VERSION:
        raise FormatError(f"unsupported weights format_version {header.get('format_version')!r}")
    blob = raw[8 + header_len :]
    if len(blob) != int(header["blob_bytes"]) or _sha256(blob) != header["blob_sha256"]:
        raise FormatError("weights blob length/checksum mismatch")
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        params[entry["name"]] = (
            np.frombuffer(blob, dtype="<f8", count=count, offset=int(entry["offset"]))
            .reshape(shape)
            .astype(np.float64)
        )
    return header["config"], params, dict(header.get("metadata", {}))
