#!/usr/bin/env python3
"""End-to-end dataset pipeline through the command-line interface.

Generates a small labeled dataset, verifies its stored invariants,
evaluates the precoders into metrics.json / cdf.csv, and times the
pipeline stages.  Everything here is also available as a shell command
(`olpkit generate ...` etc.); the demo calls the same entry points
in-process.
"""
import json
import tempfile
from pathlib import Path

import numpy as np

from olpkit import GnnConfig, WeightsArtifact, random_weights, read_dataset, write_weights
from olpkit.cli import main

workdir = Path(tempfile.mkdtemp(prefix="olpkit_demo_"))
dataset = workdir / "dataset"
print(f"working in {workdir}")

print("\n--- generate ---")
main(["generate", "--env", "los60", "--aps", "8", "--ues", "3",
      "--count", "8", "--seed", "2024", "--out", str(dataset)])

manifest, records = read_dataset(dataset)
print(f"dataset: {manifest.num_samples} samples at ({manifest.num_aps}, {manifest.num_ues}), "
      f"max-min SINR labels in [{min(r.t_star for r in records):.1f}, "
      f"{max(r.t_star for r in records):.1f}]")

print("\n--- verify ---")
main(["verify", "--dataset", str(dataset)])

print("\n--- eval (optimal vs baselines) ---")
main(["eval", "--dataset", str(dataset), "--precoders", "olp,zf,mr"])

metrics = json.loads((dataset / "metrics.json").read_text())
for name, entry in metrics["precoders"].items():
    print(f"  {name}: median SE {entry['median_se']:.3f}, "
          f"loss vs optimal {entry['median_loss_vs_olp_pct']:.2f}%")

print("\n--- eval with an (untrained) network ---")
weights_path = workdir / "random_weights.bin"
write_weights(weights_path, WeightsArtifact.from_weights(
    random_weights(GnnConfig(), np.random.default_rng(0))))
main(["eval", "--dataset", str(dataset), "--precoders", "olp,gnn",
      "--weights", str(weights_path)])

print("\n--- bench ---")
main(["bench", "--dataset", str(dataset), "--precoders", "olp,zf,gnn",
      "--weights", str(weights_path), "--repetitions", "3"])
timings = json.loads((dataset / "timings.json").read_text())
olp_ms = timings["precoders"]["olp"]["solve"]["mean_ms"]
gnn_ms = timings["precoders"]["gnn"]["solve"]["mean_ms"]
print(f"\nsolve/infer per sample: optimal {olp_ms:.1f} ms vs network {gnn_ms:.2f} ms "
      f"({olp_ms / gnn_ms:.0f}x)")
