import subprocess

import numpy as np
import pytest

import olpgnn_trainer as T


def run_olpkit(*args: str) -> subprocess.CompletedProcess:
    """Drive the inference toolkit through its command line."""
    return subprocess.run(["olpkit", *args], capture_output=True, text=True)


def generate_dataset(path, aps: int, ues: int, count: int, seed: int) -> str:
    proc = run_olpkit(
        "generate", "--env", "los60",
        "--aps", str(aps), "--ues", str(ues),
        "--count", str(count), "--seed", str(seed),
        "--out", str(path),
    )
    assert proc.returncode == 0, proc.stderr
    return str(path)


def dataset_stats(data: T.Dataset) -> T.FeatureStats:
    return T.FeatureStats.from_rows(
        np.concatenate([T.input_features_raw(s.channel, s.pinv) for s in data.samples]),
        np.concatenate(
            [T.target_features_raw(s.channel, s.pinv, s.precoder) for s in data.samples]
        ),
    )


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """10 labeled samples at (4, 2): enough for gradient and overfit checks."""
    return generate_dataset(tmp_path_factory.mktemp("tiny") / "ds", 4, 2, 10, seed=31)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """8 labeled samples at (8, 3) for parity checks."""
    return generate_dataset(tmp_path_factory.mktemp("small") / "ds", 8, 3, 8, seed=77)
