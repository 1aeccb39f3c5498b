import numpy as np
import pytest

from olpkit import ChannelMatrix


def make_channel(rng: np.random.Generator, num_aps: int, num_ues: int, scale: float = 1e-5) -> ChannelMatrix:
    g = (rng.standard_normal((num_aps, num_ues)) + 1j * rng.standard_normal((num_aps, num_ues))) * scale
    return ChannelMatrix(g)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240901)
