"""Random cell-free MIMO scenario generation.

APs and UEs are placed uniformly at random inside a disc; each AP-UE link
combines a deterministic large-scale gain (free-space line of sight, or a
macro-cell NLoS path-loss expression) with i.i.d. Rayleigh fast fading.
Three named environments are provided: 60 GHz line of sight, 2 GHz urban
NLoS and 450 MHz rural NLoS.

Everything is a pure function of ``(config, env, seed)``: the RNG is a
seeded ``numpy.random.Generator`` (PCG64) and the draw order is fixed as
AP positions, then UE positions, then fast fading, so generated scenarios
are reproducible across runs and platforms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .system_model import ChannelMatrix, SystemConfig

__all__ = [
    "SPEED_OF_LIGHT",
    "EnvironmentKind",
    "EnvironmentSpec",
    "FastFading",
    "Scenario",
    "default_rho_d",
    "environment_preset",
    "place_uniform_disc",
    "draw_fast_fading",
    "large_scale_gain",
    "generate_scenario",
    "fraction_in_window",
]

SPEED_OF_LIGHT = 299_792_458.0
_BOLTZMANN = 1.380649e-23

#: Typical magnitude window of generated channel coefficients, used as a
#: plausibility diagnostic (fast fading has unbounded support, so this is a
#: soft check, not an invariant).
MAGNITUDE_WINDOW = (1e-15, 1e-4)


def default_rho_d(
    bandwidth_hz: float = 2.0e7,
    tx_power_w: float = 0.2,
    noise_figure_db: float = 9.0,
    temperature_k: float = 290.0,
) -> float:
    """Per-AP downlink SNR: transmit power over thermal noise in the band."""
    noise_w = _BOLTZMANN * temperature_k * bandwidth_hz * 10.0 ** (noise_figure_db / 10.0)
    return tx_power_w / noise_w


class EnvironmentKind(str, enum.Enum):
    LOS_60GHZ = "los60"
    URBAN_NLOS_2GHZ = "urban2"
    RURAL_NLOS_450MHZ = "rural450"


@dataclass(frozen=True)
class EnvironmentSpec:
    """Radio environment: carrier, deployment area and propagation model.

    ``path_loss_params`` holds the named constants of the NLoS macro
    path-loss expression (street width, building height, antenna heights);
    it is empty for the line-of-sight model, whose only parameter is the
    wavelength derived from ``carrier_hz``.
    """

    kind: EnvironmentKind
    carrier_hz: float
    area_radius_m: float
    rho_d: float
    bandwidth_hz: float = 2.0e7
    min_distance_m: float = 1.0
    path_loss_params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EnvironmentKind(self.kind))
        if self.carrier_hz <= 0 or self.area_radius_m <= 0:
            raise ValueError("carrier_hz and area_radius_m must be positive")
        if self.rho_d <= 0:
            raise ValueError("rho_d must be positive")
        if self.min_distance_m <= 0:
            raise ValueError("min_distance_m must be positive")
        object.__setattr__(self, "path_loss_params", dict(self.path_loss_params))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "carrier_hz": self.carrier_hz,
            "bandwidth_hz": self.bandwidth_hz,
            "area_radius_m": self.area_radius_m,
            "rho_d": self.rho_d,
            "min_distance_m": self.min_distance_m,
            "path_loss_params": dict(self.path_loss_params),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "EnvironmentSpec":
        return cls(
            kind=EnvironmentKind(data["kind"]),
            carrier_hz=float(data["carrier_hz"]),
            bandwidth_hz=float(data.get("bandwidth_hz", 2.0e7)),
            area_radius_m=float(data["area_radius_m"]),
            rho_d=float(data["rho_d"]),
            min_distance_m=float(data.get("min_distance_m", 1.0)),
            path_loss_params=dict(data.get("path_loss_params", {})),
        )


def environment_preset(name: str | EnvironmentKind, rho_d: float | None = None) -> EnvironmentSpec:
    """Build one of the three named environments.

    ``rho_d`` overrides the default SNR (200 mW transmit power over
    thermal noise in 20 MHz with a 9 dB noise figure).
    """
    kind = EnvironmentKind(name)
    if rho_d is None:
        rho_d = default_rho_d()
    if kind is EnvironmentKind.LOS_60GHZ:
        return EnvironmentSpec(kind=kind, carrier_hz=60e9, area_radius_m=500.0, rho_d=rho_d)
    if kind is EnvironmentKind.URBAN_NLOS_2GHZ:
        return EnvironmentSpec(
            kind=kind,
            carrier_hz=2e9,
            area_radius_m=500.0,
            rho_d=rho_d,
            path_loss_params={
                "street_width_m": 20.0,
                "building_height_m": 20.0,
                "bs_height_m": 25.0,
                "ut_height_m": 1.5,
            },
        )
    return EnvironmentSpec(
        kind=EnvironmentKind.RURAL_NLOS_450MHZ,
        carrier_hz=450e6,
        area_radius_m=4000.0,
        rho_d=rho_d,
        path_loss_params={
            "street_width_m": 20.0,
            "building_height_m": 5.0,
            "bs_height_m": 35.0,
            "ut_height_m": 1.5,
        },
    )


@dataclass(frozen=True)
class FastFading:
    """Complex fading matrix with i.i.d. unit-mean-square entries."""

    zeta: np.ndarray


@dataclass(frozen=True)
class Scenario:
    """One random drop: placements, environment and the resulting channel."""

    config: SystemConfig
    env: EnvironmentSpec
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    channel: ChannelMatrix
    seed: int


def place_uniform_disc(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` points uniformly over the disc of the given radius.

    Area-uniform sampling: ``r = radius * sqrt(u)`` with ``u`` uniform on
    [0, 1), angle uniform on [0, 2*pi).  Returns an ``(n, 2)`` array of
    (x, y) coordinates in meters.  Draw order: the ``n`` radii first, then
    the ``n`` angles.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def draw_fast_fading(num_aps: int, num_ues: int, rng: np.random.Generator) -> FastFading:
    """i.i.d. Rayleigh fading: ``zeta = (x1 + i x2) / sqrt(2)`` with standard
    normal ``x1, x2``, so ``E|zeta|^2 = 1``.

    Draw order: the full real part matrix, then the full imaginary part.
    """
    x1 = rng.standard_normal((num_aps, num_ues))
    x2 = rng.standard_normal((num_aps, num_ues))
    return FastFading((x1 + 1j * x2) / math.sqrt(2.0))


def _macro_nlos_path_loss_db(d_m: np.ndarray, carrier_hz: float, params: Mapping[str, float]) -> np.ndarray:
    """Macro-cell NLoS path loss in dB (urban/rural depending on parameters)."""
    w = params["street_width_m"]
    h = params["building_height_m"]
    h_bs = params["bs_height_m"]
    h_ut = params["ut_height_m"]
    fc_ghz = carrier_hz / 1e9
    return (
        161.04
        - 7.1 * np.log10(w)
        + 7.5 * np.log10(h)
        - (24.37 - 3.7 * (h / h_bs) ** 2) * np.log10(h_bs)
        + (43.42 - 3.1 * np.log10(h_bs)) * (np.log10(d_m) - 3.0)
        + 20.0 * np.log10(fc_ghz)
        - (3.2 * np.log10(11.75 * h_ut) ** 2 - 4.97)
    )


def large_scale_gain(env: EnvironmentSpec, d_m) -> np.ndarray:
    """Complex large-scale channel gain at distance ``d_m`` (meters).

    Line of sight: amplitude ``lambda / (4 pi d)`` with deterministic phase
    ``-2 pi d / lambda``.  NLoS: amplitude ``10^(-PL(d)/20)`` from the macro
    path-loss expression, zero phase (randomness enters only through the
    fast fading).  Distances are clamped below at ``env.min_distance_m``.
    """
    d = np.asarray(d_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    d = np.maximum(d, env.min_distance_m)
    if env.kind is EnvironmentKind.LOS_60GHZ:
        lam = SPEED_OF_LIGHT / env.carrier_hz
        amplitude = lam / (4.0 * np.pi * d)
        return amplitude * np.exp(-2j * np.pi * d / lam)
    pl_db = _macro_nlos_path_loss_db(d, env.carrier_hz, env.path_loss_params)
    return 10.0 ** (-pl_db / 20.0) + 0j


def generate_scenario(config: SystemConfig, env: EnvironmentSpec, seed: int) -> Scenario:
    """Generate one random scenario.

    The channel coefficient of AP ``m`` and UE ``k`` is the large-scale gain
    at their distance multiplied by the Rayleigh fading entry
    ``zeta[m, k]``.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    ap_positions = place_uniform_disc(config.num_aps, env.area_radius_m, rng)
    ue_positions = place_uniform_disc(config.num_ues, env.area_radius_m, rng)
    zeta = draw_fast_fading(config.num_aps, config.num_ues, rng).zeta
    distances = np.linalg.norm(ap_positions[:, None, :] - ue_positions[None, :, :], axis=2)
    g = large_scale_gain(env, distances) * zeta
    return Scenario(
        config=config,
        env=env,
        ap_positions=ap_positions,
        ue_positions=ue_positions,
        channel=ChannelMatrix(g),
        seed=int(seed),
    )


def fraction_in_window(channel: ChannelMatrix, window: tuple[float, float] = MAGNITUDE_WINDOW) -> float:
    """Fraction of channel magnitudes inside the plausibility window."""
    mags = np.abs(channel.entries)
    lo, hi = window
    return float(np.mean((mags >= lo) & (mags <= hi)))
