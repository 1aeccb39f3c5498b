"""Core downlink model: channel matrix, precoder, SINR and spectral efficiency.

An ``M x K`` complex channel matrix couples ``M`` access points (APs, rows)
to ``K`` user equipments (UEs, columns).  A precoder is an ``M x K`` complex
matrix whose rows are constrained to unit 2-norm (per-AP power budget).  The
effective channel ``A = G^T @ Delta`` collects useful signal on its diagonal
and inter-user interference off the diagonal; all rate metrics derive from it.

All types are immutable after construction and all operations are pure
functions, so they are safe to use from multiple threads.  The lazily
computed pseudo-inverse and null-space projector are populated under a lock
so concurrent readers observe a single consistent value.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "RankDeficientChannelError",
    "SystemConfig",
    "ChannelMatrix",
    "Precoder",
    "EffectiveChannel",
    "UserMetrics",
    "effective_channel",
    "sinr",
    "min_sinr",
    "project_power",
    "pseudo_inverse",
    "null_projector",
]


class RankDeficientChannelError(ValueError):
    """The K x K Gram matrix of ``G^T`` is numerically singular.

    Raised instead of silently regularizing: a rank-deficient channel has no
    interference-free direction for every user and most downstream
    operations (pseudo-inverse features, zero forcing) are undefined.
    """


@dataclass(frozen=True)
class SystemConfig:
    """Static system dimensions and downlink SNR.

    ``rho_d`` is the per-AP downlink signal-to-noise ratio on a linear
    scale (dimensionless).  Massive MIMO assumes more APs than UEs; the
    constructor warns (but does not fail) when ``num_aps <= num_ues``.
    """

    num_aps: int
    num_ues: int
    rho_d: float

    def __post_init__(self) -> None:
        if self.num_aps < 1 or self.num_ues < 1:
            raise ValueError("num_aps and num_ues must be >= 1")
        if self.rho_d <= 0:
            raise ValueError("rho_d must be positive")
        if self.num_aps <= self.num_ues:
            warnings.warn(
                f"num_aps={self.num_aps} <= num_ues={self.num_ues}: the "
                "massive MIMO regime assumes more APs than UEs",
                stacklevel=2,
            )


def _as_complex_matrix(entries, name: str) -> np.ndarray:
    arr = np.array(entries, dtype=np.complex128, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


class ChannelMatrix:
    """Immutable complex ``M x K`` channel matrix with cached derived maps.

    The pseudo-inverse of ``G^T`` (an ``M x K`` matrix, so that
    ``G^T @ pinv == I_K``) and the orthogonal projector onto the null space
    of ``G^T`` (``M x M``) are computed on first access and cached.  A
    precomputed pseudo-inverse may be injected (e.g. when loading a stored
    sample) so that downstream consumers see bit-identical inputs.
    """

    __slots__ = ("_entries", "_pinv", "_proj", "_lock")

    def __init__(self, entries, pinv=None) -> None:
        self._entries = _as_complex_matrix(entries, "channel")
        if pinv is not None:
            pinv = _as_complex_matrix(pinv, "pinv")
            if pinv.shape != self._entries.shape:
                raise ValueError(
                    f"injected pinv has shape {pinv.shape}, expected {self._entries.shape}"
                )
        self._pinv = pinv
        self._proj = None
        self._lock = threading.Lock()

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def num_aps(self) -> int:
        return self._entries.shape[0]

    @property
    def num_ues(self) -> int:
        return self._entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._entries.shape

    @property
    def pinv(self) -> np.ndarray:
        """Pseudo-inverse of ``G^T``, shape ``(M, K)``; cached."""
        if self._pinv is None:
            with self._lock:
                if self._pinv is None:
                    self._pinv = _compute_pinv(self._entries)
        return self._pinv

    @property
    def null_projector(self) -> np.ndarray:
        """Orthogonal projector onto the null space of ``G^T``; cached."""
        if self._proj is None:
            pinv = self.pinv  # may raise RankDeficientChannelError
            with self._lock:
                if self._proj is None:
                    proj = np.eye(self.num_aps, dtype=np.complex128) - pinv @ self._entries.T
                    proj.setflags(write=False)
                    self._proj = proj
        return self._proj

    def __repr__(self) -> str:
        return f"ChannelMatrix(shape={self.shape})"


def _compute_pinv(g: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of ``G^T`` via its K x K Hermitian Gram system.

    Solves ``(G^T @ conj(G))`` by Cholesky; a failed factorization signals a
    singular Gram matrix and is reported as :class:`RankDeficientChannelError`.
    """
    gt = g.T
    gram = gt @ gt.conj().T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RankDeficientChannelError(
            f"channel of shape {g.shape} has a singular K x K Gram matrix; "
            "G^T lacks full row rank"
        ) from exc
    inv_gram = scipy.linalg.cho_solve(factor, np.eye(g.shape[1]), check_finite=False)
    pinv = gt.conj().T @ inv_gram
    pinv.setflags(write=False)
    return pinv


@dataclass(frozen=True)
class Precoder:
    """Complex ``M x K`` precoding matrix.

    Rows (one per AP) carry that AP's coefficients toward every UE; columns
    (one per UE) are that UE's beamforming vector across APs.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _as_complex_matrix(self.entries, "precoder"))

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class EffectiveChannel:
    """``K x K`` matrix ``A = G^T @ Delta`` combining channel and precoding."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _as_complex_matrix(self.entries, "effective channel"))


@dataclass(frozen=True)
class UserMetrics:
    """Per-user SINR (linear) and spectral efficiency ``log2(1 + SINR)``."""

    sinr: np.ndarray
    se: np.ndarray


def effective_channel(channel: ChannelMatrix, precoder: Precoder) -> EffectiveChannel:
    """Return ``A = G^T @ Delta``."""
    if channel.shape != precoder.shape:
        raise ValueError(
            f"dimension mismatch: channel {channel.shape} vs precoder {precoder.shape}"
        )
    return EffectiveChannel(channel.entries.T @ precoder.entries)


def sinr(channel: ChannelMatrix, precoder: Precoder, rho_d: float) -> UserMetrics:
    """Per-user SINR and spectral efficiency under precoder ``Delta``.

    For the effective channel ``A = G^T @ Delta``::

        sinr_k = rho_d |a_kk|^2 / (1 + rho_d * sum_{l != k} |a_kl|^2)
        se_k   = log2(1 + sinr_k)
    """
    if rho_d <= 0:
        raise ValueError("rho_d must be positive")
    a = effective_channel(channel, precoder).entries
    signal = np.abs(np.diag(a)) ** 2
    interference = np.sum(np.abs(a) ** 2, axis=1) - signal
    values = rho_d * signal / (1.0 + rho_d * interference)
    return UserMetrics(sinr=values, se=np.log2(1.0 + values))


def min_sinr(channel: ChannelMatrix, precoder: Precoder, rho_d: float) -> float:
    """Smallest per-user SINR (the max-min objective value of a precoder)."""
    return float(sinr(channel, precoder, rho_d).sinr.min())


def project_power(precoder: Precoder) -> Precoder:
    """Project onto the per-AP power constraint: rows with 2-norm >= 1 are
    rescaled to unit norm, rows below 1 are untouched.

    The rescale is repeated while rounding leaves a computed row norm above
    1, which makes the operation exactly idempotent.
    """
    d = np.array(precoder.entries)
    norms = np.linalg.norm(d, axis=1)
    over = norms >= 1.0
    if over.any():
        d[over] /= norms[over, None]
        while True:
            norms = np.linalg.norm(d, axis=1)
            over = norms > 1.0
            if not over.any():
                break
            d[over] /= norms[over, None]
    return Precoder(d)


def pseudo_inverse(channel: ChannelMatrix) -> np.ndarray:
    """Pseudo-inverse of ``G^T`` (shape ``(M, K)``), cached on the channel."""
    return channel.pinv


def null_projector(channel: ChannelMatrix) -> np.ndarray:
    """Projector onto the null space of ``G^T`` (shape ``(M, M)``), cached."""
    return channel.null_projector
