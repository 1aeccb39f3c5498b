"""Zero-forcing and maximum-ratio baseline precoders.

Zero forcing nulls all inter-user interference through the channel
pseudo-inverse and splits power so every user sees the same SINR.  Maximum
ratio points each entry of the precoder along the conjugated channel and
optimizes the per-link amplitudes for the max-min SINR objective with the
same bisection-over-SOCP machinery as the optimal precoder.  Neither
baseline dominates the other in general; the optimal linear precoder
dominates both.
"""

from __future__ import annotations

import math
import warnings

import cvxpy as cp
import numpy as np

from .olp_socp import (
    BisectionResult,
    SolverConfig,
    _bisect_max_min,
    _RetryingOracle,
    sinr_upper_bound,
)
from .system_model import ChannelMatrix, Precoder

__all__ = ["zero_forcing", "maximum_ratio", "maximum_ratio_result"]


def zero_forcing(channel: ChannelMatrix, rho_d: float) -> Precoder:
    """Zero-forcing precoder with max-min optimal power scaling.

    ``Delta = c * pinv`` makes the effective channel ``c * I`` (zero
    interference, every user at SINR ``rho_d * c^2``); the scale
    ``c = 1 / max_m ||row_m(pinv)||`` is the largest one satisfying every
    per-AP power constraint, so the tightest constraint is active.
    """
    if rho_d <= 0:
        raise ValueError("rho_d must be positive")
    pinv = channel.pinv
    c = 1.0 / np.linalg.norm(pinv, axis=1).max()
    return Precoder(c * pinv)


class _MrMarginProgram:
    """Margin-maximization SOCP over per-link precoder amplitudes.

    The precoder direction is fixed entrywise to the conjugated channel:
    ``delta[m, k] = v[m, k] * conj(g[m, k]) / |g[m, k]|`` with amplitudes
    ``v >= 0`` (zero wherever the channel entry is zero).  The
    effective-channel entries are linear in ``v`` with coefficients of the
    same magnitude as the channel, the diagonal is real nonnegative by
    construction, and the per-AP power constraints are plain row-norm
    cones over ``v``, so max-min power control reduces to the same
    threshold feasibility structure as the optimal precoder.
    """

    def __init__(self, g: np.ndarray, rho_d: float, conic_solver: str) -> None:
        m, k = g.shape
        self._solver = conic_solver
        abs_g = np.abs(g)
        unit = np.zeros_like(g)
        nonzero = abs_g > 0
        unit[nonzero] = np.conj(g[nonzero]) / abs_g[nonzero]
        self._unit = unit
        self._v = cp.Variable((m, k), nonneg=True)
        self._s = cp.Variable()
        self._sqrt_t = cp.Parameter(nonneg=True)
        inv_sqrt_rho = 1.0 / math.sqrt(rho_d)
        constraints = []
        for user in range(k):
            signal = abs_g[:, user] @ self._v[:, user]
            tail = []
            for other in range(k):
                if other == user:
                    continue
                cross = g[:, user] * unit[:, other]
                tail.append(cross.real @ self._v[:, other])
                tail.append(cross.imag @ self._v[:, other])
            tail.append(np.array([inv_sqrt_rho]))
            constraints.append(cp.SOC(signal - self._s, self._sqrt_t * cp.hstack(tail)))
        for ap in range(m):
            constraints.append(cp.SOC(1.0 - self._s, self._v[ap, :]))
        self._problem = cp.Problem(cp.Maximize(self._s), constraints)

    def query(self, t: float) -> tuple[str, float | None, np.ndarray | None]:
        self._sqrt_t.value = math.sqrt(t)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self._problem.solve(solver=self._solver)
        except cp.error.SolverError:
            return "fail", None, None
        if self._problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return "fail", None, None
        if self._s.value is None or self._v.value is None:
            return "fail", None, None
        status = "optimal" if self._problem.status == cp.OPTIMAL else "inaccurate"
        return status, float(self._s.value), np.maximum(self._v.value, 0.0) * self._unit


def maximum_ratio_result(
    channel: ChannelMatrix, rho_d: float, cfg: SolverConfig = SolverConfig()
) -> BisectionResult:
    """Maximum-ratio precoder with full bisection diagnostics.

    Works for any nonzero channel (full column rank is not required).
    Under the conditioning retry's rescaling ``(c * G, rho_d / c^2)`` the
    precoder assembled from the rescaled program is exactly a precoder of
    the original problem (the unit directions are scale-invariant), so the
    shared retry machinery applies unchanged.
    """
    if rho_d <= 0:
        raise ValueError("rho_d must be positive")
    t_upper = sinr_upper_bound(channel, rho_d)
    oracle = _RetryingOracle(channel, rho_d, cfg, _MrMarginProgram)
    return _bisect_max_min(oracle, t_upper, channel.shape, cfg)


def maximum_ratio(channel: ChannelMatrix, rho_d: float, cfg: SolverConfig = SolverConfig()) -> Precoder:
    """Conjugate-direction precoder with max-min optimal power amplitudes."""
    return maximum_ratio_result(channel, rho_d, cfg).precoder
