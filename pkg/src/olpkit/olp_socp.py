"""Optimal linear precoding by bisection over SOCP feasibility tests.

The max-min SINR precoding problem is solved exactly (up to a bisection
precision) by searching over the SINR threshold ``t``: for each candidate
``t`` a second-order cone program decides whether some precoder delivers
SINR >= t to every user under the per-AP power constraints.

The feasibility test is realized as a real-valued cone program over
``x = (Re Delta, Im Delta)`` and solved as a margin-maximization program:
maximize the slack ``s`` by which every constraint is satisfied, declare
feasible iff the optimal margin clears a small positive threshold.  This
yields strictly interior precoders and a robust infeasibility signal
without relying on solver infeasibility certificates.  Feasibility of the
returned precoder is always re-verified by this module from the raw
constraint residuals; the conic solver is never trusted on its own.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import cvxpy as cp
import numpy as np

from .system_model import ChannelMatrix, Precoder

__all__ = [
    "SolverStatus",
    "SolverConfig",
    "FeasibilityProblem",
    "FeasibilityVerdict",
    "BisectionResult",
    "OlpSolverError",
    "constraint_residual",
    "socp_feasible",
    "solve_olp",
    "sinr_upper_bound",
    "decompose_precoder",
]


class SolverStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_TROUBLE = "numerical_trouble"


class OlpSolverError(RuntimeError):
    """The bisection could not be run (e.g. no infeasible upper bracket)."""


@dataclass(frozen=True)
class SolverConfig:
    """Bisection and feasibility tolerances.

    ``epsilon`` is the bisection precision: the search stops when the
    bracket width drops below ``epsilon * max(1, t_lower)`` (mixed
    absolute/relative).  ``margin`` is the minimum constraint slack for a
    margin-maximization solve to count as feasible.
    """

    epsilon: float = 0.01
    feas_tol: float = 1e-7
    max_bisection_iters: int = 64
    margin: float = 1e-9
    conic_solver: str = "CLARABEL"

    def __post_init__(self) -> None:
        if min(self.epsilon, self.feas_tol, self.margin) <= 0 or self.max_bisection_iters <= 0:
            raise ValueError("all solver configuration values must be positive")


@dataclass(frozen=True)
class FeasibilityProblem:
    """Is min-SINR >= t achievable for this channel and downlink SNR?"""

    channel: ChannelMatrix
    rho_d: float
    t: float

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("threshold t must be nonnegative")
        if self.rho_d <= 0:
            raise ValueError("rho_d must be positive")


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Outcome of one feasibility test.

    ``precoder`` is present iff feasible; ``residuals`` is the maximum
    re-verified constraint violation of that precoder (0 for a strictly
    interior point).
    """

    feasible: bool
    precoder: Precoder | None
    residuals: float
    solver_status: SolverStatus


@dataclass(frozen=True)
class BisectionResult:
    """Certified outcome of the threshold bisection.

    ``t_star`` is a feasibility-certified lower bound on the optimal
    max-min SINR (linear scale) and ``precoder`` achieves it;
    ``t_upper`` returned an infeasible verdict.  ``iterations`` counts
    feasibility solves, ``converged`` is False when the iteration budget
    ran out before the bracket closed.
    """

    t_star: float
    precoder: Precoder
    t_upper: float
    iterations: int
    epsilon: float
    converged: bool
    num_numerical_trouble: int = 0


def sinr_upper_bound(channel: ChannelMatrix, rho_d: float) -> float:
    """Interference-free co-phasing bound: ``rho_d * min_k (sum_m |g_mk|)^2``.

    No feasible precoder can give user ``k`` more than
    ``rho_d * (sum_m |g_mk|)^2`` (triangle inequality with unit per-entry
    magnitude), so the max-min value is at most the minimum over users.
    """
    col_mass = np.sum(np.abs(channel.entries), axis=0)
    return float(rho_d * np.min(col_mass) ** 2)


def constraint_residual(channel: ChannelMatrix, precoder: Precoder, rho_d: float, t: float) -> float:
    """Maximum violation of the threshold-``t`` constraint system.

    Checks the cone constraints ``Re(a_kk) >= sqrt(t) * ||atilde_k||``
    (where ``atilde_k`` stacks the off-diagonal row entries and the noise
    term ``1/sqrt(rho_d)``), diagonal realness/nonnegativity, and the
    per-AP row-norm bounds.  Zero means every constraint holds.
    """
    a = channel.entries.T @ precoder.entries
    diag = np.diag(a)
    off_sq = np.sum(np.abs(a) ** 2, axis=1) - np.abs(diag) ** 2
    atilde = np.sqrt(np.maximum(off_sq, 0.0) + 1.0 / rho_d)
    cone = np.max(math.sqrt(t) * atilde - diag.real)
    imag = np.max(np.abs(diag.imag))
    negative = np.max(-diag.real)
    power = np.max(np.linalg.norm(precoder.entries, axis=1)) - 1.0
    return float(max(cone, imag, negative, power, 0.0))


class _MarginProgram:
    """Margin-maximization SOCP over a precoder, parameterized in sqrt(t).

    Built once per (channel, rho_d) and re-solved cheaply for each
    bisection threshold.
    """

    def __init__(self, g: np.ndarray, rho_d: float, conic_solver: str) -> None:
        m, k = g.shape
        self._solver = conic_solver
        gr, gi = np.ascontiguousarray(g.real), np.ascontiguousarray(g.imag)
        self._xr = cp.Variable((m, k))
        self._xi = cp.Variable((m, k))
        self._s = cp.Variable()
        self._sqrt_t = cp.Parameter(nonneg=True)
        a_re = gr.T @ self._xr - gi.T @ self._xi
        a_im = gr.T @ self._xi + gi.T @ self._xr
        inv_sqrt_rho = 1.0 / math.sqrt(rho_d)
        constraints = []
        for user in range(k):
            others = [l for l in range(k) if l != user]
            tail = [np.array([inv_sqrt_rho])]
            if others:
                tail = [a_re[user, others], a_im[user, others]] + tail
            vec = cp.hstack(tail)
            constraints.append(cp.SOC(a_re[user, user] - self._s, self._sqrt_t * vec))
            constraints.append(a_im[user, user] == 0)
            constraints.append(a_re[user, user] >= 0)
        for ap in range(m):
            constraints.append(cp.SOC(1.0 - self._s, cp.hstack([self._xr[ap, :], self._xi[ap, :]])))
        self._problem = cp.Problem(cp.Maximize(self._s), constraints)

    def query(self, t: float) -> tuple[str, float | None, np.ndarray | None]:
        """Solve at threshold ``t``.

        Returns (status, margin, precoder entries) with status one of
        ``"optimal"`` (solved to tolerance), ``"inaccurate"`` (solved at
        reduced accuracy) or ``"fail"``.
        """
        self._sqrt_t.value = math.sqrt(t)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self._problem.solve(solver=self._solver)
        except cp.error.SolverError:
            return "fail", None, None
        if self._problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return "fail", None, None
        if self._s.value is None or self._xr.value is None:
            return "fail", None, None
        status = "optimal" if self._problem.status == cp.OPTIMAL else "inaccurate"
        return status, float(self._s.value), self._xr.value + 1j * self._xi.value


def _rescale_factor(g: np.ndarray) -> float:
    """Power-of-two factor bringing the median channel magnitude near 1."""
    mags = np.abs(g)
    mags = mags[mags > 0]
    if mags.size == 0:
        return 1.0
    return 2.0 ** (-round(math.log2(float(np.median(mags)))))


class _RetryingOracle:
    """Feasibility oracle with one conditioning retry.

    A solver failure (or a reduced-accuracy solve) consults a second copy
    of the program built on ``(c * G, rho_d / c^2)`` with ``c`` a power of
    two near the inverse median channel magnitude; the threshold
    constraint system is invariant under that rescaling, so a retry
    precoder is valid for the original problem.  Any feasible verdict is
    re-verified from the raw constraint residuals.  When both attempts
    fail outright the verdict is NUMERICAL_TROUBLE, which the bisection
    treats as infeasible (a conservative direction for a certified lower
    bound).
    """

    def __init__(self, channel: ChannelMatrix, rho_d: float, cfg: SolverConfig, program_factory) -> None:
        self._channel = channel
        self._rho_d = rho_d
        self._cfg = cfg
        self._factory = program_factory
        self._program = program_factory(channel.entries, rho_d, cfg.conic_solver)
        self._retry_program = None
        self.num_trouble = 0

    def _retry(self):
        if self._retry_program is None:
            c = _rescale_factor(self._channel.entries)
            self._retry_program = self._factory(
                c * self._channel.entries, self._rho_d / c**2, self._cfg.conic_solver
            )
        return self._retry_program

    def __call__(self, t: float) -> FeasibilityVerdict:
        cfg = self._cfg
        saw_inaccurate_infeasible = False
        attempts = [self._program.query(t)]
        if attempts[0][0] != "optimal":
            attempts.append(self._retry().query(t))
        for status, margin, entries in attempts:
            if status == "fail":
                continue
            if margin >= cfg.margin:
                precoder = Precoder(entries)
                residual = constraint_residual(self._channel, precoder, self._rho_d, t)
                if residual <= cfg.feas_tol:
                    return FeasibilityVerdict(True, precoder, residual, SolverStatus.OPTIMAL)
                continue  # claimed margin contradicts the residuals: try the next attempt
            if status == "optimal":
                return FeasibilityVerdict(False, None, float("inf"), SolverStatus.INFEASIBLE)
            saw_inaccurate_infeasible = True
        if saw_inaccurate_infeasible:
            return FeasibilityVerdict(False, None, float("inf"), SolverStatus.INFEASIBLE)
        self.num_trouble += 1
        return FeasibilityVerdict(False, None, float("inf"), SolverStatus.NUMERICAL_TROUBLE)


def socp_feasible(problem: FeasibilityProblem, cfg: SolverConfig = SolverConfig()) -> FeasibilityVerdict:
    """Decide whether min-SINR >= ``problem.t`` is achievable.

    Feasible verdicts carry a strictly interior precoder whose constraint
    residuals have been re-verified against ``cfg.feas_tol``.
    """
    oracle = _RetryingOracle(problem.channel, problem.rho_d, cfg, _MarginProgram)
    return oracle(problem.t)


def _bisect_max_min(
    oracle: Callable[[float], FeasibilityVerdict],
    t_upper: float,
    shape: tuple[int, int],
    cfg: SolverConfig,
) -> BisectionResult:
    """Bisection driver shared by the optimal precoder and the MR baseline."""
    zero = Precoder(np.zeros(shape, dtype=np.complex128))
    if t_upper <= 0:
        return BisectionResult(0.0, zero, 0.0, 0, cfg.epsilon, True)
    lo, best = 0.0, zero
    hi = t_upper
    iterations = 0
    # establish the infeasible upper end of the bracket
    for _ in range(8):
        verdict = oracle(hi)
        iterations += 1
        if not verdict.feasible:
            break
        lo, best = hi, verdict.precoder
        hi *= 2.0
    else:
        raise OlpSolverError("could not find an infeasible upper bisection bracket")
    while hi - lo > cfg.epsilon * max(1.0, lo) and iterations < cfg.max_bisection_iters:
        mid = 0.5 * (lo + hi)
        verdict = oracle(mid)
        iterations += 1
        if verdict.feasible:
            lo, best = mid, verdict.precoder
        else:
            hi = mid
    converged = hi - lo <= cfg.epsilon * max(1.0, lo)
    trouble = getattr(oracle, "num_trouble", 0)
    return BisectionResult(lo, best, hi, iterations, cfg.epsilon, converged, trouble)


def solve_olp(channel: ChannelMatrix, rho_d: float, cfg: SolverConfig = SolverConfig()) -> BisectionResult:
    """Compute the max-min-SINR optimal linear precoder by bisection.

    Brackets the optimum between 0 and the interference-free co-phasing
    bound, then bisects; each feasible threshold comes with a certified
    precoder.  The returned precoder has real nonnegative effective-channel
    diagonal by construction, so no phase correction is needed afterwards.
    """
    if rho_d <= 0:
        raise ValueError("rho_d must be positive")
    channel.pinv  # noqa: B018 - raises RankDeficientChannelError early
    t_upper = sinr_upper_bound(channel, rho_d)
    oracle = _RetryingOracle(channel, rho_d, cfg, _MarginProgram)
    return _bisect_max_min(oracle, t_upper, channel.shape, cfg)


def decompose_precoder(channel: ChannelMatrix, precoder: Precoder) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a precoder into signal, interference and null-space components.

    With ``A = G^T @ Delta`` and ``pinv`` the pseudo-inverse of ``G^T``::

        y1 = pinv @ diag(A)        (useful-signal part)
        y2 = pinv @ (A - diag(A))  (interference part)
        y3 = Delta - pinv @ A      (null-space part: no effect on SINRs)

    The three parts sum back to ``Delta`` exactly.
    """
    pinv = channel.pinv
    a = channel.entries.T @ precoder.entries
    diag = np.diag(a)
    y1 = pinv * diag[None, :]
    y2 = pinv @ (a - np.diag(diag))
    y3 = precoder.entries - y1 - y2
    return y1, y2, y3
