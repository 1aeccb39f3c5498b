import numpy as np
import pytest

from olpkit import (
    ChannelMatrix,
    FeasibilityProblem,
    Precoder,
    RankDeficientChannelError,
    SolverConfig,
    SolverStatus,
    constraint_residual,
    decompose_precoder,
    min_sinr,
    sinr_upper_bound,
    socp_feasible,
    solve_olp,
)

from conftest import make_channel

RHO = 1e8
CFG = SolverConfig()


class TestSocpFeasible:
    def test_zero_threshold_feasible(self, rng):
        ch = make_channel(rng, 4, 2, scale=1e-4)
        verdict = socp_feasible(FeasibilityProblem(ch, RHO, 0.0))
        assert verdict.feasible
        assert verdict.solver_status is SolverStatus.OPTIMAL
        assert verdict.residuals <= CFG.feas_tol

    def test_above_cophasing_bound_infeasible(self, rng):
        ch = make_channel(rng, 4, 2, scale=1e-4)
        t = 1.01 * sinr_upper_bound(ch, RHO)
        verdict = socp_feasible(FeasibilityProblem(ch, RHO, t))
        assert not verdict.feasible
        assert verdict.precoder is None

    def test_single_user_closed_form_bracket(self):
        # K=1 optimum is exactly rho * (sum |g_m|)^2 = 1e8 * (2e-4)^2 = 4
        ch = ChannelMatrix(np.array([[1e-4], [1e-4]], dtype=complex))
        assert socp_feasible(FeasibilityProblem(ch, 1e8, 3.9)).feasible
        assert not socp_feasible(FeasibilityProblem(ch, 1e8, 4.1)).feasible

    def test_feasible_verdict_carries_interior_precoder(self, rng):
        ch = make_channel(rng, 8, 3, scale=1e-4)
        t = 0.25 * sinr_upper_bound(ch, RHO)
        verdict = socp_feasible(FeasibilityProblem(ch, RHO, t))
        if verdict.feasible:
            assert min_sinr(ch, verdict.precoder, RHO) >= t - CFG.feas_tol * (1 + t)
            assert constraint_residual(ch, verdict.precoder, RHO, t) <= CFG.feas_tol

    def test_rejects_negative_threshold(self, rng):
        ch = make_channel(rng, 2, 1)
        with pytest.raises(ValueError):
            FeasibilityProblem(ch, RHO, -1.0)


class TestSolveOlp:
    def test_single_user_closed_form(self, rng):
        for _ in range(5):
            g = (rng.standard_normal((3, 1)) + 1j * rng.standard_normal((3, 1))) * 1e-4
            ch = ChannelMatrix(g)
            expected = RHO * np.sum(np.abs(g)) ** 2
            result = solve_olp(ch, RHO)
            assert result.converged
            assert expected * (1 - CFG.epsilon) <= result.t_star <= expected

    def test_certificate(self, rng):
        ch = make_channel(rng, 8, 3, scale=1e-4)
        result = solve_olp(ch, RHO)
        assert result.converged
        assert result.t_star <= result.t_upper
        assert min_sinr(ch, result.precoder, RHO) >= result.t_star - 1e-6
        # re-verifiable bracket
        assert socp_feasible(FeasibilityProblem(ch, RHO, result.t_star)).feasible
        assert not socp_feasible(FeasibilityProblem(ch, RHO, result.t_upper)).feasible

    def test_diagonal_real_nonnegative(self, rng):
        ch = make_channel(rng, 8, 3, scale=1e-4)
        result = solve_olp(ch, RHO)
        diag = np.diag(ch.entries.T @ result.precoder.entries)
        assert np.abs(diag.imag).max() <= CFG.feas_tol
        assert diag.real.min() >= -CFG.feas_tol

    def test_monotone_feasibility_20_instances(self, rng):
        # feasible(t) implies feasible(t/2): check at a certified-feasible t
        for trial in range(20):
            shape = (4, 2) if trial % 2 == 0 else (6, 3)
            ch = make_channel(rng, *shape, scale=1e-4)
            t = solve_olp(ch, RHO).t_star
            if t == 0.0:
                continue
            assert socp_feasible(FeasibilityProblem(ch, RHO, t)).feasible
            assert socp_feasible(FeasibilityProblem(ch, RHO, t / 2)).feasible

    def test_permutation_leaves_value_invariant(self, rng):
        ch = make_channel(rng, 6, 3, scale=1e-4)
        base = solve_olp(ch, RHO)
        row = rng.permutation(6)
        col = rng.permutation(3)
        permuted = ChannelMatrix(ch.entries[row][:, col])
        other = solve_olp(permuted, RHO)
        # the optimum can be non-unique, so compare values rather than matrices
        assert abs(other.t_star - base.t_star) <= 2 * CFG.epsilon * max(1.0, base.t_star)

    def test_rank_deficiency_raises(self):
        with pytest.raises(RankDeficientChannelError):
            solve_olp(ChannelMatrix(np.ones((4, 2), dtype=complex)), RHO)

    def test_iteration_budget_flag(self, rng):
        ch = make_channel(rng, 4, 2, scale=1e-4)
        tight = SolverConfig(epsilon=1e-9, max_bisection_iters=4)
        result = solve_olp(ch, RHO, tight)
        assert not result.converged
        assert result.iterations <= 4

    def test_scale_invariance_of_value(self, rng):
        ch = make_channel(rng, 6, 2, scale=1e-4)
        base = solve_olp(ch, RHO)
        scaled = solve_olp(ChannelMatrix(1e4 * ch.entries), RHO / 1e8)
        assert abs(scaled.t_star - base.t_star) <= 2 * CFG.epsilon * max(1.0, base.t_star)


class TestDecompose:
    def test_row_space_precoder_has_no_null_component(self, rng):
        ch = make_channel(rng, 6, 3, scale=1.0)
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        delta = Precoder(ch.pinv @ b)
        _, _, y3 = decompose_precoder(ch, delta)
        assert np.abs(y3).max() <= 1e-10

    def test_null_space_precoder_has_no_signal(self, rng):
        ch = make_channel(rng, 6, 3, scale=1.0)
        r = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        delta = Precoder(ch.null_projector @ r)
        y1, y2, _ = decompose_precoder(ch, delta)
        assert np.abs(y1).max() <= 1e-10
        assert np.abs(y2).max() <= 1e-10

    def test_reconstruction_identity(self, rng):
        ch = make_channel(rng, 8, 3, scale=1e-5)
        delta = Precoder(rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3)))
        y1, y2, y3 = decompose_precoder(ch, delta)
        assert np.abs(y1 + y2 + y3 - delta.entries).max() <= 1e-12
