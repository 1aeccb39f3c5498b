#!/usr/bin/env python3
"""Inside the optimal precoder search: feasibility tests and bisection.

Probes the SINR-threshold feasibility program directly, shows the
certified bracket, and checks the returned precoder against the raw
constraint system.
"""
import numpy as np

from olpkit import (
    ChannelMatrix,
    FeasibilityProblem,
    constraint_residual,
    min_sinr,
    sinr_upper_bound,
    socp_feasible,
    solve_olp,
)

rng = np.random.default_rng(7)
rho_d = 1e8
g = (rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))) * 1e-4
channel = ChannelMatrix(g)

t_ub = sinr_upper_bound(channel, rho_d)
print(f"co-phasing upper bound on the max-min SINR: {t_ub:.2f}")

for t in (0.0, 0.25 * t_ub, 0.5 * t_ub, 0.9 * t_ub, 1.1 * t_ub):
    verdict = socp_feasible(FeasibilityProblem(channel, rho_d, t))
    print(f"  threshold {t:9.2f}: {'feasible' if verdict.feasible else 'infeasible':>10}"
          + (f"  (residual {verdict.residuals:.1e})" if verdict.feasible else ""))

result = solve_olp(channel, rho_d)
print(f"\nbisection: t* = {result.t_star:.3f}, infeasible at {result.t_upper:.3f}, "
      f"{result.iterations} feasibility solves, epsilon {result.epsilon}")

achieved = min_sinr(channel, result.precoder, rho_d)
print(f"certificate: min-SINR of returned precoder = {achieved:.3f} >= t*")
print(f"residual of the full constraint system at t*: "
      f"{constraint_residual(channel, result.precoder, rho_d, result.t_star):.2e}")

# single-user sanity: the optimum has a closed form rho * (sum |g_m|)^2
g1 = (rng.standard_normal((4, 1)) + 1j * rng.standard_normal((4, 1))) * 1e-4
ch1 = ChannelMatrix(g1)
closed = rho_d * np.sum(np.abs(g1)) ** 2
got = solve_olp(ch1, rho_d).t_star
print(f"\nsingle-user closed form {closed:.4f} vs bisection {got:.4f} "
      f"(relative gap {(closed - got) / closed:.4%})")
