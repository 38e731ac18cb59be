"""Numerical verification of the analytic properties the solver rests on.

Every claim the optimizer depends on is checked here on a dense parameter
grid: bounds and endpoint values of the delivery probability, agreement of
the closed-form derivative with finite differences, the slope bounds that
give a unique crossing point, the moment-ratio and term-matching identities
behind the fixed-point map, the contraction factor staying below one, and
the solver itself against the derivative-free grid search.

Strict inequalities are tested with a small outward margin because central
finite differences carry noise of order 1e-10 and several bounds are
approached asymptotically on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .analytic import (
    ChannelConfig,
    admitted_load,
    binomial_pmf,
    deadline_load,
    delivery_prob,
    delivery_prob_derivative,
    grid_search_optimum,
    iteration_map,
    lower_bound_tau,
    solve_optimal_tau,
    success_size_ratio,
    window_bound,
)

__all__ = ["VerifyGrid", "CheckResult", "run_all", "CHECK_NAMES"]


@dataclass(frozen=True)
class VerifyGrid:
    """Parameter grid the property checks run over.

    The default covers tau from 0.01 to 0.99 in steps of 0.01, small and
    large populations, every receiver capability up to m_limit, and short
    through long deadlines. sweep_* define the denser population sweep used
    only for the solver-versus-grid-search comparison.
    """

    tau_values: tuple[float, ...] = tuple(i / 100 for i in range(1, 100))
    n_values: tuple[int, ...] = (2, 5, 10, 50)
    m_values: tuple[int, ...] | None = None
    m_limit: int = 8
    d_values: tuple[int, ...] = (1, 5, 20)
    sweep_n: tuple[int, ...] = tuple(range(6, 51))
    sweep_m: tuple[int, ...] = (2, 5, 8)
    sweep_d: tuple[int, ...] = (1, 5, 10, 20)

    def mpr_values(self, n_users: int) -> tuple[int, ...]:
        if self.m_values is not None:
            return tuple(m for m in self.m_values if 1 <= m < n_users)
        return tuple(range(1, min(self.m_limit, n_users - 1) + 1))

    def cells(self):
        for n in self.n_values:
            for m in self.mpr_values(n):
                for d in self.d_values:
                    yield n, m, d

    def sweep_cells(self):
        for n in self.sweep_n:
            for m in self.sweep_m:
                if m < n:
                    for d in self.sweep_d:
                        yield n, m, d


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str


def _central_diff(f, x: float, h: float) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)


def check_sdp_bounds(grid: VerifyGrid) -> CheckResult:
    """delivery_prob stays in [0, 1] and vanishes at tau = 0 and tau = 1."""
    worst = -math.inf
    where = ""
    for n, m, d in grid.cells():
        cfg = ChannelConfig(n, m, d)
        for tau in (0.0, 1.0):
            v = abs(delivery_prob(cfg, tau))
            if v > worst:
                worst, where = v, f"n={n} m={m} d={d} tau={tau}"
        for tau in grid.tau_values:
            v = delivery_prob(cfg, tau)
            out = max(-v, v - 1.0)
            if out > worst:
                worst, where = out, f"n={n} m={m} d={d} tau={tau}"
    return CheckResult(
        "sdp_bounds",
        worst <= 0.0,
        worst,
        f"max excursion outside [0, 1] (and endpoint residual) = {worst:.3e}"
        f" at {where}",
    )


def check_sdp_monotone_deadline(grid: VerifyGrid) -> CheckResult:
    """A longer deadline never lowers the delivery probability."""
    worst = -math.inf
    where = ""
    d_sorted = sorted(grid.d_values)
    for n in grid.n_values:
        for m in grid.mpr_values(n):
            for tau in grid.tau_values:
                values = [
                    delivery_prob(ChannelConfig(n, m, d), tau)
                    for d in d_sorted
                ]
                for k in range(len(values) - 1):
                    drop = values[k] - values[k + 1]
                    if drop > worst:
                        worst = drop
                        where = (
                            f"n={n} m={m} tau={tau} "
                            f"d={d_sorted[k]}->{d_sorted[k + 1]}"
                        )
    return CheckResult(
        "sdp_monotone_deadline",
        worst <= 1e-15,
        worst,
        f"max decrease when lengthening the deadline = {worst:.3e} at {where}",
    )


def check_derivative_fd(
    grid: VerifyGrid, fd_step: float, derivative_tol: float
) -> CheckResult:
    """Closed-form derivative against a central finite difference.

    Scaled error |analytic - fd| / (1 + |analytic|), because the derivative
    passes through zero at the optimum where relative error is meaningless.
    """
    worst = -math.inf
    where = ""
    for n, m, d in grid.cells():
        cfg = ChannelConfig(n, m, d)
        f = lambda t: delivery_prob(cfg, t)
        for tau in grid.tau_values:
            a = delivery_prob_derivative(cfg, tau)
            fd = _central_diff(f, tau, fd_step)
            err = abs(a - fd) / (1.0 + abs(a))
            if err > worst:
                worst, where = err, f"n={n} m={m} d={d} tau={tau}"
    return CheckResult(
        "derivative_finite_difference",
        worst <= derivative_tol,
        worst,
        f"max scaled derivative error = {worst:.3e} at {where} "
        f"(tol {derivative_tol:g})",
    )


def check_admitted_load_slope(
    grid: VerifyGrid, fd_step: float, margin: float
) -> CheckResult:
    """The conditional interferer mean rises with tau, with slope below
    n_users - 1."""
    worst = -math.inf
    where = ""
    for n in grid.n_values:
        for m in grid.mpr_values(n):
            cfg = ChannelConfig(n, m, 1)
            f = lambda t: admitted_load(cfg, t)
            for tau in grid.tau_values:
                slope = _central_diff(f, tau, fd_step)
                out = max(-slope, slope - (n - 1))
                if out > worst:
                    worst, where = out, f"n={n} m={m} tau={tau}"
    return CheckResult(
        "admitted_load_slope",
        worst <= margin,
        worst,
        f"max violation of 0 <= slope <= n-1 = {worst:.3e} at {where} "
        f"(margin {margin:g})",
    )


def check_deadline_load_slope(
    grid: VerifyGrid, fd_step: float, margin: float
) -> CheckResult:
    """The deadline-window load rises strictly faster than n_users - 1,
    which is what makes the two curves cross exactly once."""
    worst = -math.inf
    where = ""
    for n in grid.n_values:
        for d in grid.d_values:
            cfg = ChannelConfig(n, 1, d)
            f = lambda t: deadline_load(cfg, t)
            for tau in grid.tau_values:
                slope = _central_diff(f, tau, fd_step)
                short = (n - 1) - slope
                if short > worst:
                    worst, where = short, f"n={n} d={d} tau={tau}"
    return CheckResult(
        "deadline_load_slope",
        worst <= margin,
        worst,
        f"max shortfall below slope > n-1 = {worst:.3e} at {where} "
        f"(margin {margin:g})",
    )


def check_moment_ratio_identity(
    grid: VerifyGrid, tol: float
) -> CheckResult:
    """Decoded-batch moment ratio exceeds the conditional interferer mean
    by exactly one."""
    worst = -math.inf
    where = ""
    for n in grid.n_values:
        for m in grid.mpr_values(n):
            # Neither side depends on the deadline, so any value works.
            cfg = ChannelConfig(n, m, 1)
            for tau in grid.tau_values:
                residual = abs(
                    success_size_ratio(cfg, tau)
                    - 1.0
                    - admitted_load(cfg, tau)
                )
                if residual > worst:
                    worst, where = residual, f"n={n} m={m} tau={tau}"
    return CheckResult(
        "moment_ratio_identity",
        worst <= tol,
        worst,
        f"max |ratio - 1 - load| = {worst:.3e} at {where} (tol {tol:g})",
    )


def check_term_matching_identity(
    grid: VerifyGrid, tol: float
) -> CheckResult:
    """The term-by-term reindexing behind the moment-ratio identity:

        sum_{i=1..m} i   * P(X=i) = n tau * sum_{j<m} P(Y=j)
        sum_{i=1..m} i^2 * P(X=i) = n tau * sum_{j<m} (j+1) P(Y=j)

    with X ~ Binomial(n, tau) and Y ~ Binomial(n-1, tau)."""
    worst = -math.inf
    where = ""
    for n in grid.n_values:
        for m in grid.mpr_values(n):
            for tau in grid.tau_values:
                lhs1 = math.fsum(
                    i * binomial_pmf(n, i, tau) for i in range(1, m + 1)
                )
                lhs2 = math.fsum(
                    i * i * binomial_pmf(n, i, tau) for i in range(1, m + 1)
                )
                rhs1 = n * tau * math.fsum(
                    binomial_pmf(n - 1, j, tau) for j in range(m)
                )
                rhs2 = n * tau * math.fsum(
                    (j + 1) * binomial_pmf(n - 1, j, tau) for j in range(m)
                )
                residual = max(abs(lhs1 - rhs1), abs(lhs2 - rhs2))
                if residual > worst:
                    worst, where = residual, f"n={n} m={m} tau={tau}"
    return CheckResult(
        "term_matching_identity",
        worst <= tol,
        worst,
        f"max reindexing residual = {worst:.3e} at {where} (tol {tol:g})",
    )


def check_window_bound(grid: VerifyGrid) -> CheckResult:
    """The contraction factor: identically 1 for a one-slot deadline and
    strictly below 1 on (0, 1) for every longer deadline."""
    worst = -math.inf
    where = ""
    for d in sorted(set(grid.d_values) | {1, 2}):
        for tau in grid.tau_values:
            w = window_bound(d, tau)
            if d == 1:
                out = abs(w - 1.0) - 1e-12
            else:
                out = w - 1.0
            if out > worst:
                worst, where = out, f"d={d} tau={tau}"
    return CheckResult(
        "window_bound",
        worst < 0.0,
        worst,
        f"max of (factor - 1), d=1 as identity residual = {worst:.3e} "
        f"at {where}",
    )


def check_iteration_map_slope(
    grid: VerifyGrid, fd_step: float, margin: float
) -> CheckResult:
    """The fixed-point map is increasing."""
    worst = -math.inf
    where = ""
    for n, m, d in grid.cells():
        cfg = ChannelConfig(n, m, d)
        f = lambda t: iteration_map(cfg, t)
        for tau in grid.tau_values:
            slope = _central_diff(f, tau, fd_step)
            if -slope > worst:
                worst, where = -slope, f"n={n} m={m} d={d} tau={tau}"
    return CheckResult(
        "iteration_map_slope",
        worst <= margin,
        worst,
        f"max negative slope of the map = {worst:.3e} at {where} "
        f"(margin {margin:g})",
    )


def check_iteration_map_bracketing(grid: VerifyGrid) -> CheckResult:
    """The map pushes iterates toward the optimum from both sides:
    g(x) > x strictly below it, g(x) < x strictly above it."""
    worst = -math.inf
    where = ""
    exclusion = 1e-6
    for n, m, d in grid.cells():
        cfg = ChannelConfig(n, m, d)
        tau_opt = float(solve_optimal_tau(cfg).tau_opt)
        for tau in grid.tau_values:
            if abs(tau - tau_opt) <= exclusion:
                continue
            gap = iteration_map(cfg, tau) - tau
            # Wrong-signed gap is a violation; magnitude measures how badly.
            out = -gap if tau < tau_opt else gap
            if out > worst:
                worst, where = out, f"n={n} m={m} d={d} tau={tau}"
    return CheckResult(
        "iteration_map_bracketing",
        worst < 0.0,
        worst,
        f"max wrong-signed displacement of g(x) - x = {worst:.3e} at {where}",
    )


def check_solver_oracle(grid: VerifyGrid) -> CheckResult:
    """Fixed-point solver against the derivative-free grid search over the
    dense population sweep."""
    worst_tau = -math.inf
    worst_sdp = -math.inf
    where = ""
    for n, m, d in grid.sweep_cells():
        cfg = ChannelConfig(n, m, d)
        report = solve_optimal_tau(cfg)
        oracle_tau, oracle_sdp = grid_search_optimum(cfg)
        d_tau = abs(float(report.tau_opt) - oracle_tau)
        d_sdp = abs(report.sdp_max - oracle_sdp)
        if d_tau > worst_tau:
            worst_tau = d_tau
            where = f"n={n} m={m} d={d}"
        worst_sdp = max(worst_sdp, d_sdp)
    passed = worst_tau <= 1e-6 and worst_sdp <= 1e-9
    return CheckResult(
        "solver_vs_grid_search",
        passed,
        worst_tau,
        f"max |tau diff| = {worst_tau:.3e} at {where}, "
        f"max |sdp diff| = {worst_sdp:.3e} (tols 1e-06, 1e-09)",
    )


def check_solver_localization(grid: VerifyGrid) -> CheckResult:
    """The solver converges, lands inside the localization interval, and for
    multi-packet receivers the two load curves really cross there."""
    worst = -math.inf
    where = ""
    for n, m, d in grid.cells():
        cfg = ChannelConfig(n, m, d)
        report = solve_optimal_tau(cfg)
        tau = float(report.tau_opt)
        lo = lower_bound_tau(n, d)
        out = max(lo - tau - 1e-12, tau - (1.0 - 1e-15))
        if not report.converged:
            out = math.inf
        if m >= 2:
            crossing = abs(
                admitted_load(cfg, tau) - deadline_load(cfg, tau)
            )
            out = max(out, crossing - 1e-9)
        if out > worst:
            worst, where = out, f"n={n} m={m} d={d}"
    return CheckResult(
        "solver_localization",
        worst <= 0.0,
        worst,
        f"max violation of interval/crossing conditions = {worst:.3e} "
        f"at {where}",
    )


CHECK_NAMES = (
    "sdp_bounds",
    "sdp_monotone_deadline",
    "derivative_finite_difference",
    "admitted_load_slope",
    "deadline_load_slope",
    "moment_ratio_identity",
    "term_matching_identity",
    "window_bound",
    "iteration_map_slope",
    "iteration_map_bracketing",
    "solver_vs_grid_search",
    "solver_localization",
)


def run_all(
    grid: VerifyGrid | None = None,
    identity_tol: float = 1e-12,
    slope_margin: float = 1e-4,
    fd_step: float = 1e-6,
    derivative_tol: float = 1e-5,
) -> list[CheckResult]:
    """Run every property check; order matches CHECK_NAMES."""
    g = grid or VerifyGrid()
    return [
        check_sdp_bounds(g),
        check_sdp_monotone_deadline(g),
        check_derivative_fd(g, fd_step, derivative_tol),
        check_admitted_load_slope(g, fd_step, slope_margin),
        check_deadline_load_slope(g, fd_step, slope_margin),
        check_moment_ratio_identity(g, identity_tol),
        check_term_matching_identity(g, identity_tol),
        check_window_bound(g),
        check_iteration_map_slope(g, fd_step, slope_margin),
        check_iteration_map_bracketing(g),
        check_solver_oracle(g),
        check_solver_localization(g),
    ]
