import pytest

from mpraloha import checks
from mpraloha.checks import CHECK_NAMES, VerifyGrid


SMALL = VerifyGrid(
    tau_values=(0.1, 0.3, 0.6, 0.9),
    n_values=(5, 10),
    d_values=(1, 2, 5),
    sweep_n=(6, 7),
    sweep_m=(2, 5),
    sweep_d=(1, 5),
)


class TestSuite:
    def test_every_check_passes_on_default_grid(self, verify_results):
        failures = [
            f"{r.name}: {r.detail}"
            for r in verify_results.values()
            if not r.passed
        ]
        assert not failures, "\n".join(failures)

    def test_names_and_order(self, verify_results):
        assert tuple(verify_results) == CHECK_NAMES

    def test_details_report_worst_location(self, verify_results):
        slope = verify_results["admitted_load_slope"]
        assert "n=" in slope.detail and "tau=" in slope.detail

    def test_margins_are_genuinely_needed(self, verify_results):
        # Finite differences brush the strict bounds from outside at the
        # 1e-9 level, which is exactly why the margin exists; a clean zero
        # here would suggest the check is not measuring anything.
        slope = verify_results["deadline_load_slope"]
        assert slope.worst > 0.0
        assert slope.worst < 1e-6


class TestFaultInjection:
    def test_unreachable_tolerance_reported_as_failure(self):
        results = checks.run_all(SMALL, identity_tol=1e-18)
        by_name = {r.name: r for r in results}
        assert not by_name["moment_ratio_identity"].passed
        assert not by_name["term_matching_identity"].passed
        # Checks that do not depend on the identity tolerance still pass.
        assert by_name["sdp_bounds"].passed
        assert by_name["solver_vs_grid_search"].passed

    def test_small_grid_passes_at_stated_tolerances(self):
        results = checks.run_all(SMALL)
        assert all(r.passed for r in results)


class TestGrid:
    def test_mpr_values_respect_population(self):
        grid = VerifyGrid()
        assert grid.mpr_values(2) == (1,)
        assert grid.mpr_values(5) == (1, 2, 3, 4)
        assert grid.mpr_values(50) == tuple(range(1, 9))

    def test_explicit_mpr_override_filtered(self):
        grid = VerifyGrid(m_values=(1, 4, 9))
        assert grid.mpr_values(5) == (1, 4)

    def test_sweep_skips_infeasible_combinations(self):
        grid = VerifyGrid(sweep_n=(6,), sweep_m=(2, 8), sweep_d=(1,))
        assert list(grid.sweep_cells()) == [(6, 2, 1)]

    def test_default_tau_grid(self):
        grid = VerifyGrid()
        assert len(grid.tau_values) == 99
        assert grid.tau_values[0] == pytest.approx(0.01)
        assert grid.tau_values[-1] == pytest.approx(0.99)
