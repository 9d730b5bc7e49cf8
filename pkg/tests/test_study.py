import numpy as np
import pytest

from zehsizer.model import BatteryParams, PriceSchedule, SolveStatus
from zehsizer.study import (
    ALL_CELLS,
    ScenarioConfig,
    run_phi_stats,
    run_study,
    run_verify,
)


def small_config(**overrides):
    defaults = dict(
        seed=1,
        households=3,
        days=1,
        prices=PriceSchedule(pi_pv=1000, pi_b=4500, pi_r=10, pi_g=30),
        amortize_days=334.0,
        a_max=100.0,
    )
    defaults.update(overrides)
    return ScenarioConfig(**defaults)


class TestRunStudy:
    def test_four_cells_present(self):
        study = run_study(small_config())
        assert [c["cell"] for c in study.report["cells"]] == list(ALL_CELLS)
        for cell in study.report["cells"]:
            assert len(cell["households"]) == 3

    def test_zeh_cells_cost_at_least_plain(self):
        study = run_study(small_config())
        by_name = {c["cell"]: c for c in study.report["cells"]}
        for plain, constrained in (("individual", "individual_zeh"),
                                   ("community", "community_zeh")):
            p = by_name[plain]
            z = by_name[constrained]
            if z["objective_total"] is not None and z["infeasible_households"] == 0:
                assert z["objective_total"] >= p["objective_total"] - 1e-8 * (
                    1 + abs(p["objective_total"])
                )

    def test_community_dominates_sum_of_individuals(self):
        study = run_study(small_config())
        by_name = {c["cell"]: c for c in study.report["cells"]}
        indiv_total = by_name["individual"]["objective_total"]
        pooled = by_name["community"]["objective_total"]
        assert pooled <= indiv_total + 1e-8 * (1 + abs(indiv_total))

    def test_infeasible_household_is_isolated(self):
        # A household with no sun at all cannot reach net zero on its own,
        # but the study keeps going and reports the rest.
        config = small_config(households=2, a_max=5.0, cells=("individual_zeh",))
        # seed selection: make one household sunless by zeroing its yield via
        # a tiny panel cap instead; with a_max=5 the net-zero row is out of
        # reach for at least one synthetic household of seed 1.
        study = run_study(config)
        cell = study.report["cells"][0]
        statuses = {row["status"] for row in cell["households"]}
        assert "optimal" in statuses
        if cell["infeasible_households"]:
            assert "infeasible" in statuses
            assert cell["av_pv_m2"] is not None  # averages over the solved ones

    def test_nonconvex_prices_rejected(self):
        with pytest.raises(ValueError, match="nonconvex"):
            run_study(small_config(prices=PriceSchedule(pi_r=-31, pi_g=30)))

    def test_parallel_equals_serial(self):
        serial = run_study(small_config(cells=("individual",), jobs=1))
        parallel = run_study(small_config(cells=("individual",), jobs=2))
        assert serial.report == parallel.report


class TestPhiStats:
    def test_flat_average(self):
        study = run_study(small_config(cells=("individual",)))
        stats = run_phi_stats(study)
        cell = stats["cells"]["individual"]
        report_cell = study.report["cells"][0]
        assert cell["avg_spill_per_user_step"] == pytest.approx(
            report_cell["avg_spill_per_user_step"], rel=1e-12
        )
        assert len(cell["spill_series"]) == 48

    def test_window_restriction(self):
        study = run_study(small_config(cells=("individual",)))
        stats = run_phi_stats(study, window=(10, 20))
        assert stats["window"] == [10, 20]
        assert len(stats["cells"]["individual"]["spill_series"]) == 10


class TestRunVerify:
    def test_all_checks_pass_on_default_seed(self):
        config = small_config(households=2)
        report = run_verify(config, num_instances=2, verify_steps=48)
        names = [c.name for c in report.checks]
        assert "greedy_equality" in names
        assert "relaxation_upper_bound" in names
        assert "pooled_dominance" in names
        assert report.passed, [c for c in report.checks if not c.passed]

    def test_horizon_cap_enforced(self):
        with pytest.raises(ValueError, match="horizon"):
            run_verify(small_config(), verify_steps=10_000)

    def test_horizon_cap_waived_without_oracle(self):
        # Without the oracle legs the cap does not apply; keep it tiny anyway.
        report = run_verify(small_config(households=2), num_instances=1,
                            verify_steps=48, enable_oracle=False)
        assert all(c.name != "relaxation_upper_bound" for c in report.checks)
