import numpy as np
import pandas as pd
import pytest

from checks import (
    CLAIMS,
    check_asymmetry,
    check_decreasing_with_distance,
    check_gain_decreasing_upper_half,
    check_low_snr_negative_at_top,
    check_near_exceeds_far,
    check_optimal_dominates,
    check_optimal_gain_nonnegative,
    check_rc_share_falls_with_alpha,
    check_relay_neighbourhood,
    check_relay_optimum_left_half,
    evaluate_claims,
)
from experiments import ExperimentConfig, SweepResult, run_experiment


def relay_table(high_alpha=(10.0, 15.0, 5.0)):
    return pd.DataFrame({
        "alpha": [1.0] * 3 + [10.0] * 3,
        "relay_x": [0.2, 0.4, 0.8] * 2,
        "pct_rc_mean": [30.0, 40.0, 20.0, *high_alpha],
    })


def gain_table(low_snr_top=-3.0):
    gains = {
        "optimal": [5.0, 20.0, 10.0, 2.0],
        "low-snr": [5.0, 10.0, 0.0, low_snr_top],
        "high-snr": [0.0, 15.0, 9.0, 2.0],
    }
    rows = [
        {"source_power": p, "policy": policy, "improvement_pct_mean": value}
        for policy, values in gains.items()
        for p, value in zip([1.0, 10.0, 100.0, 1000.0], values)
    ]
    return pd.DataFrame(rows)


def region_table():
    return pd.DataFrame({
        "distance_to_relay": [0.1, 0.2, 0.1, 0.2, 1.0, 1.2, 1.0, 1.2, 2.0, 2.5, 0.3],
        "pct_rc": [22.0, 21.0, 18.0, 19.0, 12.0, 11.0, 8.0, 9.0, 2.0, 3.0, np.nan],
        "side": [1, 1, -1, -1, 1, 1, -1, -1, 1, -1, 1],
    })


class TestRelaySweepClaims:
    def test_optimum_left_of_midpoint(self):
        check = check_relay_optimum_left_half(relay_table())
        assert check.passed
        assert "x_r*=0.4" in check.detail

    def test_optimum_right_of_midpoint(self):
        table = relay_table(high_alpha=(1.0, 2.0, 9.0))
        assert not check_relay_optimum_left_half(table).passed

    def test_share_falls_with_alpha(self):
        assert check_rc_share_falls_with_alpha(relay_table()).passed

    def test_share_rising_somewhere(self):
        check = check_rc_share_falls_with_alpha(relay_table(high_alpha=(10.0, 15.0, 25.0)))
        assert not check.passed
        assert "0.8" in check.detail

    def test_rise_within_one_standard_error_tolerated(self):
        table = relay_table(high_alpha=(10.0, 15.0, 21.0))
        table["pct_rc_sem"] = 2.0
        assert check_rc_share_falls_with_alpha(table).passed
        table["pct_rc_sem"] = 0.5
        assert not check_rc_share_falls_with_alpha(table).passed


class TestModeGainClaims:
    def test_all_hold(self):
        table = gain_table()
        for check in (check_optimal_gain_nonnegative, check_optimal_dominates,
                      check_low_snr_negative_at_top, check_gain_decreasing_upper_half):
            assert check(table).passed, check.__name__

    def test_low_snr_still_positive(self):
        assert not check_low_snr_negative_at_top(gain_table(low_snr_top=1.0)).passed

    def test_dominance_broken(self):
        assert not check_optimal_dominates(gain_table(low_snr_top=5.0)).passed


class TestUtilityRegionClaims:
    def test_neighbourhood(self):
        check = check_relay_neighbourhood(region_table())
        assert check.passed
        assert "4 locations" in check.detail

    def test_nothing_near_the_relay(self):
        table = region_table()
        table["distance_to_relay"] += 1.0
        check = check_relay_neighbourhood(table)
        assert not check.passed
        assert "no location" in check.detail

    def test_near_well_above_far(self):
        check = check_near_exceeds_far(region_table())
        assert check.passed
        assert "gap 17.5" in check.detail

    def test_near_too_close_to_far(self):
        table = region_table()
        table.loc[table["distance_to_relay"] > 1.5, "pct_rc"] = 16.0
        assert not check_near_exceeds_far(table).passed

    def test_nothing_beyond_far_radius(self):
        table = region_table()
        check = check_near_exceeds_far(table[table["distance_to_relay"] <= 1.5])
        assert not check.passed
        assert "beyond 1.5" in check.detail

    def test_decreasing_rings(self):
        assert check_decreasing_with_distance(region_table()).passed

    def test_empty_ring_fails(self):
        table = region_table()
        table = table[table["distance_to_relay"] < 1.5]
        assert not check_decreasing_with_distance(table).passed

    def test_clear_asymmetry(self):
        table = pd.DataFrame({
            "distance_to_relay": [0.5] * 8,
            "pct_rc": [30.0, 31.0, 29.0, 30.0, 10.0, 11.0, 9.0, 10.0],
            "side": [1] * 4 + [-1] * 4,
        })
        assert check_asymmetry(table).passed

    def test_symmetric_region(self):
        table = pd.DataFrame({
            "distance_to_relay": [0.5] * 4,
            "pct_rc": [10.0, 12.0, 10.0, 12.0],
            "side": [1, 1, -1, -1],
        })
        assert not check_asymmetry(table).passed

    def test_one_side_only(self):
        table = region_table()
        check = check_asymmetry(table[table["side"] == 1])
        assert not check.passed
        assert check.detail == "only one side sampled"


@pytest.mark.parametrize(
    "experiment, table",
    [("relay-sweep", relay_table()), ("mode-gain", gain_table()), ("utility-region", region_table())],
)
def test_evaluate_claims(experiment, table):
    checks = evaluate_claims(SweepResult(experiment, table, 1, 0, {}))
    assert len(checks) == len(CLAIMS[experiment])


def test_unknown_experiment_has_no_claims():
    assert evaluate_claims(SweepResult("other", pd.DataFrame(), 1, 0, {})) == []


@pytest.mark.slow
@pytest.mark.parametrize("experiment", ["relay-sweep", "mode-gain"])
def test_default_run_meets_every_claim(experiment):
    result = run_experiment(experiment, ExperimentConfig())
    failed = [(c.name, c.detail) for c in evaluate_claims(result) if not c.passed]
    assert failed == []
