import pandas as pd
import pytest

pytest.importorskip("streamlit")

from channel_check import geometry_from_inputs, mode_summary, parse_user_lines  # noqa: E402
from channel_model import NodePosition  # noqa: E402
from errors import ConfigError  # noqa: E402
from experiment_check import experiment_chart_frame, small_config  # noqa: E402
from experiments import MIN_REGION_LOCATIONS, SweepResult  # noqa: E402


class TestChannelPage:
    def test_user_lines(self):
        users = parse_user_lines("2.0, 0.3\n\n2.2 -0.2\n")
        assert users == [NodePosition(2.0, 0.3), NodePosition(2.2, -0.2)]

    @pytest.mark.parametrize("text", ["2.0", "1, 2, 3", "a, b", "inf, 0"])
    def test_bad_user_lines(self, text):
        with pytest.raises(ConfigError):
            parse_user_lines(text)

    def test_geometry(self):
        geometry = geometry_from_inputs((0.0, 0.0), (0.5, 0.0), "2, 0\n2, 1")
        assert geometry.num_users == 2
        assert geometry.relay == NodePosition(0.5, 0.0)

    def test_geometry_needs_two_users(self):
        with pytest.raises(ConfigError):
            geometry_from_inputs((0.0, 0.0), (0.5, 0.0), "2, 0")

    def test_mode_summary(self):
        frame = pd.DataFrame({"mode": ["RC", "DC", "RC", "IDLE"], "secure_rate": [0.5, 0.25, 0.5, 0.0]})
        summary = mode_summary(frame)
        assert summary["mode"].tolist() == ["RC", "DC", "IDLE"]
        assert summary["subcarriers"].tolist() == [2, 1, 1]
        assert summary["secure rate"].tolist() == [1.0, 0.25, 0.0]


class TestExperimentPage:
    def test_relay_sweep_chart(self):
        table = pd.DataFrame({"alpha": [1.0, 1.0, 10.0, 10.0], "relay_x": [0.2, 0.4] * 2,
                              "pct_rc_mean": [5.0, 6.0, 1.0, 2.0]})
        wide = experiment_chart_frame(SweepResult("relay-sweep", table, 1, 0))
        assert list(wide.columns) == ["alpha=1", "alpha=10"]
        assert wide.loc[0.4, "alpha=10"] == 2.0

    def test_mode_gain_chart(self):
        table = pd.DataFrame({"source_power": [1.0, 1.0], "policy": ["optimal", "low-snr"],
                              "improvement_pct_mean": [3.0, 1.0]})
        wide = experiment_chart_frame(SweepResult("mode-gain", table, 1, 0))
        assert sorted(wide.columns) == ["low-snr", "optimal"]

    def test_utility_region_chart(self):
        table = pd.DataFrame({"distance_to_relay": [0.1, 0.2, 0.1, 0.6], "side": [1, 1, -1, -1],
                              "pct_rc": [20.0, 10.0, 12.0, 4.0]})
        wide = experiment_chart_frame(SweepResult("utility-region", table, 1, 0))
        assert wide.loc[0.125, "source side"] == 15.0
        assert wide.loc[0.125, "far side"] == 12.0
        assert wide.loc[0.625, "far side"] == 4.0

    def test_small_config(self):
        config = small_config(8, 3, 5)
        assert (config.num_subcarriers, config.trials, config.master_seed) == (8, 3, 5)
        assert config.utility_region.locations == MIN_REGION_LOCATIONS
