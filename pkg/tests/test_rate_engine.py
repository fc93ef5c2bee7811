import math

import numpy as np
import pytest

from errors import ConfigError, DomainError
from rate_engine import (
    Branch,
    LinkGains,
    PowerPair,
    dc_secure_rate,
    effective_rate_cases,
    effective_rate_maxmin,
    energy_efficient_relay_power,
    link_rates,
    mrc_secure_rate,
    secure_rate,
    thresholds,
    user_effective_rates,
)

USER_0 = LinkGains(gain_sm=1.0, gain_sr=4.0, gain_rm=2.0)
USER_1 = LinkGains(gain_sm=0.5, gain_sr=4.0, gain_rm=0.5)


class TestLinkRates:
    def test_relay_silent(self):
        rates = link_rates(PowerPair(1.0, 0.0), USER_0)
        assert rates.r_sm == pytest.approx(1.0)
        assert rates.r_sr == pytest.approx(math.log2(5.0))
        assert rates.r_srm == pytest.approx(1.0)

    def test_effective_rates_with_relay_off(self):
        rates = user_effective_rates(PowerPair(1.0, 0.0), 4.0, [1.0, 0.5], [2.0, 0.5])
        np.testing.assert_allclose(rates, [1.0, math.log2(1.5)], atol=1e-12)
        assert rates[1] == pytest.approx(0.585, abs=1e-3)

    def test_noise_power_must_be_positive(self):
        with pytest.raises(DomainError):
            link_rates(PowerPair(1.0, 1.0), USER_0, sigma2=0.0)

    def test_negative_power_rejected(self):
        with pytest.raises(DomainError):
            PowerPair(-1.0, 0.0)


class TestThresholds:
    def test_main_user(self):
        th = thresholds(1.0, USER_0)
        assert th.a == pytest.approx(3.0)
        assert th.p_src_upper == pytest.approx(2.0)
        assert th.p_relay_lower == pytest.approx(1.0)
        assert th.rsp_ratio == pytest.approx(1.5)

    def test_weak_user(self):
        th = thresholds(1.0, USER_1)
        assert th.p_relay_lower == pytest.approx(1.5)
        assert th.rsp_ratio == pytest.approx(7.0)

    def test_energy_efficient_power(self):
        assert energy_efficient_relay_power(2.0, 1.5) == pytest.approx(3.0)


class TestEffectiveRate:
    @pytest.mark.parametrize(
        "p_relay, rate, branch",
        [
            (0.5, 1.0, Branch.DC),
            (1.2, 0.5 * math.log2(4.4), Branch.MRC_BOTTLENECK),
            (2.0, 0.5 * math.log2(5.0), Branch.SR_BOTTLENECK),
        ],
    )
    def test_branches(self, p_relay, rate, branch):
        value, tag = effective_rate_cases(PowerPair(1.0, p_relay), USER_0)
        assert value == pytest.approx(rate, abs=1e-12)
        assert tag is branch
        assert effective_rate_maxmin(PowerPair(1.0, p_relay), USER_0) == pytest.approx(rate, abs=1e-12)

    def test_balance_point_is_sr_bottleneck(self):
        value, tag = effective_rate_cases(PowerPair(1.0, 1.5), USER_0)
        assert tag is Branch.SR_BOTTLENECK
        assert value == pytest.approx(0.5 * math.log2(5.0))

    def test_weak_relay_link_stays_direct(self):
        gains = LinkGains(gain_sm=1.0, gain_sr=2.5, gain_rm=10.0)
        value, tag = effective_rate_cases(PowerPair(1.0, 5.0), gains)
        assert tag is Branch.DC
        assert value == pytest.approx(1.0)

    def test_silent_transmitters_are_direct(self):
        value, tag = effective_rate_cases(PowerPair(0.0, 0.0), LinkGains(gain_sm=1.0, gain_sr=4.0, gain_rm=2.0))
        assert tag is Branch.DC
        assert value == 0.0

    def test_silent_relay_is_always_direct(self, rng):
        size = 1000
        gains = LinkGains(
            gain_sm=rng.exponential(1.0, size),
            gain_sr=rng.exponential(4.0, size),
            gain_rm=rng.exponential(2.0, size),
        )
        power = PowerPair(np.concatenate([np.zeros(10), rng.uniform(0.0, 5.0, size - 10)]), np.zeros(size))
        rate, branch = effective_rate_cases(power, gains)
        assert np.all(branch == int(Branch.DC))
        np.testing.assert_allclose(rate, effective_rate_maxmin(power, gains), rtol=0, atol=1e-12)

    @pytest.mark.slow
    def test_case_form_matches_maxmin(self, rng):
        size = 100_000
        gains = LinkGains(
            gain_sm=rng.exponential(1.0, size),
            gain_sr=rng.exponential(4.0, size),
            gain_rm=rng.exponential(2.0, size),
        )
        power = PowerPair(rng.uniform(0.0, 5.0, size), rng.uniform(0.0, 10.0, size))
        by_cases, branch = effective_rate_cases(power, gains)
        np.testing.assert_allclose(by_cases, effective_rate_maxmin(power, gains), rtol=0, atol=1e-12)
        assert set(np.unique(branch)) <= {int(b) for b in Branch}

    def test_arrays_keep_shape(self):
        power = PowerPair(np.ones((2, 3)), np.full((2, 3), 1.2))
        gains = LinkGains(np.ones((2, 3)), np.full((2, 3), 4.0), np.full((2, 3), 2.0))
        rate, branch = effective_rate_cases(power, gains)
        assert rate.shape == (2, 3)
        assert np.all(branch == int(Branch.MRC_BOTTLENECK))


@pytest.mark.slow
def test_relayed_rate_peaks_at_balance_power(rng):
    wanted, points, found = 10_000, 1000, 0
    while found < wanted:
        size = 4000
        gsm, gsr, grm = rng.exponential(1.0, size), rng.exponential(4.0, size), rng.exponential(2.0, size)
        ps = rng.uniform(0.1, 5.0, size)
        keep = gsr >= gsm * (2.0 + ps * gsm)
        keep[np.flatnonzero(keep)[wanted - found:]] = False
        gsm, gsr, grm, ps = gsm[keep], gsr[keep], grm[keep], ps[keep]
        found += keep.sum()

        balance = energy_efficient_relay_power(ps, (gsr - gsm) / grm)
        step = 2.0 * balance / points
        grid = step[:, None] * np.arange(1, points + 1)
        rates = link_rates(PowerPair(ps[:, None], grid), LinkGains(gsm[:, None], gsr[:, None], grm[:, None]))
        relayed = np.minimum(rates.r_sr, rates.r_srm)
        peak = grid[np.arange(grid.shape[0]), np.argmax(relayed, axis=1)]
        assert np.all(np.abs(peak - balance) <= step * (1 + 1e-6))
    assert found == wanted


class TestSecureRate:
    def test_canonical_relayed_subcarrier(self):
        rates = user_effective_rates(PowerPair(1.0, 1.5), 4.0, [1.0, 0.5], [2.0, 0.5])
        assert secure_rate(rates, 0) == pytest.approx(0.5 * math.log2(5.0 / 2.25), abs=1e-12)
        assert secure_rate(rates, 0) == pytest.approx(0.5756, abs=1e-3)
        assert secure_rate(rates, 1) == 0.0

    def test_equal_rates_give_zero(self):
        assert secure_rate([0.7, 0.7, 0.1], 0) == 0.0

    def test_needs_two_users(self):
        with pytest.raises(ConfigError):
            secure_rate([1.0], 0)

    def test_bad_main_index(self):
        with pytest.raises(ConfigError):
            secure_rate([1.0, 0.5], 2)

    def test_stack_over_subcarriers(self):
        rates = np.array([[1.0, 0.2, 0.4], [0.1, 0.3, 0.2]])
        np.testing.assert_allclose(secure_rate(rates, 0), [0.6, 0.0])

    def test_direct_mode(self):
        assert dc_secure_rate(1.0, 1.0, 0.5) == pytest.approx(math.log2(2.0 / 1.5))
        assert dc_secure_rate(1.0, 0.5, 1.0) == 0.0

    def test_mrc_form_matches_full_definition(self):
        power = PowerPair(1.0, 1.5)
        closed = mrc_secure_rate(power, (1.0, 2.0), (0.5, 0.5))
        assert closed == pytest.approx(0.5 * math.log2(5.0 / 2.25))
        # full definition on the same subcarrier: user 0 at its balance point, user 1 in MRC
        assert closed == pytest.approx(0.5756, abs=1e-3)
