import numpy as np
import pytest

from allocation import (
    FeasibilityReason,
    FeasibilityScope,
    Mode,
    allocate_all,
    allocate_dc,
    allocate_rc,
    feasibility_masks,
    rc_feasible,
    rc_feasible_all,
    rsp_ratios,
)
from channel_model import SubcarrierGains
from errors import ConfigError, DomainError
from rate_engine import PowerPair, mrc_secure_rate, secure_rate, user_effective_rates


class TestAllocate:
    def test_direct_mode_picks_strongest_link(self):
        result = allocate_dc([0.3, 1.2, 0.7])
        assert (result.main_user, result.eavesdropper, result.mode, result.feasible) == (1, 2, Mode.DC, True)

    def test_direct_mode_tie_has_no_secrecy(self):
        result = allocate_dc([0.9, 0.9, 0.1])
        assert result.main_user == 0
        assert result.eavesdropper == 1
        assert not result.feasible

    def test_relayed_mode_picks_smallest_rsp_ratio(self, canonical_gains):
        result = allocate_rc(canonical_gains)
        assert (result.main_user, result.eavesdropper, result.mode) == (0, 1, Mode.RC)
        assert result.feasible

    def test_rsp_ratios(self, canonical_gains):
        np.testing.assert_allclose(
            rsp_ratios(canonical_gains.gain_sr, canonical_gains.gain_su, canonical_gains.gain_ru), [1.5, 7.0]
        )

    def test_relayed_main_must_also_lead_direct_links(self):
        # user 1 has the smaller RSP ratio but user 0 the stronger direct link
        gains = SubcarrierGains(4.0, np.array([1.0, 0.9]), np.array([0.5, 5.0]))
        result = allocate_rc(gains)
        assert result.main_user == 1
        assert not result.feasible
        assert rc_feasible(gains, PowerPair(0.1, 0.1))[1] is FeasibilityReason.NO_SECRECY

    def test_one_user_rejected(self):
        with pytest.raises(ConfigError):
            allocate_dc([1.0])

    def test_stack_shapes(self, random_stack):
        gain_sr, gain_su, gain_ru = random_stack(50, num_users=4)
        alloc = allocate_all(gain_sr, gain_su, gain_ru)
        assert alloc.dc_main.shape == (50,)
        assert np.all(alloc.gain_sm == gain_su.max(axis=1))
        assert np.all(alloc.dc_main != alloc.dc_eav)
        assert np.all(alloc.rc_main != alloc.rc_eav)
        assert np.all(alloc.rsp_main <= alloc.rsp_eav)


class TestFeasibility:
    @pytest.mark.parametrize(
        "p_relay, expected",
        [
            (1.5, (True, FeasibilityReason.OK)),
            (0.5, (False, FeasibilityReason.RELAY_POWER_FAIL)),
            (1.6, (False, FeasibilityReason.RELAY_POWER_FAIL)),
        ],
    )
    def test_canonical_channel(self, canonical_gains, p_relay, expected):
        assert rc_feasible(canonical_gains, PowerPair(1.0, p_relay)) == expected

    def test_weak_relay_link(self):
        gains = SubcarrierGains(2.5, np.array([1.0, 0.5]), np.array([2.0, 0.5]))
        assert rc_feasible(gains, PowerPair(1.0, 0.75)) == (False, FeasibilityReason.SR_GAIN_FAIL)

    def test_balance_point_accepted_within_tolerance(self, canonical_gains):
        feasible, _ = rc_feasible(canonical_gains, PowerPair(1.0, 1.5 * (1 + 1e-14)))
        assert feasible

    def test_stack_version_matches_single(self, canonical_gains):
        feasible, reason, pr = rc_feasible_all(
            canonical_gains.gain_sr, canonical_gains.gain_su[None, :], canonical_gains.gain_ru[None, :], 1.0
        )
        assert pr[0] == pytest.approx(1.5)
        assert bool(feasible[0])
        assert reason[0] == FeasibilityReason.OK.value

    def test_stack_version_rejects_negative_relay_power(self, canonical_gains):
        with pytest.raises(DomainError):
            rc_feasible_all(canonical_gains.gain_sr, canonical_gains.gain_su[None, :],
                            canonical_gains.gain_ru[None, :], 1.0, -1.0)


class TestFeasibilityScope:
    # user 0 sits next to the relay, user 1 is far from both nodes
    NEAR_RELAY = SubcarrierGains(4.0, np.array([1.0, 0.2]), np.array([100.0, 0.1]))

    def test_far_user_blocks_the_all_users_reading(self):
        power = PowerPair(1.0, 0.03)
        assert rc_feasible(self.NEAR_RELAY, power) == (False, FeasibilityReason.RELAY_POWER_FAIL)
        assert rc_feasible(self.NEAR_RELAY, power, scope=FeasibilityScope.MAIN_USER) == (True, FeasibilityReason.OK)

    def test_main_user_scope_still_needs_the_power_window(self):
        scope = FeasibilityScope.MAIN_USER
        assert rc_feasible(self.NEAR_RELAY, PowerPair(1.0, 0.01), scope=scope) == (
            False, FeasibilityReason.RELAY_POWER_FAIL)
        assert rc_feasible(self.NEAR_RELAY, PowerPair(1.0, 0.05), scope=scope) == (
            False, FeasibilityReason.RELAY_POWER_FAIL)

    def test_scopes_agree_on_the_canonical_channel(self, canonical_gains):
        for p_relay in (0.5, 1.5, 1.6):
            power = PowerPair(1.0, p_relay)
            assert rc_feasible(canonical_gains, power) == rc_feasible(
                canonical_gains, power, scope=FeasibilityScope.MAIN_USER)

    def test_stack_version(self):
        g = self.NEAR_RELAY
        literal, reason, pr = rc_feasible_all(g.gain_sr, g.gain_su[None, :], g.gain_ru[None, :], 1.0)
        narrowed, _, _ = rc_feasible_all(g.gain_sr, g.gain_su[None, :], g.gain_ru[None, :], 1.0,
                                         scope="main-user")
        assert pr[0] == pytest.approx(0.03)
        assert reason[0] == FeasibilityReason.RELAY_POWER_FAIL.value
        assert not literal[0] and narrowed[0]

    def test_main_user_scope_is_never_stricter(self, rng, random_stack):
        gain_sr, gain_su, gain_ru = random_stack(5000, num_users=4)
        ps = rng.uniform(0.01, 1.0, 5000)
        literal, _, _ = rc_feasible_all(gain_sr, gain_su, gain_ru, ps)
        narrowed, _, _ = rc_feasible_all(gain_sr, gain_su, gain_ru, ps, scope=FeasibilityScope.MAIN_USER)
        assert np.all(narrowed[literal])
        assert narrowed.sum() > literal.sum()


class TestRelayedSecrecy:
    def test_positive_and_optimal_on_random_channels(self, rng, random_stack):
        count = 10_000
        gain_sr, gain_su, gain_ru = random_stack(count, num_users=3)
        ps = rng.uniform(0.01, 0.5, count)
        alloc = allocate_all(gain_sr, gain_su, gain_ru)
        pr = ps * alloc.rsp_main
        sr_ok, power_ok = feasibility_masks(gain_sr, gain_su, gain_ru, ps, pr, alloc.rsp_main)
        feasible = np.flatnonzero(sr_ok & power_ok & alloc.rc_secrecy)
        assert feasible.size > 100

        deltas = rsp_ratios(gain_sr, gain_su, gain_ru)
        for i in feasible:
            main = int(alloc.rc_main[i])
            closed = mrc_secure_rate(
                PowerPair(ps[i], pr[i]),
                (gain_su[i, main], gain_ru[i, main]),
                (alloc.gain_se_rc[i], alloc.gain_re[i]),
            )
            assert closed > 0
            rates = user_effective_rates(PowerPair(ps[i], pr[i]), gain_sr[i], gain_su[i], gain_ru[i])
            chosen = secure_rate(rates, main)
            assert chosen > 0
            for other in range(3):
                if other == main or deltas[i, other] < 0:
                    continue
                power = PowerPair(ps[i], ps[i] * deltas[i, other])
                rival = secure_rate(user_effective_rates(power, gain_sr[i], gain_su[i], gain_ru[i]), other)
                assert rival <= chosen + 1e-12


def test_direct_eavesdropper_at_least_as_strong_when_mains_agree(random_stack):
    gain_sr, gain_su, gain_ru = random_stack(20_000, num_users=4)
    alloc = allocate_all(gain_sr, gain_su, gain_ru)
    same = alloc.dc_main == alloc.rc_main
    assert same.sum() > 1000
    assert np.all(alloc.gain_se_dc[same] >= alloc.gain_se_rc[same])
    np.testing.assert_array_equal(alloc.dc_eav[same] == alloc.rc_eav[same],
                                  alloc.gain_se_dc[same] == alloc.gain_se_rc[same])
