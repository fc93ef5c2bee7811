from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence, Tuple, Union

import numpy as np

from errors import ConfigError, DomainError

ArrayLike = Union[float, np.ndarray]


class Branch(IntEnum):
    SR_BOTTLENECK = 0
    MRC_BOTTLENECK = 1
    DC = 2


def _out(value):
    # 0-d results go back to callers as plain floats
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def _check_sigma2(sigma2: float):
    if not sigma2 > 0:
        raise DomainError(f"noise power must be > 0, got {sigma2}")


@dataclass(frozen=True)
class PowerPair:
    p_source: ArrayLike
    p_relay: ArrayLike

    def __post_init__(self):
        if np.any(np.asarray(self.p_source) < 0) or np.any(np.asarray(self.p_relay) < 0):
            raise DomainError(f"powers must be >= 0, got P_s={self.p_source}, P_r={self.p_relay}")


@dataclass(frozen=True)
class LinkGains:
    """Per-user gain triple on one subcarrier: direct, source-relay, relay-user."""
    gain_sm: ArrayLike
    gain_sr: ArrayLike
    gain_rm: ArrayLike


@dataclass(frozen=True)
class LinkRates:
    r_sm: ArrayLike
    r_sr: ArrayLike
    r_srm: ArrayLike


@dataclass(frozen=True)
class ThresholdSet:
    a: ArrayLike
    p_src_upper: ArrayLike
    p_relay_lower: ArrayLike
    rsp_ratio: ArrayLike


def link_rates(power: PowerPair, gains: LinkGains, sigma2: float = 1.0) -> LinkRates:
    """
    Rates of the direct, source-relay and combined (MRC) links in bits/s/Hz.

    Args:
        power: Source and relay power on the subcarrier
        gains: Direct, source-relay and relay-user power gains
        sigma2: Noise power

    Returns:
        LinkRates(r_sm, r_sr, r_srm)
    """
    _check_sigma2(sigma2)
    ps, pr = np.asarray(power.p_source, dtype=float), np.asarray(power.p_relay, dtype=float)
    snr_sm = ps * np.asarray(gains.gain_sm) / sigma2
    r_sm = np.log2(1.0 + snr_sm)
    r_sr = np.log2(1.0 + ps * np.asarray(gains.gain_sr) / sigma2)
    r_srm = np.log2(1.0 + snr_sm + pr * np.asarray(gains.gain_rm) / sigma2)
    return LinkRates(_out(r_sm), _out(r_sr), _out(r_srm))


def effective_rate_maxmin(power: PowerPair, gains: LinkGains, sigma2: float = 1.0) -> ArrayLike:
    rates = link_rates(power, gains, sigma2)
    both_slots = np.minimum(rates.r_sr, rates.r_srm)
    return _out(0.5 * np.maximum(2.0 * np.asarray(rates.r_sm), both_slots))


def thresholds(p_source: ArrayLike, gains: LinkGains, sigma2: float = 1.0) -> ThresholdSet:
    """
    Feasibility thresholds of one user on one subcarrier.

    a            = 2 + P_s g_sm / s2
    p_src_upper  = (g_sr - 2 g_sm) s2 / g_sm^2   (negative: no P_s allows RC)
    p_relay_lower= P_s (g_sm / g_rm)(1 + P_s g_sm / s2)
    rsp_ratio    = (g_sr - g_sm) / g_rm
    """
    _check_sigma2(sigma2)
    ps = np.asarray(p_source, dtype=float)
    gsm, gsr, grm = (np.asarray(g, dtype=float) for g in (gains.gain_sm, gains.gain_sr, gains.gain_rm))
    snr_sm = ps * gsm / sigma2
    return ThresholdSet(
        a=_out(2.0 + snr_sm),
        p_src_upper=_out((gsr - 2.0 * gsm) * sigma2 / gsm ** 2),
        p_relay_lower=_out(ps * (gsm / grm) * (1.0 + snr_sm)),
        rsp_ratio=_out((gsr - gsm) / grm),
    )


def effective_rate_cases(power: PowerPair, gains: LinkGains, sigma2: float = 1.0):
    """
    Effective rate through the three-branch case analysis.

    Ties at P_r == P_s * rsp_ratio are tagged SR_BOTTLENECK; both bottleneck
    branches give the same rate there. P_r == 0 is always DC.

    Returns:
        (rate, branch) where branch is a Branch for scalar inputs and an int
        array of Branch codes otherwise
    """
    rates = link_rates(power, gains, sigma2)
    th = thresholds(power.p_source, gains, sigma2)
    ps, pr = np.asarray(power.p_source, dtype=float), np.asarray(power.p_relay, dtype=float)
    gsm, gsr = np.asarray(gains.gain_sm, dtype=float), np.asarray(gains.gain_sr, dtype=float)

    # a silent relay forwards nothing, whatever the thresholds say
    relay_reachable = (gsr >= gsm * np.asarray(th.a)) & (pr > 0.0)
    balance_power = ps * np.asarray(th.rsp_ratio)
    p_low = np.asarray(th.p_relay_lower)

    sr_branch = relay_reachable & (pr >= np.maximum(p_low, balance_power))
    mrc_branch = relay_reachable & ~sr_branch & (balance_power >= pr) & (pr >= p_low)

    branch = np.select([sr_branch, mrc_branch], [int(Branch.SR_BOTTLENECK), int(Branch.MRC_BOTTLENECK)],
                       default=int(Branch.DC))
    rate = np.select(
        [sr_branch, mrc_branch],
        [0.5 * np.asarray(rates.r_sr), 0.5 * np.asarray(rates.r_srm)],
        default=np.asarray(rates.r_sm),
    )
    if np.ndim(branch) == 0:
        return float(rate), Branch(int(branch))
    return rate, branch


def energy_efficient_relay_power(p_source: ArrayLike, rsp_ratio: ArrayLike) -> ArrayLike:
    """Relay power P_s * rsp_ratio that equalises the S-R and MRC links."""
    return _out(np.asarray(p_source, dtype=float) * np.asarray(rsp_ratio, dtype=float))


def user_effective_rates(
    power: PowerPair, gain_sr: float, gain_su: Sequence[float], gain_ru: Sequence[float], sigma2: float = 1.0
) -> np.ndarray:
    """Effective rate of every user on one subcarrier under a single power pair."""
    gain_su = np.asarray(gain_su, dtype=float)
    gains = LinkGains(gain_sm=gain_su, gain_sr=np.full_like(gain_su, float(gain_sr)), gain_rm=np.asarray(gain_ru, dtype=float))
    return np.asarray(effective_rate_maxmin(power, gains, sigma2))


def secure_rate(rates: Sequence[float], main_user: int) -> ArrayLike:
    """
    Secure rate of main_user: [R_m - max_{o != m} R_o]^+.

    The last axis of rates runs over users, so stacks of subcarriers can be
    evaluated at once.
    """
    rates = np.asarray(rates, dtype=float)
    num_users = rates.shape[-1] if rates.ndim else 0
    if num_users < 2:
        raise ConfigError(f"secure rate needs at least two users, got {num_users}")
    if not 0 <= main_user < num_users:
        raise ConfigError(f"main user {main_user} outside [0, {num_users})")
    others = np.delete(rates, main_user, axis=-1)
    return _out(np.maximum(0.0, rates[..., main_user] - others.max(axis=-1)))


def dc_secure_rate(p_source: ArrayLike, gain_sm: ArrayLike, gain_se: ArrayLike, sigma2: float = 1.0) -> ArrayLike:
    _check_sigma2(sigma2)
    ps = np.asarray(p_source, dtype=float)
    value = np.log2((sigma2 + ps * np.asarray(gain_sm)) / (sigma2 + ps * np.asarray(gain_se)))
    return _out(np.maximum(0.0, value))


def mrc_secure_rate(
    power: PowerPair,
    main_gains: Tuple[ArrayLike, ArrayLike],
    eavesdropper_gains: Tuple[ArrayLike, ArrayLike],
    sigma2: float = 1.0,
) -> ArrayLike:
    """
    Secure rate of a relayed subcarrier when both main user and eavesdropper
    sit on their MRC branch (the positivity conditions of RC allocation hold).

    Args:
        power: Source and relay power
        main_gains: (g_sm, g_rm) of the main user
        eavesdropper_gains: (g_se, g_re) of the equivalent eavesdropper
        sigma2: Noise power
    """
    _check_sigma2(sigma2)
    ps, pr = np.asarray(power.p_source, dtype=float), np.asarray(power.p_relay, dtype=float)
    gsm, grm = main_gains
    gse, gre = eavesdropper_gains
    num = sigma2 + ps * np.asarray(gsm) + pr * np.asarray(grm)
    den = sigma2 + ps * np.asarray(gse) + pr * np.asarray(gre)
    return _out(0.5 * np.log2(num / den))
