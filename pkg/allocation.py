from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from channel_model import SubcarrierGains
from errors import ConfigError
from rate_engine import PowerPair

# Relative tolerance for the relay-power boundary at P_r = P_s * rsp_ratio
RELAY_POWER_TOL = 1e-12


class Mode(str, Enum):
    DC = "DC"
    RC = "RC"
    IDLE = "IDLE"


class FeasibilityScope(str, Enum):
    """Which users the S-R gain and lower relay-power conditions are checked against."""
    ALL_USERS = "all-users"
    MAIN_USER = "main-user"


class FeasibilityReason(str, Enum):
    OK = "OK"
    SR_GAIN_FAIL = "SR_GAIN_FAIL"
    RELAY_POWER_FAIL = "RELAY_POWER_FAIL"
    NO_SECRECY = "NO_SECRECY"


@dataclass(frozen=True)
class AllocationResult:
    main_user: int
    eavesdropper: int
    mode: Mode
    feasible: bool


@dataclass(frozen=True)
class AllocationArrays:
    """Allocation of a whole stack of subcarriers; user axis already reduced."""
    dc_main: np.ndarray
    dc_eav: np.ndarray
    dc_feasible: np.ndarray
    rc_main: np.ndarray
    rc_eav: np.ndarray
    rc_secrecy: np.ndarray
    gain_sm: np.ndarray
    gain_se_dc: np.ndarray
    gain_se_rc: np.ndarray
    gain_rm: np.ndarray
    gain_re: np.ndarray
    rsp_main: np.ndarray
    rsp_eav: np.ndarray


def _check_users(gain_su: np.ndarray):
    if gain_su.ndim < 1 or gain_su.shape[-1] < 2:
        raise ConfigError(f"allocation needs at least two users, got shape {gain_su.shape}")


def _top_two(values: np.ndarray, largest: bool) -> Tuple[np.ndarray, np.ndarray]:
    # argmax/argmin return the first occurrence, so ties go to the lowest index
    pick = np.argmax if largest else np.argmin
    first = np.asarray(pick(values, axis=-1))
    masked = values.astype(float, copy=True)
    np.put_along_axis(masked, first[..., None], -np.inf if largest else np.inf, axis=-1)
    second = np.asarray(pick(masked, axis=-1))
    return first, second


def _take(values: np.ndarray, index: np.ndarray) -> np.ndarray:
    return np.take_along_axis(values, index[..., None], axis=-1)[..., 0]


def rsp_ratios(gain_sr, gain_su, gain_ru) -> np.ndarray:
    """RSP ratio (g_sr - g_so) / g_ro of every user; user axis last."""
    gain_sr = np.asarray(gain_sr, dtype=float)
    return (gain_sr[..., None] - np.asarray(gain_su, dtype=float)) / np.asarray(gain_ru, dtype=float)


def allocate_all(gain_sr, gain_su, gain_ru) -> AllocationArrays:
    """
    DC and RC allocation for any stack of subcarriers.

    DC: main user has the strongest direct gain, the eavesdropper the next one.
    RC: main user has the smallest RSP ratio, the eavesdropper the next one. RC
    is only usable when the two RSP ratios differ and the RC main user is also
    the DC main user with a strictly better direct link than every other user
    (the first slot is tapped too).
    """
    gain_su = np.asarray(gain_su, dtype=float)
    gain_ru = np.asarray(gain_ru, dtype=float)
    _check_users(gain_su)

    dc_main, dc_eav = _top_two(gain_su, largest=True)
    gain_sm = _take(gain_su, dc_main)
    gain_se_dc = _take(gain_su, dc_eav)
    dc_feasible = gain_sm > gain_se_dc

    deltas = rsp_ratios(gain_sr, gain_su, gain_ru)
    rc_main, rc_eav = _top_two(deltas, largest=False)
    rsp_main = _take(deltas, rc_main)
    rsp_eav = _take(deltas, rc_eav)
    rc_secrecy = (rsp_main < rsp_eav) & (rc_main == dc_main) & dc_feasible

    return AllocationArrays(
        dc_main=dc_main,
        dc_eav=dc_eav,
        dc_feasible=dc_feasible,
        rc_main=rc_main,
        rc_eav=rc_eav,
        rc_secrecy=rc_secrecy,
        gain_sm=gain_sm,
        gain_se_dc=gain_se_dc,
        gain_se_rc=_take(gain_su, rc_eav),
        gain_rm=_take(gain_ru, rc_main),
        gain_re=_take(gain_ru, rc_eav),
        rsp_main=rsp_main,
        rsp_eav=rsp_eav,
    )


def allocate_dc(gain_su) -> AllocationResult:
    gain_su = np.asarray(gain_su, dtype=float)
    _check_users(gain_su)
    main, eav = _top_two(gain_su, largest=True)
    main, eav = int(main), int(eav)
    return AllocationResult(main, eav, Mode.DC, bool(gain_su[main] > gain_su[eav]))


def allocate_rc(gains: SubcarrierGains) -> AllocationResult:
    alloc = allocate_all(gains.gain_sr, gains.gain_su, gains.gain_ru)
    return AllocationResult(int(alloc.rc_main), int(alloc.rc_eav), Mode.RC, bool(alloc.rc_secrecy))


def feasibility_masks(gain_sr, gain_su, gain_ru, p_source, p_relay, rsp_main, sigma2: float = 1.0, main=None):
    """
    Broadcasting core of the RC feasibility test.

    With main (the RC main-user index per subcarrier) the S-R gain and lower
    relay-power conditions only look at that user instead of the worst user.

    Returns:
        (sr_gain_ok, relay_power_ok) boolean arrays over the subcarrier stack
    """
    gain_sr = np.asarray(gain_sr, dtype=float)
    gain_su = np.asarray(gain_su, dtype=float)
    gain_ru = np.asarray(gain_ru, dtype=float)
    ps = np.asarray(p_source, dtype=float)
    pr = np.asarray(p_relay, dtype=float)

    snr_su = ps[..., None] * gain_su / sigma2
    sr_need = gain_su * (2.0 + snr_su)
    p_low = ps[..., None] * (gain_su / gain_ru) * (1.0 + snr_su)
    if main is None:
        sr_need, p_low_max = np.max(sr_need, axis=-1), np.max(p_low, axis=-1)
    else:
        index = np.broadcast_to(np.asarray(main), sr_need.shape[:-1])
        sr_need, p_low_max = _take(sr_need, index), _take(p_low, index)
    sr_gain_ok = gain_sr > sr_need

    balance = ps * np.asarray(rsp_main, dtype=float)
    tol = RELAY_POWER_TOL * np.maximum(1.0, np.abs(balance))
    at_balance = np.abs(pr - balance) <= tol
    above_low = (pr > p_low_max) | (at_balance & (pr >= p_low_max - tol))
    relay_power_ok = above_low & (pr <= balance + tol)
    return sr_gain_ok, relay_power_ok


def _scope_index(scope: FeasibilityScope, alloc: AllocationArrays):
    return alloc.rc_main if FeasibilityScope(scope) is FeasibilityScope.MAIN_USER else None


def rc_feasible(
    gains: SubcarrierGains,
    power: PowerPair,
    sigma2: float = 1.0,
    scope: FeasibilityScope = FeasibilityScope.ALL_USERS,
) -> Tuple[bool, FeasibilityReason]:
    """
    Relayed-mode feasibility of one subcarrier for the RSP-ratio main user.

    Conditions: the S-R gain beats every user's g_so * a_o, and the relay
    power lies above every user's lower threshold but not above P_s times the
    main user's RSP ratio.  At P_r equal to that product the lower threshold
    may bind too; the subcarrier is accepted there within RELAY_POWER_TOL.
    An allocation without secrecy (see allocate_all) is reported first.
    FeasibilityScope.MAIN_USER narrows the first two conditions to the main user.
    """
    alloc = allocate_all(gains.gain_sr, gains.gain_su, gains.gain_ru)
    sr_gain_ok, relay_power_ok = feasibility_masks(
        gains.gain_sr, gains.gain_su, gains.gain_ru, power.p_source, power.p_relay, alloc.rsp_main, sigma2,
        main=_scope_index(scope, alloc),
    )
    if not bool(alloc.rc_secrecy):
        return False, FeasibilityReason.NO_SECRECY
    if not bool(sr_gain_ok):
        return False, FeasibilityReason.SR_GAIN_FAIL
    if not bool(relay_power_ok):
        return False, FeasibilityReason.RELAY_POWER_FAIL
    return True, FeasibilityReason.OK


def rc_feasible_all(
    gain_sr,
    gain_su,
    gain_ru,
    p_source,
    p_relay=None,
    sigma2: float = 1.0,
    scope: FeasibilityScope = FeasibilityScope.ALL_USERS,
):
    """
    Stack version of rc_feasible; p_relay defaults to P_s * rsp_ratio of the main user.

    Returns:
        (feasible, reason, p_relay) with reason holding FeasibilityReason values
    """
    alloc = allocate_all(gain_sr, gain_su, gain_ru)
    ps = np.asarray(p_source, dtype=float) * np.ones_like(alloc.rsp_main)
    if p_relay is None:
        pr = np.maximum(ps * alloc.rsp_main, 0.0)
    else:
        pr = np.asarray(p_relay, dtype=float) * np.ones_like(alloc.rsp_main)
    PowerPair(ps, pr)  # raises on negative powers
    sr_gain_ok, relay_power_ok = feasibility_masks(
        gain_sr, gain_su, gain_ru, ps, pr, alloc.rsp_main, sigma2, main=_scope_index(scope, alloc)
    )
    reason = np.select(
        [~alloc.rc_secrecy, ~sr_gain_ok, ~relay_power_ok],
        [FeasibilityReason.NO_SECRECY.value, FeasibilityReason.SR_GAIN_FAIL.value,
         FeasibilityReason.RELAY_POWER_FAIL.value],
        default=FeasibilityReason.OK.value,
    )
    return alloc.rc_secrecy & sr_gain_ok & relay_power_ok, reason, pr
