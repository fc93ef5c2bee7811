import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from allocation import AllocationArrays, FeasibilityScope, Mode, allocate_all, feasibility_masks
from channel_model import ChannelRealization, SubcarrierGains
from errors import ConfigError, ConsistencyError, DomainError
from rate_engine import PowerPair, dc_secure_rate, mrc_secure_rate

logger = logging.getLogger(__name__)

# rho-type thresholds with a nonpositive denominator: RC can never win
EXCLUSIVE_DC = math.inf

ROOT_CHECK_RTOL = 1e-6


class Classification(str, Enum):
    EXCLUSIVE_RC = "EXCLUSIVE_RC"
    RDC = "RDC"
    EXCLUSIVE_DC = "EXCLUSIVE_DC"


class Policy(str, Enum):
    OPTIMAL = "optimal"
    LOW_SNR = "low-snr"
    HIGH_SNR = "high-snr"
    SATISFACTION = "satisfaction"
    STATIC_DC = "static-dc"


@dataclass(frozen=True)
class ModeGains:
    """
    Gains that decide the mode of one subcarrier.

    gain_se is the relayed-mode eavesdropper (next smallest RSP ratio) and
    gain_se_dc the direct-mode one (strongest other direct link).
    """
    gain_sr: float
    gain_sm: float
    gain_se: float
    gain_se_dc: float
    gain_rm: float
    gain_re: float

    @property
    def relay_gain_ratio(self) -> float:
        return self.gain_rm / self.gain_re

    @property
    def rsp_ratio(self) -> float:
        return (self.gain_sr - self.gain_sm) / self.gain_rm

    @classmethod
    def from_subcarrier(cls, gains: SubcarrierGains) -> "ModeGains":
        alloc = allocate_all(gains.gain_sr, gains.gain_su, gains.gain_ru)
        main = int(alloc.rc_main)
        direct = np.asarray(gains.gain_su, dtype=float)
        others = np.delete(direct, main)
        return cls(
            gain_sr=float(gains.gain_sr),
            gain_sm=float(direct[main]),
            gain_se=float(alloc.gain_se_rc),
            gain_se_dc=float(others.max()),
            gain_rm=float(alloc.gain_rm),
            gain_re=float(alloc.gain_re),
        )


@dataclass(frozen=True)
class ThresholdRoot:
    value: Optional[float]
    raw_root: Optional[float]
    clamped: bool


@dataclass(frozen=True)
class ModeThresholds:
    rho: float
    rho_low: float
    rho_high: float
    p_threshold: ThresholdRoot
    relay_gain_ratio: float
    rho_high_degenerate: bool


@dataclass(frozen=True)
class SatisfactionPolicy:
    alpha: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise DomainError(f"satisfaction level must be >= 0, got {self.alpha}")

    def rho_alpha(self, gains: ModeGains) -> float:
        return rho_alpha(self.alpha, gains)

    def source_power(self, gain_sm: float, sigma2: float = 1.0) -> float:
        """Smallest source power giving the main user an SNR of alpha."""
        return sigma2 * self.alpha / gain_sm


@dataclass(frozen=True)
class ModeChoice:
    mode: Mode
    rate_rc: float
    rate_dc: float


def _ratio_or_marker(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(den > 0, num / den, EXCLUSIVE_DC)
    return float(value) if value.ndim == 0 else value


def _rho_terms(p_source, gsr, gsm, gse, gse_dc, sigma2):
    a = sigma2 + p_source * gsm
    b = sigma2 + p_source * gse_dc
    num = (gsr - gsm) * a ** 2
    den = gsr * b ** 2 - gse * a ** 2 - sigma2 * (b + a) * (gsm - gse_dc)
    return num, den


def _as_arrays(gains: ModeGains):
    return tuple(np.asarray(g, dtype=float) for g in (
        gains.gain_sr, gains.gain_sm, gains.gain_se, gains.gain_se_dc, gains.gain_rm, gains.gain_re))


def rho(p_source: float, gains: ModeGains, sigma2: float = 1.0) -> float:
    """
    Relay-gain threshold for a known source power with P_r = P_s * rsp_ratio.

    RC beats DC exactly when g_rm / g_re > rho. Returns EXCLUSIVE_DC when the
    denominator is nonpositive.
    """
    gsr, gsm, gse, gse_dc, _, _ = _as_arrays(gains)
    if np.any(gsm <= gse_dc):
        raise DomainError("rho needs a direct link strictly better than the direct-mode eavesdropper")
    if np.any(np.asarray(p_source) <= 0):
        raise DomainError(f"rho needs a positive source power, got {p_source}")
    return _ratio_or_marker(*_rho_terms(np.asarray(p_source, dtype=float), gsr, gsm, gse, gse_dc, sigma2))


def rho_low(gains: ModeGains) -> float:
    gsr, gsm, gse, gse_dc, _, _ = _as_arrays(gains)
    return _ratio_or_marker(gsr - gsm, gsr - 2.0 * (gsm - gse_dc) - gse)


def rho_high(gains: ModeGains) -> float:
    gsr, gsm, gse, gse_dc, _, _ = _as_arrays(gains)
    return _ratio_or_marker((gsr - gsm) * gsm ** 2, gsr * gse_dc ** 2 - gse * gsm ** 2)


def rho_alpha(alpha: float, gains: ModeGains) -> float:
    """Threshold of the satisfaction-level policy; alpha=0 gives rho_low, large alpha tends to rho_high."""
    if np.any(np.asarray(alpha) < 0):
        raise DomainError(f"satisfaction level must be >= 0, got {alpha}")
    gsr, gsm, gse, gse_dc, _, _ = _as_arrays(gains)
    alpha = np.asarray(alpha, dtype=float)
    direct = 1.0 + alpha
    tapped = 1.0 + alpha * gse_dc / gsm
    num = (gsr - gsm) * direct ** 2
    den = gsr * tapped ** 2 - gse * direct ** 2 - (gsm - gse_dc) * (direct + tapped)
    value = _ratio_or_marker(num, den)
    if np.any(alpha == 0):
        # bit-identical to rho_low at the origin
        value = np.where(alpha == 0, rho_low(gains), value)
        return float(value) if value.ndim == 0 else value
    return value


def rate_difference(p_source: float, gains: ModeGains, sigma2: float = 1.0) -> float:
    """RC minus DC secure rate at P_r = P_s * rsp_ratio (both sides unclipped)."""
    gsr, gsm, gse, gse_dc, grm, gre = _as_arrays(gains)
    ps = np.asarray(p_source, dtype=float)
    pr = ps * (gsr - gsm) / grm
    rc = 0.5 * (np.log1p((ps * gsm + pr * grm) / sigma2) - np.log1p((ps * gse + pr * gre) / sigma2))
    dc = np.log1p(ps * gsm / sigma2) - np.log1p(ps * gse_dc / sigma2)
    value = (rc - dc) / np.log(2.0)
    return float(value) if value.ndim == 0 else value


def threshold_quadratic(gains: ModeGains, sigma2: float = 1.0) -> Tuple[float, float, float]:
    """
    Coefficients (c2, c1, c0) of g_rm*rho_den(P) - g_re*(g_sr-g_sm)*(s2+P g_sm)^2.

    The quadratic is positive exactly where RC beats DC.
    """
    gsr, gsm, gse, gse_dc, grm, gre = (float(g) for g in _as_arrays(gains))
    k = gsr - gsm
    d = gsm - gse_dc
    c2 = grm * (gsr * gse_dc ** 2 - gse * gsm ** 2) - gre * k * gsm ** 2
    c1 = grm * sigma2 * (2.0 * (gsr * gse_dc - gse * gsm) - d * (gsm + gse_dc)) - 2.0 * gre * k * sigma2 * gsm
    c0 = grm * sigma2 ** 2 * (gsr - gse - 2.0 * d) - gre * k * sigma2 ** 2
    return c2, c1, c0


def _nonnegative_roots(c2: float, c1: float, c0: float):
    if c2 == 0.0:
        roots = [] if c1 == 0.0 else [-c0 / c1]
    else:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0:
            return []
        q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
        roots = [q / c2]
        if q != 0.0:
            roots.append(c0 / q)
    return sorted(r for r in roots if r >= 0)


def p_threshold(gains: ModeGains, sigma2: float = 1.0, cross_check: bool = True) -> ThresholdRoot:
    """
    Source power at which a mixed (RDC) subcarrier switches from RC to DC.

    The closed-form root is cross-checked by bisection on the rate difference;
    a relative disagreement above ROOT_CHECK_RTOL raises ConsistencyError.

    Returns:
        ThresholdRoot whose value is clamped to (0, P_u]; raw_root keeps the
        unclamped root, both None when no nonnegative root exists
    """
    c2, c1, c0 = threshold_quadratic(gains, sigma2)
    roots = _nonnegative_roots(c2, c1, c0)
    if not roots:
        return ThresholdRoot(None, None, False)
    raw = roots[0]
    if raw > 0 and cross_check:
        _cross_check_root(raw, (c2, c1, c0), gains, sigma2)

    p_upper = (gains.gain_sr - 2.0 * gains.gain_sm) * sigma2 / gains.gain_sm ** 2
    if raw <= 0 or p_upper <= 0:
        return ThresholdRoot(None, raw, False)
    if raw > p_upper:
        return ThresholdRoot(p_upper, raw, True)
    return ThresholdRoot(raw, raw, False)


def _cross_check_root(raw: float, coefficients, gains: ModeGains, sigma2: float):
    c2, c1, c0 = coefficients
    lo, hi = 0.5 * raw, 2.0 * raw
    f_lo = (c2 * lo + c1) * lo + c0
    f_hi = (c2 * hi + c1) * hi + c0
    if f_lo * f_hi >= 0:
        # tangent or second root inside the bracket: no sign change to chase
        return
    found = bisect(lambda p: rate_difference(p, gains, sigma2), lo, hi, xtol=1e-300, rtol=1e-13, maxiter=400)
    if abs(found - raw) > ROOT_CHECK_RTOL * raw:
        raise ConsistencyError(f"threshold power mismatch: closed form {raw!r}, bisection {found!r}")
    logger.debug("threshold power %.12g confirmed by bisection (%.12g)", raw, found)


def classify(gains: ModeGains, sigma2: float = 1.0) -> Classification:
    ratio = gains.relay_gain_ratio
    if ratio > rho_high(gains):
        return Classification.EXCLUSIVE_RC
    if ratio < rho_low(gains):
        return Classification.EXCLUSIVE_DC
    return Classification.RDC


def select_mode_optimal(p_source: float, gains: ModeGains, sigma2: float = 1.0) -> ModeChoice:
    """
    Direct comparison of the RC and DC secure rates of the main user.

    The RC candidate uses P_r = P_s * rsp_ratio. Feasibility of RC is the
    caller's concern (see allocation.rc_feasible).
    """
    if not gains.gain_sm > gains.gain_se_dc:
        raise DomainError("direct mode has no positive secure rate for this main user")
    if p_source < 0:
        raise DomainError(f"source power must be >= 0, got {p_source}")
    power = PowerPair(p_source, p_source * gains.rsp_ratio)
    rate_rc = float(mrc_secure_rate(power, (gains.gain_sm, gains.gain_rm), (gains.gain_se, gains.gain_re), sigma2))
    rate_dc = float(dc_secure_rate(p_source, gains.gain_sm, gains.gain_se_dc, sigma2))
    mode = Mode.RC if rate_rc > rate_dc else Mode.DC
    return ModeChoice(mode, rate_rc, rate_dc)


def select_mode_suboptimal(alpha: float, gains: ModeGains) -> Mode:
    return Mode.RC if gains.relay_gain_ratio > rho_alpha(alpha, gains) else Mode.DC


def mode_thresholds(p_source: float, gains: ModeGains, sigma2: float = 1.0) -> ModeThresholds:
    high_den = gains.gain_sr * gains.gain_se_dc ** 2 - gains.gain_se * gains.gain_sm ** 2
    return ModeThresholds(
        rho=rho(p_source, gains, sigma2),
        rho_low=rho_low(gains),
        rho_high=rho_high(gains),
        p_threshold=p_threshold(gains, sigma2),
        relay_gain_ratio=gains.relay_gain_ratio,
        rho_high_degenerate=bool(high_den <= 0),
    )


@dataclass(frozen=True)
class ModePlan:
    """Mode decision of a stack of subcarriers under one policy."""
    allocation: AllocationArrays
    p_source: np.ndarray
    p_relay: np.ndarray
    sr_gain_ok: np.ndarray
    relay_power_ok: np.ndarray
    rc_feasible: np.ndarray
    relay_gain_ratio: np.ndarray
    rho_low: np.ndarray
    rho_high: np.ndarray
    rho_policy: np.ndarray
    classification: np.ndarray
    mode: np.ndarray
    rate_rc: np.ndarray
    rate_dc: np.ndarray
    secure_rate: np.ndarray

    def count(self, mode: Mode) -> np.ndarray:
        """Subcarriers in the given mode, reduced over the last axis."""
        return np.sum(self.mode == mode.value, axis=-1)


def plan_modes(
    gain_sr,
    gain_su,
    gain_ru,
    sigma2: float = 1.0,
    policy: Policy = Policy.OPTIMAL,
    p_source=None,
    alpha=None,
    scope: FeasibilityScope = FeasibilityScope.ALL_USERS,
) -> ModePlan:
    """
    Allocate users and choose DC, RC or idle for every subcarrier of a stack.

    Gains carry the user axis last; p_source (or alpha) broadcasts against the
    subcarrier stack, so a grid of powers can be laid along extra leading axes.
    Without p_source the source power is sigma2 * alpha / g_sm of the main user.

    Args:
        gain_sr: (..., N) source-relay gains
        gain_su: (..., N, M) source-user gains
        gain_ru: (..., N, M) relay-user gains
        sigma2: Noise power
        policy: Mode-selection policy
        p_source: Per-subcarrier source power
        alpha: Satisfaction level (required by Policy.SATISFACTION)
        scope: Users the RC gain and relay-power conditions are checked against
    """
    policy = Policy(policy)
    scope = FeasibilityScope(scope)
    alloc = allocate_all(gain_sr, gain_su, gain_ru)
    gain_sr = np.asarray(gain_sr, dtype=float)

    if p_source is None:
        if alpha is None:
            raise ConfigError("plan_modes needs either p_source or alpha")
        ps = sigma2 * np.asarray(alpha, dtype=float) / alloc.gain_sm
    else:
        ps = np.asarray(p_source, dtype=float) * np.ones_like(alloc.gain_sm)
    if np.any(ps < 0):
        raise DomainError("source power must be >= 0")
    if policy is Policy.SATISFACTION and alpha is None:
        raise ConfigError("the satisfaction policy needs alpha")

    pr = ps * alloc.rsp_main
    main = alloc.rc_main if scope is FeasibilityScope.MAIN_USER else None
    sr_ok, power_ok = feasibility_masks(gain_sr, gain_su, gain_ru, ps, pr, alloc.rsp_main, sigma2, main=main)
    rc_ok = sr_ok & power_ok & alloc.rc_secrecy

    gains = ModeGains(gain_sr, alloc.gain_sm, alloc.gain_se_rc, alloc.gain_se_dc, alloc.gain_rm, alloc.gain_re)
    ratio = alloc.gain_rm / alloc.gain_re
    low = np.asarray(rho_low(gains))
    high = np.asarray(rho_high(gains))

    with np.errstate(divide="ignore", invalid="ignore"):
        rate_dc = np.where(alloc.dc_feasible, dc_secure_rate(ps, alloc.gain_sm, alloc.gain_se_dc, sigma2), 0.0)
        rate_rc = np.where(
            rc_ok,
            mrc_secure_rate(PowerPair(ps, np.maximum(pr, 0.0)), (alloc.gain_sm, alloc.gain_rm),
                            (alloc.gain_se_rc, alloc.gain_re), sigma2),
            0.0,
        )
        if alpha is not None:
            policy_rho = np.asarray(rho_alpha(alpha, gains))
        else:
            policy_rho = np.asarray(_ratio_or_marker(*_rho_terms(
                ps, gain_sr, alloc.gain_sm, alloc.gain_se_rc, alloc.gain_se_dc, sigma2)))

    if policy is Policy.OPTIMAL:
        want_rc = rate_rc > rate_dc
    elif policy is Policy.LOW_SNR:
        want_rc = ratio > low
    elif policy is Policy.HIGH_SNR:
        want_rc = ratio > high
    elif policy is Policy.SATISFACTION:
        want_rc = ratio > policy_rho
    else:
        want_rc = np.zeros(rc_ok.shape, dtype=bool)
    use_rc = want_rc & rc_ok

    shape = use_rc.shape
    dc_ok = np.broadcast_to(alloc.dc_feasible, shape)
    mode = np.where(use_rc, Mode.RC.value, np.where(dc_ok, Mode.DC.value, Mode.IDLE.value))
    secure = np.where(use_rc, rate_rc, np.where(dc_ok, rate_dc, 0.0))

    classification = np.where(
        ratio > high,
        Classification.EXCLUSIVE_RC.value,
        np.where(ratio < low, Classification.EXCLUSIVE_DC.value, Classification.RDC.value),
    )
    classification = np.where(alloc.rc_secrecy, classification, Classification.EXCLUSIVE_DC.value)

    return ModePlan(
        allocation=alloc,
        p_source=np.broadcast_to(ps, shape),
        p_relay=np.broadcast_to(pr, shape),
        sr_gain_ok=np.broadcast_to(sr_ok, shape),
        relay_power_ok=np.broadcast_to(power_ok, shape),
        rc_feasible=np.broadcast_to(rc_ok, shape),
        relay_gain_ratio=np.broadcast_to(ratio, shape),
        rho_low=np.broadcast_to(low, shape),
        rho_high=np.broadcast_to(high, shape),
        rho_policy=np.broadcast_to(policy_rho, shape),
        classification=np.broadcast_to(classification, shape),
        mode=mode,
        rate_rc=np.broadcast_to(rate_rc, shape),
        rate_dc=np.broadcast_to(rate_dc, shape),
        secure_rate=secure,
    )


def decide_subcarriers(
    channel: ChannelRealization,
    policy: Policy = Policy.OPTIMAL,
    p_source: Optional[float] = None,
    alpha: Optional[float] = None,
) -> pd.DataFrame:
    """
    One row per subcarrier of a single channel realisation.

    Columns follow the mode-select report: n, class, rho_l, rho, rho_h, p_th,
    mode, rate_rc, rate_dc, then main, eav_rc, eav_dc, rc_feasible,
    secure_rate. rho is the satisfaction threshold when alpha is given.
    """
    if policy is Policy.SATISFACTION and alpha is None:
        raise ConfigError("the satisfaction policy needs alpha")
    plan = plan_modes(channel.gain_sr, channel.gain_su, channel.gain_ru, channel.noise_power,
                      policy, p_source=p_source, alpha=alpha)
    alloc = plan.allocation

    p_th = np.full(channel.num_subcarriers, np.nan)
    for n in range(channel.num_subcarriers):
        if not alloc.rc_secrecy[n] or plan.classification[n] != Classification.RDC.value:
            continue
        gains = ModeGains(float(channel.gain_sr[n]), float(alloc.gain_sm[n]), float(alloc.gain_se_rc[n]),
                          float(alloc.gain_se_dc[n]), float(alloc.gain_rm[n]), float(alloc.gain_re[n]))
        root = p_threshold(gains, channel.noise_power)
        if root.value is not None:
            p_th[n] = root.value

    return pd.DataFrame({
        "n": np.arange(channel.num_subcarriers),
        "class": plan.classification,
        "rho_l": plan.rho_low,
        "rho": plan.rho_policy,
        "rho_h": plan.rho_high,
        "p_th": p_th,
        "mode": plan.mode,
        "rate_rc": plan.rate_rc,
        "rate_dc": plan.rate_dc,
        "main": alloc.dc_main,
        "eav_rc": alloc.rc_eav,
        "eav_dc": alloc.dc_eav,
        "rc_feasible": plan.rc_feasible,
        "secure_rate": plan.secure_rate,
    })
