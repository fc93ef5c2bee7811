# checks.py
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

from experiments import SweepResult


@dataclass(frozen=True)
class ClaimCheck:
    name: str
    passed: bool
    detail: str


# relay sweep
def check_relay_optimum_left_half(table: pd.DataFrame, limit: float = 0.5) -> ClaimCheck:
    best = table.loc[table.groupby("alpha")["pct_rc_mean"].idxmax(), ["alpha", "relay_x"]]
    passed = bool((best["relay_x"] < limit).all())
    detail = ", ".join(f"alpha={a:g}: x_r*={x:g}" for a, x in best.itertuples(index=False))
    return ClaimCheck("relay optimum below x=%g" % limit, passed, detail)


def check_rc_share_falls_with_alpha(table: pd.DataFrame) -> ClaimCheck:
    """Non-increasing in alpha at every relay position, up to one standard error of slack."""
    wide = table.pivot(index="relay_x", columns="alpha", values="pct_rc_mean").sort_index(axis=1)
    steps = np.diff(wide.to_numpy(), axis=1)
    if "pct_rc_sem" in table:
        sem = table.pivot(index="relay_x", columns="alpha", values="pct_rc_sem").sort_index(axis=1).to_numpy()
        slack = np.maximum(sem[:, 1:], sem[:, :-1])
    else:
        slack = np.zeros_like(steps)
    bad = wide.index[(steps > slack).any(axis=1)].tolist()
    detail = "non-increasing in alpha everywhere" if not bad else f"rises with alpha at x_r={bad}"
    return ClaimCheck("RC share falls as alpha grows", not bad, detail)


# mode gain
def _gain_wide(table: pd.DataFrame) -> pd.DataFrame:
    return table.pivot(index="source_power", columns="policy", values="improvement_pct_mean").sort_index()


def check_optimal_gain_nonnegative(table: pd.DataFrame, tol: float = 1e-9) -> ClaimCheck:
    worst = float(_gain_wide(table)["optimal"].min())
    return ClaimCheck("optimal policy never loses to static DC", worst >= -tol, f"smallest gain {worst:.4g}%")


def check_optimal_dominates(table: pd.DataFrame, tol: float = 1e-9) -> ClaimCheck:
    wide = _gain_wide(table)
    margin = float((wide["optimal"] - wide[["low-snr", "high-snr"]].max(axis=1)).min())
    return ClaimCheck("optimal policy beats both SNR policies", margin >= -tol, f"smallest margin {margin:.4g}%")


def check_low_snr_negative_at_top(table: pd.DataFrame) -> ClaimCheck:
    wide = _gain_wide(table)
    top = float(wide["low-snr"].iloc[-1])
    return ClaimCheck("low-SNR policy turns negative at the largest budget", top < 0,
                      f"gain at P_S={wide.index[-1]:g}: {top:.4g}%")


def check_gain_decreasing_upper_half(table: pd.DataFrame) -> ClaimCheck:
    series = _gain_wide(table)["optimal"]
    upper = series.iloc[len(series) // 2:]
    passed = bool((np.diff(upper.to_numpy()) <= 0).all())
    return ClaimCheck("optimal gain shrinks over the upper power range", passed,
                      ", ".join(f"{p:g}: {g:.3g}%" for p, g in upper.items()))


# utility region
def check_relay_neighbourhood(table: pd.DataFrame, radius: float = 0.25, level: float = 14.0) -> ClaimCheck:
    near = table.loc[table["distance_to_relay"] <= radius, "pct_rc"].dropna()
    if near.empty:
        return ClaimCheck(f"RC share above {level:g}% near the relay", False, f"no location within {radius:g}")
    mean = float(near.mean())
    return ClaimCheck(f"RC share above {level:g}% near the relay", mean > level,
                      f"mean {mean:.3g}% over {len(near)} locations within {radius:g}")


def check_near_exceeds_far(table: pd.DataFrame, radius: float = 0.25, far: float = 1.5,
                           margin: float = 5.0) -> ClaimCheck:
    pct = table.dropna(subset=["pct_rc"])
    near = pct.loc[pct["distance_to_relay"] <= radius, "pct_rc"]
    beyond = pct.loc[pct["distance_to_relay"] > far, "pct_rc"]
    name = f"RC share near the relay at least {margin:g} points above the share beyond {far:g}"
    if near.empty or beyond.empty:
        return ClaimCheck(name, False, f"no location within {radius:g} or beyond {far:g}")
    gap = float(near.mean() - beyond.mean())
    return ClaimCheck(name, gap >= margin, f"near {near.mean():.3g}%, beyond {beyond.mean():.3g}% (gap {gap:.3g})")


def check_decreasing_with_distance(table: pd.DataFrame, edges=(0.0, 0.5, 1.5, np.inf)) -> ClaimCheck:
    rings = pd.cut(table["distance_to_relay"], bins=list(edges), right=False)
    means = table.groupby(rings, observed=False)["pct_rc"].mean()
    values = means.to_numpy()
    passed = bool(np.all(np.isfinite(values)) and np.all(np.diff(values) < 0))
    detail = ", ".join(f"{ring}: {m:.3g}%" for ring, m in means.items())
    return ClaimCheck("RC share decreases away from the relay", passed, detail)


def check_asymmetry(table: pd.DataFrame, radius: float = 1.5) -> ClaimCheck:
    close = table[table["distance_to_relay"] <= radius].dropna(subset=["pct_rc"])
    groups = close.groupby("side")["pct_rc"]
    if groups.ngroups < 2:
        return ClaimCheck("RC share differs between the two sides", False, "only one side sampled")
    mean, sem = groups.mean(), groups.sem()
    gap = abs(float(mean.loc[1] - mean.loc[-1]))
    noise = 2.0 * float(np.hypot(sem.loc[1], sem.loc[-1]))
    return ClaimCheck("RC share differs between the two sides", gap > noise,
                      f"source side {mean.loc[1]:.3g}%, far side {mean.loc[-1]:.3g}% (2 s.e. = {noise:.3g})")


CLAIMS: Dict[str, List[Callable[[pd.DataFrame], ClaimCheck]]] = {
    "relay-sweep": [check_relay_optimum_left_half, check_rc_share_falls_with_alpha],
    "mode-gain": [
        check_optimal_gain_nonnegative,
        check_optimal_dominates,
        check_low_snr_negative_at_top,
        check_gain_decreasing_upper_half,
    ],
    "utility-region": [
        check_relay_neighbourhood,
        check_near_exceeds_far,
        check_decreasing_with_distance,
        check_asymmetry,
    ],
}


def evaluate_claims(result: SweepResult) -> List[ClaimCheck]:
    return [check(result.table) for check in CLAIMS.get(result.experiment, [])]
