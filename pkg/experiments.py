import dataclasses
import hashlib
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from allocation import FeasibilityScope, Mode
from channel_model import (
    GENERATOR_ID,
    FadingConfig,
    NodePosition,
    SystemGeometry,
    generate_channel,
    make_rng,
    place_users_in_square,
    stacked_gains,
)
from errors import ConfigError, DomainError
from mode_selection import Policy, plan_modes

logger = logging.getLogger(__name__)

MASK64 = 0xFFFFFFFFFFFFFFFF
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
MIN_REGION_LOCATIONS = 1000
THREADS_ENV = "SECRELAY_THREADS"

GAIN_POLICIES = (Policy.OPTIMAL, Policy.LOW_SNR, Policy.HIGH_SNR)


# ---------------------------------------------------------------------------
# Seeds and workers
# ---------------------------------------------------------------------------

def _splitmix_finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """
    SplitMix64 output number trial_index + 1 of a stream started at master_seed.

    master + (i + 1) * gamma is injective in i modulo 2^64 (gamma is odd) and
    the finalizer is a bijection, so distinct trials never share a seed.
    """
    if trial_index < 0:
        raise DomainError(f"trial index must be >= 0, got {trial_index}")
    state = (int(master_seed) + (int(trial_index) + 1) * SPLITMIX_GAMMA) & MASK64
    return _splitmix_finalize(state)


def derive_trial_seeds(master_seed: int, count: int) -> np.ndarray:
    """Vectorised derive_trial_seed for trial indices 0..count-1 (uint64)."""
    index = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(int(master_seed) & MASK64) + index * np.uint64(SPLITMIX_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count: explicit request, else SECRELAY_THREADS, else every CPU (0 means auto)."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if requested < 0:
        raise ConfigError(f"worker count must be >= 0, got {requested}")
    return requested or (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _check_grid(name: str, values: Sequence[float]):
    if len(values) == 0:
        raise ConfigError(f"{name} must not be empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name} must be strictly increasing, got {list(values)}")


def _pair(value) -> Tuple[float, float]:
    point = NodePosition.from_pair(value)
    return point.x, point.y


@dataclass(frozen=True)
class RelaySweepSetup:
    source: Tuple[float, float] = (0.0, 0.0)
    user_center: Tuple[float, float] = (2.0, 0.0)
    user_side: float = 1.0
    relay_positions: Tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 16))
    alphas: Tuple[float, ...] = (0.1, 1.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "source", _pair(self.source))
        object.__setattr__(self, "user_center", _pair(self.user_center))
        object.__setattr__(self, "relay_positions", tuple(float(x) for x in self.relay_positions))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        _check_grid("relay_positions", self.relay_positions)
        _check_grid("alphas", self.alphas)
        if not self.user_side > 0:
            raise ConfigError(f"user_side must be > 0, got {self.user_side}")
        if any(a < 0 for a in self.alphas):
            raise ConfigError("alphas must be >= 0")


@dataclass(frozen=True)
class ModeGainSetup:
    source: Tuple[float, float] = (0.0, 0.0)
    relay: Tuple[float, float] = (0.5, 0.0)
    user_center: Tuple[float, float] = (2.0, 0.0)
    user_side: float = 1.0
    # 1 .. 10^4.5; above that RC is never feasible and every policy sits at 0
    source_powers: Tuple[float, ...] = tuple(10 ** (k / 2) for k in range(10))

    def __post_init__(self):
        for name in ("source", "relay", "user_center"):
            object.__setattr__(self, name, _pair(getattr(self, name)))
        object.__setattr__(self, "source_powers", tuple(float(p) for p in self.source_powers))
        _check_grid("source_powers", self.source_powers)
        if self.source_powers[0] <= 0:
            raise ConfigError("source_powers must be > 0")
        if not self.user_side > 0:
            raise ConfigError(f"user_side must be > 0, got {self.user_side}")


@dataclass(frozen=True)
class UtilityRegionSetup:
    source: Tuple[float, float] = (0.0, 0.5)
    relay: Tuple[float, float] = (0.0, -0.5)
    region_center: Tuple[float, float] = (0.0, 0.0)
    region_side: float = 4.0
    locations: int = 2000
    trials_per_location: int = 20
    alpha: float = 1.0
    buckets: Tuple[float, ...] = (2.0, 6.0, 10.0, 14.0)
    feasibility_scope: str = FeasibilityScope.ALL_USERS.value

    def __post_init__(self):
        for name in ("source", "relay", "region_center"):
            object.__setattr__(self, name, _pair(getattr(self, name)))
        object.__setattr__(self, "buckets", tuple(float(b) for b in self.buckets))
        _check_grid("buckets", self.buckets)
        if not self.region_side > 0:
            raise ConfigError(f"region_side must be > 0, got {self.region_side}")
        if int(self.locations) < 1 or int(self.trials_per_location) < 1:
            raise ConfigError("locations and trials_per_location must be >= 1")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        try:
            object.__setattr__(self, "feasibility_scope", FeasibilityScope(self.feasibility_scope).value)
        except ValueError:
            raise ConfigError(f"unknown feasibility_scope {self.feasibility_scope!r}") from None


_SETUPS = {
    "relay_sweep": RelaySweepSetup,
    "mode_gain": ModeGainSetup,
    "utility_region": UtilityRegionSetup,
}


@dataclass(frozen=True)
class ExperimentConfig:
    num_subcarriers: int = 64
    num_users: int = 8
    trials: int = 500
    master_seed: int = 2017
    sigma2: float = 1.0
    path_loss_exponent: float = 3.0
    relay_sweep: RelaySweepSetup = field(default_factory=RelaySweepSetup)
    mode_gain: ModeGainSetup = field(default_factory=ModeGainSetup)
    utility_region: UtilityRegionSetup = field(default_factory=UtilityRegionSetup)

    def __post_init__(self):
        if int(self.num_subcarriers) < 1:
            raise ConfigError(f"num_subcarriers must be >= 1, got {self.num_subcarriers}")
        if int(self.num_users) < 2:
            raise ConfigError(f"num_users must be >= 2, got {self.num_users}")
        if int(self.trials) < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= int(self.master_seed) <= MASK64:
            raise ConfigError(f"master_seed must fit in 64 unsigned bits, got {self.master_seed}")
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be > 0, got {self.sigma2}")
        if not self.path_loss_exponent >= 0:
            raise ConfigError(f"path_loss_exponent must be >= 0, got {self.path_loss_exponent}")

    def fading(self, seed: int) -> FadingConfig:
        return FadingConfig(self.num_subcarriers, self.path_loss_exponent, self.sigma2, seed)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with top-level fields replaced; None values are ignored."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown experiment settings: {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment settings: {sorted(unknown)}")
        values = dict(data)
        for name, setup_cls in _SETUPS.items():
            if name in values:
                values[name] = _setup_from_dict(setup_cls, values[name], name)
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"malformed experiment config: {e}") from e

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"experiment config is not valid JSON: {e}") from e
        return cls.from_dict(data)


def _setup_from_dict(setup_cls, data, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be a JSON object")
    unknown = set(data) - {f.name for f in dataclasses.fields(setup_cls)}
    if unknown:
        raise ConfigError(f"unknown {name} settings: {sorted(unknown)}")
    try:
        return setup_cls(**data)
    except TypeError as e:
        raise ConfigError(f"malformed {name} settings: {e}") from e


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepResult:
    experiment: str
    table: pd.DataFrame
    trials: int
    master_seed: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return self.table.copy()

    def metadata_lines(self, created: Optional[str] = None) -> List[str]:
        created = created or datetime.now(timezone.utc).isoformat(timespec="seconds")
        fields = {"experiment": self.experiment, "trials": self.trials, "master_seed": self.master_seed}
        fields.update(self.metadata)
        fields["created"] = created
        return [f"# {key}: {value}" for key, value in fields.items()]

    def to_csv_text(self, created: Optional[str] = None) -> str:
        buffer = io.StringIO()
        self.table.to_csv(buffer, index=False, float_format="%.12g")
        return "\n".join(self.metadata_lines(created)) + "\n" + buffer.getvalue()

    def to_csv(self, path: str, created: Optional[str] = None):
        write_text_atomic(path, self.to_csv_text(created))


def write_text_atomic(path: str, text: str):
    """Write through a temp file in the target directory, then rename over path."""
    write_bytes_atomic(path, text.encode("utf-8"))


def write_bytes_atomic(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _summarise(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, sample std and standard error over the leading (trial) axis."""
    count = samples.shape[0]
    mean = samples.mean(axis=0)
    std = samples.std(axis=0, ddof=1) if count > 1 else np.zeros_like(mean)
    return mean, std, std / np.sqrt(count)


def _run_trials(work: Callable[[int], np.ndarray], count: int, workers: Optional[int]) -> np.ndarray:
    """Evaluate work(0..count-1) and stack the results in trial order."""
    workers = min(resolve_workers(workers), count)
    logger.info("running %d work units on %d worker(s)", count, workers)
    if workers <= 1:
        results = [work(i) for i in range(count)]
    else:
        chunksize = max(1, count // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(count), chunksize=chunksize))
    return np.stack(results)


def _base_metadata(config: ExperimentConfig) -> Dict[str, Any]:
    return {"generator": GENERATOR_ID, "config_hash": config_hash(config)}


# ---------------------------------------------------------------------------
# Relay position sweep
# ---------------------------------------------------------------------------

def _relay_sweep_trial(config: ExperimentConfig, trial: int) -> np.ndarray:
    setup = config.relay_sweep
    seed = derive_trial_seed(config.master_seed, trial)
    rng = make_rng(seed)
    users = place_users_in_square(rng, setup.user_center, setup.user_side, config.num_users)
    source = NodePosition(*setup.source)
    fading = config.fading(derive_trial_seed(seed, 0))

    # same fading seed for every relay position: only the path gains move
    channels = [
        generate_channel(SystemGeometry(source, NodePosition(x_r, source.y), users), fading)
        for x_r in setup.relay_positions
    ]
    gain_sr = np.stack([ch.gain_sr for ch in channels])
    gain_su = np.stack([ch.gain_su for ch in channels])
    gain_ru = np.stack([ch.gain_ru for ch in channels])

    alphas = np.asarray(setup.alphas)[:, None, None]
    plan = plan_modes(gain_sr, gain_su, gain_ru, config.sigma2, Policy.SATISFACTION, alpha=alphas)
    logger.debug("relay sweep trial %d done (seed %d)", trial, seed)
    return 100.0 * plan.count(Mode.RC) / config.num_subcarriers


def run_relay_sweep(config: ExperimentConfig, workers: Optional[int] = None) -> SweepResult:
    """
    Percentage of RC subcarriers as the relay slides along the S-R line.

    Every trial draws fresh user positions and fading; the satisfaction
    policy with each alpha of the setup decides the mode.

    Returns:
        SweepResult with columns alpha, relay_x, pct_rc_mean, pct_rc_std, pct_rc_sem
    """
    setup = config.relay_sweep
    logger.info("relay sweep: %d positions x %d alphas, %d trials", len(setup.relay_positions),
                len(setup.alphas), config.trials)
    samples = _run_trials(partial(_relay_sweep_trial, config), config.trials, workers)
    mean, std, sem = _summarise(samples)

    alpha_grid, relay_grid = np.meshgrid(setup.alphas, setup.relay_positions, indexing="ij")
    table = pd.DataFrame({
        "alpha": alpha_grid.ravel(),
        "relay_x": relay_grid.ravel(),
        "pct_rc_mean": mean.ravel(),
        "pct_rc_std": std.ravel(),
        "pct_rc_sem": sem.ravel(),
    })
    metadata = _base_metadata(config)
    metadata["policy"] = Policy.SATISFACTION.value
    return SweepResult("relay-sweep", table, config.trials, config.master_seed, metadata)


# ---------------------------------------------------------------------------
# Mode-selection gain
# ---------------------------------------------------------------------------

def _mode_gain_trial(config: ExperimentConfig, trial: int) -> np.ndarray:
    setup = config.mode_gain
    seed = derive_trial_seed(config.master_seed, trial)
    rng = make_rng(seed)
    users = place_users_in_square(rng, setup.user_center, setup.user_side, config.num_users)
    geometry = SystemGeometry(NodePosition(*setup.source), NodePosition(*setup.relay), users)
    channel = generate_channel(geometry, config.fading(derive_trial_seed(seed, 0)))

    # equal split of the total budget over the subcarriers
    p_sub = np.asarray(setup.source_powers)[:, None] / config.num_subcarriers

    def total(policy: Policy) -> np.ndarray:
        plan = plan_modes(channel.gain_sr, channel.gain_su, channel.gain_ru, config.sigma2, policy, p_source=p_sub)
        return plan.secure_rate.sum(axis=-1)

    baseline = total(Policy.STATIC_DC)
    out = np.empty((len(GAIN_POLICIES) + 1, len(setup.source_powers)))
    for row, policy in enumerate(GAIN_POLICIES):
        with np.errstate(divide="ignore", invalid="ignore"):
            out[row] = np.where(baseline > 0, 100.0 * (total(policy) - baseline) / baseline, 0.0)
    out[-1] = baseline
    logger.debug("mode gain trial %d done (seed %d)", trial, seed)
    return out


def run_mode_gain(config: ExperimentConfig, workers: Optional[int] = None) -> SweepResult:
    """
    Secure-rate improvement of each mode-selection policy over static DC.

    Returns:
        SweepResult in long form: source_power, per_subcarrier_power, policy,
        improvement_pct_mean/std/sem and the mean static-DC sum rate
    """
    setup = config.mode_gain
    logger.info("mode gain: %d source powers, %d trials", len(setup.source_powers), config.trials)
    samples = _run_trials(partial(_mode_gain_trial, config), config.trials, workers)
    mean, std, sem = _summarise(samples)

    rows = []
    for row, policy in enumerate(GAIN_POLICIES):
        for col, p_total in enumerate(setup.source_powers):
            rows.append({
                "source_power": p_total,
                "per_subcarrier_power": p_total / config.num_subcarriers,
                "policy": policy.value,
                "improvement_pct_mean": mean[row, col],
                "improvement_pct_std": std[row, col],
                "improvement_pct_sem": sem[row, col],
                "static_dc_rate_mean": mean[-1, col],
            })
    metadata = _base_metadata(config)
    metadata["power_split"] = "equal (P_S / N per subcarrier)"
    return SweepResult("mode-gain", pd.DataFrame(rows), config.trials, config.master_seed, metadata)


# ---------------------------------------------------------------------------
# Relay utility region
# ---------------------------------------------------------------------------

def bucket_labels(buckets: Sequence[float]) -> List[str]:
    edges = [f"{b:g}" for b in buckets]
    return [f"<{edges[0]}"] + [f"{lo}-{hi}" for lo, hi in zip(edges, edges[1:])] + [f">{edges[-1]}"]


def categorize(pct_rc, buckets: Sequence[float]) -> np.ndarray:
    """Bucket label per value; values equal to an edge fall in the upper bucket, NaN gives 'n/a'."""
    pct_rc = np.asarray(pct_rc, dtype=float)
    labels = np.asarray(bucket_labels(buckets), dtype=object)
    index = np.digitize(np.nan_to_num(pct_rc, nan=0.0), buckets)
    return np.where(np.isnan(pct_rc), "n/a", labels[index])


def _utility_location(config: ExperimentConfig, location: int) -> np.ndarray:
    setup = config.utility_region
    seed = derive_trial_seed(config.master_seed, location)
    rng = make_rng(seed)
    half = setup.region_side / 2.0
    center = np.asarray(setup.region_center)
    trials, n, m = setup.trials_per_location, config.num_subcarriers, config.num_users

    spot = rng.uniform(-half, half, size=2) + center
    others = rng.uniform(-half, half, size=(trials, m - 1, 2)) + center
    users = np.concatenate([np.broadcast_to(spot, (trials, 1, 2)), others], axis=1)

    try:
        gain_sr, gain_su, gain_ru = stacked_gains(rng, setup.source, setup.relay, users, n, config.path_loss_exponent)
    except DomainError as e:
        raise DomainError(f"location {location}: {e}") from e

    plan = plan_modes(gain_sr, gain_su, gain_ru, config.sigma2, Policy.SATISFACTION, alpha=setup.alpha,
                      scope=setup.feasibility_scope)
    owned = plan.allocation.dc_main == 0
    counts = [np.sum(owned & (plan.mode == mode.value)) for mode in (Mode.RC, Mode.DC, Mode.IDLE)]
    return np.array([spot[0], spot[1], owned.sum(), *counts], dtype=float)


def run_utility_region(config: ExperimentConfig, workers: Optional[int] = None) -> SweepResult:
    """
    Map of how often a user at a given spot is served in RC mode.

    Each sampled location hosts user 0 while the other users are redrawn per
    trial. pct_rc/pct_dc/pct_idle are shares of the subcarriers on which the
    sampled user is the main user; pct_rc_of_n divides the RC count by every
    subcarrier of every trial instead.
    """
    setup = config.utility_region
    if setup.locations < MIN_REGION_LOCATIONS:
        raise ConfigError(f"utility region needs at least {MIN_REGION_LOCATIONS} locations, got {setup.locations}")
    logger.info("utility region: %d locations x %d trials", setup.locations, setup.trials_per_location)
    stats = _run_trials(partial(_utility_location, config), setup.locations, workers)

    x, y, owned, rc, dc, idle = stats.T
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(owned > 0, 100.0 / owned, np.nan)
    pct_rc = rc * share

    source, relay = np.asarray(setup.source), np.asarray(setup.relay)
    points = np.column_stack([x, y])
    midpoint = 0.5 * (source + relay)
    side = np.where((points - midpoint) @ (source - relay) >= 0, 1, -1)

    table = pd.DataFrame({
        "x": x,
        "y": y,
        "distance_to_relay": np.linalg.norm(points - relay, axis=1),
        "side": side,
        "main_subcarriers": owned.astype(int),
        "pct_rc": pct_rc,
        "pct_dc": dc * share,
        "pct_idle": idle * share,
        "pct_rc_of_n": 100.0 * rc / (setup.trials_per_location * config.num_subcarriers),
        "category": categorize(pct_rc, setup.buckets),
    })
    metadata = _base_metadata(config)
    metadata["policy"] = f"{Policy.SATISFACTION.value} (alpha={setup.alpha:g})"
    metadata["trials_per_location"] = setup.trials_per_location
    metadata["feasibility_scope"] = setup.feasibility_scope
    return SweepResult("utility-region", table, setup.locations, config.master_seed, metadata)


EXPERIMENTS: Dict[str, Callable[..., SweepResult]] = {
    "relay-sweep": run_relay_sweep,
    "mode-gain": run_mode_gain,
    "utility-region": run_utility_region,
}


def run_experiment(name: str, config: ExperimentConfig, workers: Optional[int] = None) -> SweepResult:
    try:
        runner = EXPERIMENTS[name]
    except KeyError as e:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from e
    result = runner(config, workers=workers)
    logger.info("%s finished: %d rows", name, len(result.table))
    return result
