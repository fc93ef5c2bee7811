import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from errors import ConfigError, DomainError

# Recorded in every output file so results can be regenerated elsewhere
GENERATOR_ID = "numpy.PCG64"


def make_rng(seed: int) -> np.random.Generator:
    """Return the project's reproducible generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class NodePosition:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ConfigError(f"node coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "NodePosition") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    @classmethod
    def from_pair(cls, pair: Sequence[float]) -> "NodePosition":
        if len(pair) != 2:
            raise ConfigError(f"a position needs exactly two coordinates, got {list(pair)}")
        return cls(float(pair[0]), float(pair[1]))


@dataclass(frozen=True)
class SystemGeometry:
    source: NodePosition
    relay: NodePosition
    users: Tuple[NodePosition, ...]

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if len(self.users) < 2:
            raise ConfigError(f"at least two users are required, got {len(self.users)}")
        if self.source.distance_to(self.relay) <= 0:
            raise ConfigError("relay is co-located with the source")
        for index, user in enumerate(self.users):
            if user.distance_to(self.source) <= 0:
                raise ConfigError(f"user {index} is co-located with the source")
            if user.distance_to(self.relay) <= 0:
                raise ConfigError(f"user {index} is co-located with the relay")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SystemGeometry":
        try:
            return cls(
                source=NodePosition.from_pair(data["source"]),
                relay=NodePosition.from_pair(data["relay"]),
                users=tuple(NodePosition.from_pair(u) for u in data["users"]),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed geometry document: {e}") from e


@dataclass(frozen=True)
class FadingConfig:
    num_subcarriers: int = 64
    path_loss_exponent: float = 3.0
    noise_power: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.num_subcarriers) < 1:
            raise ConfigError(f"num_subcarriers must be >= 1, got {self.num_subcarriers}")
        if not self.path_loss_exponent >= 0:
            raise ConfigError(f"path_loss_exponent must be >= 0, got {self.path_loss_exponent}")
        if not self.noise_power > 0:
            raise ConfigError(f"noise_power must be > 0, got {self.noise_power}")


@dataclass(frozen=True)
class SubcarrierGains:
    """Gains seen on one subcarrier: S-R scalar and per-user S-U, R-U vectors."""
    gain_sr: float
    gain_su: np.ndarray
    gain_ru: np.ndarray

    @property
    def num_users(self) -> int:
        return int(self.gain_su.shape[0])


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    gain_sr: np.ndarray
    gain_su: np.ndarray
    gain_ru: np.ndarray
    noise_power: float = 1.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        sr = np.asarray(self.gain_sr, dtype=float)
        su = np.asarray(self.gain_su, dtype=float)
        ru = np.asarray(self.gain_ru, dtype=float)
        if sr.ndim != 1 or su.ndim != 2 or su.shape != ru.shape or su.shape[0] != sr.shape[0]:
            raise ConfigError(
                f"inconsistent gain shapes: sr {sr.shape}, su {su.shape}, ru {ru.shape}"
            )
        if su.shape[1] < 2:
            raise ConfigError(f"at least two users are required, got {su.shape[1]}")
        if not (np.all(sr > 0) and np.all(su > 0) and np.all(ru > 0)):
            raise ConfigError("every channel gain must be strictly positive")
        if not self.noise_power > 0:
            raise ConfigError(f"noise power must be > 0, got {self.noise_power}")
        object.__setattr__(self, "gain_sr", sr)
        object.__setattr__(self, "gain_su", su)
        object.__setattr__(self, "gain_ru", ru)

    @property
    def num_subcarriers(self) -> int:
        return int(self.gain_sr.shape[0])

    @property
    def num_users(self) -> int:
        return int(self.gain_su.shape[1])

    def subcarrier(self, n: int) -> SubcarrierGains:
        if not 0 <= n < self.num_subcarriers:
            raise DomainError(f"subcarrier index {n} outside [0, {self.num_subcarriers})")
        return SubcarrierGains(float(self.gain_sr[n]), self.gain_su[n].copy(), self.gain_ru[n].copy())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.num_subcarriers,
            "M": self.num_users,
            "sigma2": float(self.noise_power),
            "gain_sr": self.gain_sr.tolist(),
            "gain_su": self.gain_su.reshape(-1).tolist(),
            "gain_ru": self.gain_ru.reshape(-1).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChannelRealization":
        try:
            n, m = int(data["N"]), int(data["M"])
            sr = np.asarray(data["gain_sr"], dtype=float)
            su = np.asarray(data["gain_su"], dtype=float).reshape(n, m)
            ru = np.asarray(data["gain_ru"], dtype=float).reshape(n, m)
            sigma2 = float(data.get("sigma2", 1.0))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed channel document: {e}") from e
        if sr.shape != (n,):
            raise ConfigError(f"gain_sr has {sr.size} entries, expected N={n}")
        return cls(sr, su, ru, sigma2)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"channel file is not valid JSON: {e}") from e
        return cls.from_dict(data)


def path_gain(distance: float, eta: float) -> float:
    """
    Mean power gain of a link under the d^-eta path-loss law.

    Args:
        distance: Link length in unitless plane coordinates (unit reference distance)
        eta: Path-loss exponent

    Returns:
        distance ** -eta
    """
    distance = float(distance)
    if not distance > 0:
        raise DomainError(f"distance must be > 0, got {distance}")
    return distance ** (-float(eta))


def place_users_in_square(
    rng: np.random.Generator, center: Sequence[float], side: float, count: int
) -> List[NodePosition]:
    """Uniform user placement inside an axis-aligned square."""
    half = side / 2.0
    xy = rng.uniform(-half, half, size=(count, 2)) + np.asarray(center, dtype=float)
    return [NodePosition(float(x), float(y)) for x, y in xy]


def draw_fading(rng: np.random.Generator, shape: Tuple[int, ...], num_users: int):
    """
    Unit-mean Rayleigh power fades for the S-R, S-U and R-U links, in that draw order.

    Args:
        rng: Generator to draw from
        shape: Leading shape of the S-R fades, subcarriers last
        num_users: Trailing user axis of the S-U and R-U fades

    Returns:
        (fade_sr shape, fade_su shape+(M,), fade_ru shape+(M,)), floored at the
        smallest positive float so every gain stays strictly positive
    """
    tiny = np.finfo(float).tiny
    fade_sr = np.maximum(rng.standard_exponential(shape), tiny)
    fade_su = np.maximum(rng.standard_exponential((*shape, num_users)), tiny)
    fade_ru = np.maximum(rng.standard_exponential((*shape, num_users)), tiny)
    return fade_sr, fade_su, fade_ru


def stacked_gains(
    rng: np.random.Generator,
    source: Sequence[float],
    relay: Sequence[float],
    users: np.ndarray,
    num_subcarriers: int,
    eta: float,
):
    """
    Channel gains for a stack of user layouts sharing one source and relay.

    Args:
        users: (..., M, 2) user coordinates

    Returns:
        (gain_sr (..., N), gain_su (..., N, M), gain_ru (..., N, M))
    """
    source, relay = np.asarray(source, dtype=float), np.asarray(relay, dtype=float)
    users = np.asarray(users, dtype=float)
    d_su = np.linalg.norm(users - source, axis=-1)
    d_ru = np.linalg.norm(users - relay, axis=-1)
    if np.any(d_su <= 0) or np.any(d_ru <= 0):
        raise DomainError("a user sits on the source or the relay")
    mean_sr = path_gain(np.linalg.norm(source - relay), eta)

    fade_sr, fade_su, fade_ru = draw_fading(rng, (*users.shape[:-2], num_subcarriers), users.shape[-2])
    return (
        fade_sr * mean_sr,
        fade_su * (d_su ** -eta)[..., None, :],
        fade_ru * (d_ru ** -eta)[..., None, :],
    )


def generate_channel(geometry: SystemGeometry, config: FadingConfig) -> ChannelRealization:
    """
    Draw one quasi-static Rayleigh realisation for every subcarrier.

    Draw order is fixed (S-R, then S-U row-major, then R-U row-major), so two
    geometries with the same user count and seed share their fading draws and
    only differ through the path gains.

    Args:
        geometry: Node positions
        config: Fading parameters and seed

    Returns:
        ChannelRealization with power gains Exp(1) * d^-eta
    """
    n, m = config.num_subcarriers, geometry.num_users
    eta = config.path_loss_exponent
    fade_sr, fade_su, fade_ru = draw_fading(make_rng(config.seed), (n,), m)

    mean_sr = path_gain(geometry.source.distance_to(geometry.relay), eta)
    mean_su = np.array([path_gain(geometry.source.distance_to(u), eta) for u in geometry.users])
    mean_ru = np.array([path_gain(geometry.relay.distance_to(u), eta) for u in geometry.users])

    return ChannelRealization(
        gain_sr=fade_sr * mean_sr,
        gain_su=fade_su * mean_su,
        gain_ru=fade_ru * mean_ru,
        noise_power=config.noise_power,
        metadata={"generator": GENERATOR_ID, "seed": int(config.seed)},
    )
