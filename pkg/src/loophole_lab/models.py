"""Hidden-variable sources and detector outcome rules.

The hidden variable is a unit vector ``lam`` (the ball's S->N axis). All
setting directions live in the x-z plane, see :func:`setting_direction`.
Vectorised functions take ``lam`` arrays of shape ``(n, 3)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

HALF_PI = 0.5 * math.pi
MAX_REJECTION_ROUNDS = 1_000_000


class Outcome(enum.IntEnum):
    NO_DETECT = 0
    N = 1
    S = 2
    INVALID = 3
    DETECT = 4


class Channel(str, enum.Enum):
    N = "N"
    S = "S"


class DetectorMode(str, enum.Enum):
    TWO_CHANNEL = "two_channel"
    SINGLE_CHANNEL_N = "single_channel_n"
    ANALYSER_REMOVED = "analyser_removed"


class SourceKind(str, enum.Enum):
    UNIFORM = "uniform"
    ANISOTROPIC = "anisotropic"


def setting_direction(angle: float) -> np.ndarray:
    """Unit vector for a detector setting in the fixed analysis plane."""
    return np.array([math.cos(angle), 0.0, math.sin(angle)])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if v.shape != (3,) or not np.isfinite(norm) or norm == 0.0:
        raise ValueError(f"expected a non-zero 3-vector, got {v!r}")
    return v / norm


@dataclass(frozen=True)
class HiddenVariable:
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.shape != (3,) or abs(np.linalg.norm(lam) - 1.0) > 1e-12:
            raise ValueError("hidden variable must be a unit 3-vector")
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class SourceModel:
    """Distribution of ``lam``: uniform, or density proportional to 1 + strength*(lam.axis)^2."""

    kind: SourceKind = SourceKind.UNIFORM
    axis: tuple = (0.0, 0.0, 1.0)
    strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        object.__setattr__(self, "axis", tuple(_unit(self.axis)))
        if not (self.strength >= 0.0 and math.isfinite(self.strength)):
            raise ValueError(f"anisotropy strength must be finite and >= 0, got {self.strength!r}")

    @classmethod
    def uniform(cls) -> "SourceModel":
        return cls()

    @classmethod
    def anisotropic(cls, axis, strength: float) -> "SourceModel":
        return cls(SourceKind.ANISOTROPIC, tuple(axis), float(strength))

    def density(self, lam: np.ndarray) -> np.ndarray:
        """Unnormalised density at each row of ``lam``."""
        lam = np.atleast_2d(lam)
        if self.kind is SourceKind.UNIFORM:
            return np.ones(lam.shape[0])
        c = lam @ np.asarray(self.axis)
        return 1.0 + self.strength * c * c


def _uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random((2, n))
    z = 2.0 * u[0] - 1.0
    az = 2.0 * math.pi * u[1]
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack((r * np.cos(az), r * np.sin(az), z))


def sample_lambdas(source: SourceModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` hidden variables from ``source`` as an ``(n, 3)`` array."""
    if source.kind is SourceKind.UNIFORM or source.strength == 0.0:
        return _uniform_sphere(rng, n)
    axis = np.asarray(source.axis)
    envelope = 1.0 + source.strength
    out = np.empty((n, 3))
    filled = 0
    for _ in range(MAX_REJECTION_ROUNDS):
        if filled == n:
            return out
        need = n - filled
        # draw a little extra: acceptance rate is at least 1/envelope
        batch = max(16, int(need * envelope * 1.1) + 8)
        cand = _uniform_sphere(rng, batch)
        c = cand @ axis
        keep = cand[rng.random(batch) * envelope < 1.0 + source.strength * c * c]
        take = min(need, keep.shape[0])
        out[filled:filled + take] = keep[:take]
        filled += take
    if filled == n:
        return out
    raise RuntimeError("rejection sampler exceeded its iteration cap")


def sample_lambda(source: SourceModel, rng: np.random.Generator) -> HiddenVariable:
    lam = sample_lambdas(source, rng, 1)[0]
    return HiddenVariable(lam / np.linalg.norm(lam))


# p(lam, cap) -> detection probabilities in [0, 1], one per row of lam
StochasticRule = Callable[[np.ndarray, "ChannelCap"], np.ndarray]


@dataclass(frozen=True)
class ChannelCap:
    """One analyser output channel: the region of the sphere where it fires."""

    channel: Channel
    half_angle: float
    axis_offset: float = 0.0
    nominal_angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "channel", Channel(self.channel))
        if not (0.0 < self.half_angle <= HALF_PI + 1e-12):
            raise ValueError(f"cap half-angle must lie in (0, pi/2], got {self.half_angle!r}")
        if not math.isfinite(self.axis_offset):
            raise ValueError("cap axis offset must be finite")

    @property
    def axis(self) -> np.ndarray:
        v = setting_direction(self.nominal_angle + self.axis_offset)
        return v if self.channel is Channel.N else -v

    def contains(self, lam: np.ndarray) -> np.ndarray:
        return np.atleast_2d(lam) @ self.axis > math.cos(self.half_angle)


@dataclass(frozen=True)
class DetectorModel:
    n_cap: ChannelCap
    s_cap: ChannelCap
    mode: DetectorMode = DetectorMode.TWO_CHANNEL
    stochastic: Optional[StochasticRule] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", DetectorMode(self.mode))
        if self.n_cap.channel is not Channel.N or self.s_cap.channel is not Channel.S:
            raise ValueError("n_cap must be an N channel and s_cap an S channel")

    @classmethod
    def equal_caps(cls, half_angle: float, mode=DetectorMode.TWO_CHANNEL,
                   n_offset: float = 0.0, s_offset: float = 0.0, stochastic=None) -> "DetectorModel":
        return cls(ChannelCap(Channel.N, half_angle, n_offset),
                   ChannelCap(Channel.S, half_angle, s_offset), mode, stochastic)

    def at(self, setting: float) -> "DetectorModel":
        """Copy of this detector pointed along ``setting``."""
        return replace(self, n_cap=replace(self.n_cap, nominal_angle=setting),
                       s_cap=replace(self.s_cap, nominal_angle=setting))


def outcomes(lam: np.ndarray, detector: DetectorModel,
             rng: np.random.Generator | None = None) -> np.ndarray:
    """Outcome codes (:class:`Outcome` values) for each row of ``lam``.

    Deterministic detectors consume no randomness. A stochastic rule needs
    ``rng``; both channels firing on one event yields ``INVALID``.
    """
    lam = np.atleast_2d(lam)
    n = lam.shape[0]
    if detector.mode is DetectorMode.ANALYSER_REMOVED:
        seen = np.abs(lam @ detector.n_cap.axis) > math.cos(detector.n_cap.half_angle)
        return np.where(seen, Outcome.DETECT, Outcome.NO_DETECT).astype(np.int8)

    if detector.stochastic is None:
        fire_n = detector.n_cap.contains(lam)
        fire_s = detector.s_cap.contains(lam)
    else:
        if rng is None:
            raise ValueError("a stochastic detector needs an rng")
        u = rng.random((2, n))
        fire_n = u[0] < np.asarray(detector.stochastic(lam, detector.n_cap))
        fire_s = u[1] < np.asarray(detector.stochastic(lam, detector.s_cap))
    if detector.mode is DetectorMode.SINGLE_CHANNEL_N:
        fire_s = np.zeros(n, dtype=bool)

    codes = np.full(n, Outcome.NO_DETECT, dtype=np.int8)
    codes[fire_n] = Outcome.N
    codes[fire_s] = Outcome.S
    codes[fire_n & fire_s] = Outcome.INVALID
    return codes


def outcome(lam: HiddenVariable | np.ndarray, detector: DetectorModel,
            rng: np.random.Generator | None = None) -> Outcome:
    vec = lam.lam if isinstance(lam, HiddenVariable) else np.asarray(lam, dtype=float)
    return Outcome(int(outcomes(vec[None, :], detector, rng)[0]))
