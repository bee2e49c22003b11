"""JSON experiment configs and run manifests.

Config angles are in degrees; everything returned is in radians.
"""

from __future__ import annotations

import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .engine import ConfigError, ExperimentConfig
from .models import Channel, ChannelCap, DetectorMode, DetectorModel, SourceKind, SourceModel

SCHEMA_VERSION = 1

_TOP = {"schemaVersion", "nPairs", "seed", "source", "detectorA", "detectorB",
        "identicalSpins", "darkRate", "sharedStream"}
_REQUIRED = {"schemaVersion", "nPairs", "seed", "detectorA", "detectorB"}
_DETECTOR = {"mode", "halfAngle", "nHalfAngle", "sHalfAngle", "nAxisOffset", "sAxisOffset"}
_SOURCE = {"kind", "axis", "strength"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown field(s) in {where}: {', '.join(extra)}")


def _number(d: dict, key: str, where: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}.{key} is required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number, got {v!r}")
    return float(v)


def _detector(d: dict, where: str) -> DetectorModel:
    _reject_unknown(d, _DETECTOR, where)
    try:
        mode = DetectorMode(d.get("mode", DetectorMode.TWO_CHANNEL.value))
    except ValueError:
        choices = ", ".join(m.value for m in DetectorMode)
        raise ConfigError(f"{where}.mode must be one of {choices}") from None
    if "halfAngle" in d and ("nHalfAngle" in d or "sHalfAngle" in d):
        raise ConfigError(f"{where}: give halfAngle or nHalfAngle/sHalfAngle, not both")
    if "halfAngle" in d:
        n_half = s_half = _number(d, "halfAngle", where)
    else:
        n_half = _number(d, "nHalfAngle", where)
        s_half = _number(d, "sHalfAngle", where)
    for val in (n_half, s_half):
        if not 0.0 < val <= 90.0:
            raise ConfigError(f"{where} half-angle must lie in (0, 90] degrees, got {val!r}")
    return DetectorModel(
        ChannelCap(Channel.N, math.radians(n_half), math.radians(_number(d, "nAxisOffset", where, 0.0))),
        ChannelCap(Channel.S, math.radians(s_half), math.radians(_number(d, "sAxisOffset", where, 0.0))),
        mode,
    )


def _source(d: dict) -> SourceModel:
    _reject_unknown(d, _SOURCE, "source")
    try:
        kind = SourceKind(d.get("kind", "uniform"))
    except ValueError:
        raise ConfigError("source.kind must be 'uniform' or 'anisotropic'") from None
    if kind is SourceKind.UNIFORM:
        if set(d) - {"kind"}:
            raise ConfigError("a uniform source takes no axis or strength")
        return SourceModel.uniform()
    axis = d.get("axis", [0.0, 0.0, 1.0])
    if not (isinstance(axis, list) and len(axis) == 3):
        raise ConfigError("source.axis must be a list of three numbers")
    strength = _number(d, "strength", "source")
    try:
        return SourceModel.anisotropic([float(x) for x in axis], strength)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid anisotropic source: {exc}") from None


def _bool(d: dict, key: str, default: bool) -> bool:
    v = d.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{key} must be true or false")
    return v


def parse_config(raw: dict) -> ExperimentConfig:
    _reject_unknown(raw, _TOP, "config")
    missing = sorted(_REQUIRED - set(raw))
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    if raw["schemaVersion"] != SCHEMA_VERSION or isinstance(raw["schemaVersion"], bool):
        raise ConfigError(f"schemaVersion must be {SCHEMA_VERSION}")
    try:
        return ExperimentConfig(
            n_pairs=raw["nPairs"],
            seed=raw["seed"],
            detector_a=_detector(raw["detectorA"], "detectorA"),
            detector_b=_detector(raw["detectorB"], "detectorB"),
            source=_source(raw.get("source", {"kind": "uniform"})),
            identical_spins=_bool(raw, "identicalSpins", True),
            dark_rate=_number(raw, "darkRate", "config", 0.0),
            shared_stream=_bool(raw, "sharedStream", False),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> tuple[ExperimentConfig, dict]:
    """Parse a config file; returns the config and the raw JSON object."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw), raw


def digest(obj) -> str:
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def manifest(command: str, config_obj, seed: int | None) -> dict:
    return {
        "toolVersion": __version__,
        "configDigest": digest(config_obj),
        "seed": seed,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
