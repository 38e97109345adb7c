"""Global configuration file (YAML).

Every key has a default and unknown keys are rejected. Layout::

    engine:            # EngineConfig fields
      alpha_direct: 0.6
    update:            # UpdateConfig fields
      window_seconds: 300
      weights: {w_conn: 0.4, w_notice: 0.3, w_weird: 0.2, w_stat: 0.1}
      success_states: [SF]
    discovery:
      weights: {price: 1.0}
      reference_location: null
      performance_hint: {}
      asset_types: null        # constraint filter
      locations: null
      max_price: null
    address_map: {10.0.0.1: provider-a}
    notice_severity: {"Scan::Port_Scan": 0.8}
    default_notice_severity: 1.0
    scenario:          # ScenarioConfig fields, see trustmarket.sim
      seed: 42
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from .discovery import ConstraintFilter, IntentPriorities
from .engine import EngineConfig
from .errors import ConfigError, TrustMarketError, ValidationError
from .ingestion import AssetType
from .update import RpWeights, UpdateConfig

TOP_LEVEL = ("engine", "update", "discovery", "address_map", "notice_severity",
             "default_notice_severity", "scenario")
DISCOVERY_KEYS = ("weights", "reference_location", "performance_hint",
                  "asset_types", "locations", "max_price")


@dataclass(frozen=True)
class Settings:
    engine: EngineConfig = field(default_factory=EngineConfig)
    update: UpdateConfig = field(default_factory=UpdateConfig)
    priorities: IntentPriorities = field(default_factory=IntentPriorities)
    constraints: ConstraintFilter = field(default_factory=ConstraintFilter)
    address_map: Mapping[str, str] = field(default_factory=dict)
    notice_severity: Mapping[str, float] = field(default_factory=dict)
    default_notice_severity: float = 1.0
    scenario: Mapping[str, Any] = field(default_factory=dict)


def _section(raw: Any, name: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(raw).__name__}")
    return raw


def _check_keys(section: Mapping, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s): {', '.join(map(str, unknown))}")


def _build(cls, values: Mapping, where: str):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(values, names, where)
    try:
        return cls(**values)
    except (TypeError, ValueError, ValidationError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def settings_from_dict(raw: Mapping[str, Any] | None) -> Settings:
    raw = _section(raw, "config")
    _check_keys(raw, TOP_LEVEL, "config")

    engine = _build(EngineConfig, _section(raw.get("engine"), "engine"), "engine")

    upd = dict(_section(raw.get("update"), "update"))
    if "weights" in upd:
        upd["weights"] = _build(RpWeights, _section(upd["weights"], "update.weights"), "update.weights")
    if "success_states" in upd:
        upd["success_states"] = frozenset(upd["success_states"])
    update = _build(UpdateConfig, upd, "update")

    disc = _section(raw.get("discovery"), "discovery")
    _check_keys(disc, DISCOVERY_KEYS, "discovery")
    try:
        priorities = IntentPriorities(
            weights=dict(disc.get("weights") or {"price": 1.0}),
            reference_location=disc.get("reference_location"),
            performance_hint=dict(disc.get("performance_hint") or {}),
        )
        types = disc.get("asset_types")
        locs = disc.get("locations")
        constraints = ConstraintFilter(
            asset_types=None if types is None else frozenset(AssetType.parse(t) for t in types),
            locations=None if locs is None else frozenset(locs),
            max_price=disc.get("max_price"),
        )
    except (TrustMarketError, TypeError) as exc:
        raise ConfigError(f"discovery: {exc}") from exc

    address_map = {str(k): str(v) for k, v in _section(raw.get("address_map"), "address_map").items()}
    severity = {}
    for note, weight in _section(raw.get("notice_severity"), "notice_severity").items():
        if not isinstance(weight, (int, float)) or not 0.0 <= weight <= 1.0:
            raise ConfigError(f"notice_severity.{note}: weight must lie in [0, 1], got {weight!r}")
        severity[str(note)] = float(weight)
    default_sev = raw.get("default_notice_severity", 1.0)
    if not isinstance(default_sev, (int, float)) or not 0.0 <= default_sev <= 1.0:
        raise ConfigError("default_notice_severity must lie in [0, 1]")

    return Settings(
        engine=engine,
        update=update,
        priorities=priorities,
        constraints=constraints,
        address_map=address_map,
        notice_severity=severity,
        default_notice_severity=float(default_sev),
        scenario=dict(_section(raw.get("scenario"), "scenario")),
    )


def load_config(path: str | None) -> Settings:
    """Read the YAML configuration file; ``None`` gives all defaults."""
    if path is None:
        return Settings()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return settings_from_dict(raw)


def _plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (set, frozenset)):
        return sorted(_plain(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, AssetType):
        return value.value
    return value


def config_hash(settings: Settings) -> str:
    """SHA-256 of the fully resolved configuration."""
    blob = json.dumps(_plain(settings), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def resolved(settings: Settings) -> dict:
    return _plain(settings)

