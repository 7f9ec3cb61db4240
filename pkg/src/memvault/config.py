"""Engine and service configuration.

Durations accept ``"30s"``, ``"72h"``, ``"7d"``, ``"500ms"`` or bare
seconds. The service refuses to start unless the approver registry can
actually satisfy an R4 quorum (two distinct high-privilege principals);
otherwise the gravest operations would be permanently stuck.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from .errors import ValidationFailure
from .governance import RiskTier

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h|d)?\s*$")
_UNIT_SECONDS = {"ms": 0.001, "s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0}


def parse_duration(value: "timedelta | int | float | str") -> timedelta:
    if isinstance(value, timedelta):
        return value
    if isinstance(value, (int, float)):
        return timedelta(seconds=float(value))
    match = _DURATION_RE.match(value)
    if not match:
        raise ValidationFailure(f"cannot parse duration {value!r}")
    amount, unit = match.groups()
    return timedelta(seconds=float(amount) * _UNIT_SECONDS[unit or "s"])


@dataclass
class EngineConfig:
    content_max_bytes: int = 64 * 1024
    recall_half_life: timedelta = timedelta(days=30)
    decay_horizon: timedelta = timedelta(days=90)
    decay_floor: float = 0.2
    pending_window: timedelta = timedelta(hours=72)
    cooling_off: timedelta = timedelta(days=7)
    snapshot_interval: int = 1000
    system_principal: str = "system"
    # principal -> highest risk tier that principal may decide
    approvers: dict[str, RiskTier] = field(default_factory=dict)

    @property
    def half_life_days(self) -> float:
        return self.recall_half_life.total_seconds() / 86400.0

    def approver_ceiling(self, principal: str) -> RiskTier | None:
        return self.approvers.get(principal)

    def validate(self) -> "EngineConfig":
        if self.pending_window <= timedelta(0):
            raise ValidationFailure("pending_window must be positive")
        if self.cooling_off < timedelta(0):
            raise ValidationFailure("cooling_off must be non-negative")
        if self.snapshot_interval < 0:
            raise ValidationFailure("snapshot_interval must be non-negative")
        return self


@dataclass
class ServiceConfig:
    data_dir: Path = Path("./memvault-data")
    listen_address: str = "127.0.0.1:8787"
    # bearer token -> principal; the special form "citizen-current:<name>"
    # resolves to that citizen's current instance at request time.
    tokens: dict[str, str] = field(default_factory=dict)
    sweep_interval: float = 0.5
    # When set (RFC 3339 instant), the service runs on a manually advanced
    # clock and exposes POST /debug/clock/advance. Test harnesses only.
    manual_clock_start: str | None = None
    engine: EngineConfig = field(default_factory=EngineConfig)

    def validate(self) -> "ServiceConfig":
        self.engine.validate()
        high = [p for p, tier in self.engine.approvers.items() if tier >= RiskTier.R4]
        if len(high) < 2:
            raise ValidationFailure(
                "approver registry needs at least two R4-ceiling principals"
            )
        return self

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    @classmethod
    def from_dict(cls, data: dict) -> "ServiceConfig":
        engine_keys = {
            "content_max_bytes": int,
            "recall_half_life": parse_duration,
            "decay_horizon": parse_duration,
            "decay_floor": float,
            "pending_window": parse_duration,
            "cooling_off": parse_duration,
            "snapshot_interval": int,
            "system_principal": str,
        }
        engine = EngineConfig()
        for key, convert in engine_keys.items():
            if key in data:
                setattr(engine, key, convert(data[key]))
        for entry in data.get("approver_registry", []):
            engine.approvers[entry["principal"]] = RiskTier.parse(entry["tier_ceiling"])
        config = cls(engine=engine)
        if "data_dir" in data:
            config.data_dir = Path(data["data_dir"])
        if "listen_address" in data:
            config.listen_address = data["listen_address"]
        if "sweep_interval" in data:
            config.sweep_interval = float(data["sweep_interval"])
        if "manual_clock_start" in data:
            config.manual_clock_start = data["manual_clock_start"]
        config.tokens = dict(data.get("tokens", {}))
        return config

    @classmethod
    def from_file(cls, path: "Path | str") -> "ServiceConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
        return cls.from_dict(data or {})
