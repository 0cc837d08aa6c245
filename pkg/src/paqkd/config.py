"""Campaign configuration: defaults, flat key=value files, and validation.

Defaults reproduce the reference 1000-packet experiment: V_A = 1.16 SNU,
eta = 0.5, epsilon = 0.024, xi = 0.0328, T = 1, beta = 0.95, 7800 pulses per
packet with 10% of them revealed.  Flag overrides win over file values, which
win over defaults.  Environment variables are never consulted.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

MODES = ("in-process", "session-loopback", "session-tcp")

DEFAULT_MASTER_SEED = 12345


class ConfigError(ValueError):
    """Invalid campaign configuration; the message names the offending field."""


@dataclass
class CampaignConfig:
    packets: int = 1000
    pulses_per_packet: int = 7800
    v_a: float = 1.16
    eta: float = 0.5
    epsilon: float = 0.024
    xi: float = 0.0328
    t: float = 1.0
    beta: float = 0.95
    reveal_fraction: float = 0.10
    alpha_db_per_km: float = 0.2
    master_seed: int = DEFAULT_MASTER_SEED
    output_dir: str = "campaign_out"
    mode: str = "in-process"
    dump_pulses: bool = False
    # Test hook: pin the rotation angle of every sampled transform.
    force_theta: float | None = None

    def validate(self) -> "CampaignConfig":
        def check(name, ok, requirement):
            if not ok:
                raise ConfigError(f"{name}: {requirement} (got {getattr(self, name)!r})")

        check("packets", self.packets >= 0, "must be non-negative")
        check("pulses_per_packet", self.pulses_per_packet >= 1, "must be at least 1")
        check("v_a", self.v_a > 0, "must be positive")
        check("eta", 0 < self.eta <= 1, "must be in (0, 1]")
        check("epsilon", self.epsilon >= 0, "must be non-negative")
        check("xi", self.xi >= 0, "must be non-negative")
        check("t", 0 < self.t <= 1, "must be in (0, 1]")
        check("beta", 0 < self.beta <= 1, "must be in (0, 1]")
        check("reveal_fraction", 0 < self.reveal_fraction <= 1, "must be in (0, 1]")
        check("alpha_db_per_km", self.alpha_db_per_km > 0, "must be positive")
        check("master_seed", self.master_seed >= 0, "must be non-negative")
        check("mode", self.mode in MODES, f"must be one of {', '.join(MODES)}")
        return self

    def session_fingerprint(self) -> tuple[float, int, float]:
        """The HELLO parameters both endpoints must agree on."""
        return (self.v_a, self.pulses_per_packet, self.reveal_fraction)


_FIELD_TYPES = {f.name: f.type for f in fields(CampaignConfig)}


def _parse_value(name: str, raw: str):
    if name == "force_theta":
        return None if raw.lower() in ("none", "") else float(raw)
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError("expected a boolean")
        return raw
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(path: str | Path | None = None,
                 overrides: dict | None = None) -> CampaignConfig:
    """Build a validated config from defaults, an optional file, then overrides."""
    cfg = CampaignConfig()
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            setattr(cfg, key, _parse_value(key, raw.strip()))
    for key, value in (overrides or {}).items():
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg.validate()
