"""Declarative scenario configuration (YAML).

Every section is a frozen dataclass. Unknown keys and out-of-range values
raise :class:`ConfigError` naming the dotted field path.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .geometry import LAYOUT_KINDS

PRESETS = ("r-geo", "leo", "w1", "w2", "w3")
CASES = ("T1-C1", "T1-C2", "T2-C1", "T2-C2")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class OrbitConfig:
    h_sat_km: float
    epsilon_deg: float


@dataclass(frozen=True)
class FrequencyConfig:
    f0_hz: float
    B_hz: float
    M_T1: int = 3
    M_T2: int = 1


@dataclass(frozen=True)
class FoAConfig:
    N: int
    d_over_lambda: float
    S: int
    Gamma_dbi: float
    Delta_over_L: float = 1.25
    layout_kind: str = "square-grid"
    winglet_rows: int = 0
    panel_area_m2: float | None = None
    winglet_row_area_m2: float | None = None


@dataclass(frozen=True)
class PowerConfig:
    solar_dc_per_m2: float
    array_surface_m2: float
    tx_platform_dc_ratio: float
    dc_to_rf_efficiency: float = 0.35
    output_backoff_db: float = 2.0
    antenna_losses_db: float = 1.3
    satellite_rf_w: float | None = None  # defaults to the chain maximum


@dataclass(frozen=True)
class LossConfig:
    fspl_db: float | None = None  # computed from the slant range at epsilon when unset
    atmospheric_db: float = 0.5
    body_db: float = 3.0
    fading_margin_db: float = 3.0
    shadowing_db: float = 4.0
    demod_loss_db: float = 1.0
    G_over_T_dbK: float = -31.6
    misc_loss_db: float = 0.0


@dataclass(frozen=True)
class LinkConfig:
    target_beam_throughput_mbps: float = 10.7
    bw_efficiency_factor: float = 0.9083
    noise_bandwidth_hz: float | None = None  # defaults to B / M
    user_position: str = "edge"
    max_iterations: int = 10_000


@dataclass(frozen=True)
class PhyConfig:
    required_sinr_db: tuple = (-7.0, -6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
    eta: tuple = (0.20, 0.23, 0.31, 0.38, 0.49, 0.59, 0.69, 0.82, 0.95, 1.11, 1.28)


@dataclass(frozen=True)
class MonteCarloConfig:
    phi_bar_deg: float = 0.0
    replications: int = 1
    seed: int = 0


@dataclass(frozen=True)
class GridConfig:
    resolution: int = 201
    half_width_deg: float | None = None  # defaults to the coverage angle


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    orbit: OrbitConfig
    frequency: FrequencyConfig
    foa: FoAConfig
    power: PowerConfig
    cases: tuple = CASES
    losses: LossConfig = LossConfig()
    link: LinkConfig = LinkConfig()
    phy: PhyConfig = PhyConfig()
    monte_carlo: MonteCarloConfig = MonteCarloConfig()
    grid: GridConfig = GridConfig()
    description: str = ""

    def to_dict(self) -> dict:
        return _to_plain(dataclasses.asdict(self))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"foa.S": 9})``; re-validated."""
        d = self.to_dict()
        for key, value in changes.items():
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(key, "no such section")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(key, "unknown field")
            node[parts[-1]] = value
        return config_from_dict(d)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


_SECTIONS = {
    "orbit": OrbitConfig, "frequency": FrequencyConfig, "foa": FoAConfig, "power": PowerConfig,
    "losses": LossConfig, "link": LinkConfig, "phy": PhyConfig, "monte_carlo": MonteCarloConfig,
    "grid": GridConfig,
}


def _coerce(path: str, value: Any, kind: str):
    """Convert one YAML scalar; ``kind`` is the annotation string of the field."""
    optional = "None" in kind
    if value is None:
        if optional:
            return None
        raise ConfigError(path, "is required")
    base = kind.replace("| None", "").strip()
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if base == "float":
        if isinstance(value, str):
            try:
                value = float(value)  # YAML 1.1 reads "2.2e9" as a string
            except ValueError:
                raise ConfigError(path, f"expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(path, f"expected a finite number, got {value!r}")
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if base == "tuple":
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}")
        return tuple(value)
    raise ConfigError(path, f"unsupported field type {kind}")


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")
    kwargs = {}
    for name, f in fields.items():
        sub = f"{path}.{name}" if path else name
        if name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigError(sub, "is required")
            continue
        kwargs[name] = _coerce(sub, data[name], str(f.type))
    return cls(**kwargs)


def _positive(path, v):
    if not v > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")


def _validate(cfg: ScenarioConfig) -> None:
    o, fr, foa, pw, ls, lk = cfg.orbit, cfg.frequency, cfg.foa, cfg.power, cfg.losses, cfg.link
    _positive("orbit.h_sat_km", o.h_sat_km)
    if not 0.0 <= o.epsilon_deg < 90.0:
        raise ConfigError("orbit.epsilon_deg", f"must be in [0, 90), got {o.epsilon_deg!r}")
    _positive("frequency.f0_hz", fr.f0_hz)
    _positive("frequency.B_hz", fr.B_hz)
    for name in ("M_T1", "M_T2"):
        if getattr(fr, name) not in (1, 3):
            raise ConfigError(f"frequency.{name}", "reuse factor must be 1 or 3")
    if foa.N < 1 or math.isqrt(foa.N) ** 2 != foa.N:
        raise ConfigError("foa.N", f"must be a positive perfect square, got {foa.N}")
    if foa.layout_kind == "square-grid" and (foa.S < 1 or math.isqrt(foa.S) ** 2 != foa.S):
        raise ConfigError("foa.S", f"must be a positive perfect square, got {foa.S}")
    _positive("foa.d_over_lambda", foa.d_over_lambda)
    if not foa.Delta_over_L >= 1.0:
        raise ConfigError("foa.Delta_over_L", f"panels would overlap below 1, got {foa.Delta_over_L!r}")
    if foa.layout_kind not in LAYOUT_KINDS[:3]:
        raise ConfigError("foa.layout_kind", f"must be one of {LAYOUT_KINDS[:3]}, got {foa.layout_kind!r}")
    if foa.layout_kind != "square-grid" and foa.S != 5:
        raise ConfigError("foa.S", "quincunx layouts have exactly 5 satellites")
    if foa.winglet_rows < 0:
        raise ConfigError("foa.winglet_rows", "must be non-negative")
    if not foa.Gamma_dbi > 10 * math.log10(2.0):
        raise ConfigError("foa.Gamma_dbi", "element peak gain must exceed 3.01 dBi")
    for name in ("solar_dc_per_m2", "array_surface_m2"):
        _positive(f"power.{name}", getattr(pw, name))
    for name in ("tx_platform_dc_ratio", "dc_to_rf_efficiency"):
        v = getattr(pw, name)
        if not 0.0 < v <= 1.0:
            raise ConfigError(f"power.{name}", f"must be a fraction in (0, 1], got {v!r}")
    if pw.satellite_rf_w is not None:
        _positive("power.satellite_rf_w", pw.satellite_rf_w)
    for f in dataclasses.fields(LossConfig):
        v = getattr(ls, f.name)
        if f.name != "G_over_T_dbK" and v is not None and v < 0:
            raise ConfigError(f"losses.{f.name}", f"must be non-negative, got {v!r}")
    _positive("link.bw_efficiency_factor", lk.bw_efficiency_factor)
    if lk.bw_efficiency_factor > 1:
        raise ConfigError("link.bw_efficiency_factor", "must not exceed 1")
    if lk.user_position not in ("edge", "center", "random"):
        raise ConfigError("link.user_position", f"unknown position {lk.user_position!r}")
    if lk.noise_bandwidth_hz is not None:
        _positive("link.noise_bandwidth_hz", lk.noise_bandwidth_hz)
    if lk.max_iterations < 1:
        raise ConfigError("link.max_iterations", "must be at least 1")
    for c in cfg.cases:
        if c not in CASES:
            raise ConfigError("cases", f"unknown case {c!r}; expected some of {CASES}")
    if len(cfg.phy.eta) != len(cfg.phy.required_sinr_db) or not cfg.phy.eta:
        raise ConfigError("phy", "eta and required_sinr_db need the same non-zero length")
    if not 0.0 <= cfg.monte_carlo.phi_bar_deg <= 180.0:
        raise ConfigError("monte_carlo.phi_bar_deg", "must be in [0, 180]")
    if cfg.monte_carlo.replications < 1:
        raise ConfigError("monte_carlo.replications", "must be at least 1")
    if cfg.grid.resolution < 3:
        raise ConfigError("grid.resolution", "must be at least 3")


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a mapping")
    top = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(data) - set(top))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    kwargs = {}
    for name, f in top.items():
        if name not in data:
            if f.default is dataclasses.MISSING:
                raise ConfigError(name, "is required")
            continue
        if name in _SECTIONS:
            kwargs[name] = _build(_SECTIONS[name], data[name], name)
        elif name == "cases":
            kwargs[name] = _coerce(name, data[name], "tuple")
        else:
            kwargs[name] = _coerce(name, data[name], "str")
    if "phy" in kwargs:
        phy = kwargs["phy"]
        kwargs["phy"] = PhyConfig(
            tuple(_coerce("phy.required_sinr_db", x, "float") for x in phy.required_sinr_db),
            tuple(_coerce("phy.eta", x, "float") for x in phy.eta),
        )
    cfg = ScenarioConfig(**kwargs)
    _validate(cfg)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a YAML file, or a bundled preset by name (``r-geo``, ``leo``, ``w1``...)."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        text = resources.files("foasim.presets").joinpath(f"{path}.yaml").read_text()
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg: ScenarioConfig, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_reference() -> dict:
    """Embedded reference rows with per-row tolerances."""
    text = resources.files("foasim.presets").joinpath("reference.yaml").read_text()
    return yaml.safe_load(text)
