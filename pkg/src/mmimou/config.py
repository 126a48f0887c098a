"""Simulation configuration.

The on-disk format is flat ``key = value`` text with dotted namespaces, e.g.::

    scheduler.n_antennas = 64
    channel.shadow_sigma_bs_nlos_db = 6.0
    sim.scheme = "mmimo_u"

which is also valid TOML. Precedence, lowest first: built-in defaults,
config file, ``MMIMOU_<SECTION>__<KEY>`` environment variables, explicit
``key=value`` overrides.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import sys
import typing
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "MMIMOU_"


class ConfigError(ValueError):
    """Invalid configuration key or value."""


@dataclass
class LayoutConfig:
    num_sites: int = 7
    isd_m: float = 500.0
    sectors_per_site: int = 3
    ues_per_sector: float = 32.0
    clusters_per_sector: int = 2
    stas_per_cluster: int = 7
    cluster_radius_m: float = 20.0
    min_distance_m: float = 35.0
    bs_height_m: float = 25.0
    ue_height_m: float = 1.5
    wifi_height_m: float = 1.5


@dataclass
class ChannelConfig:
    carrier_ghz: float = 5.15
    bandwidth_hz: float = 20e6
    noise_psd_dbm_hz: float = -174.0
    ue_noise_figure_db: float = 9.0
    bs_noise_figure_db: float = 5.0
    shadow_sigma_bs_los_db: float = 4.0
    shadow_sigma_bs_nlos_db: float = 6.0
    shadow_sigma_d2d_los_db: float = 3.0
    shadow_sigma_d2d_nlos_db: float = 4.0
    k_factor_intercept_db: float = 13.0
    k_factor_slope_db_per_m: float = 0.03
    bs_floor_m: float = 35.0
    d2d_floor_m: float = 3.0
    element_max_gain_dbi: float = 8.0
    element_beamwidth_deg: float = 65.0
    element_max_attenuation_db: float = 30.0
    downtilt_deg: float = 12.0


@dataclass
class PowerConfig:
    bs_tx_dbm: float = 30.0
    ap_tx_dbm: float = 24.0
    sta_tx_dbm: float = 18.0
    ue_max_dbm: float = 23.0
    ue_p0_dbm: float = -58.0
    ue_alpha: float = 0.6
    pilot_resource_blocks: int = 100


@dataclass
class SchedulerConfig:
    n_antennas: typing.Optional[int] = None
    k_ues: int = 8
    d_nulls: typing.Optional[int] = None
    policy: str = "half"
    ue_sensitivity_dbm: float = -94.0


@dataclass
class SubspaceConfig:
    covariance_mode: str = "exact"
    m_c: int = 512


@dataclass
class PhyConfig:
    gamma_lbt_dbm: float = -62.0
    lbt_snapshots: int = 0
    pilot_length: int = 8
    condition_bound: float = 1e12
    csi_normalization: str = "fast_fading"


@dataclass
class SimConfig:
    scheme: str = "mmimo_u"
    wifi_present: bool = True
    drops: int = 100
    seed: int = 0
    threads: int = 1
    out_dir: str = "results"
    wifi_rate_mbps: float = 65.0
    n_list: typing.List[int] = field(default_factory=lambda: [16, 32, 64])
    m_c_list: typing.List[int] = field(default_factory=lambda: [8, 16, 32, 64, 128, 256, 512])
    d_list: typing.List[int] = field(default_factory=lambda: [0, 4, 8, 16, 24, 32, 40, 48, 56])
    cluster_list: typing.List[int] = field(default_factory=lambda: [1, 2, 4])


@dataclass
class SimulationConfig:
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    subspace: SubspaceConfig = field(default_factory=SubspaceConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def replace(self, **overrides) -> "SimulationConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"scheduler.k_ues": 4})``."""
        new = from_dict(to_dict(self))
        for key, value in overrides.items():
            set_key(new, key, value)
        return new

    def validate(self, require_n: bool = True) -> None:
        validate(self, require_n=require_n)


SECTIONS = tuple(f.name for f in dataclasses.fields(SimulationConfig))


def _field_types(section_obj) -> dict:
    return typing.get_type_hints(type(section_obj))


def _coerce(key: str, tp, value):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union and type(None) in args:
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(key, inner, value)
    if origin in (list, typing.List):
        (inner,) = args
        if isinstance(value, str):
            value = [v for v in value.replace(";", ",").split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return [_coerce(key, inner, v) for v in value]
    if tp is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.strip().lower() in ("true", "1", "yes", "on"):
            return True
        if isinstance(value, str) and value.strip().lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if tp is int:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value.strip())
            except ValueError:
                pass
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value.strip())
            except ValueError:
                pass
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value.strip().strip('"').strip("'")
    raise ConfigError(f"{key}: unsupported field type {tp}")


def set_key(cfg: SimulationConfig, key: str, value) -> None:
    """Set a dotted key with type coercion; unknown keys raise ConfigError."""
    parts = key.strip().split(".")
    if len(parts) != 2 or parts[0] not in SECTIONS:
        raise ConfigError(f"unknown configuration key {key!r}")
    section = getattr(cfg, parts[0])
    types = _field_types(section)
    if parts[1] not in types:
        raise ConfigError(f"unknown configuration key {key!r}")
    setattr(section, parts[1], _coerce(key, types[parts[1]], value))


def to_dict(cfg: SimulationConfig) -> dict:
    """Flat ``{dotted_key: value}`` mapping."""
    flat = {}
    for sec in SECTIONS:
        for name, value in dataclasses.asdict(getattr(cfg, sec)).items():
            flat[f"{sec}.{name}"] = value
    return flat


def from_dict(flat: dict) -> SimulationConfig:
    cfg = SimulationConfig()
    for key, value in flat.items():
        set_key(cfg, key, value)
    return cfg


def _flatten_toml(data: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in data.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten_toml(v, key + "."))
        else:
            flat[key] = v
    return flat


def _format_value(value) -> str:
    if value is None:
        return '"none"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            raise ConfigError(f"cannot serialize {value!r}")
        return repr(value)
    if isinstance(value, (int, str, list)):
        return json.dumps(value)
    raise ConfigError(f"cannot serialize {value!r}")


def dumps(cfg: SimulationConfig) -> str:
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in to_dict(cfg).items())


def loads(text: str) -> SimulationConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return from_dict(_flatten_toml(data))


def env_overrides(environ=None) -> dict:
    """Collect ``MMIMOU_SECTION__KEY=value`` variables as dotted overrides."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        sec, _, key = name[len(ENV_PREFIX):].partition("__")
        out[f"{sec.lower()}.{key.lower()}"] = value
    return out


def parse_config(path=None, overrides=(), environ=None, require_n=False) -> SimulationConfig:
    """Build a config from defaults, an optional file, env vars and overrides.

    ``overrides`` is a sequence of ``"key=value"`` strings.
    """
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = loads(fh.read())
    else:
        cfg = SimulationConfig()
    for key, value in env_overrides(environ).items():
        set_key(cfg, key, value)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        value = value.strip()
        try:
            value = json.loads(value)
        except ValueError:
            pass
        set_key(cfg, key, value)
    validate(cfg, require_n=require_n)
    return cfg


def validate(cfg: SimulationConfig, require_n: bool = True) -> None:
    lay, sch = cfg.layout, cfg.scheduler
    if lay.num_sites not in (1, 7, 19):
        raise ConfigError(f"layout.num_sites must be 1, 7 or 19, got {lay.num_sites}")
    if lay.isd_m <= 0:
        raise ConfigError("layout.isd_m must be positive")
    if lay.cluster_radius_m < 0:
        raise ConfigError("layout.cluster_radius_m must be non-negative")
    if cfg.subspace.covariance_mode not in ("exact", "estimated"):
        raise ConfigError("subspace.covariance_mode must be 'exact' or 'estimated'")
    if cfg.subspace.m_c < 1:
        raise ConfigError("subspace.m_c must be >= 1")
    if cfg.sim.scheme not in ("mmimo_u", "conventional"):
        raise ConfigError("sim.scheme must be 'mmimo_u' or 'conventional'")
    if sch.policy not in ("half", "fixed"):
        raise ConfigError("scheduler.policy must be 'half' or 'fixed'")
    if cfg.phy.csi_normalization not in ("fast_fading", "slow_gain"):
        raise ConfigError("phy.csi_normalization must be 'fast_fading' or 'slow_gain'")
    if sch.k_ues < 0:
        raise ConfigError("scheduler.k_ues must be >= 0")
    if sch.k_ues > cfg.phy.pilot_length:
        raise ConfigError("scheduler.k_ues exceeds phy.pilot_length (pilots must be distinct in a cell)")
    if sch.d_nulls is not None and sch.d_nulls < 0:
        raise ConfigError("scheduler.d_nulls must be >= 0")
    n = sch.n_antennas
    if n is None:
        if require_n:
            raise ConfigError("scheduler.n_antennas is required (set --n or scheduler.n_antennas)")
        return
    if n < 1:
        raise ConfigError("scheduler.n_antennas must be positive")
    if sch.k_ues > n:
        raise ConfigError(f"scheduler.k_ues={sch.k_ues} exceeds scheduler.n_antennas={n}")
    if sch.d_nulls is not None:
        m_c = cfg.subspace.m_c if cfg.subspace.covariance_mode == "estimated" else math.inf
        bound = min(n - sch.k_ues, m_c)
        if sch.d_nulls > bound:
            raise ConfigError(
                f"scheduler.d_nulls={sch.d_nulls} violates D <= min(N - K, M_c) = {bound}"
            )
