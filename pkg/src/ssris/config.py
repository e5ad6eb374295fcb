"""Scenario configuration: loading, validation and unit conversion.

Config files are flat TOML tables whose keys carry their unit as a suffix
(``wavelength_m``, ``g_tx_db``, ``p_sta_w``). Decibel quantities are converted
to linear scale exactly once, here, and every other module works in SI units.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for schema violations; ``problems`` lists one message per field."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class FieldSpec:
    key: str
    attr: str
    convert: Callable[[Any], Any]
    check: Callable[[Any], bool]
    requirement: str
    assumption: bool = False
    default: Any = None
    description: str = ""


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError("expected a number")
    return float(value)


def _integer(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError("expected an integer")
    return int(value)


def _vector3(value: Any) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise TypeError("expected a list of three numbers")
    return tuple(_number(v) for v in value)


def _text(value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError("expected a string")
    return value


def _flag(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError("expected true or false")
    return value


def _positive(x) -> bool:
    return x > 0


def _non_negative(x) -> bool:
    return x >= 0


def _always(_x) -> bool:
    return True


SCHEMA: tuple[FieldSpec, ...] = (
    FieldSpec("grid_step", "grid_step", _number, lambda x: 0 < x < 1, "in (0, 1)",
              description="sampling distance of the splitting-ratio grid"),
    FieldSpec("n_unit_cells", "n_uc", _integer,
              lambda x: x >= 1 and math.isqrt(x) ** 2 == x, "a positive perfect square"),
    FieldSpec("p_thr_saturation_fraction", "p_thr_fraction", _number, lambda x: 0 < x < 1,
              "in (0, 1)", default=0.99,
              description="rectifier threshold is the input giving this fraction of P_sat"),
    FieldSpec("snr_bt_min_db", "snr_bt_min", lambda v: db_to_linear(_number(v)), _positive,
              "finite"),
    FieldSpec("g_tx_db", "g_tx", lambda v: db_to_linear(_number(v)), _positive, "finite"),
    FieldSpec("epsilon", "epsilon", _number, lambda x: 0 < x < 1, "in (0, 1)"),
    FieldSpec("wavelength_m", "wavelength", _number, _positive, "> 0"),
    FieldSpec("n_bits", "n_bits", _integer, lambda x: 1 <= x <= 8, "in [1, 8]"),
    FieldSpec("gamma", "gamma", _number, _non_negative, ">= 0"),
    FieldSpec("area_center_m", "area_center", _vector3, _always, "three coordinates"),
    FieldSpec("area_width_y_m", "area_width_y", _number, _non_negative, ">= 0"),
    FieldSpec("area_height_z_m", "area_height_z", _number, _non_negative, ">= 0"),
    FieldSpec("velocity_kmh", "velocity", lambda v: _number(v) / 3.6, _positive, "> 0"),
    FieldSpec("kappa", "kappa", _number, _positive, "> 0"),
    FieldSpec("t_resp_s", "t_resp", _number, _non_negative, ">= 0"),
    FieldSpec("p_max_w", "p_max", _number, _positive, "> 0"),
    FieldSpec("beta0_db", "beta0", lambda v: db_to_linear(_number(v)), lambda x: 0 < x <= 1,
              "<= 0 dB"),
    FieldSpec("r_min_bps_hz", "r_min", _number, _non_negative, ">= 0"),
    FieldSpec("t_delay_s", "t_delay", _number, _non_negative, ">= 0"),
    FieldSpec("d_inc_m", "d_inc", _number, _positive, "> 0", assumption=True,
              description="BS to RIS distance"),
    FieldSpec("bs_aoa_azimuth_deg", "bs_aoa_azimuth_deg", _number,
              lambda x: -90 < x < 90, "in (-90, 90)", assumption=True),
    FieldSpec("bs_aoa_elevation_deg", "bs_aoa_elevation_deg", _number,
              lambda x: -90 < x < 90, "in (-90, 90)", assumption=True),
    FieldSpec("g_rx_db", "g_rx", lambda v: db_to_linear(_number(v)), _positive, "finite",
              assumption=True),
    FieldSpec("noise_power_dbm", "noise_power", lambda v: dbm_to_watts(_number(v)), _positive,
              "finite", assumption=True),
    FieldSpec("t_symbol_s", "t_symbol", _number, _positive, "> 0", assumption=True),
    FieldSpec("n_est", "n_est", _integer, _non_negative, ">= 0", assumption=True),
    FieldSpec("p_sta_w", "p_sta", _number, _non_negative, ">= 0"),
    FieldSpec("p_uc_w", "p_uc", _number, _non_negative, ">= 0"),
    FieldSpec("p_sh_w", "p_sh", _number, _non_negative, ">= 0"),
    FieldSpec("rectifier_fit", "rectifier_fit", _text, _always, "a path or 'bundled'",
              default="bundled", assumption=True),
    FieldSpec("subarea_samples", "subarea_samples", _integer, lambda x: x >= 1, ">= 1",
              default=5, assumption=True,
              description="points per side of the worst-case gain grid in each subarea"),
    FieldSpec("aoa_grid_step_deg", "aoa_grid_step_deg", _number, lambda x: 0 < x <= 30,
              "in (0, 30]", default=1.0, assumption=True),
    FieldSpec("ideal_codeword_phases", "ideal_codeword_phases", _flag, _always, "a boolean",
              default=False, assumption=True,
              description="use unquantized codeword phases in the reflection gain"),
)

_BY_KEY = {spec.key: spec for spec in SCHEMA}


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical, protocol and power-model parameters in SI units."""

    grid_step: float
    n_uc: int
    snr_bt_min: float
    g_tx: float
    epsilon: float
    wavelength: float
    n_bits: int
    gamma: float
    area_center: tuple[float, float, float]
    area_width_y: float
    area_height_z: float
    velocity: float
    kappa: float
    t_resp: float
    p_max: float
    beta0: float
    r_min: float
    t_delay: float
    d_inc: float
    bs_aoa_azimuth_deg: float
    bs_aoa_elevation_deg: float
    g_rx: float
    noise_power: float
    t_symbol: float
    n_est: int
    p_sta: float
    p_uc: float
    p_sh: float
    p_thr_fraction: float = 0.99
    rectifier_fit: str = "bundled"
    subarea_samples: int = 5
    aoa_grid_step_deg: float = 1.0
    ideal_codeword_phases: bool = False
    source: str = field(default="<memory>", compare=False)

    @property
    def bs_direction(self) -> np.ndarray:
        """Unit vector from the RIS toward the BS (x is the RIS broadside)."""
        az = math.radians(self.bs_aoa_azimuth_deg)
        el = math.radians(self.bs_aoa_elevation_deg)
        return np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])

    @property
    def beta0_db(self) -> float:
        return 10.0 * math.log10(self.beta0)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out.pop("source")
        out["area_center"] = list(self.area_center)
        return out

    def digest(self) -> str:
        """SHA-256 over the canonical JSON of the converted fields."""
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any], source: str = "<memory>") -> "ScenarioConfig":
        problems = [f"unknown key '{key}'" for key in raw if key not in _BY_KEY]
        values: dict[str, Any] = {}
        for spec in SCHEMA:
            if spec.key not in raw:
                if spec.default is None:
                    problems.append(f"missing required key '{spec.key}'")
                else:
                    values[spec.attr] = spec.default
                continue
            try:
                value = spec.convert(raw[spec.key])
            except (TypeError, ValueError, OverflowError) as exc:
                problems.append(f"'{spec.key}': {exc}")
                continue
            if not spec.check(value):
                problems.append(f"'{spec.key}' must be {spec.requirement}, got {raw[spec.key]!r}")
                continue
            values[spec.attr] = value
        if problems:
            raise ConfigError(problems)
        return cls(source=source, **values)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            with path.open("rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError([f"config file not found: {path}"]) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
        logger.debug("loaded config %s", path)
        return cls.from_mapping(raw, source=str(path))


def assumption_keys() -> list[str]:
    """Keys whose values are modelling assumptions rather than published parameters."""
    return [spec.key for spec in SCHEMA if spec.assumption]


def bundled_config(name: str) -> ScenarioConfig:
    """Load one of the shipped example configs, e.g. ``"scenario1"``."""
    ref = resources.files("ssris") / "data" / f"{name}.toml"
    with resources.as_file(ref) as path:
        return ScenarioConfig.load(path)
