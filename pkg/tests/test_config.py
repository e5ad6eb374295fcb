import math
from importlib import resources

import pytest
import tomli

from ssris.config import ConfigError, ScenarioConfig, assumption_keys, bundled_config, db_to_linear, dbm_to_watts


def _raw(name="scenario1"):
    path = resources.files("ssris") / "data" / f"{name}.toml"
    return tomli.loads(path.read_text())


def test_bundled_configs_load_and_convert_units():
    sc = bundled_config("scenario1")
    assert sc.g_tx == pytest.approx(100.0)
    assert sc.snr_bt_min == pytest.approx(10.0)
    assert sc.beta0 == pytest.approx(10 ** -0.05)
    assert sc.beta0_db == pytest.approx(-0.5)
    assert sc.noise_power == pytest.approx(1e-12)
    assert sc.velocity == pytest.approx(3 / 3.6)
    assert sc.n_uc == 900 and sc.n_bits == 3
    assert bundled_config("scenario3").p_uc == 0.0


def test_conversions():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(-3.0) == pytest.approx(0.501187, rel=1e-6)
    assert dbm_to_watts(-90.0) == pytest.approx(1e-12)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)


def test_missing_noise_key_is_named():
    raw = _raw()
    del raw["noise_power_dbm"]
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_mapping(raw)
    assert any("noise_power_dbm" in p for p in exc.value.problems)


def test_unknown_and_invalid_keys_all_reported():
    raw = _raw()
    raw["lambda"] = 0.01
    raw["epsilon"] = 1.5
    raw["n_unit_cells"] = 50
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_mapping(raw)
    text = " ".join(exc.value.problems)
    assert "lambda" in text and "epsilon" in text and "n_unit_cells" in text


@pytest.mark.parametrize("key, value", [
    ("velocity_kmh", 0.0),
    ("grid_step", 1.0),
    ("beta0_db", 0.5),
    ("area_center_m", [1.0, 2.0]),
    ("n_bits", 2.5),
    ("p_sta_w", -1e-6),
])
def test_field_checks(key, value):
    raw = _raw()
    raw[key] = value
    with pytest.raises(ConfigError):
        ScenarioConfig.from_mapping(raw)


def test_defaults_fill_optional_keys():
    raw = _raw()
    for key in ("subarea_samples", "aoa_grid_step_deg", "rectifier_fit", "p_thr_saturation_fraction"):
        raw.pop(key, None)
    sc = ScenarioConfig.from_mapping(raw)
    assert sc.subarea_samples == 5 and sc.p_thr_fraction == 0.99 and sc.rectifier_fit == "bundled"


def test_assumption_keys_flag_unpublished_inputs():
    keys = set(assumption_keys())
    assert {"d_inc_m", "noise_power_dbm", "g_rx_db", "t_symbol_s", "n_est"} <= keys
    assert "p_max_w" not in keys and "epsilon" not in keys


def test_digest_tracks_values_not_source(tmp_path):
    sc = bundled_config("scenario1")
    path = tmp_path / "copy.toml"
    path.write_text((resources.files("ssris") / "data" / "scenario1.toml").read_text())
    assert ScenarioConfig.load(path).digest() == sc.digest()
    assert sc.replace(p_sta=2e-6).digest() != sc.digest()
    assert len(sc.digest()) == 64


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ScenarioConfig.load(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("grid_step = = 1")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(bad)


def test_bs_direction_is_unit_and_points_to_front():
    d = bundled_config("scenario2").bs_direction
    assert math.isclose(float(d @ d), 1.0)
    assert d[0] > 0
