import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssris.rectifier import (FitError, MeasurementSet, NumericalError, RectifierModel,
                             UnreachableDemandError, bundled_measurements, exponential_average, fit,
                             load_fit, load_measurements, monte_carlo_average, save_fit)

MODEL = RectifierModel(c=2.5e4, d=8e-5, p_sat=9.6e-5)


def logistic_oracle(model, x):
    """Direct transcription of the shifted logistic, evaluated in extended precision."""
    x = np.asarray(x, dtype=np.longdouble)
    c, d, p_sat = (np.longdouble(v) for v in (model.c, model.d, model.p_sat))
    omega = 1 / (1 + np.exp(c * d))
    raw = p_sat / (1 + np.exp(-c * (x - d)))
    return ((raw - p_sat * omega) / (1 - omega)).astype(float)


def test_psi_matches_logistic_formula():
    x = np.logspace(-9, -2, 200)
    assert np.allclose(MODEL.psi(x), logistic_oracle(MODEL, x), rtol=1e-12, atol=0)


def test_psi_anchor_values():
    assert MODEL.psi(0.0) == 0.0
    assert MODEL.psi(1.0) == pytest.approx(MODEL.p_sat, rel=1e-12)
    om = MODEL.omega
    assert MODEL.psi(MODEL.d) == pytest.approx(MODEL.p_sat * (0.5 - om) / (1 - om), rel=1e-12)


def test_psi_rejects_negative_input():
    with pytest.raises(ValueError):
        MODEL.psi(-1e-6)


def test_psi_strictly_increasing_on_log_grid():
    x = np.logspace(math.log10(MODEL.p_sat * 1e-6), math.log10(100 * MODEL.d), 2000)
    x = x[x < 12 * MODEL.d]  # beyond this the curve is flat to double precision
    assert np.all(np.diff(MODEL.psi(x)) > 0)


def test_omega_range():
    assert 0 < MODEL.omega < 0.5
    assert RectifierModel(1e9, 1.0, 1.0).omega == 0.0


def test_threshold_is_inverse_at_saturation_fraction():
    assert MODEL.psi(MODEL.p_thr) == pytest.approx(0.99 * MODEL.p_sat, rel=1e-10)


@pytest.mark.parametrize("x_over_d", np.logspace(-1, 1, 41))
def test_det_round_trip(x_over_d):
    x = x_over_d * MODEL.d
    assert MODEL.psi_inverse(MODEL.psi(x), "det") == pytest.approx(x, rel=1e-8)


@pytest.mark.parametrize("x_over_d", np.logspace(-1, 1, 11))
def test_dt_round_trip(x_over_d):
    p = x_over_d * MODEL.d
    assert MODEL.psi_inverse(MODEL.psi_bar_dt(p), "dt") == pytest.approx(p, rel=1e-8)


def test_inverse_of_zero_and_unreachable():
    assert MODEL.psi_inverse(0.0, "det") == 0.0
    assert MODEL.psi_inverse(0.0, "dt") == 0.0
    for kind in ("det", "dt"):
        with pytest.raises(UnreachableDemandError):
            MODEL.psi_inverse(MODEL.p_sat, kind)
    assert math.isinf(MODEL.psi_inverse_det(2 * MODEL.p_sat))
    ceiling = MODEL.psi_bar_dt(1e3 * MODEL.d)
    assert np.isinf(MODEL.psi_inverse_dt(np.array([0.5 * (ceiling + MODEL.p_sat)]))[0])
    with pytest.raises(ValueError):
        MODEL.psi_inverse(1e-6, "avg")


def test_vectorized_inverses_match_scalar():
    y = np.linspace(0, 0.9, 7) * MODEL.p_sat
    det = MODEL.psi_inverse_det(y)
    dt = MODEL.psi_inverse_dt(y)
    for i, v in enumerate(y):
        assert det[i] == pytest.approx(MODEL.psi_inverse(float(v), "det"), rel=1e-12)
        assert dt[i] == pytest.approx(MODEL.psi_inverse(float(v), "dt"), rel=1e-9)


def test_exponential_average_of_linear_model():
    eta = 0.37
    for p in (0.0, 1e-6, 3e-4, 2.0):
        assert exponential_average(lambda x: eta * x, p) == pytest.approx(eta * p, rel=1e-12, abs=0)


def test_psi_bar_dt_zero_and_bounded():
    assert MODEL.psi_bar_dt(0.0) == 0.0
    p = np.logspace(-8, 0, 300)
    vals = MODEL.psi_bar_dt(p)
    assert np.all((vals >= 0) & (vals < MODEL.p_sat))
    assert np.all(np.diff(vals) > 0)


def test_quadrature_cross_check_against_adaptive():
    for p in np.logspace(math.log10(MODEL.d / 100), math.log10(MODEL.d * 100), 25):
        assert MODEL.cross_check(float(p)) <= 1e-8 * MODEL.p_sat


def test_cross_check_flags_mismatch():
    class Broken(RectifierModel):
        def psi_bar_dt(self, p_avg, nodes=96):
            return 1.1 * super().psi_bar_dt(p_avg, nodes)

    with pytest.raises(NumericalError):
        Broken(MODEL.c, MODEL.d, MODEL.p_sat).cross_check(MODEL.d)


def test_monte_carlo_agrees_at_inflection():
    rng = np.random.default_rng(7)
    mc = monte_carlo_average(MODEL.psi, MODEL.d, 1_000_000, rng)
    assert MODEL.psi_bar_dt(MODEL.d) == pytest.approx(mc, rel=5e-3)
    assert monte_carlo_average(MODEL.psi, 0.0, 10, rng) == 0.0


def test_random_and_deterministic_characteristics_cross(rectifier):
    p = np.logspace(-7, -2.5, 400)
    gap = rectifier.psi_bar_dt(p) - rectifier.psi(p)
    assert gap[0] > 0 and gap[-1] < 0
    # well above the knee the averaged curve stays clearly below the deterministic one
    above = p > 2.5e-4
    assert np.all(gap[above] < -0.02 * rectifier.psi(p[above]))


@pytest.mark.parametrize("truth", [
    RectifierModel(2.5e4, 8e-5, 9.6e-5),
    RectifierModel(4e3, 5e-4, 2e-4),
    RectifierModel(1.5e6, 1e-6, 3e-7),
])
def test_fit_recovers_noiseless_parameters(truth):
    x = np.logspace(math.log10(truth.d / 20), math.log10(truth.d * 30), 30)
    result = fit(MeasurementSet(x, truth.psi(x)))
    for name in ("c", "d", "p_sat"):
        assert getattr(result.model, name) == pytest.approx(getattr(truth, name), rel=1e-3)


def test_fit_with_noise_recovers_saturation():
    truth = RectifierModel(2.5e4, 8e-5, 9.6e-5)
    x = np.logspace(math.log10(4e-6), math.log10(3e-3), 30)
    estimates = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        y = truth.psi(x) * (1 + 0.01 * rng.standard_normal(x.size))
        estimates.append(fit(MeasurementSet(x, y)).model.p_sat)
    assert np.all(np.abs(np.array(estimates) / truth.p_sat - 1) < 0.05)


def test_fit_rejects_degenerate_data():
    x = np.array([1e-5, 2e-5, 3e-5, 4e-5])
    with pytest.raises(FitError):
        fit(MeasurementSet(x, np.zeros(4)))
    with pytest.raises(FitError):
        fit(MeasurementSet(x[:3], np.ones(3)))


def test_measurement_set_validation():
    with pytest.raises(ValueError):
        MeasurementSet(np.array([2.0, 1.0]), np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        MeasurementSet(np.array([1.0, 2.0]), np.array([-0.1, 0.2]))


def test_load_measurements_converts_units(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("# comment\nrf_input_mw,dc_output_uw\n0.1,2.5\n0.2,7.0\n")
    data = load_measurements(path)
    assert np.allclose(data.rf_input, [1e-4, 2e-4])
    assert np.allclose(data.dc_output, [2.5e-6, 7e-6])


@pytest.mark.parametrize("header", ["rf_input_dbm,dc_output_uw", "power_mw,dc_output_uw", "rf_input_mw"])
def test_load_measurements_rejects_bad_headers(tmp_path, header):
    path = tmp_path / "m.csv"
    path.write_text(header + "\n0.1,2.5\n")
    with pytest.raises(ValueError):
        load_measurements(path)


def test_bundled_fit_reproduces_bundled_data(rectifier):
    data = bundled_measurements()
    assert len(data) >= 20
    assert data.rf_input.max() == pytest.approx(3e-3)
    resid = rectifier.psi(data.rf_input) - data.dc_output
    # within the 1% measurement scatter plus a small floor
    assert np.all(np.abs(resid) <= 0.03 * data.dc_output + 1e-7)
    # the stability of the inverse round trip needs c*d of order one or two
    assert rectifier.c * rectifier.d < 2.4


def test_fit_save_load_round_trip(tmp_path):
    x = np.logspace(-5.5, -2.5, 20)
    result = fit(MeasurementSet(x, MODEL.psi(x)))
    save_fit(result, tmp_path / "fit.json", source="unit")
    loaded = load_fit(tmp_path / "fit.json")
    assert loaded == result.model


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1e-3, max_value=0.98))
def test_det_inverse_property(frac):
    y = frac * MODEL.p_sat
    assert MODEL.psi(MODEL.psi_inverse_det(y)) == pytest.approx(y, rel=1e-9)


def test_psi_bar_dt_continuous_across_branch_switch():
    switch = 1.0 / MODEL.c
    below, above = MODEL.psi_bar_dt(np.array([switch * (1 - 1e-9), switch * (1 + 1e-9)]))
    assert above == pytest.approx(below, rel=1e-8)
    # far above the knee the shortfall from saturation is about P_sat * x_knee / p
    assert MODEL.p_sat - MODEL.psi_bar_dt(1.0) > 0
