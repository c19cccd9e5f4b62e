from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agrichain.errors import ConvergenceError, DegenerateDataError, OutOfRangeError
from agrichain.kinetics import (
    ResponseClass,
    SensorParams,
    active_region,
    association_response,
    classify,
    classify_array,
    concentration_for_rf,
    disassociation_response,
    equilibrium_rf,
    fit_rf_model,
    response_factor,
    response_factor_array,
    simulate_traces,
    true_class,
    write_traces_csv,
)


def rk4_association(params, conc, t_end, dt=0.01):
    """Fixed-step RK4 of dR/dt = k_a A (R_max - R) - k_d R from R = 0."""
    def rhs(r):
        return params.k_a * conc * (params.r_max - r) - params.k_d * r

    r = 0.0
    for _ in range(int(round(t_end / dt))):
        k1 = rhs(r)
        k2 = rhs(r + dt / 2 * k1)
        k3 = rhs(r + dt / 2 * k2)
        k4 = rhs(r + dt * k3)
        r += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return r


def test_sensor_params_validation():
    with pytest.raises(ValueError):
        SensorParams(k_a=0.0, k_d=1e-3)
    with pytest.raises(ValueError):
        SensorParams(k_a=1e-3, k_d=-1.0)
    assert SensorParams.table3().k_D == pytest.approx(0.1)
    assert SensorParams.figure().k_D == pytest.approx(10.0)
    assert SensorParams.from_kd(2.5).k_D == pytest.approx(2.5)


def test_association_matches_rk4_at_a_few_points():
    params = SensorParams.figure()
    for conc, t in [(1.0, 50.0), (10.0, 200.0), (50.0, 30.0)]:
        assert association_response(params, conc, t) == pytest.approx(rk4_association(params, conc, t), abs=1e-6)


def test_association_limits():
    params = SensorParams.figure()
    assert association_response(params, 10.0, 0.0) == 0.0
    # long times approach R_eq = R_max A / (A + k_D)
    assert association_response(params, 10.0, 1e6) == pytest.approx(50.0)


def test_disassociation_decays_exponentially():
    assert disassociation_response(80.0, 1e-3, 0.0) == 80.0
    assert disassociation_response(80.0, 1e-3, 1000.0) == pytest.approx(80.0 * math.exp(-1.0))


@pytest.mark.parametrize("k_D", [0.1, 1.0, 10.0])
def test_half_saturation(k_D):
    params = SensorParams.from_kd(k_D)
    assert abs(response_factor(params, k_D) - 0.5) <= 0.01


def test_response_factor_table_values():
    params = SensorParams.figure()
    assert response_factor(params, 0.0) == 0.0
    assert response_factor(params, 30.0) == pytest.approx(0.75, abs=1e-3)


def test_response_factor_step_cap():
    with pytest.raises(ConvergenceError):
        response_factor(SensorParams.figure(), 10.0, max_steps=3)


def test_vectorized_rf_matches_scalar_loop():
    params = SensorParams.figure()
    conc = np.array([0.0, 0.3, 2.0, 9.9, 10.0, 25.0, 49.0, 200.0])
    expected = [response_factor(params, c) for c in conc]
    np.testing.assert_allclose(response_factor_array(params, conc), expected, rtol=0, atol=1e-12)


def test_equilibrium_rf_and_inverse():
    assert equilibrium_rf(10.0, 10.0) == pytest.approx(0.5)
    assert concentration_for_rf(0.8, 10.0) == pytest.approx(40.0)
    with pytest.raises(ValueError):
        equilibrium_rf(1.0, 0.0)


@pytest.mark.parametrize("rf,label", [
    (0.0, "A"), (0.1999, "A"), (0.2, "B"), (0.39, "B"), (0.4, "C"), (0.5, "C"),
    (0.6, "D"), (0.79, "D"), (0.8, "E"), (0.99, "E"),
])
def test_classify_bins(rf, label):
    assert classify(rf).label == label


def test_classify_rejects_out_of_range():
    for rf in (-0.01, 1.01, float("nan")):
        with pytest.raises(OutOfRangeError):
            classify(rf)
    assert classify(1.0) is ResponseClass.E


def test_classify_array_indices():
    assert classify_array(np.array([0.1, 0.3, 0.5, 0.7, 0.9])).tolist() == [0, 1, 2, 3, 4]


def test_response_class_codes():
    assert [c.code for c in ResponseClass] == [1, 2, 3, 4, 5]
    assert ResponseClass.from_label("d") is ResponseClass.D
    assert true_class(25.0, 10.0) is ResponseClass.D


def test_active_region():
    lo, hi = active_region(10.0, 0.05)
    assert equilibrium_rf(lo, 10.0) == pytest.approx(0.05)
    assert equilibrium_rf(hi, 10.0) == pytest.approx(0.95)


def test_fit_exact_samples():
    conc = np.geomspace(0.5, 200, 12)
    fit = fit_rf_model(zip(conc, equilibrium_rf(conc, 7.0)))
    assert fit.k_D_hat == pytest.approx(7.0, rel=1e-8)
    assert fit.residual_sse < 1e-20


def test_fit_degenerate_inputs():
    with pytest.raises(DegenerateDataError):
        fit_rf_model([(1.0, 0.1), (2.0, 0.2)])
    with pytest.raises(DegenerateDataError):
        fit_rf_model([(5.0, 0.3)] * 10)


def test_traces_and_csv(tmp_path):
    assoc, dis = simulate_traces(SensorParams.figure(), 10.0, 100.0, dt=10.0)
    assert assoc.phase == "association" and dis.phase == "disassociation"
    assert dis.values[0] == pytest.approx(assoc.values[-1])
    assert dis.times[0] == pytest.approx(assoc.times[-1])
    path = tmp_path / "traces.csv"
    write_traces_csv(path, [assoc, dis])
    lines = path.read_text().splitlines()
    assert lines[0] == "time_s,response_ru,phase"
    assert len(lines) == 1 + len(assoc.times) + len(dis.times)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 500.0), st.floats(0.0, 500.0), st.floats(0.05, 50.0))
def test_rf_monotone_and_bounded(a, b, k_D):
    lo, hi = sorted((a, b))
    r_lo, r_hi = equilibrium_rf(lo, k_D), equilibrium_rf(hi, k_D)
    assert 0.0 <= r_lo <= r_hi < 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100.0))
def test_stepped_rf_sits_just_below_equilibrium(conc):
    params = SensorParams.figure()
    rf = float(response_factor_array(params, np.array([conc]))[0])
    eq = float(equilibrium_rf(conc, params.k_D))
    assert eq - 1e-3 <= rf <= eq
