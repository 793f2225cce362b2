import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatheat.control import (
    ControlSchedule,
    ErrorModelConstants,
    StateField,
    TruncationOrders,
    calibrate_c1,
    control_value,
    error_bound,
    sample_schedule,
    state_prediction,
    truncation_residual,
)
from flatheat.flat_output import FlatOutputs
from flatheat.gevrey import GevreyStep
from flatheat.spectral import CosineSeries, TensorCosineSeries, free_evolution, step_coefficients

TAU, T, S = 0.05, 0.35, 1.65
GS = GevreyStep(S)


def paper_family():
    return FlatOutputs(step_coefficients((-0.75, 1.25), 0.5, 25), TAU, T, GS)


def test_single_mode_residual_matches_finite_differences():
    flat = FlatOutputs(CosineSeries([0.6]), TAU, T, GS)
    o = TruncationOrders(8, 0, 0)
    t = np.linspace(0.08, 0.32, 9)
    z = np.linspace(0.1, 1.0, 10)
    R = truncation_residual(flat, o, t, z)
    y = flat.y_table(t, 9)[0, 9]
    want = z[None, :] ** 16 / math.factorial(16) * y[:, None]
    np.testing.assert_allclose(R, want, rtol=1e-12, atol=1e-300)
    dt, dx = 1e-4, 1e-3
    th = lambda tt, zz: state_prediction(flat, o, tt, zz)  # noqa: E731
    d_t = (th(t - 2 * dt, z) - 8 * th(t - dt, z) + 8 * th(t + dt, z) - th(t + 2 * dt, z)) / (12 * dt)
    lap = np.stack([th(t, z + k * dx) for k in (-2, -1, 0, 1, 2)])
    lap = (-lap[0] + 16 * lap[1] - 30 * lap[2] + 16 * lap[3] - lap[4]) / (12 * dx * dx)
    assert np.abs(d_t - lap - R).max() <= 1e-4 * np.abs(R).max()


def test_control_is_axial_flux_of_prediction():
    flat = paper_family()
    o = TruncationOrders(35, 0, 25)
    t = np.linspace(0.08, 0.32, 7)
    h = 1e-4
    th = lambda zz: state_prediction(flat, o, t, np.array([zz]))[:, 0]  # noqa: E731
    flux1 = (th(1 - 2 * h) - 8 * th(1 - h) + 8 * th(1 + h) - th(1 + 2 * h)) / (12 * h)
    flux0 = (th(-2 * h) - 8 * th(-h) + 8 * th(h) - th(2 * h)) / (12 * h)
    u = control_value(flat, o, t)
    assert np.abs(flux1 - u).max() <= 1e-6 * np.abs(u).max()
    assert np.abs(flux0).max() <= 1e-8 * np.abs(u).max()


def test_prediction_matches_free_evolution_at_tau():
    flat = paper_family()
    z = np.linspace(0, 1, 41)
    th = state_prediction(flat, TruncationOrders(35, 0, 25), np.array([TAU]), z)[0]
    free = free_evolution(step_coefficients((-0.75, 1.25), 0.5, 25), TAU, z)
    np.testing.assert_allclose(th, free, atol=1e-12)


def test_schedule_zero_before_tau_and_for_zero_data():
    flat = paper_family()
    times = np.linspace(0, T, 71)
    sched = sample_schedule(flat, TruncationOrders(20, 0, 25), times)
    assert np.all(sched.values[times <= TAU] == 0.0)
    assert np.any(sched.values[times > TAU] != 0.0)
    zero = FlatOutputs(CosineSeries(np.zeros(26)), TAU, T, GS)
    assert np.all(sample_schedule(zero, TruncationOrders(20, 0, 25), times).values == 0.0)


def test_schedule_grid_validation():
    flat = paper_family()
    with pytest.raises(ValueError):
        sample_schedule(flat, TruncationOrders(10, 0, 5), np.array([0.2, 0.1]))
    with pytest.raises(ValueError):
        sample_schedule(flat, TruncationOrders(10, 0, 5), np.array([0.1, 0.5]))


def test_schedule_interpolation():
    s = ControlSchedule(np.array([0.0, 1.0, 2.0]), np.zeros(0), np.array([0.0, 2.0, 6.0]))
    assert s.at(1.0)[0] == 2.0
    assert s.at(1.5)[0] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        s.at(2.5)


def test_separable_data_gives_uniform_control_in_2d():
    c = np.zeros((4, 26))
    c[0] = step_coefficients((-0.75, 1.25), 0.5, 25).coeffs
    flat2 = FlatOutputs(TensorCosineSeries(c, cross_dim=1), TAU, T, GS)
    t = np.linspace(0.06, 0.34, 5)
    xp = np.linspace(0, 1, 7)
    u2 = control_value(flat2, TruncationOrders(20, 3, 25), t, xp)
    u1 = control_value(paper_family(), TruncationOrders(20, 0, 25), t)
    np.testing.assert_allclose(u2, np.repeat(u1[:, None], 7, axis=1), rtol=1e-13, atol=1e-13)


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))
def test_control_linear_in_data(a, b):
    c1 = step_coefficients((1.0, 0.0), 0.3, 10).coeffs
    c2 = step_coefficients((0.0, 1.0), 0.7, 10).coeffs
    o = TruncationOrders(15, 0, 10)
    t = np.linspace(0.06, 0.34, 6)
    u = lambda c: control_value(FlatOutputs(CosineSeries(c), TAU, T, GS), o, t)  # noqa: E731
    lhs = u(a * c1 + b * c2)
    rhs = a * u(c1) + b * u(c2)
    assert np.abs(lhs - rhs).max() <= 1e-11 * (1 + np.abs(rhs).max() + np.abs(u(c1)).max() * 3)


def test_residual_decreases_with_taylor_order():
    flat = paper_family()
    t = np.linspace(TAU, T, 31)
    z = np.linspace(0, 1, 21)
    r = [np.abs(truncation_residual(flat, TruncationOrders(i, 0, 25), t, z)).max() for i in (10, 20, 30)]
    assert r[0] > r[1] > r[2]


def test_error_bound_drops_cross_term_on_rod():
    c = ErrorModelConstants.default(TAU, S)
    o = TruncationOrders(10, 0, 3)
    want = math.exp(-c.C3 * 10 * math.log(10)) + math.exp(-c.C4 * 9)
    assert error_bound(o, c, 1.0, spatial_dim=1) == pytest.approx(want)
    o2 = TruncationOrders(10, 4, 3)
    assert error_bound(o2, c, 1.0, spatial_dim=2) == pytest.approx(want + math.exp(-c.C2 * 16))
    assert error_bound(o2, c, 1.0, spatial_dim=3) == pytest.approx(want + math.exp(-c.C2 * 4))


def test_error_bound_needs_i_bar_two():
    with pytest.raises(ValueError):
        error_bound(TruncationOrders(1, 0, 3), ErrorModelConstants.default(TAU, S), 1.0)


def test_calibration_reproduces_measurement():
    c = ErrorModelConstants.default(TAU, S)
    o = TruncationOrders(12, 0, 5)
    cal = calibrate_c1(3e-4, o, c, 2.0)
    assert error_bound(o, cal, 2.0) == pytest.approx(3e-4)


def test_constants_validation():
    c = ErrorModelConstants.default(TAU, S)
    c.validate(TAU, S)
    with pytest.raises(ValueError):
        ErrorModelConstants(1.0, c.C2, 0.36, c.C4).validate(TAU, S)
    with pytest.raises(ValueError):
        ErrorModelConstants(1.0, c.C2, c.C3, 0.5).validate(TAU, S)


@pytest.mark.parametrize("args", [(0,), (3, -1, 0), (2.5,)])
def test_orders_validation(args):
    with pytest.raises(ValueError):
        TruncationOrders(*args)


def test_state_field_shape_check():
    with pytest.raises(ValueError):
        StateField(0.0, (np.zeros(3),), np.zeros(4))
