import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from flatheat.spectral import (
    BoxDomain,
    CosineSeries,
    TensorCosineSeries,
    double_step_coefficients,
    double_step_profile,
    free_evolution,
    project_profile,
    project_profile_2d,
    read_coefficients_csv,
    step_coefficients,
    write_coefficients_csv,
)

R2 = math.sqrt(2.0)


def test_step_coefficients_closed_form():
    c = step_coefficients((-0.75, 1.25), 0.5, 9).coeffs
    assert c[0] == pytest.approx(R2 / 8, abs=1e-15)
    assert c[1] == pytest.approx(-2 * R2 / math.pi, abs=1e-15)
    assert c[3] == pytest.approx(2 * R2 / (3 * math.pi), abs=1e-15)
    for p in range(5):
        assert c[2 * p + 1] == pytest.approx((-1) ** (p + 1) / (2 * p + 1) * 2 * R2 / math.pi, rel=1e-14)
    assert np.all(c[2::2][1:] == 0.0)


@pytest.mark.parametrize("b", [0.3, 0.5, 0.71])
def test_step_coefficients_match_quadrature(b):
    lo, hi = 0.4, -1.3
    c = step_coefficients((lo, hi), b, 6).coeffs
    for n in range(7):
        f = lambda x: (lo if x < b else hi) * R2 * math.cos(n * math.pi * x)  # noqa: E731
        val = integrate.quad(f, 0, b)[0] + integrate.quad(f, b, 1)[0]
        if n == 0:
            val *= 0.5  # basis sqrt(2) has squared norm 2
        assert c[n] == pytest.approx(val, abs=1e-12)


def test_parseval_for_step():
    s = step_coefficients((-0.75, 1.25), 0.5, 20000)
    exact = 0.5 * 0.75**2 + 0.5 * 1.25**2
    assert abs(s.energy() - exact) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=6, max_size=6))
def test_projection_round_trip_band_limited(c):
    s = CosineSeries(c)
    x = np.linspace(0.0, 1.0, 64)
    back = project_profile(s(x), 5)
    np.testing.assert_allclose(back.coeffs, c, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=4, max_size=4),
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=4, max_size=4),
    st.floats(-3, 3, allow_nan=False),
)
def test_projection_is_linear(a, b, k):
    x = np.linspace(0.0, 1.0, 40)
    fa, fb = CosineSeries(a)(x), CosineSeries(b)(x)
    lhs = project_profile(fa + k * fb, 3).coeffs
    rhs = project_profile(fa, 3).coeffs + k * project_profile(fb, 3).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


def test_projection_needs_enough_samples():
    with pytest.raises(ValueError):
        project_profile(np.ones(10), 5)


def test_projection_2d_of_checkerboard_matches_closed_form():
    m = 2001
    x = np.linspace(0.0, 1.0, m)
    f = double_step_profile(x[:, None], x[None, :])
    got = project_profile_2d(f, 5, 5).coeffs
    want = double_step_coefficients(5, 5).coeffs
    np.testing.assert_allclose(got, want, atol=2e-3)
    assert want[1, 1] == pytest.approx(-2 / math.pi**2)


def test_free_evolution_decays_modes():
    s = CosineSeries([0.3, 0.0, 1.0])
    x = np.linspace(0, 1, 11)
    t = 0.02
    want = 0.3 * R2 + math.exp(-4 * math.pi**2 * t) * R2 * np.cos(2 * math.pi * x)
    np.testing.assert_allclose(free_evolution(s, t, x), want, atol=1e-14)


def test_free_evolution_tensor_rate():
    c = np.zeros((3, 3))
    c[1, 1] = 1.0
    s = TensorCosineSeries(c, cross_dim=1)
    t, x1, z = 0.01, 0.3, 0.2
    want = math.exp(-2 * math.pi**2 * t) * R2 * math.cos(math.pi * x1) * R2 * math.cos(math.pi * z)
    assert free_evolution(s, t, np.array(z), xp=np.array(x1)) == pytest.approx(want, rel=1e-13)


def test_free_evolution_rejects_negative_time():
    with pytest.raises(ValueError):
        free_evolution(CosineSeries([1.0]), -0.1, np.array([0.5]))


def test_box_modes_sorted_by_eigenvalue():
    dom = BoxDomain(3)
    lam = dom.eigenvalues(30)
    assert lam[0] == 0.0
    assert np.all(np.diff(lam) >= 0)
    idx = dom.cross_modes(30)
    assert len({tuple(r) for r in idx}) == 31


def test_cross_basis_orthonormal_in_2d_box():
    dom = BoxDomain(3)
    g = (np.arange(64) + 0.5) / 64
    X, Y = np.meshgrid(g, g, indexing="ij")
    E = dom.cross_basis(8, np.column_stack([X.ravel(), Y.ravel()]))
    gram = E @ E.T / X.size
    np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)


def test_rod_has_single_cross_mode():
    with pytest.raises(ValueError):
        BoxDomain(1).cross_modes(2)


def test_coefficients_csv_round_trip(tmp_path):
    s = step_coefficients((-0.75, 1.25), 0.5, 7)
    write_coefficients_csv(s, tmp_path / "c.csv")
    back = read_coefficients_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.coeffs, s.coeffs)
    t = double_step_coefficients(3, 4)
    write_coefficients_csv(t, tmp_path / "t.csv")
    back = read_coefficients_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.coeffs, t.coeffs)
    assert back.cross_dim == 1


def test_series_validation():
    with pytest.raises(ValueError):
        CosineSeries([])
    with pytest.raises(ValueError):
        CosineSeries([1.0, np.nan])
    with pytest.raises(ValueError):
        TensorCosineSeries(np.ones((2, 2)), cross_dim=0)
