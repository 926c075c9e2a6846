import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hsflow import spectral
from hsflow.spectral import TWO_PI


@st.composite
def trig_poly(draw, n=32):
    """Band-limited samples and the coefficients that made them (modes below N/2)."""
    kmax = n // 2 - 1
    a0 = draw(st.floats(-2, 2))
    coeffs = draw(
        st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=kmax)
    )
    return a0, coeffs


def _eval(a0, coeffs, x, order=0):
    out = np.full_like(x, a0 if order == 0 else 0.0)
    for k, (a, b) in enumerate(coeffs, start=1):
        # d^m/dx^m of a cos(kx) + b sin(kx), written as a phase shift
        out = out + k**order * (
            a * np.cos(k * x + order * np.pi / 2) + b * np.sin(k * x + order * np.pi / 2)
        )
    return out


def test_grid_and_size_checks():
    x = spectral.grid(8)
    assert x[0] == 0.0 and np.isclose(x[1], TWO_PI / 8)
    for bad in (6, 9, 0):
        with pytest.raises(ValueError):
            spectral.grid(bad)


def test_non_finite_field_rejected():
    f = np.ones(16)
    f[3] = np.nan
    with pytest.raises(FloatingPointError):
        spectral.derivative(f)


def test_derivative_oracles():
    x = spectral.grid(32)
    assert np.max(np.abs(spectral.derivative(np.cos(x), 2) + np.cos(x))) < 1e-12
    assert np.max(np.abs(spectral.derivative(np.ones(32)))) == 0.0
    assert np.max(np.abs(spectral.derivative(np.sin(3 * x)) - 3 * np.cos(3 * x))) < 1e-12


def test_nyquist_mode_dropped_for_odd_orders():
    n = 16
    x = spectral.grid(n)
    nyq = np.cos(n // 2 * x)
    assert np.max(np.abs(spectral.derivative(nyq, 1))) < 1e-12
    assert np.max(np.abs(spectral.derivative(nyq, 2) + (n // 2) ** 2 * nyq)) < 1e-9


def test_integrate_oracles():
    x = spectral.grid(32)
    assert spectral.integrate(np.ones(32)) == pytest.approx(TWO_PI, abs=1e-15)
    assert abs(spectral.integrate(np.cos(x))) < 1e-15
    assert spectral.integrate(1 + 0.3 * np.cos(2 * x)) == pytest.approx(TWO_PI, abs=1e-14)


def test_cumulative_integral_oracles():
    n = 32
    xe = TWO_PI * np.arange(n + 1) / n
    F = spectral.cumulative_integral(np.ones(n))
    assert F.shape == (n + 1,)
    assert np.max(np.abs(F - xe)) < 1e-14
    F = spectral.cumulative_integral(np.cos(xe[:-1]))
    assert np.max(np.abs(F - np.sin(xe))) < 1e-12


def test_resample_oracles():
    x = spectral.grid(32)
    assert abs(spectral.resample(np.cos(x), np.array([np.pi / 3]))[0] - 0.5) < 1e-12
    pts = np.linspace(0, TWO_PI, 17, endpoint=False) + 0.123
    assert np.all(spectral.resample(np.full(32, 2.5), pts) == pytest.approx(2.5, abs=1e-14))


@given(trig_poly())
def test_derivative_matches_analytic(poly):
    a0, coeffs = poly
    x = spectral.grid(32)
    f = _eval(a0, coeffs, x)
    for order in (1, 2, 3):
        exact = _eval(a0, coeffs, x, order)
        scale = max(1.0, float(np.max(np.abs(exact))))
        assert np.max(np.abs(spectral.derivative(f, order) - exact)) < 1e-11 * scale


@given(trig_poly())
def test_repeated_first_derivative_is_second(poly):
    x = spectral.grid(32)
    f = _eval(*poly, x)
    d2 = spectral.derivative(f, 2)
    dd = spectral.derivative(spectral.derivative(f))
    assert np.max(np.abs(dd - d2)) <= 1e-10 * max(1.0, np.max(np.abs(d2)))


@given(st.lists(st.floats(-10, 10), min_size=16, max_size=16))
def test_perfect_derivative_integrates_to_zero(values):
    f = np.array(values)
    assert abs(spectral.integrate(spectral.derivative(f))) < 1e-12


@given(trig_poly())
def test_cumulative_endpoint_and_analytic(poly):
    a0, coeffs = poly
    n = 32
    xe = TWO_PI * np.arange(n + 1) / n
    f = _eval(a0, coeffs, xe[:-1])
    F = spectral.cumulative_integral(f)
    assert abs(F[-1] - spectral.integrate(f)) < 1e-12
    # antiderivative of a cos kx + b sin kx is (a sin kx - b cos kx) / k
    exact = a0 * xe
    for k, (a, b) in enumerate(coeffs, start=1):
        exact = exact + (a * np.sin(k * xe) - b * (np.cos(k * xe) - 1)) / k
    assert np.max(np.abs(F - exact)) < 1e-12


@given(trig_poly(), st.lists(st.floats(0, TWO_PI, exclude_max=True), min_size=1, max_size=20))
def test_resample_exact_for_band_limited(poly, pts):
    x = spectral.grid(32)
    f = _eval(*poly, x)
    pts = np.array(pts)
    assert np.max(np.abs(spectral.resample(f, x) - f)) < 1e-12
    assert np.max(np.abs(spectral.resample(f, pts) - _eval(*poly, pts))) < 1e-12


@given(trig_poly(), st.floats(0, TWO_PI))
def test_antiderivative_evaluator_agrees_with_grid(poly, y):
    n = 32
    x = spectral.grid(n)
    f = _eval(*poly, x)
    G = spectral.antiderivative_evaluator(f)
    F = spectral.cumulative_integral(f)
    xe = TWO_PI * np.arange(n + 1) / n
    assert np.max(np.abs(G(xe) - F)) < 1e-12
    # derivative of the evaluator is the interpolant itself
    h = 1e-5
    fd = (G(np.array([y + h])) - G(np.array([y - h])))[0] / (2 * h)
    assert abs(fd - spectral.resample(f, np.array([y]))[0]) < 1e-6
