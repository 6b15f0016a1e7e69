import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from lltlab.canonical import (
    CanonicalMeasure,
    MeasureError,
    exponent_from_measure,
    gaussian_exponent,
    gaussian_measure,
    hyperbolic_cosine_exponent,
    hyperbolic_cosine_measure,
    interval_mass,
    log_cosh,
    proper_convergence_report,
    stable_constant,
    stable_exponent,
    stable_measure,
    tail_functionals,
)


def gamma_process():
    # ell(u) = exp(-u)/u on u > 0
    return CanonicalMeasure(lambda u: np.exp(-u) / u, support=(0.0, math.inf), name="gamma")


def gamma_exponent_exact(z, beta=0.0):
    return 0.5 * np.log1p(z * z) + 1j * (z * math.pi / 4 - np.arctan(z)) - 1j * beta * z


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_stable_measure_gives_power_exponent(alpha):
    psi = exponent_from_measure(stable_measure(alpha), rtol=1e-10)
    z = np.array([0.3, 1.0, 2.0, 7.5])
    assert np.max(np.abs(psi(z) - np.abs(z) ** alpha)) < 1e-8


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 1.5, 1.9])
def test_stable_constant_closed_form(alpha):
    closed = special.gamma(1 + alpha) * math.sin(math.pi * alpha / 2) / math.pi
    assert abs(stable_constant(alpha) - closed) < 1e-12 * closed


def test_hyperbolic_cosine_exponent_against_mpmath():
    psi = exponent_from_measure(hyperbolic_cosine_measure(), rtol=1e-12)
    with mp.workdps(30):
        for z in (0.5, 1.0, 3.0):
            ref = mp.quad(lambda u: (1 - mp.cos(z * u)) / (u * mp.sinh(u)), [0, 1, mp.inf])
            assert abs(float(psi(np.array([z]))[0].real) - float(ref)) < 1e-10
            assert abs(float(ref) - float(log_cosh(math.pi * z / 2))) < 1e-20 + 1e-15


def test_asymmetric_exponent_matches_closed_form():
    psi = exponent_from_measure(gamma_process(), beta=0.7, rtol=1e-11)
    z = np.array([-2.0, -0.4, 0.25, 1.0, 5.0])
    assert np.max(np.abs(psi(z) - gamma_exponent_exact(z, 0.7))) < 1e-9


def test_asymmetric_imaginary_part_against_mpmath():
    ell = lambda u: mp.exp(-u) / u * (1 + mp.sin(u) ** 2)
    m = CanonicalMeasure(lambda u: np.exp(-u) / u * (1 + np.sin(u) ** 2), support=(0, math.inf))
    psi = exponent_from_measure(m, rtol=1e-11)
    with mp.workdps(30):
        for z in (0.5, 3.0):
            ref = mp.quad(lambda u: (z * mp.sin(u) - mp.sin(z * u)) * ell(u), [0, 1, mp.inf])
            assert abs(float(psi(np.array([z]))[0].imag) - float(ref)) < 1e-9


def test_gaussian_atom():
    psi = exponent_from_measure(gaussian_measure(2.0))
    z = np.array([0.5, 3.0])
    assert np.allclose(psi(z), z * z, atol=1e-14)
    assert np.allclose(gaussian_exponent(2.0)(z), z * z)


def test_closed_exponents_and_char_fn():
    z = np.array([0.0, 1.0, 2.0])
    assert np.allclose(stable_exponent(1.0).char_fn(z), np.exp(-z))
    assert np.allclose(hyperbolic_cosine_exponent().char_fn(z), 1 / np.cosh(math.pi * z / 2))
    assert abs(float(log_cosh(800.0)) - (800 - math.log(2))) < 1e-12


def test_shifted_exponent():
    base = stable_exponent(1.0)
    moved = base.shifted(0.3)
    z = np.array([1.0, -2.0])
    assert np.allclose(moved(z), base(z) - 0.3j * z)
    assert moved.drift_beta == 0.3


def test_tail_functionals_stable():
    alpha = 1.5
    m = stable_measure(alpha)
    plus, minus = tail_functionals(m, 2.0)
    exact = stable_constant(alpha) * 2.0 ** -alpha / alpha
    assert abs(plus - exact) < 1e-10 and plus == minus
    with pytest.raises(ValueError):
        tail_functionals(m, 0.0)


def test_interval_mass_with_atom():
    m = stable_measure(1.0)
    assert abs(interval_mass(m, -1, 1) - 2 * stable_constant(1.0)) < 1e-10
    assert abs(interval_mass(gaussian_measure(3.0), -1, 1) - 3.0) < 1e-14
    assert interval_mass(gaussian_measure(3.0), 0.5, 1) == 0.0
    with pytest.raises(ValueError):
        interval_mass(m, 1, -1)


def test_proper_convergence_report_detects_cutoff():
    cut = 0.25
    rep = proper_convergence_report(hyperbolic_cosine_measure(cut), hyperbolic_cosine_measure(),
                                    [(-1.0, 1.0), (0.5, 2.0)], [0.5, 1.0])
    with mp.workdps(30):
        exact = float(mp.quad(lambda u: u / mp.sinh(u), [0, cut]))
    assert abs(rep.interval_deltas[0] - exact) < 1e-10
    assert rep.interval_deltas[1] < 1e-12
    assert max(rep.plus_deltas) < 1e-12
    assert rep.max_delta == pytest.approx(exact, abs=1e-10)


def test_validation_errors():
    with pytest.raises(MeasureError):
        CanonicalMeasure(lambda u: -np.ones_like(u)).validate()
    with pytest.raises(MeasureError):
        CanonicalMeasure(lambda u: np.exp(-u) * (u > 0), symmetric=True).validate()
    with pytest.raises(MeasureError):
        CanonicalMeasure(lambda u: 0 * u, atom_at_zero=-1.0).validate()
    # M+(1) = integral of 1/u diverges
    with pytest.raises(MeasureError):
        CanonicalMeasure(lambda u: np.abs(u) ** -1.0, symmetric=True).validate()
    assert stable_measure(0.5).validate() is not None


def test_density_vanishes_outside_support_and_at_zero():
    m = gamma_process()
    vals = m.density(np.array([-1.0, 0.0, 1.0]))
    assert vals[0] == 0 and vals[1] == 0 and vals[2] > 0


_gamma_psi = exponent_from_measure(gamma_process(), rtol=1e-10)


@given(st.floats(-20, 20, allow_nan=False))
def test_exponent_properties(z):
    val = _gamma_psi(np.array([z]))[0]
    neg = _gamma_psi(np.array([-z]))[0]
    assert val.real >= -1e-12
    assert abs(neg - np.conj(val)) < 1e-9
    assert abs(val - gamma_exponent_exact(z)) < 1e-8


@given(st.floats(0.05, 1.95), st.floats(0.1, 10))
def test_stable_exponent_scaling(alpha, z):
    psi = stable_exponent(alpha)
    assert abs(psi(np.array([2 * z]))[0] - 2 ** alpha * psi(np.array([z]))[0]) < 1e-9 * (2 * z) ** alpha
    assert psi(np.array([0.0]))[0] == 0
