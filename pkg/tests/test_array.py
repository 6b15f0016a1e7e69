import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from lltlab.array import (
    beta_n,
    char_fn_Sn,
    density_mass,
    example1_model,
    example2_model,
    gauss_model,
    measure_n,
    model_from_name,
    one_minus_theta,
    phi_n,
    psi_n,
    shifted_model,
    stable_one_minus_theta,
    symmetrize,
    tail_mass,
    theta_n,
    theta_quad,
)
from lltlab.canonical import CanonicalMeasure, proper_convergence_report, stable_measure

MODELS = {
    "example1:alpha=0.5": example1_model(0.5),
    "example1:alpha=1": example1_model(1.0),
    "example1:alpha=1.5": example1_model(1.5),
    "example2": example2_model(),
    "gauss": gauss_model(),
}


def mp_cos_tail(power, omega, start):
    """integral_start^inf u^-power cos(omega u) du via the incomplete gamma function."""
    if omega == 0:
        return start ** (1 - power) / (power - 1)
    return mp.re((-1j * omega) ** (power - 1) * mp.gammainc(1 - power, -1j * omega * start))


def mp_theta_example1(alpha, t):
    # oracle: characteristic function of c (1 - cos u)/|u|^(1+alpha), head by
    # quadrature and tail by incomplete gamma functions
    with mp.workdps(30):
        alpha, t = mp.mpf(alpha), mp.mpf(t)
        c = mp.gamma(1 + alpha) * mp.sin(mp.pi * alpha / 2) / mp.pi
        e = 2 - alpha
        # w = u^(2 - alpha) absorbs the u^(1 - alpha) behaviour at the origin
        head = mp.quad(lambda w: 2 * mp.sin(w ** (1 / e) / 2) ** 2 / w ** (2 / e)
                       * mp.cos(t * w ** (1 / e)), [0, mp.pi ** e]) / e
        p = 1 + alpha
        tail = (mp_cos_tail(p, t, mp.pi) - mp_cos_tail(p, 1 + t, mp.pi) / 2
                - mp_cos_tail(p, abs(1 - t), mp.pi) / 2)
        return float(2 * c * (head + tail))


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.5])
@pytest.mark.parametrize("t", [0.3, 2.5])
def test_example1_theta_against_mpmath(alpha, t):
    m = example1_model(alpha)
    assert abs(float(theta_n(m, 1, t).real) - mp_theta_example1(alpha, t)) < 1e-9


@pytest.mark.parametrize("name", ["example1:alpha=0.5", "example1:alpha=1.5", "example2"])
def test_closed_theta_matches_quadrature(name):
    m = MODELS[name]
    t = np.array([0.0, 0.05, 0.4, 1.0, 3.0])
    for n in (2, 16):
        closed = np.asarray(theta_n(m, n, t), dtype=complex)
        quad = np.asarray(theta_quad(m, n, t), dtype=complex)
        assert np.max(np.abs(closed - quad)) < 1e-10


def test_example2_theta_against_mpmath():
    m = MODELS["example2"]
    n, t = 1, 1.0
    with mp.workdps(30):
        raw = lambda u: 1 / (2 * n * u * mp.sinh(u / n))
        z = 2 * mp.quad(raw, [1, mp.inf])
        ref = 2 * mp.quadosc(lambda u: raw(u) * mp.cos(t * u), [1, mp.inf], omega=t) / z
    assert abs(float(theta_n(m, n, t).real) - float(ref)) < 1e-12


def test_example2_normalizer_expansion():
    m = MODELS["example2"]
    for n in (8, 64):
        raw_mass = density_mass(example2_model(False), n)
        assert abs(raw_mass - (1 - math.log(2) / n)) < 1.0 / n ** 2
        assert abs(density_mass(m, n) - 1.0) < 1e-10


def test_stable_one_minus_theta_small_argument():
    with mp.workdps(40):
        for alpha in (0.5, 1.5):
            for t in (1e-9, 1e-4, 0.5):
                ref = 1 - ((1 + mp.mpf(t)) ** alpha + (1 - mp.mpf(t)) ** alpha) / 2 + mp.mpf(t) ** alpha
                got = float(stable_one_minus_theta(alpha, t))
                assert abs(got - float(ref)) <= 1e-13 * float(ref)


def test_example1_alpha1_exact_row_exponent():
    m = MODELS["example1:alpha=1"]
    z = np.array([0.5, 3.0, 15.0])
    assert np.allclose(psi_n(m, 16, z), np.abs(z), atol=1e-13)
    assert np.allclose(char_fn_Sn(m, 4, np.array([4.0, 9.0])), 0.0)


def test_gauss_rows_are_exact():
    m = MODELS["gauss"]
    z = np.linspace(0, 6, 13)
    for n in (1, 7, 100):
        assert np.max(np.abs(char_fn_Sn(m, n, z) - np.exp(-z * z / 2))) < 1e-13


def test_row_exponent_converges_to_limit():
    m = MODELS["example2"]
    z = np.array([0.5, 2.0])
    errs = [np.max(np.abs(psi_n(m, n, z) - m.limit_exponent(z))) for n in (8, 32, 128)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 4 * errs[0] / 16 * 1.2


def test_measures_converge_properly():
    m = MODELS["example1:alpha=1"]
    # the row Lévy density oscillates with frequency n and decays like u^-2,
    # so its tail functional is only resolvable to about 1e-6
    kw = dict(tol=1e-6, rtol=1e-6)
    rep8 = proper_convergence_report(measure_n(m, 8), stable_measure(1.0), [(-1, 1)], [1.0], **kw)
    rep64 = proper_convergence_report(measure_n(m, 64), stable_measure(1.0), [(-1, 1)], [1.0], **kw)
    assert rep64.max_delta < rep8.max_delta
    assert rep64.max_delta < 0.05


def test_tail_mass_decreases():
    m = MODELS["example2"]
    vals = [tail_mass(m, n, 0.5) for n in (4, 16, 64)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_shifted_model_drift_against_mpmath():
    base = MODELS["example1:alpha=1"]
    m = shifted_model(base, 0.3)
    n = 8
    # theta_n(t) = e^{i s t} theta(t); beta_n = Im theta_n(1/b_n)
    expected = math.sin(0.3 / n) * (1 - 1 / n)
    assert abs(beta_n(m, n) - expected) < 1e-15
    z = np.array([0.5, 2.0])
    assert np.allclose(phi_n(m, n, z), psi_n(m, n, z) + 1j * n * beta_n(m, n) * z)
    assert not m.symmetric and m.limit_beta == pytest.approx(0.3)


def test_shifted_requires_constant_ratio():
    with pytest.raises(ValueError):
        shifted_model(MODELS["gauss"], 0.1)


@pytest.mark.parametrize("bad", ["unknown", "example1", "example1:alpha=3", "gauss:foo=1",
                                 "example1:alpha"])
def test_model_from_name_errors(bad):
    with pytest.raises(ValueError):
        model_from_name(bad)


def test_model_from_name_roundtrip():
    assert model_from_name("example1:alpha=1.5").params["alpha"] == 1.5
    assert model_from_name("broken").name == "broken"
    assert model_from_name("example2:shift=0.2").params["shift"] == 0.2


def test_row_index_validation():
    with pytest.raises(ValueError):
        theta_n(MODELS["gauss"], 0, 1.0)
    with pytest.raises(ValueError):
        MODELS["gauss"].a(-1)


def test_symmetrize():
    h = lambda u: np.exp(-np.abs(u)) * (np.asarray(u) > 0)
    even = symmetrize(h)
    assert even(np.array([2.0]))[0] == pytest.approx(even(np.array([-2.0]))[0])
    sym = symmetrize(CanonicalMeasure(lambda u: np.exp(-u) / u, support=(0, math.inf)))
    assert sym.symmetric and sym.support == (-math.inf, math.inf)
    with pytest.raises(TypeError):
        symmetrize(3)


@given(st.sampled_from(sorted(MODELS)), st.integers(1, 300), st.floats(-200, 200))
def test_char_fn_bounds(name, n, z):
    m = MODELS[name]
    if name == "example2" and n == 1:
        n = 2
    val = complex(char_fn_Sn(m, n, z))
    assert abs(val) <= 1 + 1e-12
    assert complex(char_fn_Sn(m, n, 0.0)) == pytest.approx(1.0, abs=1e-14)
    if m.symmetric:
        assert abs(val.imag) < 1e-14
        assert complex(char_fn_Sn(m, n, -z)) == pytest.approx(val, abs=1e-14)


@given(st.sampled_from(sorted(MODELS)), st.integers(1, 64), st.floats(0, 50))
def test_one_minus_theta_consistent(name, n, t):
    m = MODELS[name]
    a = complex(one_minus_theta(m, n, t))
    b = 1 - complex(theta_n(m, n, t))
    assert abs(a - b) < 1e-12
    assert a.real >= -1e-14
