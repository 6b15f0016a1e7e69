import dataclasses
import json
import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from lltlab.array import example1_model, example2_model, gauss_model, shifted_model, beta_n
from lltlab.canonical import stable_exponent, CharExponent
from lltlab.rates import (
    RateParameterError,
    H_n,
    I1_closed,
    I1_quad,
    I2_closed,
    I2_quad,
    I_closed,
    I_quad,
    N_delta,
    asymptotic_probe,
    audit_all,
    bound_terms,
    c_alpha_1,
    c_alpha_2,
    c_alpha_3,
    chi,
    condition_B_fit,
    condition_F_margin,
    condition_G_margin,
    gamma_dprime,
    gamma_prime,
    gamma_reflection,
    measure_sup_error,
    rho,
    rho_simplified,
    rho_symmetric,
    write_records_csv,
    write_records_json,
)

EX1 = {a: example1_model(a) for a in (0.5, 1.0, 1.5)}
EX2 = example2_model()
BROKEN = example2_model(False)
GAUSS = gauss_model()


# -- independent oracles (mpmath, incomplete gamma tails) ---------------------------

def _tail(power, omega, start, part):
    # integral_start^inf u^-power exp(i omega u) du, real or imaginary part
    if omega == 0:
        return start ** (1 - power) / (power - 1) if part == "re" else mp.mpf(0)
    sign = 1 if omega > 0 else -1
    val = (-1j * abs(omega)) ** (power - 1) * mp.gammainc(1 - power, -1j * abs(omega) * start)
    return mp.re(val) if part == "re" else sign * mp.im(val)


def mp_head(smooth, alpha):
    """integral_0^pi smooth(v) v^(1-alpha) dv with w = v^(2-alpha), which
    removes the endpoint singularity exactly."""
    e = 2 - alpha
    return mp.quad(lambda w: smooth(w ** (1 / e)), [0, mp.pi ** e]) / e


def mp_I(alpha, k):
    with mp.workdps(30):
        a, k = mp.mpf(alpha), mp.mpf(k)
        head = mp_head(lambda v: 2 * mp.sin(v / 2) ** 2 * mp.cos(k * v) / v ** 2, a)
        p = 1 + a
        tail = _tail(p, k, mp.pi, "re") - _tail(p, 1 + k, mp.pi, "re") / 2 - _tail(p, 1 - k, mp.pi, "re") / 2
        return float(head + tail)


def mp_I1(alpha, k):
    with mp.workdps(30):
        a, k = mp.mpf(alpha), mp.mpf(k)
        head = mp_head(lambda v: mp.sin(k * v) * mp.sin(v) / v ** 2, a)
        tail = (_tail(1 + a, k - 1, mp.pi, "re") - _tail(1 + a, k + 1, mp.pi, "re")) / 2
        return float(head + tail)


def mp_I2(alpha, k):
    with mp.workdps(30):
        a, k = mp.mpf(alpha), mp.mpf(k)
        head = mp_head(lambda v: mp.sin(k * v) * mp.sin(v / 2) ** 2 / v ** 3, a)
        p = 2 + a
        tail = _tail(p, k, mp.pi, "im") / 2 - (_tail(p, k + 1, mp.pi, "im") + _tail(p, k - 1, mp.pi, "im")) / 4
        return float(head + tail)


# -- closed forms ----------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 1.2, 1.5, 1.8])
@pytest.mark.parametrize("k", [0.4, 2.0, 10.0])
def test_closed_forms_against_mpmath(alpha, k):
    for closed, oracle in ((I_closed, mp_I), (I1_closed, mp_I1), (I2_closed, mp_I2)):
        ref = oracle(alpha, k)
        assert abs(closed(alpha, k) - ref) <= 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("alpha, k", [(0.5, 2.0), (1.5, 10.0), (0.7, 0.3)])
def test_quadrature_routes_against_mpmath(alpha, k):
    assert abs(I_quad(alpha, k) - mp_I(alpha, k)) < 1e-11
    assert abs(I1_quad(alpha, k) - mp_I1(alpha, k)) < 1e-11
    assert abs(I2_quad(alpha, k) - mp_I2(alpha, k)) < 1e-11


def test_alpha_one_triangle():
    for k in (0.0, 0.25, 0.5, 0.99, 1.0, 2.0, -0.5):
        assert I_closed(1.0, k) == pytest.approx(0.5 * math.pi * max(0.0, 1 - abs(k)), abs=1e-15)
        assert abs(I_quad(1.0, k) - 0.5 * math.pi * max(0.0, 1 - abs(k))) < 1e-10


def test_pole_band_falls_back_to_quadrature():
    for alpha in (0.98, 1.03, 0.02):
        assert abs(I2_closed(alpha, 3.0) - I2_quad(alpha, 3.0)) < 1e-12
        assert abs(I_closed(alpha, 3.0) - mp_I(alpha, 3.0)) < 1e-9


def test_gamma_reflection_and_constants():
    for alpha in (0.3, 0.5, 1.5, 1.9):
        assert gamma_reflection(alpha) == pytest.approx(special.gamma(-1 - alpha), rel=1e-13)
        with mp.workdps(30):
            j = mp_head(lambda v: 2 * mp.sin(v / 2) ** 2 / v ** 2, mp.mpf(alpha)) + \
                _tail(1 + alpha, 0, mp.pi, "re") - _tail(1 + alpha, 1, mp.pi, "re")
        assert c_alpha_1(alpha) == pytest.approx(float(j), rel=1e-12)
        assert c_alpha_3(alpha) == pytest.approx(c_alpha_1(alpha) + 2 * (alpha + 1) * c_alpha_2(alpha))
    with pytest.raises(ZeroDivisionError):
        gamma_reflection(1.0)


def test_domain_errors():
    for f in (I_closed, I1_closed, I2_closed):
        with pytest.raises(ValueError):
            f(2.0, 1.0)
        with pytest.raises(ValueError):
            f(0.0, 1.0)


def test_asymptotic_probe_reports_measured_exponent():
    rep = asymptotic_probe(0.5)
    assert rep["I_exponent_claimed"] == -0.5
    # the integration-by-parts identity gives decay k^(alpha - 2)
    assert abs(rep["I_exponent_measured"] - (0.5 - 2)) < 0.01
    # I1 k^(1-alpha) tends to alpha * c_alpha_1
    assert abs(rep["I1_scaled_over_c"][-1] - 0.5) < 1e-6


@given(st.floats(0.1, 1.9).filter(lambda a: abs(a - 1) > 0.06), st.floats(0.1, 30))
def test_integration_by_parts_identity(alpha, k):
    direct = I_quad(alpha, k)
    assert abs(I_closed(alpha, k) - direct) < 1e-9 * max(1.0, abs(direct))


@given(st.floats(0.1, 1.9), st.floats(0.1, 30))
def test_odd_symmetry(alpha, k):
    assert I1_closed(alpha, -k) == -I1_closed(alpha, k)
    if abs(alpha - 1) > 0.05:
        assert I2_closed(alpha, -k) == -I2_closed(alpha, k)


# -- rate terms ----------------------------------------------------------------------------

@pytest.mark.parametrize("n", [8, 64, 256])
def test_gamma_prime_exact_for_alpha_one(n):
    exact = 1 / (2 * (n + math.sqrt(n * n + 1)))
    got = gamma_prime(EX1[1.0], n)
    assert got <= exact * (1 + 1e-12)
    assert got >= exact * (1 - 1e-3)


def test_gamma_dprime_and_chi_for_shifted_model():
    m = shifted_model(EX1[1.0], 0.3)
    n = 16
    expected_chi = abs(n * math.sin(0.3 / n) * (1 - 1 / n) - 0.3)
    assert chi(m, n) == pytest.approx(expected_chi, rel=1e-12)
    assert gamma_dprime(m, n) > 0
    assert gamma_dprime(EX1[1.0], n) == 0.0
    assert beta_n(EX2, 4) == 0.0


def test_N_delta_alpha_one():
    nd = N_delta(EX1[1.0], 0.5)
    assert nd.value == pytest.approx(0.5, abs=1e-12)
    assert N_delta(EX1[1.0], 1e-6).value > 0.999
    with pytest.raises(ValueError):
        N_delta(EX1[1.0], 0.0)


def test_N_delta_lattice_violation_is_reported():
    lattice = dataclasses.replace(GAUSS, theta_closed=lambda n, t: np.cos(t),
                                  one_minus_theta_closed=None, theta_tail_bound=None)
    nd = N_delta(lattice, 0.5, range(1, 4))
    assert nd.value >= 1 - 1e-6
    with pytest.raises(RateParameterError):
        rho(lattice, 2, n_delta=1.0)


def test_rho_recomputes_and_validates():
    rec = rho(EX2, 16)
    assert rec.rho == rec.recompute_rho()
    assert rec.inv_a_n == 1 / 16
    with pytest.raises(RateParameterError):
        rho(EX2, 16, epsilon=1.5)
    with pytest.raises(RateParameterError) as info:
        rho(EX2, 16, epsilon=0.9)
    nd = N_delta(EX2, 0.5, range(1, 33)).value
    assert info.value.suggested_epsilon < -math.log(nd)
    rho(EX2, 16, epsilon=info.value.suggested_epsilon)


def test_rho_simplified_and_growth_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = rho_simplified(EX1[1.0], 32)
    assert val == pytest.approx(1 / 32)
    fast = dataclasses.replace(GAUSS, a_seq=lambda n: 2 ** n, b_seq=lambda n: 2.0 ** (n / 2))
    with pytest.warns(RuntimeWarning):
        rho_simplified(fast, 3)


def test_rho_symmetric():
    res = rho_symmetric(GAUSS, 16)
    assert res.p_holds and res.value == pytest.approx(res.gamma_prime + res.remainder)
    bad = rho_symmetric(EX1[1.0], 16)
    assert not bad.p_holds and math.isnan(bad.value) and len(bad.violations) > 0
    with pytest.raises(ValueError):
        rho_symmetric(shifted_model(EX1[1.0], 0.3), 16)


def test_H_n_bounds_under_P():
    m = EX1[1.5]
    n = 32
    z = np.linspace(0, 0.5 * m.b(n), 200)
    h = H_n(m, n, z)
    assert np.all(h >= -1e-12)
    assert np.all(h <= gamma_prime(m, n) * (1 + z * z) + 1e-12)


def test_H_n_domain_error_names_z():
    with pytest.raises(ValueError, match="z="):
        H_n(EX1[1.0], 4, np.array([1.0, 5.0]))
    with pytest.raises(ValueError):
        H_n(shifted_model(EX1[1.0], 0.1), 4, 1.0)


def test_bound_terms_gauss_exact():
    n = 16
    t = bound_terms(GAUSS, n, 0.5)
    edge = 0.5 * math.sqrt(n)
    exact = math.sqrt(2 * math.pi) * special.erfc(edge / math.sqrt(2))
    assert t.I1 < 1e-12
    assert t.I2 == pytest.approx(exact, rel=1e-8)
    assert t.I3 == pytest.approx(exact, rel=1e-8)
    assert list(t) == [t.I1, t.I2, t.I3]


@pytest.mark.parametrize("model", [EX1[1.0], EX1[1.5], EX2], ids=["ex1a1", "ex1a15", "ex2"])
@pytest.mark.parametrize("n", [8, 32])
def test_bound_terms_dominate_sup_error(model, n):
    t = bound_terms(model, n)
    sd, _, _ = measure_sup_error(model, n, points=512)
    assert t.total >= 2 * math.pi * (sd.value - sd.certificate)


def test_condition_margins():
    assert condition_F_margin(EX1[1.0], 16, 0.5, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert condition_F_margin(EX2, 16, 0.5, 1.0) > 0
    with pytest.raises(ValueError):
        condition_F_margin(EX2, 16, 0.5, 2.5)
    assert condition_G_margin(EX1[1.0], 0.5) == pytest.approx(0.5)


def test_condition_B_fit():
    fit = condition_B_fit(stable_exponent(1.3))
    assert fit.alpha_hat == pytest.approx(1.3, abs=1e-10) and fit.c_hat == pytest.approx(1.0)
    g = condition_B_fit(GAUSS.limit_exponent)
    assert g.boundary and g.alpha_used < 2 and g.c_hat > 0
    zero = CharExponent(lambda z: 0 * np.asarray(z), lambda z: 0 * np.asarray(z))
    with pytest.raises(ValueError):
        condition_B_fit(zero)


def _by_id(audits):
    return {a.condition: a for a in audits}


def test_audit_negative_control():
    audits = _by_id(audit_all(BROKEN))
    assert not audits["A"].passed
    # worst row is n = 1, whose raw mass is integral_1^inf du / (u sinh u)
    with mp.workdps(20):
        mass = float(mp.quad(lambda u: 1 / (u * mp.sinh(u)), [1, mp.inf]))
    assert audits["A"].value == pytest.approx(1 - mass, rel=1e-8)


def test_audit_example2_and_invariants():
    audits = audit_all(EX2)
    for a in audits:
        assert a.passed == (a.margin > 0)
        if a.required:
            assert a.passed, a
    assert {a.condition for a in audits} >= set("ABCDEFGH") | {"smallness", "P"}


def test_audit_detects_divergent_square_integral():
    # g ~ u^(1 - alpha) at the origin: g^2 integrable iff alpha < 3/2
    d = _by_id(audit_all(EX1[1.5]))["D"]
    assert not d.passed
    assert _by_id(audit_all(EX1[1.0]))["D"].passed


def test_writers_are_deterministic(tmp_path):
    recs = [rho(EX1[1.0], n) for n in (8, 16)]
    a = write_records_csv(recs, tmp_path / "a.csv").read_bytes()
    b = write_records_csv(recs, tmp_path / "b.csv").read_bytes()
    assert a == b and a.splitlines()[0].startswith(b"n,gamma_prime")
    data = json.loads(write_records_json(recs, tmp_path / "r.json").read_text())
    assert data[0]["n"] == 8


@given(st.sampled_from([8, 16, 32, 64]))
def test_gamma_prime_trend(n):
    # gamma'_n is non-increasing along the sweep (5% noise allowance)
    for m in (EX1[1.0], EX2):
        assert gamma_prime(m, 2 * n) <= 1.05 * gamma_prime(m, n)
