"""Triangular-array models and their per-row characteristic objects.

Row ``n`` of an array holds ``a_n`` i.i.d. summands ``xi / b_n`` where
``xi`` has density ``g_n``.  With ``theta_n`` the characteristic function of
``g_n``, the row sum has characteristic function
``Phi_n(z) = theta_n(z / b_n) ** a_n`` and its canonical measure is
``M_n(du) = a_n u**2 f_n(u) du`` with ``f_n(u) = b_n g_n(b_n u)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .canonical import (
    CanonicalMeasure,
    CharExponent,
    gaussian_exponent,
    hyperbolic_cosine_exponent,
    log_cosh,
    stable_constant,
    stable_exponent,
)
from .quad import integrate, integrate_oscillatory, require

__all__ = [
    "ArrayModel",
    "theta_n",
    "theta_quad",
    "one_minus_theta",
    "char_fn_Sn",
    "beta_n",
    "psi_n",
    "phi_n",
    "symmetrize",
    "measure_n",
    "tail_mass",
    "density_mass",
    "example1_model",
    "example2_model",
    "gauss_model",
    "shifted_model",
    "model_from_name",
    "stable_theta",
    "stable_one_minus_theta",
]


@dataclass(frozen=True)
class ArrayModel:
    """One triangular-array scheme.

    Parameters
    ----------
    name : str
    a_seq : callable
        ``n -> a_n``, a positive integer (number of summands).
    b_seq : callable
        ``n -> b_n > 0``, the normalizer.
    g_density : callable
        ``(n, u) -> g_n(u)``, vectorized in ``u``.
    symmetric : bool
    limit_exponent : CharExponent
        Exponent ``psi`` of the limit law.
    limit_beta : float
    theta_closed, one_minus_theta_closed : callable, optional
        Closed forms ``(n, t) -> theta_n(t)`` and ``1 - theta_n(t)``.  When
        absent, ``theta_n`` is computed by quadrature and cached.
    limit_density : callable, optional
        Closed-form density of the limit law.
    g_breakpoints : callable
        ``n -> tuple`` of discontinuities of ``g_n``.
    phi_support : callable, optional
        ``n -> Z`` with ``Phi_n(z) = 0`` for ``|z| >= Z``.
    phi_envelope : callable, optional
        ``(n, z) -> B`` with ``|Phi_n(z)| <= B``, decreasing in ``|z|``.
    theta_tail_bound : callable, optional
        ``(n, T) -> sup_{|t| >= T} |theta_n(t)|`` upper bound.
    g_tail_terms : callable, optional
        For symmetric models, ``n -> (A, [(coef, envelope, omega), ...])``
        such that ``g_n(u) = sum coef * envelope(u) * cos(omega u)`` for
        ``u >= A`` with each envelope eventually monotone.  Lets the
        quadrature route handle densities that oscillate themselves.
    """

    name: str
    a_seq: Callable[[int], int]
    b_seq: Callable[[int], float]
    g_density: Callable[[int, np.ndarray], np.ndarray]
    symmetric: bool
    limit_exponent: CharExponent
    limit_beta: float = 0.0
    theta_closed: Callable[[int, np.ndarray], np.ndarray] | None = None
    one_minus_theta_closed: Callable[[int, np.ndarray], np.ndarray] | None = None
    limit_density: Callable[[np.ndarray], np.ndarray] | None = None
    g_breakpoints: Callable[[int], tuple] = lambda n: ()
    phi_support: Callable[[int], float] | None = None
    phi_envelope: Callable[[int, np.ndarray], np.ndarray] | None = None
    theta_tail_bound: Callable[[int, float], float] | None = None
    g_tail_terms: Callable[[int], tuple] | None = None
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False,
                                  compare=False)

    def a(self, n: int) -> int:
        a = self.a_seq(n)
        if int(a) != a or a < 1:
            raise ValueError(f"a_n must be a positive integer, got {a}")
        return int(a)

    def b(self, n: int) -> float:
        return float(self.b_seq(n))

    def memo(self, key, compute):
        """Thread-safe memo table; concurrent callers see identical values."""
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            return self._cache.setdefault(key, value)


def _check_n(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"row index must be a positive integer, got {n}")


def _scalar_or_array(values: np.ndarray, z):
    return values if np.ndim(z) else values[()]


def _cos_transform(model: ArrayModel, n: int, t: float, lo: float, tol: float,
                   rtol: float) -> float:
    """Integral of ``(g_n(u) + g_n(-u)) cos(tu)`` over ``u >= lo``."""
    brk = sorted({abs(p) for p in model.g_breakpoints(n) if p != 0})

    def even(u):
        if model.symmetric:
            return 2.0 * model.g_density(n, u)
        return model.g_density(n, u) + model.g_density(n, -u)

    what = f"cosine transform of g_{n} at {t:g}"
    terms = model.g_tail_terms(n) if (model.g_tail_terms and model.symmetric) else None
    if terms is None:
        return require(integrate_oscillatory(even, t, lo, math.inf, tol, rtol,
                                             trig="cos", points=[p for p in brk if p > lo]),
                       what, tol, rtol).value
    start, parts = terms
    total = 0.0
    if lo < start:
        head = integrate_oscillatory(even, t, lo, start, tol / 2, rtol, trig="cos",
                                     points=[p for p in brk if lo < p < start])
        total += require(head, what, tol, rtol).value
    begin = max(lo, start)
    share = tol / (4 * max(1, len(parts)))
    for coef, env, omega in parts:
        # cos(omega u) cos(t u) = (cos((omega+t)u) + cos((omega-t)u)) / 2
        weights: dict[float, float] = {}
        for freq in (abs(omega + t), abs(omega - t)):
            weights[freq] = weights.get(freq, 0.0) + 0.5
        for freq, weight in weights.items():
            r = require(integrate_oscillatory(env, freq, begin, math.inf, share, rtol,
                                              trig="cos"), what, share, rtol)
            total += 2.0 * coef * weight * r.value
    return total


def theta_quad(model: ArrayModel, n: int, t, tol: float = 1e-12,
               rtol: float = 1e-11) -> np.ndarray:
    """``theta_n(t) = integral of exp(itu) g_n(u) du`` by quadrature.

    Ignores any closed form; used for models without one and as an
    independent route in tests.
    """
    _check_n(n)
    t = np.asarray(t, dtype=float)
    brk = sorted({abs(p) for p in model.g_breakpoints(n) if p != 0})

    def odd(u):
        return model.g_density(n, u) - model.g_density(n, -u)

    def one(tv: float) -> complex:
        re = _cos_transform(model, n, tv, 0.0, tol, rtol)
        im = 0.0
        if not model.symmetric and tv != 0.0:
            im = require(integrate_oscillatory(odd, tv, 0.0, math.inf, tol, rtol,
                                               trig="sin", points=brk),
                         f"theta_{n}({tv:g}) imaginary part", tol, rtol).value
        return complex(re, im)

    flat = np.abs(t.ravel()) if model.symmetric else t.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, tv in enumerate(flat):
        key = ("theta", n, float(tv))
        out[i] = model.memo(key, lambda tv=float(tv): one(tv))
    return _scalar_or_array(out.reshape(t.shape), t)


def theta_n(model: ArrayModel, n: int, t) -> np.ndarray:
    """Characteristic function of ``g_n`` at ``t`` (closed form if known)."""
    _check_n(n)
    t = np.asarray(t, dtype=float)
    if model.theta_closed is not None:
        out = np.asarray(model.theta_closed(n, t), dtype=complex)
    elif model.one_minus_theta_closed is not None:
        out = 1.0 - np.asarray(model.one_minus_theta_closed(n, t), dtype=complex)
    else:
        out = np.asarray(theta_quad(model, n, t), dtype=complex)
    return _scalar_or_array(np.broadcast_to(out, t.shape).copy(), t)


def one_minus_theta(model: ArrayModel, n: int, t) -> np.ndarray:
    """``1 - theta_n(t)``, accurate where ``theta_n`` is close to one."""
    t = np.asarray(t, dtype=float)
    if model.one_minus_theta_closed is not None:
        out = np.asarray(model.one_minus_theta_closed(n, t), dtype=complex)
        return _scalar_or_array(np.broadcast_to(out, t.shape).copy(), t)
    return 1.0 - theta_n(model, n, t)


def _ipow(base: np.ndarray, k: int) -> np.ndarray:
    # binary exponentiation: exact integer power, no complex logarithm
    result = np.ones_like(base)
    b = base.copy()
    while k:
        if k & 1:
            result = result * b
        k >>= 1
        if k:
            b = b * b
    return result


def char_fn_Sn(model: ArrayModel, n: int, z) -> np.ndarray:
    """``Phi_n(z) = theta_n(z / b_n) ** a_n`` by integer powering."""
    _check_n(n)
    z = np.asarray(z, dtype=float)
    th = np.atleast_1d(np.asarray(theta_n(model, n, z / model.b(n)), dtype=complex))
    with np.errstate(under="ignore"):
        out = _ipow(th, model.a(n)).reshape(z.shape)
    return _scalar_or_array(out, z)


def beta_n(model: ArrayModel, n: int) -> float:
    """``beta_n = integral of sin(u) f_n(u) du``, which equals
    ``Im theta_n(1 / b_n)``."""
    _check_n(n)
    if model.symmetric:
        return 0.0
    return float(np.imag(theta_n(model, n, 1.0 / model.b(n))))


def psi_n(model: ArrayModel, n: int, z) -> np.ndarray:
    """Row exponent ``a_n (1 - theta_n(z / b_n))``.

    This is the Lévy-Khintchine exponent of ``M_n`` with drift ``a_n beta_n``;
    its real part is ``a_n`` times the integral of ``(1 - cos zu) f_n(u)``.
    """
    _check_n(n)
    z = np.asarray(z, dtype=float)
    out = model.a(n) * np.asarray(one_minus_theta(model, n, z / model.b(n)), dtype=complex)
    return _scalar_or_array(np.asarray(out).reshape(z.shape), z)


def phi_n(model: ArrayModel, n: int, z) -> np.ndarray:
    """Compensated row exponent ``psi_n(z) + i a_n beta_n z``.

    Its imaginary part is the integral of ``(z sin u - sin zu)`` against the
    row Lévy density, the same centring as the limit exponent without drift.
    """
    z = np.asarray(z, dtype=float)
    drift = model.a(n) * beta_n(model, n)
    return psi_n(model, n, z) + 1j * drift * z


def symmetrize(h):
    """Even part ``u -> (h(u) + h(-u)) / 2`` of a density or measure."""
    if isinstance(h, CanonicalMeasure):
        lo, hi = h.support
        reach = max(abs(lo), abs(hi))
        brk = tuple(sorted({abs(p) for p in h.breakpoints} | {-abs(p) for p in h.breakpoints}))
        return CanonicalMeasure(symmetrize(h.levy_density), h.atom_at_zero,
                                (-reach, reach), brk, True, f"sym({h.name})")
    if not callable(h):
        raise TypeError("symmetrize expects a callable density or a CanonicalMeasure")

    def even(u):
        u = np.asarray(u, dtype=float)
        return 0.5 * (np.asarray(h(u), dtype=float) + np.asarray(h(-u), dtype=float))

    return even


def measure_n(model: ArrayModel, n: int) -> CanonicalMeasure:
    """Canonical measure ``M_n``: Lévy density ``a_n b_n g_n(b_n u)``."""
    _check_n(n)
    a, b = model.a(n), model.b(n)

    def ell(u):
        return a * b * model.g_density(n, b * np.asarray(u, dtype=float))

    brk = tuple(p / b for p in model.g_breakpoints(n))
    return CanonicalMeasure(ell, breakpoints=brk, symmetric=model.symmetric,
                            name=f"{model.name}:M_{n}")


def _g_integral(model: ArrayModel, n: int, lo: float, tol: float, rtol: float) -> float:
    # integral of g_n over |u| >= lo
    return _cos_transform(model, n, 0.0, lo, tol, rtol)


def tail_mass(model: ArrayModel, n: int, eps: float, tol: float = 1e-12,
              rtol: float = 1e-10) -> float:
    """``P(|X_{1,n}| >= eps)``: integral of ``f_n`` over ``|u| >= eps``."""
    _check_n(n)
    return _g_integral(model, n, eps * model.b(n), tol, rtol)


def density_mass(model: ArrayModel, n: int, tol: float = 1e-12,
                 rtol: float = 1e-11) -> float:
    """Total mass of ``g_n`` (should be one)."""
    _check_n(n)
    return _g_integral(model, n, 0.0, tol, rtol)


# -- Example 1: base density proportional to (1 - cos u) / |u|**(1+alpha) ----

def _half_sum_minus_one(alpha: float, s: np.ndarray) -> np.ndarray:
    """``((1+s)**a + (1-s)**a) / 2 - 1`` for ``0 <= s <= 1``.

    The even binomial series is used for ``s < 0.1``, where the two
    ``expm1`` terms cancel to ``O(s**2)``.
    """
    out = np.empty_like(s)
    small = s < 0.1
    ss = s[small]
    # sum_k binom(alpha, 2k) s**(2k), k = 1..8
    coef, acc, power = 1.0, np.zeros_like(ss), np.ones_like(ss)
    for j in range(16):
        coef *= (alpha - j) / (j + 1)
        power = power * ss
        if j % 2 == 1:
            acc += coef * power
    out[small] = acc
    sl = s[~small]
    with np.errstate(divide="ignore"):
        out[~small] = 0.5 * (np.expm1(alpha * np.log1p(sl)) + np.expm1(alpha * np.log1p(-sl)))
    return out


def stable_one_minus_theta(alpha: float, t) -> np.ndarray:
    """``1 - theta(t)`` for ``theta(t) = (|1+t|**a + |1-t|**a) / 2 - |t|**a``.

    The symmetric second difference is formed by a series or by
    ``expm1``/``log1p``, so no catastrophic cancellation occurs near ``t = 0``
    or for large ``t``.
    """
    t = np.abs(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    small = t < 1.0
    ts = t[small]
    out[small] = ts ** alpha - _half_sum_minus_one(alpha, ts)
    tl = t[~small]
    out[~small] = 1.0 - tl ** alpha * _half_sum_minus_one(alpha, 1.0 / tl)
    return out


def stable_theta(alpha: float, t) -> np.ndarray:
    """Characteristic function of ``c (1 - cos u) / |u|**(1+alpha)``."""
    t = np.abs(np.asarray(t, dtype=float))
    if alpha == 1.0:
        return np.maximum(1.0 - t, 0.0)
    out = np.empty_like(t)
    small = t < 1.0
    out[small] = 1.0 - stable_one_minus_theta(alpha, t[small])
    tl = t[~small]
    out[~small] = tl ** alpha * _half_sum_minus_one(alpha, 1.0 / tl)
    return out


def example1_model(alpha: float) -> ArrayModel:
    """Rows of ``n`` copies of ``xi / n**(1/alpha)``, with ``xi`` of density
    ``c (1 - cos u) / |u|**(1+alpha)``; the limit is symmetric
    ``alpha``-stable with ``psi(z) = |z|**alpha``.

    ``c`` is fixed at construction by quadrature so that the density has
    unit mass (equivalently ``psi(1) = 1``).
    """
    alpha = float(alpha)
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    c = stable_constant(alpha)
    inv = 1.0 / alpha

    def g(n, u):
        u = np.abs(np.asarray(u, dtype=float))
        small = u < 1e-4
        us = np.where(small, 1.0, u)
        s = np.sin(0.5 * us)
        # (1 - cos u) = u**2/2 - u**4/24 near zero
        series = u ** (1.0 - alpha) * (0.5 - u * u / 24.0)
        with np.errstate(divide="ignore"):
            return c * np.where(small, series, 2.0 * s * s * us ** (-1.0 - alpha))

    def theta(n, t):
        return stable_theta(alpha, t)

    def omt(n, t):
        if alpha == 1.0:
            return 1.0 - stable_theta(1.0, t)
        return stable_one_minus_theta(alpha, t)

    def b(n):
        return float(n) ** inv

    def theta_bound(n, T):
        # second-difference bound |theta(t)| <= alpha|alpha-1|/2 (t-1)**(alpha-2)
        if alpha == 1.0:
            return max(0.0, 1.0 - T)
        if T <= 1.0:
            return 1.0
        return min(1.0, 0.5 * alpha * abs(alpha - 1.0) * (T - 1.0) ** (alpha - 2.0))

    def envelope(n, z):
        t = np.abs(np.asarray(z, dtype=float)) / b(n)
        with np.errstate(all="ignore"):
            bound = np.where(t > 1.0,
                             0.5 * alpha * abs(alpha - 1.0) * (t - 1.0) ** (alpha - 2.0), 1.0)
        return np.minimum(1.0, bound) ** n

    def tail_terms(n):
        # g(u) = c u**(-1-alpha) - c u**(-1-alpha) cos u away from the origin
        def env(u):
            return np.asarray(u, dtype=float) ** (-1.0 - alpha)
        return math.pi, [(c, env, 0.0), (-c, env, 1.0)]

    limit_density = None
    if alpha == 1.0:
        def limit_density(x):
            x = np.asarray(x, dtype=float)
            return 1.0 / (math.pi * (1.0 + x * x))

    return ArrayModel(
        name=f"example1:alpha={alpha:g}",
        a_seq=lambda n: n,
        b_seq=b,
        g_density=g,
        symmetric=True,
        limit_exponent=stable_exponent(alpha),
        theta_closed=theta,
        one_minus_theta_closed=omt,
        limit_density=limit_density,
        phi_support=(lambda n: float(n)) if alpha == 1.0 else None,
        phi_envelope=None if alpha == 1.0 else envelope,
        theta_tail_bound=theta_bound,
        g_tail_terms=tail_terms,
        params={"alpha": alpha, "c_alpha": c, "kappa": alpha},
    )


# -- Example 2: hyperbolic-cosine limit --------------------------------------

def _raw_mass(n: int) -> float:
    # (1/n) * integral_{1/n}^inf dv / (v sinh v)
    def f(v):
        return 1.0 / (v * np.sinh(v))
    r = require(integrate(f, 1.0 / n, math.inf, 1e-15, 1e-14), "raw mass", 1e-15, 1e-14)
    return r.value / n


_PANEL_CAP = 2 ** 12
_CHUNK = 2 ** 21


def _si_large(x: np.ndarray) -> np.ndarray:
    """Sine integral for ``x >= 1e4`` from its asymptotic series."""
    inv2 = 1.0 / (x * x)
    f = (1.0 - 2.0 * inv2 * (1.0 - 12.0 * inv2 * (1.0 - 30.0 * inv2))) / x
    g = (1.0 - 6.0 * inv2 * (1.0 - 20.0 * inv2 * (1.0 - 42.0 * inv2))) * inv2
    return 0.5 * math.pi - f * np.cos(x) - g * np.sin(x)


def _cutoff_far(h: float, z: np.ndarray, x, w) -> np.ndarray:
    # 1/(v sinh v) = 1/v**2 + r(v) with r smooth; the 1/v**2 part is exact via Si,
    # the cosine moment of r by parts (error O(z**-4))
    def r(v):
        v = np.asarray(v, dtype=float)
        return 1.0 / (v * np.sinh(v)) - 1.0 / (v * v)

    v = 0.5 * h * (x + 1.0)
    r_int = 0.5 * h * float(w @ r(v))
    e = 1e-3 * h
    d1 = float(r(h + e) - r(h - e)) / (2 * e)
    d2 = float(r(h + e) - 2 * r(h) + r(h - e)) / (e * e)
    zh = z * h
    cos_mom = np.sin(zh) * float(r(h)) / z + np.cos(zh) * d1 / z ** 2 - np.sin(zh) * d2 / z ** 3
    return r_int - cos_mom - (1.0 - np.cos(zh)) / h + z * _si_large(zh)


def _cutoff_correction(n: int, z: np.ndarray) -> np.ndarray:
    """``integral_0^{1/n} 2 sin(zv/2)**2 / (v sinh v) dv`` for each ``z``.

    Composite Gauss-Legendre with roughly one panel per period; the ``z``
    values are bucketed by panel count so each bucket is one matrix product.
    Past ``_PANEL_CAP`` periods a split with the sine integral takes over.
    """
    z = np.abs(np.asarray(z, dtype=float))
    flat = z.ravel()
    out = np.zeros_like(flat)
    h = 1.0 / n
    x, w = np.polynomial.legendre.leggauss(24)
    periods = flat * h / (2.0 * math.pi)
    far = periods > _PANEL_CAP
    if far.any():
        out[far] = _cutoff_far(h, flat[far], x, w)
    near = ~far
    panels = np.maximum(2, 2 ** np.ceil(np.log2(np.maximum(periods[near], 1.0) + 1.0))).astype(int)
    idx_near = np.flatnonzero(near)
    for p in np.unique(panels):
        idx = idx_near[panels == p]
        edges = np.linspace(0.0, h, p + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        v = (0.5 * (lo + hi) + 0.5 * (hi - lo) * x[None, :]).ravel()
        wv = (0.5 * (hi - lo) * w[None, :]).ravel()
        base = wv / (v * np.sinh(v))
        step = max(1, _CHUNK // v.size)
        for k in range(0, idx.size, step):
            part = idx[k:k + step]
            s = np.sin(0.5 * np.outer(flat[part], v))
            out[part] = (2.0 * s * s) @ base
    return out.reshape(z.shape)


def example2_model(normalize: bool = True) -> ArrayModel:
    """Rows of ``n`` copies of ``xi / n`` with ``xi`` of density proportional
    to ``1 / (2 n u sinh(u/n))`` on ``|u| >= 1``; the limit law has density
    ``1 / (pi cosh x)``.

    The raw kernel has total mass ``Z_n = 1 - ln 2 / n + O(1/n**2)``, so by
    default it is divided by ``Z_n``.  ``normalize=False`` keeps the raw
    kernel, which is not a probability density.
    """
    psi = hyperbolic_cosine_exponent()
    half_pi = 0.5 * math.pi

    def Z(n: int) -> float:
        return model.memo(("raw_mass", n), lambda: _raw_mass(n))

    def scale(n: int) -> float:
        return Z(n) if normalize else 1.0

    def g_raw(n, u):
        a = np.abs(np.asarray(u, dtype=float))
        with np.errstate(all="ignore"):
            v = np.where(a >= 1.0, 1.0 / (2.0 * n * a * np.sinh(a / n)), 0.0)
        return np.where(np.isfinite(v), v, 0.0)

    def g(n, u):
        return g_raw(n, u) / scale(n)

    def truncated_psi(n, z):
        z = np.asarray(z, dtype=float)
        return log_cosh(half_pi * z) - _cutoff_correction(n, z)

    def omt(n, t):
        t = np.asarray(t, dtype=float)
        val = truncated_psi(n, n * t) / n
        if normalize:
            return val / Z(n)
        # raw kernel: theta = Z_n - val
        return 1.0 - Z(n) + val

    def theta(n, t):
        t = np.asarray(t, dtype=float)
        val = truncated_psi(n, n * t) / n
        return 1.0 - val / Z(n) if normalize else Z(n) - val

    def theta_bound(n, T):
        # second mean value theorem on each half-line
        if T <= 0:
            return 1.0
        return min(1.0, 4.0 * g_raw(n, 1.0) / (scale(n) * T))

    def envelope(n, z):
        t = np.abs(np.asarray(z, dtype=float)) / n
        with np.errstate(divide="ignore"):
            bound = np.minimum(1.0, 4.0 * g_raw(n, 1.0) / (scale(n) * t))
        return bound ** n

    def limit_density(x):
        x = np.abs(np.asarray(x, dtype=float))
        return 2.0 * np.exp(-x) / (math.pi * (1.0 + np.exp(-2.0 * x)))

    model = ArrayModel(
        name="example2" if normalize else "broken",
        a_seq=lambda n: n,
        b_seq=lambda n: float(n),
        g_density=g,
        symmetric=True,
        limit_exponent=psi,
        theta_closed=theta,
        one_minus_theta_closed=omt,
        limit_density=limit_density,
        g_breakpoints=lambda n: (-1.0, 1.0),
        phi_envelope=envelope,
        theta_tail_bound=theta_bound,
        params={"normalized": normalize, "kappa": 1.0},
    )
    return model


# -- Gaussian sanity model ----------------------------------------------------

def gauss_model() -> ArrayModel:
    """Rows of ``n`` standard normals scaled by ``1/sqrt(n)``; every row sum
    is exactly standard normal."""

    def g(n, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)

    def theta(n, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-0.5 * t * t)

    def omt(n, t):
        t = np.asarray(t, dtype=float)
        return -np.expm1(-0.5 * t * t)

    def envelope(n, z):
        z = np.asarray(z, dtype=float)
        return np.exp(-0.5 * z * z)

    def limit_density(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

    return ArrayModel(
        name="gauss",
        a_seq=lambda n: n,
        b_seq=lambda n: math.sqrt(n),
        g_density=g,
        symmetric=True,
        limit_exponent=gaussian_exponent(),
        theta_closed=theta,
        one_minus_theta_closed=omt,
        limit_density=limit_density,
        phi_envelope=envelope,
        theta_tail_bound=lambda n, T: math.exp(-0.5 * T * T),
        params={"kappa": 2.0},
    )


def shifted_model(model: ArrayModel, shift: float) -> ArrayModel:
    """Translate every ``g_n`` by ``shift``: ``g_n(u - shift)``.

    Requires ``a_n / b_n`` to be the same for all rows, so the row sums
    converge to the original limit translated by ``shift * a_n / b_n``.
    """
    ratio = model.a(1) / model.b(1)
    for n in (2, 3, 7, 16):
        if not math.isclose(model.a(n) / model.b(n), ratio, rel_tol=1e-12):
            raise ValueError("shifted_model needs a_n / b_n constant in n")
    base = model

    def g(n, u):
        return base.g_density(n, np.asarray(u, dtype=float) - shift)

    def theta(n, t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * shift * t) * theta_n(base, n, t)

    def envelope(n, z):
        return base.phi_envelope(n, z)

    limit_density = None
    if base.limit_density is not None:
        offset = shift * ratio

        def limit_density(x):
            return base.limit_density(np.asarray(x, dtype=float) - offset)

    return ArrayModel(
        name=f"{base.name}:shift={shift:g}",
        a_seq=base.a_seq,
        b_seq=base.b_seq,
        g_density=g,
        symmetric=False,
        limit_exponent=base.limit_exponent.shifted(shift * ratio),
        limit_beta=base.limit_beta + shift * ratio,
        theta_closed=theta,
        limit_density=limit_density,
        g_breakpoints=lambda n: tuple(p + shift for p in base.g_breakpoints(n)),
        phi_support=base.phi_support,
        phi_envelope=envelope if base.phi_envelope is not None else None,
        theta_tail_bound=base.theta_tail_bound,
        params={**base.params, "shift": shift},
    )


def _parse_options(text: str) -> dict[str, float]:
    opts = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise ValueError(f"malformed model option {part!r}")
        key, value = part.split("=", 1)
        opts[key.strip()] = float(value)
    return opts


def model_from_name(text: str) -> ArrayModel:
    """Build a model from a name such as ``"example1:alpha=1.5"``,
    ``"example2"``, ``"example2:shift=0.3"``, ``"gauss"`` or ``"broken"``."""
    head, _, rest = text.strip().partition(":")
    opts = _parse_options(rest)
    shift = opts.pop("shift", None)
    if head == "example1":
        if "alpha" not in opts:
            raise ValueError("example1 needs alpha, e.g. example1:alpha=1")
        model = example1_model(opts.pop("alpha"))
    elif head == "example2":
        model = example2_model(True)
    elif head == "broken":
        model = example2_model(False)
    elif head == "gauss":
        model = gauss_model()
    else:
        raise ValueError(f"unknown model {text!r}")
    if opts:
        raise ValueError(f"unused model options {sorted(opts)} in {text!r}")
    if shift is not None:
        model = shifted_model(model, shift)
    return model
