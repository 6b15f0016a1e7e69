"""Canonical measures and Lévy-Khintchine characteristic exponents.

A canonical measure ``M`` is stored through its Lévy density
``ell(u) = M(du) / (u**2 du)`` plus an optional atom at the origin.  The
exponent uses the ``sin u`` centring

    psi(z) = -i*beta*z + integral of (1 - exp(izu) + iz sin u) ell(u) du
             + atom * z**2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .quad import (
    DEFAULT_RTOL,
    DEFAULT_TOL,
    QuadratureError,
    QuadResult,
    integrate,
    integrate_oscillatory,
    require,
)

__all__ = [
    "MeasureError",
    "CanonicalMeasure",
    "CharExponent",
    "ConvergenceReport",
    "exponent_from_measure",
    "tail_functionals",
    "interval_mass",
    "proper_convergence_report",
    "stable_constant",
    "stable_measure",
    "stable_exponent",
    "hyperbolic_cosine_measure",
    "hyperbolic_cosine_exponent",
    "log_cosh",
    "gaussian_measure",
    "gaussian_exponent",
]


class MeasureError(ValueError):
    """The supplied measure is not canonical (infinite mass on a bounded
    interval, divergent tails, negative density or broken symmetry)."""


@dataclass(frozen=True)
class CanonicalMeasure:
    """Canonical measure ``M(du) = u**2 ell(u) du + atom * delta_0``.

    Parameters
    ----------
    levy_density : callable
        Vectorized ``u -> ell(u) >= 0`` on the punctured line.
    atom_at_zero : float
        Gaussian component.
    support : (float, float)
        Interval outside which ``ell`` vanishes; used to bound quadrature.
    breakpoints : tuple of float
        Points where ``ell`` is discontinuous or kinked.
    symmetric : bool
        Declares ``ell(u) == ell(-u)``; halves the work and zeroes the
        imaginary part of the exponent.
    """

    levy_density: Callable[[np.ndarray], np.ndarray]
    atom_at_zero: float = 0.0
    support: tuple[float, float] = (-math.inf, math.inf)
    breakpoints: tuple[float, ...] = ()
    symmetric: bool = False
    name: str = ""

    def density(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.support
        with np.errstate(all="ignore"):
            val = np.asarray(self.levy_density(u), dtype=float)
        val = np.broadcast_to(val, u.shape)
        return np.where((u >= lo) & (u <= hi) & (u != 0), val, 0.0)

    def even_part(self, u) -> np.ndarray:
        """``ell(u) + ell(-u)`` for ``u > 0``."""
        u = np.asarray(u, dtype=float)
        if self.symmetric:
            return 2.0 * self.density(u)
        return self.density(u) + self.density(-u)

    def odd_part(self, u) -> np.ndarray:
        """``ell(u) - ell(-u)`` for ``u > 0``."""
        u = np.asarray(u, dtype=float)
        if self.symmetric:
            return np.zeros_like(u)
        return self.density(u) - self.density(-u)

    @property
    def reach(self) -> float:
        lo, hi = self.support
        return max(abs(lo), abs(hi))

    def positive_breaks(self) -> list[float]:
        return sorted({abs(p) for p in self.breakpoints if p != 0})

    def validate(self, grid: Sequence[float] | None = None,
                 tol: float = DEFAULT_TOL) -> "CanonicalMeasure":
        """Check the canonical-measure axioms numerically.

        Raises :class:`MeasureError` on the first violation and returns the
        measure otherwise.
        """
        if self.atom_at_zero < 0 or not math.isfinite(self.atom_at_zero):
            raise MeasureError(f"{self.name}: atom at zero must be finite and >= 0")
        if grid is None:
            grid = np.concatenate([np.geomspace(1e-6, 1e3, 200)])
        grid = np.asarray(grid, dtype=float)
        grid = grid[(grid > 0)]
        both = np.concatenate([grid, -grid])
        vals = self.density(both)
        if np.any(vals < 0) or np.any(np.isnan(vals)):
            raise MeasureError(f"{self.name}: Lévy density negative or undefined")
        if self.symmetric:
            right = self.levy_density(grid)
            left = self.levy_density(-grid)
            if not np.allclose(right, left, rtol=1e-12, atol=0):
                raise MeasureError(f"{self.name}: declared symmetric but ell(u) != ell(-u)")
        try:
            interval_mass(self, -1.0, 1.0, tol=tol)
            tail_functionals(self, 1.0, tol=tol)
        except QuadratureError as exc:
            raise MeasureError(f"{self.name}: measure not canonical ({exc})") from exc
        return self


@dataclass(frozen=True)
class CharExponent:
    """Characteristic exponent ``psi = re_part + i * im_part``.

    ``growth_alpha`` and ``growth_c`` record a known lower bound
    ``Re psi(z) >= growth_c * |z|**growth_alpha`` for large ``|z|``.
    """

    re_part: Callable[[np.ndarray], np.ndarray]
    im_part: Callable[[np.ndarray], np.ndarray]
    drift_beta: float = 0.0
    growth_alpha: float | None = None
    growth_c: float | None = None
    name: str = ""

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.asarray(self.re_part(z), dtype=float) + 1j * np.asarray(self.im_part(z), dtype=float)

    def char_fn(self, z):
        """``exp(-psi(z))``, the characteristic function of the limit law."""
        z = np.asarray(z, dtype=float)
        re = np.asarray(self.re_part(z), dtype=float)
        im = np.asarray(self.im_part(z), dtype=float)
        return np.exp(-re) * np.exp(-1j * im)

    def shifted(self, shift: float) -> "CharExponent":
        """Exponent of the law translated by ``shift`` (adds ``-i*shift*z``)."""
        base_im = self.im_part
        return CharExponent(
            self.re_part,
            lambda z: np.asarray(base_im(z), dtype=float) - shift * np.asarray(z, dtype=float),
            self.drift_beta + shift,
            self.growth_alpha,
            self.growth_c,
            f"{self.name}+shift({shift:g})",
        )


def _elementwise(fn: Callable[[float], float]) -> Callable[[np.ndarray], np.ndarray]:
    def g(z):
        z = np.asarray(z, dtype=float)
        flat = z.ravel()
        out = np.empty_like(flat)
        memo: dict[float, float] = {}
        for i, v in enumerate(flat):
            key = float(v)
            if key not in memo:
                memo[key] = fn(key)
            out[i] = memo[key]
        return out.reshape(z.shape) if z.ndim else float(out[0])
    return g


def _sin_diff(z: float, u: np.ndarray) -> np.ndarray:
    """``z sin u - sin(z u)`` without cancellation at small ``u``."""
    u = np.asarray(u, dtype=float)
    scale = np.abs(u) * max(1.0, abs(z))
    small = scale < 1e-2
    us = np.where(small, u, 0.0)
    z2, z3 = z * z, z * z * z
    u3 = us ** 3
    series = u3 * ((z3 - z) / 6.0
                   - us ** 2 * (z3 * z2 - z) / 120.0
                   + us ** 4 * (z3 * z2 * z2 - z) / 5040.0)
    direct = z * np.sin(u) - np.sin(z * u)
    return np.where(small, series, direct)


def _re_exponent(m: CanonicalMeasure, z: float, tol: float, rtol: float) -> float:
    z = abs(z)
    gauss = 0.5 * m.atom_at_zero * z * z
    if z == 0.0:
        return 0.0
    reach = m.reach
    breaks = m.positive_breaks()
    head_end = min(math.pi / z, reach)

    def head(u):
        s = np.sin(0.5 * z * u)
        return 2.0 * s * s * m.even_part(u)

    r = integrate(head, 0.0, head_end, tol / 3, rtol,
                  points=[p for p in breaks if p < head_end])
    require(r, "Re psi head", tol, rtol)
    total = r.value
    if head_end < reach:
        mass = integrate(m.even_part, head_end, reach, tol / 3, rtol,
                         points=[p for p in breaks if p > head_end])
        require(mass, "tail mass", tol, rtol)
        osc = integrate_oscillatory(m.even_part, z, head_end, reach, tol / 3, rtol,
                                    trig="cos", points=[p for p in breaks if p > head_end])
        require(osc, "Re psi oscillatory tail", tol, rtol)
        total += mass.value - osc.value
    return total + gauss


def _im_exponent(m: CanonicalMeasure, z: float, beta: float, tol: float,
                 rtol: float) -> float:
    drift = -beta * z
    if m.symmetric or z == 0.0:
        return drift
    reach = m.reach
    breaks = m.positive_breaks()
    head_end = min(math.pi / max(1.0, abs(z)), reach)

    def head(u):
        return _sin_diff(z, u) * m.odd_part(u)

    r = integrate(head, 0.0, head_end, tol / 3, rtol,
                  points=[p for p in breaks if p < head_end])
    require(r, "Im psi head", tol, rtol)
    total = r.value
    if head_end < reach:
        pts = [p for p in breaks if p > head_end]
        s1 = integrate_oscillatory(m.odd_part, 1.0, head_end, reach, tol / 3, rtol,
                                   trig="sin", points=pts)
        sz = integrate_oscillatory(m.odd_part, z, head_end, reach, tol / 3, rtol,
                                   trig="sin", points=pts)
        require(s1, "Im psi tail", tol, rtol)
        require(sz, "Im psi tail", tol, rtol)
        total += z * s1.value - sz.value
    return drift + total


def exponent_from_measure(m: CanonicalMeasure, beta: float = 0.0,
                          tol: float = DEFAULT_TOL, rtol: float = DEFAULT_RTOL,
                          growth_alpha: float | None = None,
                          growth_c: float | None = None) -> CharExponent:
    """Characteristic exponent of the infinitely divisible law with canonical
    measure ``m`` and drift ``beta``.

    The real part uses ``1 - cos x = 2 sin(x/2)**2`` on ``[0, pi/|z|]`` and
    splits the remainder into a tail mass minus an oscillatory integral.  The
    imaginary part works on the odd part of the density and uses a Taylor
    series for ``z sin u - sin(zu)`` near the origin.

    Each evaluation runs adaptive quadrature, so the returned callables are
    meant for checking and for models without a closed form.

    Raises
    ------
    QuadratureError
        If a tail integral does not converge (measure not canonical).
    """

    def re_point(z: float) -> float:
        return _re_exponent(m, z, tol, rtol)

    def im_point(z: float) -> float:
        return _im_exponent(m, z, beta, tol, rtol)

    return CharExponent(_elementwise(re_point), _elementwise(im_point), beta,
                        growth_alpha, growth_c, name=m.name)


def _half_line(m: CanonicalMeasure, lo: float, hi: float, sign: float,
               tol: float, rtol: float) -> QuadResult:
    # integral of ell over sign * [lo, hi], lo >= 0
    def f(u):
        return m.density(sign * u)
    pts = [p for p in m.positive_breaks() if lo < p < hi]
    edge = m.support[1] if sign > 0 else -m.support[0]
    hi = min(hi, edge)
    if hi <= lo:
        return QuadResult(0.0, 0.0, 0, True)
    return integrate(f, lo, hi, tol, rtol, points=pts)


def tail_functionals(m: CanonicalMeasure, x: float, tol: float = DEFAULT_TOL,
                     rtol: float = DEFAULT_RTOL) -> tuple[float, float]:
    """Tail functionals ``(M+(x), M-(x))``: integrals of ``ell`` over
    ``[x, inf)`` and ``(-inf, -x]``.

    Raises
    ------
    ValueError
        If ``x <= 0``.
    QuadratureError
        If a tail integral fails; the exception carries the partial result.
    """
    if not x > 0:
        raise ValueError("tail functionals need x > 0")
    plus = require(_half_line(m, x, math.inf, 1.0, tol, rtol), "M+(x)", tol, rtol)
    if m.symmetric:
        return plus.value, plus.value
    minus = require(_half_line(m, x, math.inf, -1.0, tol, rtol), "M-(x)", tol, rtol)
    return plus.value, minus.value


def interval_mass(m: CanonicalMeasure, lo: float, hi: float,
                  tol: float = DEFAULT_TOL, rtol: float = DEFAULT_RTOL) -> float:
    """``M([lo, hi])`` including the atom when ``0`` lies in the interval."""
    if not lo <= hi:
        raise ValueError("interval must satisfy lo <= hi")

    def weighted(u):
        u = np.asarray(u, dtype=float)
        return u * u * m.density(u)

    pts = [p for p in m.breakpoints if lo < p < hi] + ([0.0] if lo < 0 < hi else [])
    r = require(integrate(weighted, lo, hi, tol, rtol, points=pts), "M(I)", tol, rtol)
    atom = m.atom_at_zero if lo <= 0 <= hi else 0.0
    return r.value + atom


@dataclass
class ConvergenceReport:
    """Distances between two canonical measures on test sets."""

    intervals: list[tuple[float, float]]
    interval_deltas: list[float]
    xs: list[float]
    plus_deltas: list[float]
    minus_deltas: list[float]

    @property
    def max_delta(self) -> float:
        vals = self.interval_deltas + self.plus_deltas + self.minus_deltas
        return max(vals) if vals else 0.0


def proper_convergence_report(mn: CanonicalMeasure, m: CanonicalMeasure,
                              intervals: Sequence[tuple[float, float]],
                              xs: Sequence[float], tol: float = DEFAULT_TOL,
                              rtol: float = DEFAULT_RTOL) -> ConvergenceReport:
    """``|Mn(I) - M(I)|`` per interval and ``|Mn±(x) - M±(x)|`` per ``x``.

    Both measures are integrated on a common set of break points so that a
    cutoff in ``mn`` is resolved even when ``m`` is smooth.
    """
    merged = tuple(sorted(set(mn.breakpoints) | set(m.breakpoints)))

    def difference(u):
        u = np.asarray(u, dtype=float)
        return u * u * (mn.density(u) - m.density(u))

    deltas = []
    for lo, hi in intervals:
        pts = [p for p in merged if lo < p < hi] + ([0.0] if lo < 0 < hi else [])
        r = require(integrate(difference, lo, hi, tol, rtol, points=pts),
                    "Mn(I) - M(I)", tol, rtol)
        atom = (mn.atom_at_zero - m.atom_at_zero) if lo <= 0 <= hi else 0.0
        deltas.append(abs(r.value + atom))
    plus, minus = [], []
    for x in xs:
        pn, qn = tail_functionals(mn, x, tol, rtol)
        p, q = tail_functionals(m, x, tol, rtol)
        plus.append(abs(pn - p))
        minus.append(abs(qn - q))
    return ConvergenceReport([tuple(i) for i in intervals], deltas, list(xs), plus, minus)


# -- built-in measures ------------------------------------------------------

def stable_constant(alpha: float, tol: float = 1e-13) -> float:
    """Normalizer ``c`` making ``c (1 - cos u) / |u|**(1 + alpha)`` integrate to 1.

    Computed by quadrature of ``J = integral_0^inf (1 - cos u) u**(-1-alpha) du``;
    the density integrates to ``2 c J``.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")

    def head(u):
        # 2 sin(u/2)^2 - u^2/2, the singular u**(1-alpha) part is added exactly
        s = np.sin(0.5 * u)
        small = np.where(u < 1e-2, u, 0.0)
        series = -small ** 4 / 24.0 + small ** 6 / 720.0
        return np.where(u < 1e-2, series, 2.0 * s * s - 0.5 * u * u) * u ** (-1.0 - alpha)

    h = require(integrate(head, 0.0, math.pi, tol, 1e-14), "J head", tol, 1e-14)
    singular = 0.5 * math.pi ** (2.0 - alpha) / (2.0 - alpha)
    mass = math.pi ** (-alpha) / alpha
    osc = require(integrate_oscillatory(lambda u: u ** (-1.0 - alpha), 1.0, math.pi,
                                        tol=tol, rtol=1e-14),
                  "J tail", tol, 1e-14)
    j = h.value + singular + mass - osc.value
    return 1.0 / (2.0 * j)


def stable_measure(alpha: float, c: float | None = None) -> CanonicalMeasure:
    """Symmetric stable measure ``ell(u) = c |u|**(-1-alpha)``.

    The default ``c`` gives ``psi(z) = |z|**alpha``.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if c is None:
        c = stable_constant(alpha)

    def ell(u):
        return c * np.abs(u) ** (-1.0 - alpha)

    return CanonicalMeasure(ell, symmetric=True, name=f"stable(alpha={alpha:g})")


def stable_exponent(alpha: float) -> CharExponent:
    """``psi(z) = |z|**alpha``."""
    return CharExponent(lambda z: np.abs(np.asarray(z, dtype=float)) ** alpha,
                        lambda z: np.zeros_like(np.asarray(z, dtype=float)),
                        0.0, alpha, 1.0, f"stable(alpha={alpha:g})")


def log_cosh(x):
    """``ln cosh x`` without overflow."""
    x = np.abs(np.asarray(x, dtype=float))
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def hyperbolic_cosine_measure(cutoff: float = 0.0) -> CanonicalMeasure:
    """``ell(u) = 1 / (2 |u| sinh|u|)``, optionally zero on ``|u| < cutoff``.

    Without cutoff the exponent is ``ln cosh(pi z / 2)`` and the law has
    density ``1 / (pi cosh x)``.
    """

    def ell(u):
        a = np.abs(np.asarray(u, dtype=float))
        with np.errstate(all="ignore"):
            v = 0.5 / (a * np.sinh(a))
        v = np.where(np.isfinite(v), v, 0.0)
        if cutoff > 0:
            v = np.where(a >= cutoff, v, 0.0)
        return v

    brk = (-cutoff, cutoff) if cutoff > 0 else ()
    name = "hyperbolic-cosine" + (f"(cutoff={cutoff:g})" if cutoff > 0 else "")
    return CanonicalMeasure(ell, breakpoints=brk, symmetric=True, name=name)


def hyperbolic_cosine_exponent() -> CharExponent:
    """``psi(z) = ln cosh(pi z / 2)``."""
    return CharExponent(lambda z: log_cosh(0.5 * math.pi * np.asarray(z, dtype=float)),
                        lambda z: np.zeros_like(np.asarray(z, dtype=float)),
                        0.0, 1.0, 0.5 * math.pi, "hyperbolic-cosine")


def gaussian_measure(variance: float = 1.0) -> CanonicalMeasure:
    """Pure Gaussian component: atom of mass ``variance`` at zero."""
    return CanonicalMeasure(lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                            atom_at_zero=variance, symmetric=True, name="gaussian")


def gaussian_exponent(variance: float = 1.0) -> CharExponent:
    """``psi(z) = variance * z**2 / 2``."""
    return CharExponent(lambda z: 0.5 * variance * np.asarray(z, dtype=float) ** 2,
                        lambda z: np.zeros_like(np.asarray(z, dtype=float)),
                        0.0, 2.0, 0.5 * variance, "gaussian")
