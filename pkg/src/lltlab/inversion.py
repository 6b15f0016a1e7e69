"""Densities from characteristic functions.

``p(x) = (2 pi)^-1 * integral of exp(-izx) Phi(z) dz`` is evaluated either
pointwise by adaptive quadrature or on a uniform grid by a trapezoid sum in
``z`` computed with one FFT.  Both routes truncate at ``z_max`` and report a
bound on the discarded tail.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .quad import integrate, integrate_oscillatory

__all__ = [
    "InversionError",
    "DensityGrid",
    "PointDensity",
    "SupDistance",
    "find_z_max",
    "tail_bound_from_envelope",
    "density_point",
    "density_grid",
    "sup_distance",
]

MAX_FFT_SIZE = 2 ** 23


class InversionError(ArithmeticError):
    """The characteristic function is not integrable, decays too slowly, or
    the grid cannot resolve it within the size limit."""


@dataclass
class DensityGrid:
    """Density values on a uniform grid.

    Attributes
    ----------
    xs, values : ndarray
    z_max : float
        Truncation point of the inversion integral.
    tail_bound : float
        Bound on ``(2 pi)^-1`` times the integral of ``|Phi|`` over
        ``|z| > z_max``; pointwise error from truncation.
    tol : float
        Requested tolerance.
    alias_delta : float
        Largest change of the grid values under the last doubling of the
        period; estimates the periodization error.
    outside_mass : float
        ``1 - P(a <= X <= b)`` computed from ``Phi``; lets the grid mass be
        checked against one.
    certified : bool
        ``False`` when the tail bound relies on probed values of ``|Phi|``
        rather than on a known envelope or support.
    """

    xs: np.ndarray
    values: np.ndarray
    z_max: float
    tail_bound: float
    tol: float
    alias_delta: float = 0.0
    outside_mass: float = float("nan")
    certified: bool = True

    @property
    def error_allowance(self) -> float:
        return self.tail_bound + self.alias_delta + self.tol

    def mass(self) -> float:
        """Trapezoid mass over the grid."""
        return float(np.trapezoid(self.values, self.xs))

    def metadata(self) -> dict:
        return {
            "z_max": self.z_max,
            "tail_bound": self.tail_bound,
            "tol": self.tol,
            "alias_delta": self.alias_delta,
            "outside_mass": self.outside_mass,
            "certified": self.certified,
            "points": int(len(self.xs)),
            "x_min": float(self.xs[0]),
            "x_max": float(self.xs[-1]),
        }

    def write_csv(self, path) -> tuple[Path, Path]:
        """Write ``x,p`` rows and a JSON sidecar next to the CSV."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write("x,p\n")
            for x, p in zip(self.xs, self.values):
                fh.write(f"{x:.17g},{p:.17g}\n")
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def read_csv(cls, path) -> "DensityGrid":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(data[:, 0], data[:, 1], meta["z_max"], meta["tail_bound"], meta["tol"],
                   meta.get("alias_delta", 0.0), meta.get("outside_mass", float("nan")),
                   meta.get("certified", True))


@dataclass(frozen=True)
class PointDensity:
    value: float
    certificate: float
    z_max: float
    tail_bound: float
    quad_error: float
    certified: bool

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SupDistance:
    """Grid sup of ``|p1 - p2|``.

    ``certificate`` bounds the numerical error of the grid values;
    ``grid_delta`` estimates how much the true sup can exceed the grid sup
    between nodes.
    """

    value: float
    certificate: float
    argmax: float
    grid_delta: float

    def __float__(self) -> float:
        return self.value

    def as_dict(self) -> dict:
        return asdict(self)


def _abs_phi(phi, z) -> np.ndarray:
    return np.abs(np.asarray(phi(np.asarray(z, dtype=float)), dtype=complex))


def tail_bound_from_envelope(envelope: Callable, z_max: float, tol: float = 1e-14) -> float:
    """``(2 pi)^-1 * 2 * integral_{z_max}^inf envelope(z) dz``."""
    r = integrate(lambda z: np.asarray(envelope(z), dtype=float), z_max, math.inf,
                  tol=tol, rtol=1e-6)
    return max(0.0, (r.value + r.error_estimate) / math.pi)


def find_z_max(phi: Callable, tol: float, envelope: Callable | None = None,
               support: float | None = None, start: float = 0.5,
               max_doublings: int = 48) -> tuple[float, float, bool]:
    """Truncation point for the inversion integral.

    Probes ``|Phi|`` at geometrically spaced ``z`` until it stays below
    ``tol / (1 + z**2)`` on a whole window ``[z, 2z]``.  With an envelope,
    ``z_max`` is then pushed out until the envelope's tail integral is below
    ``tol`` as well.  A compact support gives ``z_max`` exactly.

    Returns
    -------
    z_max, tail_bound, certified
    """
    if support is not None:
        return float(support), 0.0, True
    window = np.linspace(1.0, 2.0, 17)
    z = start
    found = None
    for _ in range(max_doublings):
        zs = z * window
        if np.all(_abs_phi(phi, zs) <= tol / (1.0 + zs * zs)):
            found = z
            break
        z *= 2.0
    if envelope is None:
        if found is None:
            raise InversionError("non-integrable or slowly decaying characteristic "
                                 f"function: |Phi| above tol/(1+z^2) up to z={z:g}")
        # beyond z_max only the probed decay is known
        tail = tol * (0.5 * math.pi - math.atan(found)) / math.pi
        return found, tail, False
    z = found if found is not None else start
    for _ in range(max_doublings):
        tail = tail_bound_from_envelope(envelope, z)
        if tail <= tol:
            return z, tail, True
        z *= 1.25
    raise InversionError("envelope tail of the characteristic function does not fall "
                         f"below {tol:g}; last z={z:g}, tail={tail:g}")


def _is_even_real(phi: Callable, scale: float) -> bool:
    zs = scale * np.array([0.137, 0.71, 1.3, 2.9])
    pos = np.asarray(phi(zs), dtype=complex)
    neg = np.asarray(phi(-zs), dtype=complex)
    size = np.maximum(np.abs(pos), 1e-300)
    return bool(np.all(np.abs(pos.imag) <= 1e-14 * size + 1e-300)
                and np.allclose(pos, neg, rtol=1e-14, atol=1e-300))


def density_point(phi: Callable, x: float, tol: float = 1e-10,
                  envelope: Callable | None = None, support: float | None = None,
                  even_real: bool | None = None, z_max: float | None = None) -> PointDensity:
    """Density at one point by adaptive quadrature of the inversion integral.

    Uses ``Phi(-z) = conj(Phi(z))`` to integrate over ``[0, z_max]`` only;
    for an even real ``Phi`` the cosine form is integrated with the
    oscillatory routine at frequency ``x``.
    """
    if z_max is None:
        z_max, tail, certified = find_z_max(phi, tol, envelope, support)
    else:
        tail = tail_bound_from_envelope(envelope, z_max) if envelope else 0.0
        certified = envelope is not None or support is not None
    if even_real is None:
        even_real = _is_even_real(phi, max(1.0, z_max / 8))
    if even_real:
        r = integrate_oscillatory(lambda z: np.real(phi(z)), x, 0.0, z_max,
                                  tol=tol * math.pi / 2, rtol=1e-12, trig="cos")
    else:
        def f(z):
            z = np.asarray(z, dtype=float)
            return np.real(np.exp(-1j * z * x) * np.asarray(phi(z), dtype=complex))
        r = integrate(f, 0.0, z_max, tol=tol * math.pi / 2, rtol=1e-12)
    value = r.value / math.pi
    qerr = r.error_estimate / math.pi
    return PointDensity(value, tail + qerr, z_max, tail, qerr, certified and r.converged)


def _trapezoid_fft(phi, a: float, dx_fine: float, size: int, z_max: float):
    """Grid values at ``a + k*dx_fine`` from the trapezoid sum over
    ``z_j = j*dz``, ``|z_j| <= z_max``, with ``dz*dx_fine = 2 pi / size``."""
    dz = 2.0 * math.pi / (size * dx_fine)
    count = int(math.ceil(z_max / dz))
    if 2 * count + 1 > size:
        raise InversionError("grid too coarse for z_max")
    z = dz * np.arange(count + 1)
    vals = np.asarray(phi(z), dtype=complex)
    w = np.ones(count + 1)
    w[-1] = 0.5
    c = np.zeros(size, dtype=complex)
    terms = w * vals * np.exp(-1j * z * a)
    c[: count + 1] = terms
    # negative frequencies are the conjugates of the positive ones
    c[size - count:] = np.conj(terms[1:][::-1])
    dens = np.fft.fft(c).real * dz / (2.0 * math.pi)
    return dens, z, vals, w, dz


def _inside_mass(z, vals, w, dz, a: float, b: float) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = np.where(z == 0, b - a,
                          (np.exp(-1j * z * a) - np.exp(-1j * z * b)) / (1j * np.where(z == 0, 1, z)))
    s = vals[0].real * (b - a) + 2.0 * np.sum((w * vals * kernel)[1:].real)
    return float(s * dz / (2.0 * math.pi))


def density_grid(phi: Callable, x_range: tuple[float, float] = (-10.0, 10.0),
                 points: int = 1024, tol: float = 1e-10,
                 envelope: Callable | None = None, support: float | None = None,
                 z_max: float | None = None, max_size: int = MAX_FFT_SIZE) -> DensityGrid:
    """Density on ``points`` equispaced nodes spanning ``x_range``.

    The inversion integral is replaced by its trapezoid sum on
    ``[-z_max, z_max]`` (half weights at the ends) and evaluated with one FFT
    on a finer, longer ``x`` lattice whose spacing satisfies
    ``dz * dx = 2 pi / size``.  A trapezoid sum with step ``dz`` returns the
    density periodized with period ``2 pi / dz``; the period is doubled until
    the grid values change by less than ``tol``, and the last change is
    reported as ``alias_delta``.

    Raises
    ------
    InversionError
        If ``z_max`` cannot be located or the FFT would exceed ``max_size``.
    """
    a, b = map(float, x_range)
    if not b > a:
        raise ValueError("x_range must be increasing")
    if points < 16:
        raise ValueError("points must be at least 16")
    if z_max is None:
        z_max, tail, certified = find_z_max(phi, tol, envelope, support)
    else:
        tail = tail_bound_from_envelope(envelope, z_max) if envelope else 0.0
        certified = envelope is not None or support is not None
    dx = (b - a) / (points - 1)
    # refine the x lattice until its Nyquist frequency covers z_max
    q = max(1, int(math.ceil(dx * z_max / math.pi * 1.0000001)))
    dx_fine = dx / q
    span = points * q
    size = 1
    while size < 2 * span:
        size *= 2
    prev = None
    delta = math.inf
    while True:
        if size > max_size:
            if prev is None:
                raise InversionError(f"FFT size {size} exceeds limit {max_size}")
            break
        dens, z, vals, w, dz = _trapezoid_fft(phi, a, dx_fine, size, z_max)
        cur = dens[: span: q][:points]
        if prev is not None:
            delta = float(np.max(np.abs(cur - prev)))
            if delta <= tol:
                prev = cur
                break
        prev = cur
        size *= 2
    outside = 1.0 - _inside_mass(z, vals, w, dz, a, b)
    xs = a + dx * np.arange(points)
    return DensityGrid(xs, prev, float(z_max), float(tail), float(tol),
                       float(delta) if math.isfinite(delta) else float("inf"),
                       outside, certified)


def sup_distance(d1: DensityGrid, d2: DensityGrid) -> SupDistance:
    """``max |p1 - p2|`` over a shared grid.

    Raises
    ------
    ValueError
        If the grids differ.
    """
    if d1.xs.shape != d2.xs.shape or not np.allclose(d1.xs, d2.xs, rtol=0, atol=1e-12):
        raise ValueError("sup_distance needs identical grids")
    diff = np.abs(d1.values - d2.values)
    i = int(np.argmax(diff))
    signed = d1.values - d2.values
    second = np.abs(np.diff(signed, 2))
    grid_delta = float(second.max() / 8.0) if second.size else 0.0
    cert = d1.tail_bound + d2.tail_bound + d1.alias_delta + d2.alias_delta
    return SupDistance(float(diff[i]), float(cert), float(d1.xs[i]), grid_delta)
