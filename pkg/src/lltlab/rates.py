"""Rate quantities, condition audits and the closed-form integrals of the
stable-type example.

Sups and infs over continuous ``z`` are taken on grids: a grid sup is a
lower bound for the true sup and a grid inf an upper bound for the true inf.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .array import (
    ArrayModel,
    beta_n,
    char_fn_Sn,
    density_mass,
    one_minus_theta,
    phi_n,
    tail_mass,
    theta_n,
)
from .canonical import CharExponent
from .inversion import DensityGrid, SupDistance, density_grid, find_z_max, sup_distance
from .quad import integrate, integrate_oscillatory, require

__all__ = [
    "RateRecord",
    "ConditionAudit",
    "NDelta",
    "BoundTerms",
    "BFit",
    "SymmetricRate",
    "RateParameterError",
    "default_z_grid",
    "gamma_prime",
    "gamma_dprime",
    "chi",
    "N_delta",
    "rho",
    "rho_simplified",
    "rho_symmetric",
    "H_n",
    "bound_terms",
    "condition_F_margin",
    "condition_G_margin",
    "condition_B_fit",
    "audit_all",
    "row_density_grid",
    "limit_density_grid",
    "measure_sup_error",
    "gamma_reflection",
    "I_closed",
    "I1_closed",
    "I2_closed",
    "I_quad",
    "I1_quad",
    "I2_quad",
    "c_alpha_1",
    "c_alpha_2",
    "c_alpha_3",
    "asymptotic_probe",
    "write_records_csv",
    "write_records_json",
    "RECORD_COLUMNS",
]

DEFAULT_DELTA = 0.5
DEFAULT_EPSILON = 0.1
RECORD_COLUMNS = ("n", "gamma_prime", "gamma_dprime", "chi", "inv_a_n", "exp_term",
                  "tail_term", "rho", "sup_error")


class RateParameterError(ValueError):
    """``epsilon`` or ``delta`` violate the preconditions of the rate."""

    def __init__(self, message: str, suggested_epsilon: float | None = None):
        super().__init__(message)
        self.suggested_epsilon = suggested_epsilon


@dataclass
class RateRecord:
    """Rate terms for one row ``n``.

    ``rho`` is the maximum of ``chi``, ``gamma_prime``, ``gamma_dprime``,
    ``inv_a_n`` and ``exp_term * tail_term``.
    """

    n: int
    gamma_prime: float
    gamma_dprime: float
    chi: float
    inv_a_n: float
    exp_term: float
    tail_term: float
    rho: float
    sup_error: float | None = None
    extras: dict = field(default_factory=dict)

    def recompute_rho(self) -> float:
        return max(self.chi, self.gamma_prime, self.gamma_dprime, self.inv_a_n,
                   self.exp_term * self.tail_term)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in RECORD_COLUMNS}

    def as_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class ConditionAudit:
    """Outcome of one condition check.

    ``passed`` holds exactly when ``margin > 0``.  ``required=False`` marks
    conditions that are reported but do not gate the audit.
    """

    condition: str
    n_range: tuple[int, int]
    margin: float
    passed: bool
    value: float
    notes: str = ""
    required: bool = True

    def as_dict(self) -> dict:
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        return d


@dataclass(frozen=True)
class NDelta:
    """Grid estimate of ``sup |theta_n(z)|`` over rows and ``|z| >= delta``."""

    value: float
    n_at: int
    z_at: float
    tail_bound: float
    per_n: tuple[float, ...]

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class BoundTerms:
    """Integrals ``I1 = |Phi_n - Phi|`` over ``|z| <= delta b_n``,
    ``I2 = |Phi_n|`` and ``I3 = |Phi|`` over ``|z| > delta b_n``."""

    I1: float
    I2: float
    I3: float

    @property
    def total(self) -> float:
        return self.I1 + self.I2 + self.I3

    @property
    def sup_bound(self) -> float:
        """Resulting bound on ``sup |p_n - p|``."""
        return self.total / (2.0 * math.pi)

    def __iter__(self):
        return iter((self.I1, self.I2, self.I3))


@dataclass(frozen=True)
class BFit:
    alpha_hat: float
    c_hat: float
    alpha_used: float
    boundary: bool


@dataclass(frozen=True)
class SymmetricRate:
    value: float
    gamma_prime: float
    remainder: float
    p_holds: bool
    violations: tuple[float, ...] = ()


# -- grids ---------------------------------------------------------------------

def default_z_grid(model: ArrayModel, n: int, z_max: float = 50.0,
                   points: int = 4096) -> np.ndarray:
    """Uniform grid on ``[0, z_max]`` merged with a geometric grid reaching
    ``64 b_n``, so sups attained at the row scale are captured."""
    far = max(z_max, 64.0 * model.b(n))
    return np.unique(np.concatenate([np.linspace(0.0, z_max, points),
                                     np.geomspace(1e-3, far, 1024)]))


def _grid(model, n, z_grid):
    return default_z_grid(model, n) if z_grid is None else np.asarray(z_grid, dtype=float)


def _phi_limit(model: ArrayModel, z: np.ndarray) -> np.ndarray:
    # drift-free limit exponent: psi + i beta z
    return model.limit_exponent(z) + 1j * model.limit_beta * z


def gamma_prime(model: ArrayModel, n: int, z_grid=None) -> float:
    """Grid sup of ``|Re phi(z) - Re phi_n(z)| / (1 + z**2)`` (lower bound
    for the true sup)."""
    z = _grid(model, n, z_grid)
    diff = np.abs(_phi_limit(model, z).real - np.asarray(phi_n(model, n, z), dtype=complex).real)
    return float(np.max(diff / (1.0 + z * z)))


def gamma_dprime(model: ArrayModel, n: int, z_grid=None) -> float:
    """Grid sup of ``|Im phi(z) - Im phi_n(z)| / (1 + z**2)``."""
    if model.symmetric and model.limit_exponent.drift_beta == 0:
        return 0.0
    z = _grid(model, n, z_grid)
    diff = np.abs(_phi_limit(model, z).imag - np.asarray(phi_n(model, n, z), dtype=complex).imag)
    return float(np.max(diff / (1.0 + z * z)))


def chi(model: ArrayModel, n: int) -> float:
    """``|a_n beta_n - beta|``."""
    return abs(model.a(n) * beta_n(model, n) - model.limit_beta)


def N_delta(model: ArrayModel, delta: float = DEFAULT_DELTA,
            n_set: Iterable[int] = range(1, 33), z_max_probe: float = 100.0,
            points: int = 4096) -> NDelta:
    """Estimate of ``sup_{n, |z| >= delta} |theta_n(z)|``.

    Grid maximum over ``n_set`` and ``[delta, z_max_probe]``, combined with
    the model's analytic bound on ``|theta_n|`` beyond ``z_max_probe`` when
    one is known.  A value ``>= 1`` means condition C fails.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    z = np.unique(np.concatenate([np.linspace(delta, z_max_probe, points),
                                  np.geomspace(delta, z_max_probe, 512)]))
    best, n_at, z_at, tail = -1.0, 0, delta, 0.0
    per_n = []
    for n in n_set:
        vals = np.abs(np.asarray(theta_n(model, n, z), dtype=complex))
        if model.symmetric is False:
            vals = np.maximum(vals, np.abs(np.asarray(theta_n(model, n, -z), dtype=complex)))
        i = int(np.argmax(vals))
        top = float(vals[i])
        if model.theta_tail_bound is not None:
            t_b = float(model.theta_tail_bound(n, z_max_probe))
        else:
            t_b = float(vals[-1])
        tail = max(tail, t_b)
        per_n.append(max(top, t_b))
        if top > best:
            best, n_at, z_at = top, int(n), float(z[i])
    return NDelta(max(best, tail), n_at, z_at, tail, tuple(per_n))


def _n_set_for(n: int, extra: Sequence[int] = ()) -> list[int]:
    return sorted(set(range(1, 33)) | set(extra) | {n})


def rho(model: ArrayModel, n: int, epsilon: float = DEFAULT_EPSILON,
        delta: float = DEFAULT_DELTA, z_grid=None, n_delta: NDelta | float | None = None,
        n_set: Sequence[int] | None = None) -> RateRecord:
    """All five terms of the rate and their maximum.

    The last term is ``exp(a_n (ln N(delta) + eps) - (1 - eps) Re psi(delta b_n))``.

    Raises
    ------
    RateParameterError
        If ``epsilon`` is outside ``(0, 1)`` or ``ln N(delta) + epsilon >= 0``;
        the exception suggests the largest admissible ``epsilon``.
    """
    if not 0 < epsilon < 1:
        raise RateParameterError("epsilon must lie in (0, 1)")
    if n_delta is None:
        n_delta = N_delta(model, delta, n_set or _n_set_for(n))
    nd = float(n_delta)
    if nd <= 0:
        log_n = -math.inf
    elif nd >= 1:
        raise RateParameterError(f"N(delta)={nd:.6g} >= 1: condition C fails, no epsilon works")
    else:
        log_n = math.log(nd)
    if log_n + epsilon >= 0:
        best = min(1.0, -log_n)
        raise RateParameterError(
            f"ln N(delta) + epsilon = {log_n + epsilon:.4g} >= 0; choose epsilon < {best:.6g}",
            suggested_epsilon=math.nextafter(best, 0.0) * 0.99)
    a = model.a(n)
    z = _grid(model, n, z_grid)
    gp = gamma_prime(model, n, z)
    gd = gamma_dprime(model, n, z)
    ch = chi(model, n)
    re_psi = float(np.asarray(model.limit_exponent.re_part(np.array([delta * model.b(n)])))[0])
    exp_term = math.exp(a * (log_n + epsilon)) if math.isfinite(log_n) else 0.0
    tail_term = math.exp(-(1.0 - epsilon) * re_psi)
    rec = RateRecord(int(n), gp, gd, ch, 1.0 / a, exp_term, tail_term, 0.0,
                     extras={"N_delta": nd, "epsilon": epsilon, "delta": delta})
    rec.rho = rec.recompute_rho()
    return rec


def _condition_H_fit(values: Sequence[float], ns: Sequence[int]) -> tuple[float, float]:
    ln_n = np.log(np.asarray(ns, dtype=float))
    ln_c = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(ln_n, ln_c, 1)
    resid = float(np.max(np.abs(ln_c - (slope * ln_n + intercept))))
    return float(slope), resid


def _condition_H(model: ArrayModel, ns: Sequence[int]) -> tuple[bool, float, str]:
    ns = sorted(set(ns))
    sa, ra = _condition_H_fit([model.a(k) for k in ns], ns)
    sb, rb = _condition_H_fit([model.b(k) for k in ns], ns)
    ok = sa > 0 and sb > 0 and ra < 0.1 and rb < 0.1
    return ok, min(sa, sb), f"a_n ~ n^{sa:.4g} (resid {ra:.2g}), b_n ~ n^{sb:.4g} (resid {rb:.2g})"


def rho_simplified(model: ArrayModel, n: int, z_grid=None,
                   n_range: Sequence[int] = (8, 16, 32, 64, 128, 256)) -> float:
    """``max(gamma', gamma'', chi, 1/a_n)``, valid when ``a_n`` and ``b_n``
    grow polynomially; a ``RuntimeWarning`` is issued when that check fails."""
    ok, _, notes = _condition_H(model, n_range)
    if not ok:
        warnings.warn(f"growth condition on a_n, b_n not met: {notes}", RuntimeWarning)
    z = _grid(model, n, z_grid)
    return max(gamma_prime(model, n, z), gamma_dprime(model, n, z), chi(model, n),
               1.0 / model.a(n))


def _p_violations(model: ArrayModel, n: int, delta: float, points: int = 2048):
    z = np.linspace(0.0, delta * model.b(n), points)[1:]
    row = np.real(char_fn_Sn(model, n, z))
    lim = np.real(model.limit_exponent.char_fn(z))
    # rounding allowance relative to Phi
    gap = row - lim + 1e-13 * np.abs(lim) + 1e-300
    bad = gap < 0
    return z[bad], float(np.min(gap))


def rho_symmetric(model: ArrayModel, n: int, z_grid=None,
                  delta: float = DEFAULT_DELTA) -> SymmetricRate:
    """``gamma'_n + r(n)`` with ``r(n) = (I2 + I3) / (2 pi)``.

    Requires a symmetric model and checks ``Phi_n >= Phi`` on
    ``|z| <= delta b_n``; when that fails the violating ``z`` are returned and
    ``value`` is ``nan``.
    """
    if not model.symmetric:
        raise ValueError("rho_symmetric needs a symmetric model")
    bad, _ = _p_violations(model, n, delta)
    gp = gamma_prime(model, n, z_grid)
    terms = bound_terms(model, n, delta)
    rem = (terms.I2 + terms.I3) / (2.0 * math.pi)
    if bad.size:
        return SymmetricRate(float("nan"), gp, rem, False, tuple(float(v) for v in bad[:20]))
    return SymmetricRate(gp + rem, gp, rem, True)


def H_n(model: ArrayModel, n: int, z) -> np.ndarray:
    """``Re psi(z) + a_n ln theta_n(z / b_n)`` for a symmetric model.

    Raises
    ------
    ValueError
        If the model is not symmetric or ``theta_n(z / b_n) <= 0``.
    """
    if not model.symmetric:
        raise ValueError("H_n needs a symmetric model (real theta)")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    t = z / model.b(n)
    th = np.real(np.asarray(theta_n(model, n, t), dtype=complex))
    if np.any(th <= 0):
        where = z[th <= 0][0]
        raise ValueError(f"theta_n(z/b_n) <= 0 at z={where:g}; logarithm undefined")
    omt = np.real(np.asarray(one_minus_theta(model, n, t), dtype=complex))
    out = model.limit_exponent.re_part(z) + model.a(n) * np.log1p(-omt)
    return out


def _abs_integral(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    if hi <= lo:
        return 0.0
    r = integrate(f, lo, hi, tol=tol, rtol=1e-9, max_eval=2 * 10**6)
    return r.value + r.error_estimate


def bound_terms(model: ArrayModel, n: int, delta: float = DEFAULT_DELTA,
                tol: float = 1e-12) -> BoundTerms:
    """``(I1, I2, I3)`` with the ``|z| > delta b_n`` tails closed by the
    model's support or envelope of ``|Phi_n|``."""
    edge = delta * model.b(n)
    lim = model.limit_exponent

    def row_abs(z):
        return np.abs(char_fn_Sn(model, n, z))

    def lim_abs(z):
        return np.exp(-np.asarray(lim.re_part(np.asarray(z, dtype=float)), dtype=float))

    def gap(z):
        z = np.asarray(z, dtype=float)
        return np.abs(char_fn_Sn(model, n, z) - lim.char_fn(z))

    i1 = 2.0 * _abs_integral(gap, 0.0, edge, tol)
    support = model.phi_support(n) if model.phi_support else None
    env = (lambda z: model.phi_envelope(n, z)) if model.phi_envelope else None
    z_cut, tail, _ = find_z_max(row_abs, tol, env, support, start=max(edge, 0.5))
    z_cut = max(z_cut, edge)
    i2 = 2.0 * _abs_integral(row_abs, edge, z_cut, tol) + 2.0 * math.pi * tail
    z_lim, tail_lim, _ = find_z_max(lim_abs, tol, lim_abs, None, start=max(edge, 0.5))
    z_lim = max(z_lim, edge)
    i3 = 2.0 * _abs_integral(lim_abs, edge, z_lim, tol) + 2.0 * math.pi * tail_lim
    return BoundTerms(i1, i2, i3)


def condition_F_margin(model: ArrayModel, n: int, delta: float = DEFAULT_DELTA,
                       kappa: float = 1.0, points: int = 4096) -> float:
    """Grid inf over ``0 < |z| <= delta b_n`` of
    ``a_n * integral (1 - cos zu) symmetrized F_n(du) / |z|**kappa``.

    The numerator equals ``a_n (1 - Re theta_n(z / b_n))``.  The grid starts
    at ``delta b_n / points``; rows with finite variance make the ratio
    vanish like ``|z|**(2 - kappa)`` at the origin, which a grid cannot see.
    """
    if not 0 < kappa <= 2:
        raise ValueError("kappa must lie in (0, 2]")
    top = delta * model.b(n)
    z = np.linspace(top / points, top, points)
    num = model.a(n) * np.real(np.asarray(one_minus_theta(model, n, z / model.b(n)),
                                          dtype=complex))
    return float(np.min(num / z ** kappa))


def condition_G_margin(model: ArrayModel, delta: float = DEFAULT_DELTA,
                       n_set: Iterable[int] = range(1, 33), points: int = 2048) -> float:
    """``min |Re theta_n(z)|`` over ``n`` in ``n_set`` and ``|z| <= delta``."""
    z = np.linspace(0.0, delta, points)
    best = math.inf
    for n in n_set:
        vals = np.abs(np.real(np.asarray(theta_n(model, n, z), dtype=complex)))
        if not model.symmetric:
            vals = np.minimum(vals, np.abs(np.real(np.asarray(theta_n(model, n, -z),
                                                              dtype=complex))))
        best = min(best, float(vals.min()))
    return best


def condition_B_fit(exponent: CharExponent, z_range: tuple[float, float] = (20.0, 100.0),
                    points: int = 200) -> BFit:
    """Least-squares exponent of ``Re psi`` on a large-``|z|`` range.

    ``c_hat`` is the largest constant with ``Re psi(z) >= c |z|**alpha_used``
    on the range.  A fitted exponent at or above 2 (a Gaussian component) is
    a boundary case: any exponent below 2 works, and 1.99 is used.

    Raises
    ------
    ValueError
        If ``Re psi`` is not positive on the range.
    """
    z = np.geomspace(z_range[0], z_range[1], points)
    re = np.asarray(exponent.re_part(z), dtype=float)
    if np.any(re <= 0):
        raise ValueError("Re psi must be positive on the fitting range")
    slope, _ = np.polyfit(np.log(z), np.log(re), 1)
    boundary = slope >= 2.0 - 1e-9
    used = 1.99 if boundary else float(slope)
    c = float(np.min(re / z ** used))
    return BFit(float(slope), c, used, bool(boundary))


_EXP_CAP = 10.0


def _decade_slope(lo: float, hi: float, vanish: float) -> float:
    # log10 ratio over one decade; ``vanish`` when a piece underflows to 0
    if lo <= 0 or hi <= 0:
        if lo <= 0 and hi > 0:
            return -vanish
        return vanish
    return max(-_EXP_CAP, min(_EXP_CAP, math.log10(hi / lo)))


def _d_exponents(model: ArrayModel, n: int) -> tuple[float, float, float]:
    """Local power exponents of ``integral g_n**2`` near the origin and at
    infinity, plus the integral itself truncated at ``1e-8``.

    Over ``[eta, 2 eta]`` the integral of ``g**2`` scales like
    ``eta**e0``; the full integral converges at 0 iff ``e0 > 0`` and at
    infinity iff ``e_inf < 0``.
    """
    brk = sorted({abs(p) for p in model.g_breakpoints(n) if p != 0})

    def sq(u):
        v = model.g_density(n, u) + 0.0
        w = model.g_density(n, -np.asarray(u, dtype=float))
        return v * v + w * w

    def piece(lo, hi):
        pts = [p for p in brk if lo < p < hi]
        return integrate(sq, lo, hi, tol=1e-300, rtol=1e-10, points=pts).value

    near = [piece(eta, 2 * eta) for eta in (1e-8, 1e-7)]
    far = [piece(r, 2 * r) for r in (1e4, 1e5)]
    e0 = _decade_slope(*near, vanish=_EXP_CAP)
    e_inf = _decade_slope(*far, vanish=-_EXP_CAP)
    total = piece(1e-8, 1.0) + piece(1.0, 1e4) + integrate(sq, 1e4, math.inf, tol=1e-14).value
    return e0, e_inf, total


def audit_all(model: ArrayModel, params: dict | None = None) -> list[ConditionAudit]:
    """Numerical audit of uniform smallness, conditions A-H and (P).

    ``params`` keys: ``n_values`` (sweep rows), ``delta``, ``epsilon``,
    ``kappa`` (condition F exponent), ``n_set`` (rows for the sups over all
    ``n``).  Condition (P) is reported with ``required=False``.
    """
    p = dict(params or {})
    ns = sorted(p.get("n_values", (8, 16, 32, 64, 128, 256)))
    delta = float(p.get("delta", DEFAULT_DELTA))
    kappa = float(p.get("kappa", model.params.get("kappa", 1.0)))
    n_set = sorted(p.get("n_set", set(range(1, 33)) | set(ns)))
    rng = (ns[0], ns[-1])
    out: list[ConditionAudit] = []

    # uniform smallness
    notes, margin, value = [], math.inf, 0.0
    for eps in (0.1, 1.0):
        seq = [tail_mass(model, k, eps) for k in (4, 16, 64, 256)]
        mono = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(seq, seq[1:]))
        shrink = seq[0] - seq[-1] if seq[0] > 0 else 0.0
        margin = min(margin, shrink if mono else -abs(shrink) - 1.0)
        value = max(value, seq[-1])
        notes.append(f"eps={eps}: " + ", ".join(f"{v:.3g}" for v in seq))
    out.append(ConditionAudit("smallness", (4, 256), margin, margin > 0, value,
                              "; ".join(notes)))

    # A: g_n is a probability density
    dev = max(abs(density_mass(model, k) - 1.0) for k in sorted(set(ns) | {1, 4}))
    out.append(ConditionAudit("A", rng, 1e-8 - dev, 1e-8 - dev > 0, dev,
                              "max |integral g_n - 1| (tolerance 1e-8)"))

    # B: growth of Re psi
    try:
        fit = condition_B_fit(model.limit_exponent)
        ok = fit.c_hat > 0 and 0 < fit.alpha_used < 2
        note = f"alpha_hat={fit.alpha_hat:.6g}, c={fit.c_hat:.6g}"
        if fit.boundary:
            note += " (Gaussian boundary case; exponent 1.99 used)"
        out.append(ConditionAudit("B", rng, fit.c_hat if ok else -1.0, ok, fit.alpha_hat, note))
    except ValueError as exc:
        out.append(ConditionAudit("B", rng, -1.0, False, float("nan"), str(exc)))

    # C: Cramer-type bound away from the origin
    nd = N_delta(model, delta, n_set)
    c_note = f"delta={delta}, sup at n={nd.n_at}, z={nd.z_at:.4g}; tail bound {nd.tail_bound:.3g}"
    if model.name.startswith("example1"):
        c_note += "; Cramer condition for the summand law"
    out.append(ConditionAudit("C", (min(n_set), max(n_set)), 1.0 - nd.value,
                              nd.value < 1.0, nd.value, c_note))

    # D: sup_n integral of g_n**2
    d_margin, d_value, d_notes = math.inf, 0.0, []
    floor = 1e-6
    for k in sorted(set(ns) | {1}):
        e0, e_inf, total = _d_exponents(model, k)
        d_margin = min(d_margin, min(e0, -e_inf) - floor)
        d_value = max(d_value, total)
        d_notes.append(f"n={k}: exponent near 0 {e0:.4g}, at infinity {e_inf:.4g}")
    out.append(ConditionAudit("D", rng, d_margin, d_margin > 0, d_value,
                              "integral of g_n^2 over [eta,2eta] ~ eta^e; converges iff "
                              "e>0 near 0 and e<0 at infinity (floor 1e-6). "
                              + "; ".join(d_notes[:3])))

    # E: b_n -> inf and ln b_n / a_n -> 0
    bs = [model.b(k) for k in ns]
    ratios = [math.log(model.b(k)) / model.a(k) for k in ns]
    grows = all(b2 > b1 for b1, b2 in zip(bs, bs[1:]))
    falls = ratios[-1] < ratios[0] and abs(ratios[-1]) < 0.1
    e_margin = (ratios[0] - ratios[-1]) if (grows and falls) else -1.0
    out.append(ConditionAudit("E", rng, e_margin, e_margin > 0, max(ratios),
                              "ln b_n / a_n: " + ", ".join(f"{r:.3g}" for r in ratios)))

    # F.a: lower bound on the symmetrized row exponent
    f_vals = [condition_F_margin(model, k, delta, kappa) for k in ns]
    f_margin = min(f_vals)
    out.append(ConditionAudit("F", rng, f_margin, f_margin > 0, f_margin,
                              f"kappa={kappa}; grid inf per n: "
                              + ", ".join(f"{v:.4g}" for v in f_vals)
                              + "; grid on (0, delta b_n], ratio tends to 0 at the origin "
                                "when kappa < 2 and the row variance is finite"))

    # G
    g = condition_G_margin(model, delta, n_set)
    out.append(ConditionAudit("G", (min(n_set), max(n_set)), g, g > 0, g,
                              f"min |Re theta_n(z)| on |z| <= {delta}"))

    # H on a_n and b_n
    h_ok, h_slope, h_note = _condition_H(model, ns)
    out.append(ConditionAudit("H", rng, h_slope if h_ok else -1.0, h_ok, h_slope, h_note))

    # (P): Phi_n >= Phi near the origin, informational
    if model.symmetric:
        worst, bad_z = math.inf, None
        for k in ns:
            bad, gap = _p_violations(model, k, delta)
            worst = min(worst, gap)
            if bad.size and bad_z is None:
                bad_z = (k, float(bad[0]))
        note = "Phi_n >= Phi on |z| <= delta b_n"
        if bad_z is not None:
            note += f"; violated first at n={bad_z[0]}, z={bad_z[1]:.4g}"
        p_margin = worst if bad_z is None else -abs(worst)
        out.append(ConditionAudit("P", rng, p_margin, bad_z is None, worst, note,
                                  required=False))
    return out


# -- densities -------------------------------------------------------------------

def row_density_grid(model: ArrayModel, n: int, x_range=(-10.0, 10.0), points: int = 1024,
                     tol: float = 1e-10) -> DensityGrid:
    """Grid density ``p_n`` of the row sum."""
    support = model.phi_support(n) if model.phi_support else None
    env = (lambda z: model.phi_envelope(n, z)) if model.phi_envelope else None
    return density_grid(lambda z: char_fn_Sn(model, n, z), x_range, points, tol,
                        envelope=env, support=support)


def limit_density_grid(model: ArrayModel, x_range=(-10.0, 10.0), points: int = 1024,
                       tol: float = 1e-10) -> DensityGrid:
    """Grid density ``p`` of the limit law, from ``exp(-psi)``."""
    lim = model.limit_exponent

    def env(z):
        return np.exp(-np.asarray(lim.re_part(np.asarray(z, dtype=float)), dtype=float))

    return density_grid(lim.char_fn, x_range, points, tol, envelope=env)


def measure_sup_error(model: ArrayModel, n: int, limit_grid: DensityGrid | None = None,
                      x_range=(-10.0, 10.0), points: int = 1024,
                      tol: float = 1e-10) -> tuple[SupDistance, DensityGrid, DensityGrid]:
    """``sup |p_n - p|`` on a grid, with both densities from inversion."""
    if limit_grid is None:
        limit_grid = limit_density_grid(model, x_range, points, tol)
    grid = row_density_grid(model, n, x_range, points, tol)
    return sup_distance(grid, limit_grid), grid, limit_grid


# -- closed forms for the stable-type example -------------------------------------

_POLE_BAND = 0.05


def gamma_reflection(alpha: float) -> float:
    """``Gamma(-1-alpha) = pi / (sin(pi alpha) Gamma(2+alpha))``."""
    if float(alpha).is_integer():
        raise ZeroDivisionError("Gamma(-1-alpha) has a pole at integer alpha")
    return math.pi / (math.sin(math.pi * alpha) * math.gamma(2.0 + alpha))


def c_alpha_1(alpha: float) -> float:
    """``pi / (2 Gamma(1+alpha) sin(pi alpha / 2))``; also equals
    ``integral_0^inf (1 - cos v) v**(-1-alpha) dv``."""
    return math.pi / (2.0 * math.gamma(1.0 + alpha) * math.sin(0.5 * math.pi * alpha))


def c_alpha_2(alpha: float) -> float:
    """``alpha (alpha+1) Gamma(-1-alpha) cos(pi alpha / 2) / 2``."""
    return 0.5 * alpha * (alpha + 1.0) * gamma_reflection(alpha) * math.cos(0.5 * math.pi * alpha)


def c_alpha_3(alpha: float) -> float:
    """``c_alpha_1 + 2 (alpha+1) c_alpha_2``."""
    return c_alpha_1(alpha) + 2.0 * (alpha + 1.0) * c_alpha_2(alpha)


def _near_pole(alpha: float) -> bool:
    return abs(alpha - 1.0) < _POLE_BAND or alpha < _POLE_BAND


def _osc_tail(power: float, freq: float, start: float, trig: str, tol: float) -> float:
    """``integral_start^inf v**(-power) trig(freq v) dv``."""
    env = (lambda v: np.asarray(v, dtype=float) ** (-power))
    if freq == 0.0:
        if trig == "sin":
            return 0.0
        return start ** (1.0 - power) / (power - 1.0)
    r = integrate_oscillatory(env, freq, start, math.inf, tol=tol, rtol=1e-13, trig=trig)
    return require(r, "oscillatory tail", tol, 1e-13).value


def _head(f, start: float, tol: float) -> float:
    return require(integrate(f, 0.0, start, tol=tol, rtol=1e-13), "head", tol, 1e-13).value


def I_quad(alpha: float, k: float, tol: float = 1e-13) -> float:
    """``integral_0^inf (1 - cos v) v**(-1-alpha) cos(kv) dv`` by quadrature.

    Beyond ``v = pi`` the product is split into pure cosines,
    ``cos kv - cos((1+k)v)/2 - cos((1-k)v)/2``.
    """
    start = math.pi

    def f(v):
        v = np.asarray(v, dtype=float)
        s = np.sin(0.5 * v)
        return 2.0 * s * s * v ** (-1.0 - alpha) * np.cos(k * v)

    p = 1.0 + alpha
    tail = (_osc_tail(p, abs(k), start, "cos", tol)
            - 0.5 * _osc_tail(p, abs(1.0 + k), start, "cos", tol)
            - 0.5 * _osc_tail(p, abs(1.0 - k), start, "cos", tol))
    return _head(f, start, tol) + tail


def I1_quad(alpha: float, k: float, tol: float = 1e-13) -> float:
    """``integral_0^inf sin(kv) sin(v) v**(-1-alpha) dv`` by quadrature."""
    start = math.pi

    def f(v):
        v = np.asarray(v, dtype=float)
        return np.sin(k * v) * np.sin(v) * v ** (-1.0 - alpha)

    p = 1.0 + alpha
    tail = 0.5 * (_osc_tail(p, abs(k - 1.0), start, "cos", tol)
                  - _osc_tail(p, abs(k + 1.0), start, "cos", tol))
    return _head(f, start, tol) + tail


def I2_quad(alpha: float, k: float, tol: float = 1e-13) -> float:
    """``integral_0^inf sin(kv) sin(v/2)**2 v**(-2-alpha) dv`` by quadrature."""
    start = math.pi

    def f(v):
        v = np.asarray(v, dtype=float)
        s = np.sin(0.5 * v)
        return np.sin(k * v) * s * s * v ** (-2.0 - alpha)

    def signed_sin(freq):
        # sin(freq v) for either sign of freq
        return math.copysign(1.0, freq) * _osc_tail(2.0 + alpha, abs(freq), start, "sin", tol)

    tail = (0.5 * signed_sin(k)
            - 0.25 * signed_sin(k + 1.0)
            - 0.25 * signed_sin(k - 1.0))
    return _head(f, start, tol) + tail


def I1_closed(alpha: float, k: float) -> float:
    """``c_alpha_1 (|k+1|**alpha - |k-1|**alpha) / 2`` for ``k >= 0``;
    odd in ``k``."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if k < 0:
        return -I1_closed(alpha, -k)
    return 0.5 * c_alpha_1(alpha) * (abs(k + 1.0) ** alpha - abs(k - 1.0) ** alpha)


def I2_closed(alpha: float, k: float) -> float:
    """``-Gamma(-1-alpha) cos(pi alpha/2) [2k**(a+1) - (k+1)**(a+1)
    - sgn(k-1)|k-1|**(a+1)] / 4`` for ``k >= 0``; odd in ``k``.

    Falls back to quadrature in the pole bands ``|alpha - 1| < 0.05`` and
    ``alpha < 0.05``.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if k < 0:
        return -I2_closed(alpha, -k)
    if _near_pole(alpha):
        return I2_quad(alpha, k)
    q = alpha + 1.0
    bracket = (2.0 * k ** q - (k + 1.0) ** q
               - math.copysign(abs(k - 1.0) ** q, k - 1.0))
    return -0.25 * gamma_reflection(alpha) * math.cos(0.5 * math.pi * alpha) * bracket


def I_closed(alpha: float, k: float) -> float:
    """``integral_0^inf (1 - cos v) v**(-1-alpha) cos(kv) dv``.

    ``alpha = 1`` gives ``pi/2 (1 - |k|)_+``.  Otherwise the value is
    ``(2 (1+alpha) I2 - I1) / k`` from integration by parts, with quadrature
    at ``k = 0`` and in the pole bands.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    k = abs(k)
    if alpha == 1.0:
        return 0.5 * math.pi * max(0.0, 1.0 - k)
    if k == 0.0 or _near_pole(alpha):
        return I_quad(alpha, k)
    return (2.0 * (1.0 + alpha) * I2_closed(alpha, k) - I1_closed(alpha, k)) / k


def asymptotic_probe(alpha: float, ks: Sequence[float] = (1e2, 1e3, 1e4),
                     fit_range: Sequence[float] | None = None) -> dict:
    """Large-``k`` behaviour of ``I1`` and ``I``.

    Reports ``I1(alpha, k) k**(1-alpha)`` next to ``c_alpha_1`` and the
    least-squares exponent of ``|I(alpha, k)|`` on ``fit_range`` next to the
    value ``alpha - 1``.
    """
    scaled = [I1_closed(alpha, k) * k ** (1.0 - alpha) for k in ks]
    target = c_alpha_1(alpha)
    if fit_range is None:
        fit_range = np.geomspace(10.0, 1e4, 13)
    vals = np.array([abs(I_closed(alpha, k)) for k in fit_range])
    slope = float(np.polyfit(np.log(fit_range), np.log(vals), 1)[0])
    return {
        "alpha": alpha,
        "ks": list(map(float, ks)),
        "I1_scaled": scaled,
        "c_alpha_1": target,
        "I1_scaled_over_c": [s / target for s in scaled],
        "I_exponent_measured": slope,
        "I_exponent_claimed": alpha - 1.0,
        "c_alpha_3": c_alpha_3(alpha),
    }


# -- serialization ---------------------------------------------------------------------

def write_records_csv(records: Sequence[RateRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            row = []
            for key in RECORD_COLUMNS:
                v = getattr(r, key)
                if v is None:
                    row.append("")
                elif isinstance(v, (int, np.integer)):
                    row.append(str(int(v)))
                else:
                    row.append(f"{float(v):.17g}")
            w.writerow(row)
    return path


def write_records_json(records: Sequence[RateRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([r.as_dict() for r in records], indent=2, sort_keys=True,
                               default=float) + "\n")
    return path
