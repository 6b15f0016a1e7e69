"""Command-line experiment runner.

Subcommands ``converge``, ``audit``, ``density`` and ``rates`` read an
optional JSON config, apply flag overrides and write CSV/JSON files plus one
manifest per run.  Exit codes: 0 success, 1 config error, 2 numerical
failure, 3 audit failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .array import model_from_name
from .inversion import InversionError
from .quad import QuadratureError
from .rates import (
    RateParameterError,
    RateRecord,
    N_delta,
    audit_all,
    limit_density_grid,
    measure_sup_error,
    rho,
    row_density_grid,
    write_records_csv,
    write_records_json,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_AUDIT = 0, 1, 2, 3
FLOOR_FACTOR = 100.0  # errors below FLOOR_FACTOR * tol are not fitted


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    model: str = "example1:alpha=1"
    n_values: list = field(default_factory=lambda: [8, 16, 32, 64, 128, 256])
    delta: float = 0.5
    epsilon: float = 0.1
    x_range: tuple = (-10.0, 10.0)
    x_points: int = 1024
    z_grid_max: float = 50.0
    z_grid_points: int = 4096
    tol: float = 1e-10
    outputs: str = "outputs"
    formats: tuple = ("csv", "json")

    def validate(self) -> "ExperimentConfig":
        """Check every field; raises ``ConfigError`` naming the first bad one."""
        if not isinstance(self.model, str) or not self.model:
            raise ConfigError("model", "must be a non-empty string")
        try:
            model_from_name(self.model)
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None
        ns = list(self.n_values)
        if not ns or not all(isinstance(k, (int, np.integer)) and not isinstance(k, bool)
                             and k > 0 for k in ns):
            raise ConfigError("n_values", "must be a non-empty list of positive integers")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_values", "must be strictly increasing")
        self.n_values = [int(k) for k in ns]
        if not (isinstance(self.delta, (int, float)) and self.delta > 0):
            raise ConfigError("delta", "must be positive")
        if not (isinstance(self.epsilon, (int, float)) and 0 < self.epsilon < 1):
            raise ConfigError("epsilon", "must lie in (0, 1)")
        try:
            lo, hi = (float(v) for v in self.x_range)
        except (TypeError, ValueError):
            raise ConfigError("x_range", "must be a pair of reals") from None
        if not hi > lo:
            raise ConfigError("x_range", "must be increasing")
        self.x_range = (lo, hi)
        xp = self.x_points
        if not isinstance(xp, int) or xp < 64 or xp & (xp - 1):
            raise ConfigError("x_points", "must be a power of two and at least 64")
        if not (isinstance(self.z_grid_max, (int, float)) and self.z_grid_max > 0):
            raise ConfigError("z_grid_max", "must be positive")
        if not isinstance(self.z_grid_points, int) or self.z_grid_points < 16:
            raise ConfigError("z_grid_points", "must be an integer of at least 16")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol", "must be positive")
        fmts = tuple(self.formats)
        if not fmts or not set(fmts) <= {"csv", "json"}:
            raise ConfigError("formats", "must be a non-empty subset of {csv, json}")
        self.formats = tuple(f for f in ("csv", "json") if f in fmts)
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown config field")
        cfg = cls(**data)
        if isinstance(cfg.x_range, list):
            cfg.x_range = tuple(cfg.x_range)
        return cfg.validate()

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x_range"] = list(self.x_range)
        d["formats"] = list(self.formats)
        return d

    def z_grid(self, b_n: float) -> np.ndarray:
        far = max(self.z_grid_max, 64.0 * b_n)
        return np.unique(np.concatenate([
            np.linspace(0.0, self.z_grid_max, self.z_grid_points),
            np.geomspace(1e-3, far, 1024)]))


@dataclass(frozen=True)
class FitResult:
    """Least-squares line ``ln(error) = slope * ln(n) + intercept``."""

    slope: float
    intercept: float
    r_squared: float
    n_used: int

    def as_dict(self) -> dict:
        return asdict(self)


def fit_rate(ns: Sequence[int], errors: Sequence[float]) -> FitResult:
    """Ordinary least squares of ``ln(error)`` on ``ln(n)``.

    Raises
    ------
    ValueError
        On fewer than three points, mismatched lengths or nonpositive values.
    """
    if len(ns) != len(errors):
        raise ValueError("ns and errors must have equal lengths")
    if len(ns) < 3:
        raise ValueError("at least three points are needed for a fit")
    e = np.asarray(errors, dtype=float)
    x = np.asarray(ns, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise ValueError("errors must be positive and finite")
    if np.any(x <= 0):
        raise ValueError("ns must be positive")
    lx, ly = np.log(x), np.log(e)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot))
    return FitResult(float(slope), float(intercept), r2, len(ns))


# -- helpers -----------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def _map(func, items, jobs: int):
    # results come back in input order whatever the completion order
    if jobs <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


@dataclass
class RunResult:
    """Outcome of one subcommand: payload, written files and exit code."""

    command: str
    config: ExperimentConfig
    records: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    audits: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    files: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    @property
    def out_dir(self) -> Path:
        return Path(self.config.outputs)

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "config": self.config.to_dict(),
            "records": [r.as_dict() if isinstance(r, RateRecord) else r for r in self.records],
            "fits": self.fits,
            "audits": [a.as_dict() for a in self.audits],
            "errors": self.errors,
            "version": __version__,
            "files": sorted(self.files),
        }

    def write_manifest(self) -> Path:
        path = self.out_dir / f"{self.command}_manifest.json"
        return _dump(path, self.manifest())

    def _add(self, path: Path) -> None:
        self.files.append(path.relative_to(self.out_dir).as_posix())


def _write_records(res: RunResult, stem: str) -> None:
    recs = [r for r in res.records if isinstance(r, RateRecord)]
    if "csv" in res.config.formats:
        res._add(write_records_csv(recs, res.out_dir / f"{stem}.csv"))
    if "json" in res.config.formats:
        res._add(write_records_json(recs, res.out_dir / f"{stem}.json"))


def _n_delta(model, cfg: ExperimentConfig):
    nd = N_delta(model, cfg.delta, sorted(set(range(1, 33)) | set(cfg.n_values)))
    # an epsilon violation holds for every n, so report it once as a config error
    if 0 < nd.value < 1 and math.log(nd.value) + cfg.epsilon >= 0:
        bound = -math.log(nd.value)
        raise ConfigError("epsilon", f"ln N(delta) + epsilon >= 0; choose epsilon < {bound:.6g}")
    return nd


# -- runners -----------------------------------------------------------------------

def run_converge(config: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Sweep ``n``: invert ``Phi_n``, compare with ``p`` (inverted once),
    record the rate terms and fit the observed order.

    A failure at one ``n`` is stored as an error entry and the sweep goes on.
    """
    cfg = config.validate()
    model = model_from_name(cfg.model)
    res = RunResult("converge", cfg)
    nd = _n_delta(model, cfg)
    lim = limit_density_grid(model, cfg.x_range, cfg.x_points, cfg.tol)

    def one(n):
        try:
            sd, _, _ = measure_sup_error(model, n, lim, cfg.x_range, cfg.x_points, cfg.tol)
            rec = rho(model, n, cfg.epsilon, cfg.delta, cfg.z_grid(model.b(n)), n_delta=nd)
            rec.sup_error = sd.value
            rec.extras.update({"certificate": sd.certificate, "argmax": sd.argmax,
                               "grid_delta": sd.grid_delta})
            return rec
        except (InversionError, QuadratureError, RateParameterError, ArithmeticError,
                ValueError) as exc:
            return {"n": n, "error": f"{type(exc).__name__}: {exc}"}

    for item in _map(one, cfg.n_values, jobs):
        (res.records if isinstance(item, RateRecord) else res.errors).append(item)
    recs = [r for r in res.records if isinstance(r, RateRecord)]
    ns = [r.n for r in recs]
    floor = FLOOR_FACTOR * cfg.tol
    for quantity in ("sup_error", "rho"):
        vals = [getattr(r, quantity) for r in recs]
        entry = {"quantity": quantity}
        if len(vals) < 3:
            entry.update(status="skipped", reason="fewer than three successful n")
        elif quantity == "sup_error" and max(vals) < floor:
            entry.update(status="skipped", reason="below tolerance floor", floor=floor)
        else:
            try:
                entry.update(status="ok", **fit_rate(ns, vals).as_dict())
            except ValueError as exc:
                entry.update(status="skipped", reason=str(exc))
        res.fits.append(entry)
    _write_records(res, "converge_records")
    res._add(_dump(res.out_dir / "converge_fits.json", res.fits))
    if res.errors:
        res.exit_code = EXIT_NUMERIC
    res.write_manifest()
    return res


def run_rates(config: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Rate records without inversion (fast path)."""
    cfg = config.validate()
    model = model_from_name(cfg.model)
    res = RunResult("rates", cfg)
    nd = _n_delta(model, cfg)

    def one(n):
        try:
            return rho(model, n, cfg.epsilon, cfg.delta, cfg.z_grid(model.b(n)), n_delta=nd)
        except (QuadratureError, RateParameterError, ArithmeticError, ValueError) as exc:
            return {"n": n, "error": f"{type(exc).__name__}: {exc}"}

    for item in _map(one, cfg.n_values, jobs):
        (res.records if isinstance(item, RateRecord) else res.errors).append(item)
    _write_records(res, "rate_records")
    if res.errors:
        res.exit_code = EXIT_NUMERIC
    res.write_manifest()
    return res


def run_audit(config: ExperimentConfig) -> RunResult:
    """All condition audits; exit code 3 unless every required one passes."""
    cfg = config.validate()
    model = model_from_name(cfg.model)
    res = RunResult("audit", cfg)
    res.audits = audit_all(model, {"n_values": cfg.n_values, "delta": cfg.delta,
                                   "epsilon": cfg.epsilon})
    rows = [a.as_dict() for a in res.audits]
    if "csv" in cfg.formats:
        path = res.out_dir / "audit.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = ("condition", "n_range", "margin", "passed", "value", "required", "notes")
        with path.open("w") as fh:
            fh.write(",".join(cols) + "\n")
            for a in res.audits:
                note = a.notes.replace('"', "'")
                fh.write(f"{a.condition},{a.n_range[0]}-{a.n_range[1]},{a.margin:.17g},"
                         f"{a.passed},{a.value:.17g},{a.required},\"{note}\"\n")
        res._add(path)
    if "json" in cfg.formats:
        res._add(_dump(res.out_dir / "audit.json", rows))
    if not all(a.passed for a in res.audits if a.required):
        res.exit_code = EXIT_AUDIT
    res.write_manifest()
    return res


def render_audit_table(audits) -> str:
    head = f"{'condition':<10} {'pass':<5} {'margin':>12} {'value':>12}  notes"
    lines = [head, "-" * len(head)]
    for a in audits:
        flag = ("PASS" if a.passed else "FAIL") + ("" if a.required else "*")
        lines.append(f"{a.condition:<10} {flag:<5} {a.margin:>12.4g} {a.value:>12.4g}  "
                     f"{a.notes[:90]}")
    if any(not a.required for a in audits):
        lines.append("* informational, does not affect the exit code")
    return "\n".join(lines)


def run_density(config: ExperimentConfig, n_values: Sequence[int] | None = None) -> RunResult:
    """Write ``p_n`` for each requested ``n`` and ``p`` as ``x,p`` CSV files
    with JSON metadata sidecars."""
    cfg = config.validate()
    model = model_from_name(cfg.model)
    res = RunResult("density", cfg)
    try:
        lim = limit_density_grid(model, cfg.x_range, cfg.x_points, cfg.tol)
    except (InversionError, QuadratureError) as exc:
        res.errors.append({"n": None, "error": f"{type(exc).__name__}: {exc}"})
    else:
        for path in lim.write_csv(res.out_dir / "density_limit.csv"):
            res._add(path)
        res.records.append({"n": None, "mass": lim.mass(), **lim.metadata()})
    for n in (n_values or cfg.n_values):
        try:
            grid = row_density_grid(model, n, cfg.x_range, cfg.x_points, cfg.tol)
        except (InversionError, QuadratureError, ValueError) as exc:
            res.errors.append({"n": n, "error": f"{type(exc).__name__}: {exc}"})
            continue
        for path in grid.write_csv(res.out_dir / f"density_n{n}.csv"):
            res._add(path)
        res.records.append({"n": n, "mass": grid.mass(), **grid.metadata()})
    if res.errors:
        res.exit_code = EXIT_NUMERIC
    res.write_manifest()
    return res


# -- argument parsing --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("arguments", message)


def _n_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lltlab", description="Local limit theorem rate experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "converge": "invert densities over an n sweep and fit the observed order",
        "audit": "check the conditions numerically",
        "density": "write p_n and p grids",
        "rates": "rate terms only, no inversion",
    }
    default_jobs = os.environ.get("LLTLAB_JOBS", "1")
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--model", help='e.g. "example1:alpha=1", "example2", "gauss"')
        s.add_argument("--n", type=_n_list, help='n values, e.g. "8,16,32"')
        s.add_argument("--delta", type=float)
        s.add_argument("--epsilon", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--out", help="output directory")
        s.add_argument("--jobs", type=int, default=None,
                       help=f"worker threads (default LLTLAB_JOBS or 1; now {default_jobs})")
    return p


def config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    overrides = {"model": args.model, "n_values": args.n, "delta": args.delta,
                 "epsilon": args.epsilon, "tol": args.tol, "outputs": args.out}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def _jobs(args) -> int:
    if args.jobs is not None:
        value = args.jobs
    else:
        try:
            value = int(os.environ.get("LLTLAB_JOBS", "1"))
        except ValueError:
            raise ConfigError("LLTLAB_JOBS", "must be an integer") from None
    if value < 1:
        raise ConfigError("jobs", "must be at least 1")
    return value


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        jobs = _jobs(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "converge":
            res = run_converge(cfg, jobs)
            for r in res.records:
                print(f"n={r.n:<6d} sup_error={r.sup_error:.6e} rho={r.rho:.6e}")
            for f in res.fits:
                if f["status"] == "ok":
                    print(f"fit {f['quantity']}: slope={f['slope']:.4f} r2={f['r_squared']:.4f}")
                else:
                    print(f"fit {f['quantity']}: skipped ({f['reason']})")
        elif args.command == "rates":
            res = run_rates(cfg, jobs)
            for r in res.records:
                print(f"n={r.n:<6d} rho={r.rho:.6e} gamma'={r.gamma_prime:.6e}")
        elif args.command == "audit":
            res = run_audit(cfg)
            print(render_audit_table(res.audits))
        else:
            res = run_density(cfg)
            for r in res.records:
                label = "limit" if r["n"] is None else f"n={r['n']}"
                print(f"{label:<8} mass={r['mass']:.10f} z_max={r['z_max']:.6g}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InversionError, QuadratureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for e in res.errors:
        print(f"error at n={e['n']}: {e['error']}", file=sys.stderr)
    print(f"manifest: {res.out_dir / (res.command + '_manifest.json')}")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
