import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from lltlab import __version__
from lltlab.cli import (
    ConfigError,
    ExperimentConfig,
    fit_rate,
    main,
    run_converge,
    run_density,
)
from lltlab.inversion import DensityGrid


# -- fit_rate ------------------------------------------------------------------------

def test_fit_exact_power_laws():
    ns = [8, 16, 32, 64]
    f1 = fit_rate(ns, [3.0 / n for n in ns])
    assert f1.slope == pytest.approx(-1.0, abs=1e-12) and f1.r_squared == pytest.approx(1.0)
    assert f1.intercept == pytest.approx(math.log(3.0))
    assert fit_rate(ns, [3.0 / n ** 2 for n in ns]).slope == pytest.approx(-2.0, abs=1e-12)
    assert f1.n_used == 4


def test_fit_with_noise_fixed_seed():
    rng = np.random.default_rng(20240611)
    ns = [8, 16, 32, 64, 128, 256]
    errs = [2.0 / n * (1 + 0.05 * rng.standard_normal()) for n in ns]
    f = fit_rate(ns, errs)
    assert -1.1 <= f.slope <= -0.9


@pytest.mark.parametrize("ns, errs", [([1, 2], [1, 1]), ([1, 2, 3], [1, 0, 1]),
                                      ([1, 2, 3], [1, -1, 1]), ([1, 2, 3], [1, 1])])
def test_fit_rejects_bad_input(ns, errs):
    with pytest.raises(ValueError):
        fit_rate(ns, errs)


@given(st.floats(-3, 1), st.floats(0.01, 100))
def test_fit_recovers_slope(slope, c):
    ns = [4, 8, 16, 32, 64]
    f = fit_rate(ns, [c * n ** slope for n in ns])
    assert f.slope == pytest.approx(slope, abs=1e-9)
    assert 0 <= f.r_squared <= 1


# -- config ----------------------------------------------------------------------------

@pytest.mark.parametrize("field, value", [
    ("n_values", [8, 8]), ("n_values", [16, 8]), ("n_values", [0, 4]), ("n_values", []),
    ("x_points", 32), ("x_points", 1000), ("delta", 0), ("epsilon", 1.0),
    ("x_range", [1, -1]), ("tol", -1.0), ("formats", ["xml"]), ("model", "nope"),
    ("z_grid_points", 2), ("z_grid_max", 0),
])
def test_config_validation_names_field(field, value):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({field: value})
    assert info.value.field == field
    assert field in str(info.value)


def test_config_unknown_field_and_roundtrip(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": 1})
    cfg = ExperimentConfig(model="gauss", n_values=[2, 4, 8]).validate()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg


def test_defaults():
    cfg = ExperimentConfig().validate()
    assert cfg.n_values == [8, 16, 32, 64, 128, 256]
    assert (cfg.delta, cfg.epsilon, cfg.x_points, cfg.tol) == (0.5, 0.1, 1024, 1e-10)
    assert cfg.x_range == (-10.0, 10.0) and cfg.z_grid_max == 50 and cfg.z_grid_points == 4096


# -- runners and exit codes ---------------------------------------------------------------

def _files(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_converge_deterministic_and_manifest(tmp_path):
    args = ["converge", "--model", "example2", "--n", "8,16,32"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "3"]) == 0
    fa, fb = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert fa.keys() == fb.keys()
    for name in fa:
        if name.endswith("manifest.json"):
            continue
        assert fa[name] == fb[name], name
    manifest = json.loads(fa["converge_manifest.json"])
    assert manifest["version"] == __version__
    assert set(manifest) >= {"config", "records", "fits", "audits", "version"}
    assert set(manifest["files"]) == set(fa) - {"converge_manifest.json"}
    assert manifest["config"]["model"] == "example2"


def test_gauss_fit_skipped(tmp_path):
    cfg = ExperimentConfig(model="gauss", outputs=str(tmp_path)).validate()
    res = run_converge(cfg)
    assert all(r.sup_error < 1e-8 for r in res.records)
    fit = [f for f in res.fits if f["quantity"] == "sup_error"][0]
    assert fit["status"] == "skipped" and fit["reason"] == "below tolerance floor"


def test_audit_exit_codes(tmp_path):
    assert main(["audit", "--model", "example2", "--out", str(tmp_path / "a")]) == 0
    assert main(["audit", "--model", "broken", "--out", str(tmp_path / "b")]) == 3
    rows = json.loads((tmp_path / "b" / "audit.json").read_text())
    assert any(r["condition"] == "A" and not r["passed"] for r in rows)


def test_config_error_exit_codes(tmp_path, capsys):
    assert main(["converge", "--n", "8,4"]) == 1
    assert "n_values" in capsys.readouterr().err
    assert main(["converge", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["nonsense"]) == 1
    assert main(["rates", "--model", "example2", "--epsilon", "0.6", "--out", str(tmp_path)]) == 1


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "gauss", "n_values": [2, 4, 8], "delta": 0.4}))
    out = tmp_path / "o"
    assert main(["rates", "--config", str(cfg), "--delta", "0.5", "--out", str(out)]) == 0
    manifest = json.loads((out / "rates_manifest.json").read_text())
    assert manifest["config"]["delta"] == 0.5 and manifest["config"]["n_values"] == [2, 4, 8]
    assert len(manifest["records"]) == 3


def test_jobs_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LLTLAB_JOBS", "2")
    assert main(["rates", "--model", "gauss", "--n", "2,4,8", "--out", str(tmp_path)]) == 0
    monkeypatch.setenv("LLTLAB_JOBS", "zero")
    assert main(["rates", "--model", "gauss", "--out", str(tmp_path)]) == 1
    monkeypatch.delenv("LLTLAB_JOBS")
    assert main(["rates", "--model", "gauss", "--jobs", "0", "--out", str(tmp_path)]) == 1


def test_per_n_errors_do_not_abort(tmp_path):
    # example2 row 1 has |Phi_1| ~ 1/z, not integrable: that n fails, the rest run
    cfg = ExperimentConfig(model="example2", n_values=[1, 8, 16, 32], outputs=str(tmp_path)).validate()
    res = run_converge(cfg)
    assert [e["n"] for e in res.errors] == [1]
    assert [r.n for r in res.records] == [8, 16, 32]
    assert res.exit_code == 2


# -- density ------------------------------------------------------------------------------

def test_density_example2_peak(tmp_path):
    # x_range chosen so x = 0 is a node
    cfg = ExperimentConfig(model="example2", x_range=(-5.12, 5.11), outputs=str(tmp_path)).validate()
    run_density(cfg, [32])
    grid = DensityGrid.read_csv(tmp_path / "density_limit.csv")
    i = int(np.argmin(np.abs(grid.xs)))
    assert abs(grid.xs[i]) < 1e-12
    assert grid.values[i] == pytest.approx(1 / math.pi, abs=1e-9)
    assert (tmp_path / "density_n32.csv").exists()


def test_density_gauss_matches_normal(tmp_path):
    cfg = ExperimentConfig(model="gauss", outputs=str(tmp_path)).validate()
    run_density(cfg, [5])
    grid = DensityGrid.read_csv(tmp_path / "density_n5.csv")
    assert np.max(np.abs(grid.values - stats.norm.pdf(grid.xs))) < 1e-8


def test_density_example1_mass(tmp_path):
    cfg = ExperimentConfig(model="example1:alpha=1", outputs=str(tmp_path)).validate()
    run_density(cfg, [8])
    grid = DensityGrid.read_csv(tmp_path / "density_n8.csv")
    assert abs(grid.mass() + grid.outside_mass - 1) < 1e-4


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "lltlab", "rates", "--model", "gauss",
                          "--n", "2,4,8", "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "manifest" in out.stdout
