import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from drift_spectra.cli import main
from drift_spectra.config import ConfigError, load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, mode, text, *extra):
    cfg = write(tmp_path, text)
    return main([mode, "--config", str(cfg), "--out-dir", str(tmp_path / "out"), *extra])


def test_reference_solve(tmp_path, capsys):
    code = main(["solve", "--config", str(CONFIGS / "reference_solve.toml"), "--out-dir", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert 3.96 <= rep["results"]["lambda_over_alpha"] <= 4.04
    assert rep["results"]["frame"] == "rescaled"
    assert "lambda_alpha/alpha" in capsys.readouterr().out


def test_small_alpha_uses_physical_frame(tmp_path):
    text = 'mode = "solve"\neps = 1.0\nalpha = 1\ndrift.coeffs = [0.5, -0.5]\n[domain]\nradius = 8.0\n[grid]\npoints = 127\nlevels = 2\n'
    assert run(tmp_path, "solve", text) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["results"]["frame"] == "physical"
    assert rep["results"]["lambda"] == pytest.approx(2.0, abs=1e-3)


def test_zero_alpha_is_a_config_error(tmp_path, capsys):
    text = 'mode = "solve"\neps = 1.0\nalpha = 0\ndrift.coeffs = [1, -1]\n'
    assert run(tmp_path, "solve", text) == 2
    err = capsys.readouterr().err
    assert "alpha" in err and "line 3" in err


def test_missing_eps(tmp_path, capsys):
    assert run(tmp_path, "solve", 'mode = "solve"\nalpha = 10\ndrift.coeffs = [1, -1]\n') == 2
    assert "eps" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text, field",
    [
        ('mode = "solve"\neps = 1\nalpha = 5\ndrift.coeffs = [1, -0.5]\n', "drift.coeffs"),
        ('mode = "solve"\neps = 1\nalpha = 5\ndrift.coeffs = [1, -1]\nbogus = 3\n', "bogus"),
        ('mode = "sweep"\neps = 1\ndrift.coeffs = [1, -1]\nalpha_ladder = [10, 20, 15, 40]\n', "alpha_ladder"),
        ('mode = "sweep"\neps = 1\ndrift.coeffs = [1, -1]\nalpha_ladder = [10, 20, 40]\n', "alpha_ladder"),
        ('mode = "solve"\neps = -1\nalpha = 5\ndrift.coeffs = [1, -1]\n', "eps"),
    ],
)
def test_config_errors_name_the_field(tmp_path, text, field):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.field_name == field


def test_mode_mismatch(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, 'mode = "solve"\neps = 1\nalpha = 5\ndrift.coeffs = [1, -1]\n'), "sweep")


def test_config_hash_ignores_key_order(tmp_path):
    a = load_config(write(tmp_path, 'mode = "solve"\neps = 1.0\nalpha = 5\ndrift.coeffs = [1, -1]\n', "a.toml"))
    b = load_config(write(tmp_path, 'drift.coeffs = [1, -1]\nalpha = 5\nmode = "solve"\neps = 1.0\n', "b.toml"))
    assert a.content_hash() == b.content_hash()


def test_corrections_x1_squared(tmp_path, capsys):
    code = main(["corrections", "--config", str(CONFIGS / "corrections_x1sq.toml"), "--out-dir", str(tmp_path), "--strict"])
    assert code == 0
    rep = json.loads((tmp_path / "corrections_x1sq.json").read_text())
    phi3 = rep["results"]["corrections"]["phi3"]
    assert phi3["nonzero_coefficients"] == 1
    assert phi3["largest"][0]["index"] == [2, 0]
    assert phi3["largest"][0]["value"] == pytest.approx(-np.sqrt(2) / 32, abs=1e-12)
    assert phi3["dense_oracle_max_error"] < 1e-6
    rows = (tmp_path / "phi3_spectrum.csv").read_text().splitlines()
    assert rows[0] == "n1,n2,coefficient"
    assert rows[1].startswith("2,0,-4.41941738")


def test_missing_hessian_is_a_config_error(tmp_path, capsys):
    x = np.linspace(-2, 2, 21)
    X, Y = np.meshgrid(x, x, indexing="ij")
    np.savetxt(tmp_path / "v.txt", np.c_[X.ravel(), Y.ravel(), X.ravel() ** 2 + Y.ravel() ** 2])
    text = (
        'mode = "corrections"\neps = 1.0\ndrift.coeffs = [1, -1]\n'
        '[potential]\npreset = "table"\npath = "v.txt"\n[corrections]\nwhich = ["phi2"]\n'
    )
    assert run(tmp_path, "corrections", text) == 2
    assert "hessian_at_origin" in capsys.readouterr().err


def test_nonsmooth_potential_exits_3(tmp_path, capsys):
    text = 'mode = "corrections"\neps = 1.0\ndrift.coeffs = [1, -1]\n[potential]\npreset = "homogeneous-power"\npower = 1\n'
    assert run(tmp_path, "corrections", text) == 3
    assert "F3" in capsys.readouterr().err


def test_limit_mode_three_dimensions(tmp_path, capsys):
    assert main(["limit", "--config", str(CONFIGS / "limit_3d.toml"), "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"]["mu"] == 12.0
    assert rep["results"]["int_Q_squared"] == pytest.approx(1.0, abs=1e-12)


SWEEP = (
    'mode = "sweep"\neps = 1.0\ndrift.coeffs = [1, -1]\npotential.preset = "quadratic"\n'
    "alpha_ladder = [25, 50, 100, 200]\n[grid]\npoints = 31\nlevels = 2\n"
)


def test_sweep_csv_is_deterministic(tmp_path):
    cfg = write(tmp_path, SWEEP)
    for d in ("a", "b"):
        assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["schema_version"] == 1
    assert len(rep["config_sha256"]) == 64
    assert set(rep) == {"schema_version", "mode", "config", "config_sha256", "results", "strict_failures"}
    assert len(rep["results"]["records"]) == 4


def test_strict_slope_failure_exits_4(tmp_path):
    text = SWEEP.replace('potential.preset = "quadratic"\n', "") + (
        '[potential]\npreset = "linear+quadratic"\ngradient = [1, 0]\noffset = 1.0\n'
        "[expected]\norder = 2\nslope = -0.5\nslope_tol = 0.1\n"
    )
    assert run(tmp_path, "sweep", text) == 0
    assert run(tmp_path, "sweep", text, "--strict") == 4


@pytest.mark.skipif(shutil.which("drift-spectra") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(
        ["drift-spectra", "limit", "--config", str(CONFIGS / "limit_3d.toml"), "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert out.stdout.startswith("mu = 12")


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "drift_spectra.cli", "solve", "--config", str(tmp_path / "missing.toml")],
        capture_output=True, text=True,
    )
    assert out.returncode == 2
