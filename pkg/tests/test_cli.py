import json

import numpy as np
import pytest

from layerbeam.cli import RunConfig, main
from layerbeam.grid import read_fld1, to_spectral


SMALL_CONFIG = """
[scales]
L = 25
ell = 1
k0 = 1
ell_c = 1
sigma = 0.2
delta = 0.1
L_x = 12.533141373155003

[grid]
n = 16
extent = 8
beam = gaussian
width = 1

[run]
z_end = 0.2
snapshots = 2
n_paths = 8
master_seed = 42
"""


@pytest.fixture
def config_file(tmp_path):
    fn = tmp_path / "run.cfg"
    fn.write_text(SMALL_CONFIG)
    return str(fn)


def test_config_roundtrip():
    cfg = RunConfig.from_ini(SMALL_CONFIG)
    assert cfg.L == 25.0 and cfg.n == 16 and cfg.master_seed == 42
    again = RunConfig.from_ini(cfg.to_ini())
    assert again == cfg
    assert RunConfig.from_ini(again.to_ini()) == again


def test_config_defaults_documented():
    cfg = RunConfig.from_ini("")
    assert cfg.master_seed is None     # the one field without a default
    assert cfg.n == 64 and cfg.beam == "gaussian"


def test_config_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scales]\nL 400\n")
    rc = main(["validate-noise", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "error" in capsys.readouterr().err.lower()


def test_missing_seed_is_an_error(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[run]\nn_paths = 4\n")
    rc = main(["run-spde", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "seed" in capsys.readouterr().err


def test_validate_noise(tmp_path, config_file, capsys):
    out = tmp_path / "noise"
    rc = main(["validate-noise", "--config", config_file, "--out", str(out),
               "--ou-steps", "40000"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] and manifest["command"] == "validate-noise"
    assert (out / "autocovariance.csv").exists()
    assert (out / "autocovariance.svg").exists()
    first = (out / "autocovariance.csv").read_bytes()
    # rerun with the same seed: byte-identical CSV
    rc = main(["validate-noise", "--config", config_file, "--out", str(out),
               "--ou-steps", "40000"])
    assert rc == 0
    assert (out / "autocovariance.csv").read_bytes() == first


def test_verify_covariance(tmp_path, config_file):
    out = tmp_path / "cov"
    rc = main(["verify-covariance", "--config", config_file, "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "covariance_report.json").read_text())
    assert report["passed"] and report["max_rel_err"] <= 1e-10
    assert (out / "noncommuting.csv").exists()


def test_verify_covariance_refuses_delta_zero(tmp_path, config_file, capsys):
    rc = main(["verify-covariance", "--config", config_file,
               "--out", str(tmp_path / "o"), "--delta", "0"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "stationary density" in err and "1/delta" in err


def test_run_spde_with_oracle(tmp_path, config_file):
    out = tmp_path / "spde"
    rc = main(["run-spde", "--config", config_file, "--out", str(out),
               "--oracle-check"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    names = {c["name"] for c in manifest["checks"]}
    assert "spde-oracle-equivalence" in names
    assert manifest["coefficients"]["g_noise"] > 0
    assert (out / "mean_z0.1.fld").exists() and (out / "mean_z0.2.fld").exists()
    assert (out / "probe.csv").exists() and (out / "probe.svg").exists()


def test_run_spde_beta_zero_unitary(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL_CONFIG.replace("sigma = 0.2", "sigma = 0"))
    out = tmp_path / "spde0"
    rc = main(["run-spde", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    mean, z = read_fld1(out / "mean_z0.2.fld")
    u0 = RunConfig.from_ini(cfg.read_text()).make_beam()
    m = to_spectral(mean).data
    u = to_spectral(u0).data
    # beta=0 keeps per-mode magnitudes exactly (unitary free propagation)
    scale = np.abs(u).max()
    assert np.abs(np.abs(m) - np.abs(u)).max() <= 1e-12 * scale


def test_run_full_deterministic(tmp_path, config_file):
    out1, out2 = tmp_path / "f1", tmp_path / "f2"
    assert main(["run-full", "--config", config_file, "--out", str(out1)]) == 0
    assert main(["run-full", "--config", config_file, "--out", str(out2)]) == 0
    a = (out1 / "mean_full_z0.2.fld").read_bytes()
    b = (out2 / "mean_full_z0.2.fld").read_bytes()
    assert a == b
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["params"]["delta"] == 0.1
    assert "dz_bound" in manifest


def test_run_full_requires_positive_delta(tmp_path, config_file, capsys):
    rc = main(["run-full", "--config", config_file, "--out", str(tmp_path / "o"),
               "--delta", "0"])
    assert rc == 2
    assert "delta" in capsys.readouterr().err


def _decay_config(n_paths):
    return (SMALL_CONFIG.replace("z_end = 0.2", "z_end = 40")
            .replace("snapshots = 2", "snapshots = 5")
            .replace("sigma = 0.2", "sigma = 0.05")
            .replace("n_paths = 8", f"n_paths = {n_paths}"))


def test_decay_fit_loose_tolerance(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(_decay_config(400))
    out = tmp_path / "decay"
    rc = main(["decay-fit", "--config", str(cfg), "--out", str(out), "--tol", "0.5"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    # k=1, beta = sigma/eps = 0.25, l_c=1: Lambda = 0.0625/(8*1.25) = 0.00625
    assert manifest["lambda_theory"] == pytest.approx(0.00625, rel=1e-12)
    assert (out / "decay.csv").exists() and (out / "decay.svg").exists()


def test_failing_check_gives_exit_one(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(_decay_config(50))
    out = tmp_path / "decayfail"
    rc = main(["decay-fit", "--config", str(cfg), "--out", str(out),
               "--tol", "1e-12"])
    assert rc == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert not manifest["passed"]
    assert any(not c["passed"] for c in manifest["checks"])


def test_converge_plane_wave(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL_CONFIG.replace("beam = gaussian", "beam = plane")
                   .replace("z_end = 0.2", "z_end = 0.1")
                   .replace("n_paths = 8", "n_paths = 32"))
    out = tmp_path / "conv"
    rc = main(["converge", "--config", str(cfg), "--out", str(out),
               "--eps-list", "0.3,0.1"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    names = {c["name"] for c in manifest["checks"]}
    assert "beta0-roundoff" in names and manifest["passed"]
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0].startswith("eps,") and len(lines) == 3


def test_expand_mu(tmp_path, config_file):
    out = tmp_path / "mu"
    rc = main(["expand-mu", "--config", config_file, "--out", str(out)])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"]
    assert (out / "mu_expansion.csv").exists()
