"""Command-line driver tests: exit codes, CSV contracts, determinism,
effective-config echo, per-cell failure reporting, figure rendering."""

import csv
import io

import numpy as np
import pytest
import yaml

from berggren import cli
from berggren.basis import load_basis
from berggren.config import RunConfig, parse_config
from berggren.eig import EigError


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    return list(csv.reader(io.StringIO(text)))


# ----------------------------------------------------------------- poles

@pytest.fixture(scope="module")
def poles_run():
    buf_argv = ["poles", "--wave", "s12"]
    return buf_argv


def test_poles_csv(capsys, poles_run):
    code, out, _ = run_cli(capsys, *poles_run)
    assert code == 0
    rows = parse_csv(out)
    assert rows[0] == ["wave", "hamiltonian", "kind", "E_MeV", "Gamma_keV"]
    assert len(rows) == 5  # header + (bound, resonant) x (basis, diag)
    body = {(r[1], r[2]): (float(r[3]), float(r[4])) for r in rows[1:]}
    assert body[("basis", "bound")][0] == pytest.approx(-24.4219, abs=1e-3)
    assert body[("basis", "bound")][1] == 0.0
    assert body[("basis", "resonant")][0] == pytest.approx(1.0975, abs=1e-3)
    assert body[("diag", "resonant")][0] == pytest.approx(0.46332, abs=1e-4)
    assert body[("diag", "resonant")][1] == pytest.approx(8.969, abs=1e-2)


def test_poles_deterministic(capsys, poles_run):
    _, out1, _ = run_cli(capsys, *poles_run)
    _, out2, _ = run_cli(capsys, *poles_run)
    assert out1 == out2


def test_poles_digits_flag(capsys):
    code, out, _ = run_cli(capsys, "poles", "--wave", "s12", "--digits", "3")
    assert code == 0
    row = parse_csv(out)[1]
    assert row[3] == "-24.4"


# ----------------------------------------------------------- exit codes

def test_unknown_config_key_exits_2(capsys, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("wavez: [s12]\n")
    code, _, err = run_cli(capsys, "poles", "--config", str(path))
    assert code == 2
    assert "unknown config keys" in err


def test_error_json(capsys, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("ngl: [0]\n")
    code, _, err = run_cli(capsys, "poles", "--config", str(path),
                           "--error-json")
    assert code == 2
    payload = [line for line in err.splitlines() if line.startswith("{")]
    import json
    data = json.loads(payload[-1])
    assert data["error"] == "ConfigError"


def test_bad_contour_split_exits_2(capsys):
    # n_gl must be a multiple of three for the equal segment split
    code, _, err = run_cli(capsys, "diag", "--ngl", "10")
    assert code == 2
    assert "multiple of 3" in err


def test_bad_ngl_argument(capsys):
    with pytest.raises(SystemExit):
        cli.main(["diag", "--ngl", "abc"])
    capsys.readouterr()


def test_numerical_failure_exits_3(capsys, monkeypatch):
    def boom(self, wave, scheme, n_gl):
        raise EigError("synthetic failure")
    monkeypatch.setattr(cli._Workspace, "run_cell", boom)
    code, _, err = run_cli(capsys, "diag", "--ngl", "9")
    assert code == 3
    assert "synthetic failure" in err


# ---------------------------------------------------------- echo-config

def test_echo_config_round_trips(capsys, tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("waves: [s12]\nngl: [9]\ndigits: 5\n")
    code, _, err = run_cli(capsys, "poles", "--config", str(path),
                           "--echo-config", "--scheme", "cut")
    assert code == 0
    echoed = parse_config(yaml.safe_load(err))
    assert echoed == RunConfig(waves=("s12",), ngl=(9,), digits=5,
                               schemes=("cut",))


def test_cli_overrides_config(capsys, tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("waves: [d32]\n")
    code, _, err = run_cli(capsys, "poles", "--config", str(path),
                           "--wave", "s12", "--echo-config")
    assert code == 0
    assert yaml.safe_load(err)["waves"] == ["s12"]


# ----------------------------------------------------------------- diag

def test_diag_csv_row(capsys):
    code, out, _ = run_cli(capsys, "diag", "--wave", "s12",
                           "--scheme", "offdiag", "--ngl", "9")
    assert code == 0
    rows = parse_csv(out)
    assert rows[0] == ["scheme", "N_GL", "E_MeV", "Gamma_keV",
                       "rms_re", "rms_im"]
    scheme, n, E, G, rre, rim = rows[1]
    assert scheme == "offdiag" and n == "9"
    # N = 9 is far from converged; just check the right neighborhood
    assert float(E) == pytest.approx(0.463, abs=0.05)
    assert 0 < float(rre) < 1.0 and 0 < float(rim) < 1.0


def test_diag_plot_written(capsys, tmp_path):
    out = tmp_path / "diag.csv"
    code, _, err = run_cli(capsys, "diag", "--ngl", "9",
                           "--out", str(out), "--plot")
    assert code == 0
    assert out.exists()
    png = tmp_path / "diag.png"
    assert png.exists() and png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_requires_out(capsys):
    code, _, err = run_cli(capsys, "quadstudy", "--plot")
    assert code == 2
    assert "--out" in err


# ---------------------------------------------------------------- basis

def test_basis_written_and_loadable(capsys, tmp_path):
    code, _, err = run_cli(capsys, "basis", "--wave", "s12", "--ngl", "9",
                           "--out", str(tmp_path))
    assert code == 0
    b = load_basis(tmp_path / "basis_s12_N9.npz")
    assert b.n == 11 and b.n_res == 2  # bound + resonant + 9 contour


# ---------------------------------------------------------------- table

def test_table_partial_failure_keeps_going(capsys, tmp_path, monkeypatch):
    real = cli._Workspace.run_cell

    def flaky(self, wave, scheme, n_gl):
        if scheme == "subtraction":
            raise EigError("synthetic failure")
        return real(self, wave, scheme, n_gl)

    monkeypatch.setattr(cli._Workspace, "run_cell", flaky)
    out = tmp_path / "tbl"
    code, _, _ = run_cli(capsys, "table", "--wave", "s12",
                         "--scheme", "offdiag", "--scheme", "subtraction",
                         "--ngl", "9", "--out", str(out))
    assert code == 0  # some cells succeeded
    rows = parse_csv((out / "table_s12.csv").read_text())
    assert rows[0][-1] == "status"
    by_scheme = {r[0]: r for r in rows[1:]}
    assert by_scheme["offdiag"][-1] == "ok"
    assert by_scheme["subtraction"][-1].startswith("error:")
    assert by_scheme["exact"][2] != ""  # exact row still present
    assert float(by_scheme["exact"][2]) == pytest.approx(0.46332, abs=1e-4)


def test_table_all_cells_failing_exits_3(capsys, tmp_path, monkeypatch):
    def boom(self, wave, scheme, n_gl):
        raise EigError("synthetic failure")
    monkeypatch.setattr(cli._Workspace, "run_cell", boom)
    code, _, _ = run_cli(capsys, "table", "--wave", "s12", "--ngl", "9",
                         "--out", str(tmp_path / "t"))
    assert code == 3


def test_multi_wave_requires_out(capsys, monkeypatch):
    def boom(self, wave, scheme, n_gl):
        raise AssertionError("should not run")
    monkeypatch.setattr(cli._Workspace, "run_cell", boom)
    code, _, err = run_cli(capsys, "table", "--wave", "s12",
                           "--wave", "d52", "--ngl", "9")
    assert code == 2
    assert "--out" in err


# ------------------------------------------------------------------ rms

def test_rms_columns(capsys, tmp_path):
    out = tmp_path / "rms.csv"
    code, _, _ = run_cli(capsys, "rms", "--wave", "s12", "--ngl", "9",
                         "--out", str(out))
    assert code == 0
    rows = parse_csv(out.read_text())
    assert rows[0] == ["scheme", "N_GL", "rms_re", "rms_im", "status"]
    assert rows[1][0] == "offdiag" and rows[1][-1] == "ok"
    assert float(rows[1][2]) > 0


# ------------------------------------------------------------ quadstudy

def test_quadstudy_csv_and_plot(capsys, tmp_path):
    cfgfile = tmp_path / "qs.yaml"
    cfgfile.write_text("qs_alphas: [0.45, point]\nqs_kmax: [1.0]\n"
                       "qs_ngl: [10]\n")
    out = tmp_path / "study"
    code, _, _ = run_cli(capsys, "quadstudy", "--config", str(cfgfile),
                         "--out", str(out), "--plot")
    assert code == 0
    rows = parse_csv((out / "quadstudy.csv").read_text())
    assert rows[0] == ["alpha_or_point", "k_max", "N_GL", "k", "delta_I"]
    assert len(rows) == 1 + 2 * 10
    labels = {r[0] for r in rows[1:]}
    assert labels == {"0.45", "point"}
    assert (out / "quadstudy.png").exists()


def test_quadstudy_empty_sweep_exits_2(capsys, tmp_path):
    cfgfile = tmp_path / "qs.yaml"
    cfgfile.write_text("qs_kmax: []\n")
    code, _, err = run_cli(capsys, "quadstudy", "--config", str(cfgfile))
    assert code == 2
    assert "non-empty" in err


def test_quadstudy_ngl_override(capsys, tmp_path):
    cfgfile = tmp_path / "qs.yaml"
    cfgfile.write_text("qs_alphas: [point]\nqs_kmax: [1.0]\n"
                       "qs_ngl: [50]\n")
    code, out, _ = run_cli(capsys, "quadstudy", "--config", str(cfgfile),
                           "--ngl", "5")
    assert code == 0
    assert len(parse_csv(out)) == 1 + 5


def test_poles_equal_charges_give_identical_columns(capsys, tmp_path):
    cfgfile = tmp_path / "same.yaml"
    cfgfile.write_text("Z_diag: 10.0\n")
    code, out, _ = run_cli(capsys, "poles", "--config", str(cfgfile),
                           "--wave", "s12")
    assert code == 0
    rows = parse_csv(out)[1:]
    basis = [r[2:] for r in rows if r[1] == "basis"]
    diag = [r[2:] for r in rows if r[1] == "diag"]
    assert basis == diag


def test_scheme_sub_alias(capsys):
    code, _, err = run_cli(capsys, "poles", "--wave", "s12",
                           "--scheme", "sub", "--echo-config")
    assert code == 0
    assert yaml.safe_load(err)["schemes"] == ["subtraction"]
