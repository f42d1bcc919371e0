"""Command-line driver.

Subcommands
-----------
poles       pole energies/widths of both Hamiltonians per wave
basis       build and save discretized bases (.npz)
diag        one (wave, scheme, N_GL) diagonalization -> CSV row
table       schemes x N_GL energy table per wave, with an exact row
rms         wave-function rms deviations for the same sweep
quadstudy   quadrature-error sweep for the shifted-diagonal rule

All numerical output is delimited text (CSV); --plot additionally
renders a PNG next to each CSV.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.  Output is deterministic: identical
configurations produce byte-identical CSV.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .basis import (
    ContourError,
    build_basis,
    default_contour,
    resolve_kmin,
    save_basis,
)
from .config import (
    WAVES,
    ConfigError,
    RunConfig,
    dump_config,
    load_config,
)
from .eig import EigError, _evaluate_state, analyze, comparison_grid
from .kernel import (
    KernelError,
    RotationPolicy,
    assemble_cut,
    assemble_offdiag,
    assemble_subtraction,
)
from .quadstudy import QuadStudyError, StudyConfig, run_study, write_study_csv
from .radial import RadialError, RadialGrid, find_pole

log = logging.getLogger(__name__)

__all__ = ["main"]

_SCHEMES = ("cut", "subtraction", "offdiag")

_CONFIG_ERRORS = (ConfigError, ContourError)
_NUMERICAL_ERRORS = (RadialError, KernelError, EigError, QuadStudyError)


# ----------------------------------------------------------- case setup

def _grid_for(cfg: RunConfig, wave: str, scheme: str) -> RadialGrid:
    if scheme == "cut":
        R = float(cfg.cut_radius[wave])
        return RadialGrid.gauss_legendre(R, int(round(R * cfg.cut_nodes_per_fm)))
    return RadialGrid.gauss_legendre(cfg.grid_R, cfg.grid_n)


class _Workspace:
    """Per-run cache of poles and grids (they repeat across table cells)."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._grids: dict = {}
        self._poles: dict = {}

    def grid(self, wave: str, scheme: str) -> RadialGrid:
        key = ("cut", wave) if scheme == "cut" else ("std",)
        if key not in self._grids:
            self._grids[key] = _grid_for(self.cfg, wave, scheme)
        return self._grids[key]

    def poles(self, wave: str, Z: float, grid: RadialGrid):
        key = (wave, Z, grid.R, grid.nodes.size)
        if key not in self._poles:
            p = self.cfg.potential_params(Z)
            pw = WAVES[wave]
            self._poles[key] = tuple(
                find_pole(k0, p, pw, grid)
                for k0 in self.cfg.pole_seeds(wave, Z))
        return self._poles[key]

    def exact_pole(self, wave: str):
        """Direct-integration pole of the diagonalized Hamiltonian."""
        grid = self.grid(wave, "offdiag")
        return self.poles(wave, self.cfg.Z_diag, grid)[-1]

    def build(self, wave: str, scheme: str, n_gl: int):
        cfg = self.cfg
        pw = WAVES[wave]
        p = cfg.potential_params(cfg.Z_basis)
        grid = self.grid(wave, scheme)
        poles = self.poles(wave, cfg.Z_basis, grid)
        k_min = 0.0 if scheme == "cut" else resolve_kmin(p, pw, grid.R)
        spec = default_contour(pw, k_min, n_gl)
        return build_basis(spec, poles, p, pw, grid), poles[-1]

    def run_cell(self, wave: str, scheme: str, n_gl: int):
        cfg = self.cfg
        basis, target = self.build(wave, scheme, n_gl)
        policy = RotationPolicy(cfg.rotation_R)
        if scheme == "cut":
            kernel = assemble_cut(basis, cfg.delta_Zc,
                                  float(cfg.cut_radius[wave]), policy=policy)
        elif scheme == "subtraction":
            kernel = assemble_subtraction(basis, cfg.delta_Zc, policy=policy)
        else:
            kernel = assemble_offdiag(basis, cfg.delta_Zc, policy=policy)
        return analyze(kernel, basis, target, exact=self.exact_pole(wave),
                       R_compare=cfg.grid_R)


# ------------------------------------------------------------ formatting

def _fmt(cfg: RunConfig, x: float) -> str:
    """Shortest round-trip representation, or --digits significant
    digits when requested."""
    return cfg.format_float(x)


def _result_row(cfg: RunConfig, res) -> list:
    return [res.scheme, str(res.n_gl), _fmt(cfg, res.E),
            _fmt(cfg, res.Gamma), _fmt(cfg, res.rms_re),
            _fmt(cfg, res.rms_im)]


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _wave_out(out, stem: str, wave: str, n_waves: int):
    """Resolve the per-wave CSV target (None means stdout)."""
    if out is None:
        if n_waves == 1:
            return None
        raise ConfigError("--out is required when running several waves")
    p = Path(out)
    if p.suffix == ".csv":
        if n_waves > 1:
            raise ConfigError("--out must be a directory for several waves")
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / f"{stem}_{wave}.csv"


def _plot_target(csv_path, flag: str):
    if csv_path is None:
        raise ConfigError(f"--plot needs --out (cannot render {flag} "
                          f"next to stdout)")
    return Path(csv_path).with_suffix(".png")


# ----------------------------------------------------------- subcommands

def _cmd_poles(cfg: RunConfig, args) -> int:
    ws = _Workspace(cfg)
    digits = cfg.digits if cfg.digits is not None else 6
    rows = []
    for wave in cfg.waves:
        grid = ws.grid(wave, "offdiag")
        for name, Z in (("basis", cfg.Z_basis), ("diag", cfg.Z_diag)):
            for st in ws.poles(wave, Z, grid):
                E = st.e.real
                # bound-state widths are zero up to solver round-off
                G = 0.0 if st.kind == "bound" else -2000.0 * st.e.imag
                rows.append([wave, name, st.kind, f"{E:.{digits}g}",
                             f"{G:.{digits}g}"])
    _write_csv(args.out, ["wave", "hamiltonian", "kind", "E_MeV",
                          "Gamma_keV"], rows)
    return 0


def _cmd_basis(cfg: RunConfig, args) -> int:
    ws = _Workspace(cfg)
    outdir = Path(args.out) if args.out else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    scheme = cfg.schemes[0]
    for wave in cfg.waves:
        for n in cfg.ngl:
            basis, _ = ws.build(wave, scheme, n)
            path = outdir / f"basis_{wave}_N{n}.npz"
            save_basis(path, basis)
            print(f"wrote {path} ({basis.n} states)", file=sys.stderr)
    return 0


def _cmd_diag(cfg: RunConfig, args) -> int:
    ws = _Workspace(cfg)
    wave, scheme, n = cfg.waves[0], cfg.schemes[0], cfg.ngl[0]
    res = ws.run_cell(wave, scheme, n)
    _write_csv(args.out, ["scheme", "N_GL", "E_MeV", "Gamma_keV",
                          "rms_re", "rms_im"], [_result_row(cfg, res)])
    if args.plot:
        from . import report
        png = _plot_target(args.out, "diag")
        r = comparison_grid(cfg.grid_R)
        ue = _evaluate_state(ws.exact_pole(wave), r)
        report.save_wavefunction_plot(
            r, res.u_reconstructed, ue / np.sqrt(np.trapezoid(
                np.concatenate([[0.0], ue * ue]),
                np.concatenate([[0.0], r]))),
            png, f"{wave} {scheme} N={n}")
        print(f"wrote {png}", file=sys.stderr)
    return 0


def _sweep(ws: _Workspace, wave: str):
    """All (scheme, N_GL) cells for one wave; failures keep the sweep
    going and surface in the status column."""
    cfg = ws.cfg
    rows, plot_rows = [], []
    failures = 0
    for scheme in cfg.schemes:
        for n in cfg.ngl:
            try:
                res = ws.run_cell(wave, scheme, n)
            except _NUMERICAL_ERRORS + (ContourError,) as exc:
                log.warning("%s %s N=%d failed: %s", wave, scheme, n, exc)
                rows.append([scheme, str(n), "", "", "", "",
                             f"error: {exc}"])
                failures += 1
                continue
            rows.append(_result_row(cfg, res) + ["ok"])
            plot_rows.append({"scheme": scheme, "n_gl": n, "E": res.E,
                              "Gamma": res.Gamma, "rms_re": res.rms_re,
                              "rms_im": res.rms_im})
    exact = ws.exact_pole(wave)
    E, G = exact.e.real, -2000.0 * exact.e.imag
    rows.append(["exact", "", _fmt(cfg, E), _fmt(cfg, G), "", "", "ok"])
    return rows, plot_rows, (E, G), failures


def _cmd_table(cfg: RunConfig, args) -> int:
    ws = _Workspace(cfg)
    paths = {w: _wave_out(args.out, "table", w, len(cfg.waves))
             for w in cfg.waves}
    total_failures = 0
    total_cells = 0
    for wave in cfg.waves:
        rows, plot_rows, exact, failures = _sweep(ws, wave)
        total_failures += failures
        total_cells += len(cfg.schemes) * len(cfg.ngl)
        path = paths[wave]
        _write_csv(path, ["scheme", "N_GL", "E_MeV", "Gamma_keV",
                          "rms_re", "rms_im", "status"], rows)
        if args.plot:
            from . import report
            png = _plot_target(path, "table")
            report.save_sweep_plot(plot_rows, exact, png, f"wave {wave}")
            print(f"wrote {png}", file=sys.stderr)
    return 3 if total_failures == total_cells else 0


def _cmd_rms(cfg: RunConfig, args) -> int:
    ws = _Workspace(cfg)
    paths = {w: _wave_out(args.out, "rms", w, len(cfg.waves))
             for w in cfg.waves}
    total_failures = 0
    total_cells = 0
    for wave in cfg.waves:
        rows, plot_rows, exact, failures = _sweep(ws, wave)
        total_failures += failures
        total_cells += len(cfg.schemes) * len(cfg.ngl)
        out_rows = [[r[0], r[1], r[4], r[5], r[6]] for r in rows
                    if r[0] != "exact"]
        path = paths[wave]
        _write_csv(path, ["scheme", "N_GL", "rms_re", "rms_im", "status"],
                   out_rows)
        if args.plot:
            from . import report
            png = _plot_target(path, "rms")
            report.save_sweep_plot(plot_rows, exact, png, f"wave {wave}")
            print(f"wrote {png}", file=sys.stderr)
    return 3 if total_failures == total_cells else 0


def _cmd_quadstudy(cfg: RunConfig, args) -> int:
    ngls = args.ngl if args.ngl else cfg.qs_ngl
    if not cfg.qs_alphas or not cfg.qs_kmax or not ngls:
        raise ConfigError("quadstudy sweep lists must be non-empty")
    if args.out is None and args.plot:
        raise ConfigError("--plot needs --out (cannot render quadstudy "
                          "next to stdout)")
    configs = [StudyConfig(alpha=None if a == "point" else a, k_max=km,
                           n_gl=n, delta_Zc=cfg.delta_Zc, C_c=cfg.C_c)
               for a in cfg.qs_alphas for km in cfg.qs_kmax for n in ngls]
    results = run_study(configs)
    if args.out is None:
        write_study_csv(sys.stdout, results)
    else:
        path = Path(args.out)
        if path.suffix != ".csv":
            path.mkdir(parents=True, exist_ok=True)
            path = path / "quadstudy.csv"
        write_study_csv(path, results)
        if args.plot:
            from . import report
            png = _plot_target(path, "quadstudy")
            report.save_study_plot(results, png)
            print(f"wrote {png}", file=sys.stderr)
    return 0


# --------------------------------------------------------------- parsing

def _int_list(text: str):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="berggren",
        description="Residual Coulomb coupling in discretized complex-"
                    "momentum bases: pole searches, kernel schemes, "
                    "convergence tables, quadrature-error studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "poles": (_cmd_poles, "pole energies and widths per Hamiltonian"),
        "basis": (_cmd_basis, "build and save discretized bases"),
        "diag": (_cmd_diag, "single diagonalization (first wave/scheme/N)"),
        "table": (_cmd_table, "schemes x N_GL table with exact row"),
        "rms": (_cmd_rms, "wave-function rms deviations for the sweep"),
        "quadstudy": (_cmd_quadstudy, "quadrature-error sweep"),
    }
    for name, (func, help_text) in commands.items():
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--config", metavar="YAML",
                        help="run configuration file")
        sp.add_argument("--wave", action="append",
                        choices=sorted(WAVES),
                        help="partial wave (repeatable)")
        sp.add_argument("--scheme", action="append",
                        choices=_SCHEMES + ("sub",),
                        help="kernel scheme (repeatable; sub is short "
                             "for subtraction)")
        sp.add_argument("--ngl", type=_int_list, metavar="N[,N...]",
                        help="contour node counts")
        sp.add_argument("--digits", type=int,
                        help="significant digits in the output")
        sp.add_argument("--out", metavar="PATH",
                        help="output file or directory (default stdout)")
        sp.add_argument("--echo-config", action="store_true",
                        help="print the effective configuration to stderr")
        sp.add_argument("--plot", action="store_true",
                        help="render a PNG next to each CSV")
        sp.add_argument("--error-json", action="store_true",
                        help="also report failures as JSON on stderr")
        sp.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    return parser


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.wave:
        overrides["waves"] = tuple(args.wave)
    if args.scheme:
        overrides["schemes"] = tuple(
            "subtraction" if s == "sub" else s for s in args.scheme)
    if args.ngl:
        overrides["ngl"] = args.ngl
    if args.digits is not None:
        overrides["digits"] = args.digits
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _report_error(args, exc: Exception) -> None:
    print(f"error: {exc}", file=sys.stderr)
    if getattr(args, "error_json", False):
        print(json.dumps({"error": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _effective_config(args)
        if args.echo_config:
            sys.stderr.write(dump_config(cfg))
        return args.func(cfg, args)
    except _CONFIG_ERRORS as exc:
        _report_error(args, exc)
        return 2
    except _NUMERICAL_ERRORS as exc:
        _report_error(args, exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
