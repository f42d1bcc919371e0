"""Run configuration: versioned YAML schema with strict key checking.

The schema documents every physical unit in place; unknown keys are
rejected rather than ignored so that a typo cannot silently fall back
to a default.  A RunConfig can be dumped back to YAML and reparsed into
an equal object (the --echo-config round trip).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .potential import PartialWave, PotentialParams

__all__ = [
    "ConfigError",
    "RunConfig",
    "WAVES",
    "dump_config",
    "load_config",
    "parse_config",
]

SCHEMA_VERSION = 1

WAVES = {"s12": PartialWave(0, 1),
         "d52": PartialWave(2, 5),
         "d32": PartialWave(2, 3)}

_SCHEMES = ("cut", "subtraction", "offdiag")

# approximate (E [MeV], Gamma [keV]) pole seeds per (wave, charge); the
# searches only need proximity, the solver refines to |dk| < 1e-11
_POLE_SEEDS = {
    ("s12", 10.0): ((-24.4, 0.0), (1.1, 135.0)),
    ("s12", 8.0): ((-25.6, 0.0), (0.46, 9.0)),
    ("d52", 10.0): ((1.48, 12.0),),
    ("d52", 8.0): ((0.67, 0.5),),
    ("d32", 10.0): ((5.07, 1350.0),),
    ("d32", 8.0): ((4.30, 1090.0),),
}


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Complete, deterministic description of a run.

    Units: depths MeV, lengths fm, momenta fm^-1, charges dimensionless,
    C_c MeV fm, hbar2_over_2m MeV fm^2.
    """

    version: int = SCHEMA_VERSION
    # potential (Woods-Saxon + smeared Coulomb)
    V_o: float = 52.0
    V_so: float = 5.0
    R_0: float = 3.0
    d: float = 0.65
    alpha: float | None = None  # None -> 3 sqrt(pi) / (4 R_0)
    C_c: float = 1.43996
    hbar2_over_2m: float = 20.7385
    Z_basis: float = 10.0
    Z_diag: float = 8.0
    # case selection
    waves: tuple = ("s12",)
    schemes: tuple = ("offdiag",)
    ngl: tuple = (120,)
    # discretization
    grid_R: float = 15.0
    grid_n: int = 300
    rotation_R: float = 15.0
    cut_radius: dict = field(default_factory=lambda: {
        "s12": 75.0, "d52": 75.0, "d32": 35.0})
    cut_nodes_per_fm: int = 20
    # quadrature-error study sweep ("point" means the unsmeared limit)
    qs_alphas: tuple = (0.25, 0.45, 0.65, "point")
    qs_kmax: tuple = (1.0, 2.0, 4.0)
    qs_ngl: tuple = (50, 100, 200)
    # output
    digits: int | None = None  # None -> shortest round-trip floats

    def __post_init__(self):
        if self.version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        for w in self.waves:
            if w not in WAVES:
                raise ConfigError(f"unknown wave {w!r} (use s12/d52/d32)")
        for s in self.schemes:
            if s not in _SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        if not self.waves or not self.schemes or not self.ngl:
            raise ConfigError("waves, schemes and ngl must be non-empty")
        if any(int(n) <= 0 for n in self.ngl):
            raise ConfigError("ngl entries must be positive")
        for w in self.waves:
            if w not in self.cut_radius:
                raise ConfigError(f"no cut radius for wave {w!r}")
        if self.digits is not None and not 1 <= self.digits <= 17:
            raise ConfigError("digits must be in [1, 17]")
        for a in self.qs_alphas:
            if a != "point" and not (isinstance(a, (int, float)) and a > 0):
                raise ConfigError(
                    f"qs_alphas entries must be positive or 'point', "
                    f"got {a!r}")
        if any(float(k) <= 0 for k in self.qs_kmax):
            raise ConfigError("qs_kmax entries must be positive")
        if any(int(n) <= 0 for n in self.qs_ngl):
            raise ConfigError("qs_ngl entries must be positive")
        object.__setattr__(self, "waves", tuple(self.waves))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "ngl", tuple(int(n) for n in self.ngl))
        object.__setattr__(self, "cut_radius", dict(self.cut_radius))
        object.__setattr__(self, "qs_alphas", tuple(
            "point" if a == "point" else float(a) for a in self.qs_alphas))
        object.__setattr__(self, "qs_kmax",
                           tuple(float(k) for k in self.qs_kmax))
        object.__setattr__(self, "qs_ngl",
                           tuple(int(n) for n in self.qs_ngl))

    # ------------------------------------------------------- derived

    def potential_params(self, Z: float) -> PotentialParams:
        alpha = self.alpha
        if alpha is None:
            alpha = 3.0 * np.sqrt(np.pi) / (4.0 * self.R_0)
        return PotentialParams(V_o=self.V_o, V_so=self.V_so, R_0=self.R_0,
                               d=self.d, alpha=alpha, Z_c=Z, C_c=self.C_c,
                               hbar2_over_2m=self.hbar2_over_2m)

    @property
    def delta_Zc(self) -> float:
        return self.Z_diag - self.Z_basis

    def pole_seeds(self, wave: str, Z: float):
        """Momentum seeds k = sqrt((E - i Gamma/2 [MeV]) / (hbar^2/2m))."""
        try:
            pairs = _POLE_SEEDS[(wave, Z)]
        except KeyError:
            raise ConfigError(
                f"no built-in pole seeds for wave {wave!r} at Z={Z}; "
                f"charges other than 10/8 need explicit seeds") from None
        return tuple(np.sqrt((E - 0.5e-3j * G) / self.hbar2_over_2m)
                     for E, G in pairs)

    def format_float(self, x: float) -> str:
        if self.digits is None:
            return repr(float(x))
        return f"{x:.{self.digits}g}"


_FIELDS = {f.name for f in fields(RunConfig)}


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    return parse_config(data if data is not None else {})


def dump_config(cfg: RunConfig) -> str:
    """Effective-config YAML; load_config(dump) == cfg."""
    data = {}
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = list(v)
        data[f.name] = v
    return yaml.safe_dump(data, sort_keys=True)
