"""Discretized Berggren bases.

A basis for one partial wave consists of the discrete poles (bound and
resonant states lying between the real k-axis and the contour) followed
by Dirac-delta-normalized scattering states at the Gauss-Legendre nodes
of a complex momentum contour.  With the quadrature weights absorbed as
sqrt(w_i) factors the completeness relation

    sum_n u_n(r) u_n(r') + int_{L+} u_k(r) u_k(r') dk ~ delta(r - r')

turns into an ordinary finite sum over basis states.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .coulomb import CoulombParams, coulomb_F_and_derivative
from .potential import PartialWave, PotentialParams, sommerfeld_eta
from .radial import BerggrenState, NearPoleError, RadialGrid, make_scattering

log = logging.getLogger(__name__)

__all__ = [
    "ContourError",
    "ContourSpec",
    "DiscretizedBasis",
    "build_basis",
    "default_contour",
    "gauss_legendre_on_contour",
    "load_basis",
    "resolve_kmin",
    "save_basis",
]

# contour polylines (after the k_min vertex), per partial wave
_DEFAULT_TAIL = {
    "s1/2": (0.25 - 0.1j, 1.0 + 0j, 4.0 + 0j),
    "d5/2": (0.25 - 0.1j, 1.0 + 0j, 4.0 + 0j),
    "d3/2": (0.4 - 0.39j, 1.0 + 0j, 4.0 + 0j),
}


class ContourError(ValueError):
    """Invalid contour specification."""


@dataclass(frozen=True)
class ContourSpec:
    """Polyline momentum contour with per-segment node counts.

    vertices : complex momenta in fm^-1; first and last must be real
        (the contour starts and ends on the real axis).
    n_per_segment : Gauss-Legendre node count on each segment.
    """

    vertices: tuple
    n_per_segment: tuple

    def __post_init__(self):
        v = tuple(complex(x) for x in self.vertices)
        n = tuple(int(m) for m in self.n_per_segment)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "n_per_segment", n)
        if len(v) < 2:
            raise ContourError("contour needs at least two vertices")
        if len(n) != len(v) - 1:
            raise ContourError("need one node count per segment")
        if abs(v[0].imag) > 0 or abs(v[-1].imag) > 0:
            raise ContourError("contour must start and end on the real axis")
        if any(m <= 0 for m in n):
            raise ContourError("node counts must be positive")
        for a, b in zip(v, v[1:]):
            if a == b:
                raise ContourError(f"zero-length segment at {a}")

    @property
    def k_min(self) -> float:
        return self.vertices[0].real

    @property
    def k_max(self) -> float:
        return self.vertices[-1].real

    @property
    def n_total(self) -> int:
        return sum(self.n_per_segment)


def default_contour(pw: PartialWave, k_min: float,
                    n_gl: int) -> ContourSpec:
    """Standard three-segment contour for a partial wave.

    Nodes are split equally over the three segments, so n_gl must be a
    multiple of 3.
    """
    try:
        tail = _DEFAULT_TAIL[pw.label]
    except KeyError:
        raise ContourError(f"no default contour for {pw.label}") from None
    if n_gl % 3 != 0:
        raise ContourError("n_gl must be a multiple of 3 for the equal split")
    m = n_gl // 3
    return ContourSpec((complex(k_min),) + tail, (m, m, m))


def gauss_legendre_on_contour(spec: ContourSpec):
    """Nodes and weights of segment-wise Gauss-Legendre quadrature.

    Each segment [a, b] carries the affine image of the standard rule,
    so the complex weights satisfy sum(w) = b - a exactly.
    """
    ks, ws = [], []
    for a, b, m in zip(spec.vertices, spec.vertices[1:], spec.n_per_segment):
        x, w = np.polynomial.legendre.leggauss(m)
        ks.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ks), np.concatenate(ws)


def resolve_kmin(p: PotentialParams, pw: PartialWave, R: float,
                 target: float = 1e-5, Z: float | None = None) -> float:
    """Smallest real momentum with non-negligible interior amplitude.

    Root of |F(k R)| + |k F'(k R)| = target on (0, 0.3] fm^-1, found by
    bisection.  Below this momentum the regular solution is suppressed
    by the Coulomb barrier and the contour can start there instead of
    at k = 0.
    """
    Z = p.Z_c if Z is None else Z

    def cond(k):
        eta = sommerfeld_eta(k, Z, p)
        f, fp = coulomb_F_and_derivative(CoulombParams(pw.ell, eta), k * R)
        return abs(f) + abs(k * fp) - target

    lo, hi = 1e-4, 0.3
    flo, fhi = cond(lo), cond(hi)
    if flo >= 0 or fhi <= 0:
        raise ContourError(
            f"no sign change for k_min in [{lo}, {hi}] (f={flo:.3g}, "
            f"{fhi:.3g})")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cond(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DiscretizedBasis:
    """Ordered basis: discrete poles first, then contour states."""

    states: tuple
    n_res: int
    contour: ContourSpec

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def momenta(self) -> np.ndarray:
        return np.array([s.k for s in self.states])

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.e for s in self.states])

    @property
    def scattering(self) -> tuple:
        return self.states[self.n_res:]


def build_basis(spec: ContourSpec, poles, p: PotentialParams,
                pw: PartialWave, grid: RadialGrid,
                Z: float | None = None) -> DiscretizedBasis:
    """Assemble poles + delta-normalized contour states with weights."""
    for st in poles:
        if not st.is_discrete:
            raise ValueError("poles must be discrete states")
    ks, ws = gauss_legendre_on_contour(spec)
    states = list(poles)
    for k, w in zip(ks, ws):
        try:
            states.append(make_scattering(k, p, pw, grid, Z=Z, w=w))
        except NearPoleError as exc:
            raise ContourError(
                f"contour node k={k} sits on a pole; move the contour "
                f"({exc})") from exc
    return DiscretizedBasis(tuple(states), len(poles), spec)


_FORMAT_VERSION = 1

_KINDS = ("bound", "resonant", "scattering")


def save_basis(path, basis: DiscretizedBasis) -> None:
    """Write a basis snapshot (versioned .npz)."""
    st0 = basis.states[0]
    p = st0.params
    np.savez_compressed(
        path,
        version=np.int64(_FORMAT_VERSION),
        vertices=np.array(basis.contour.vertices, dtype=complex),
        n_per_segment=np.array(basis.contour.n_per_segment, dtype=np.int64),
        n_res=np.int64(basis.n_res),
        ell=np.int64(st0.pw.ell),
        two_j=np.int64(st0.pw.two_j),
        grid_R=np.float64(st0.grid.R),
        grid_nodes=st0.grid.nodes,
        grid_weights=st0.grid.weights,
        params=np.array([p.V_o, p.V_so, p.R_0, p.d, p.alpha, p.Z_c,
                         p.C_c, p.hbar2_over_2m]),
        kind=np.array([_KINDS.index(s.kind) for s in basis.states],
                      dtype=np.int64),
        k=np.array([s.k for s in basis.states], dtype=complex),
        e=np.array([s.e for s in basis.states], dtype=complex),
        eta=np.array([s.eta for s in basis.states], dtype=complex),
        w=np.array([s.w for s in basis.states], dtype=complex),
        C_plus=np.array([s.C_plus for s in basis.states], dtype=complex),
        C_minus=np.array([s.C_minus for s in basis.states], dtype=complex),
        u=np.array([s.u_interior for s in basis.states], dtype=complex),
    )


def load_basis(path) -> DiscretizedBasis:
    """Read a basis snapshot written by save_basis."""
    d = np.load(path)
    if int(d["version"]) != _FORMAT_VERSION:
        raise ValueError(f"unsupported basis format v{int(d['version'])}")
    pw = PartialWave(int(d["ell"]), int(d["two_j"]))
    grid = RadialGrid(R=float(d["grid_R"]), nodes=d["grid_nodes"],
                      weights=d["grid_weights"])
    pv = d["params"]
    p = PotentialParams(V_o=pv[0], V_so=pv[1], R_0=pv[2], d=pv[3],
                        alpha=pv[4], Z_c=pv[5], C_c=pv[6],
                        hbar2_over_2m=pv[7])
    states = tuple(
        BerggrenState(kind=_KINDS[int(d["kind"][i])], k=complex(d["k"][i]),
                      e=complex(d["e"][i]), eta=complex(d["eta"][i]),
                      w=complex(d["w"][i]), u_interior=d["u"][i],
                      C_plus=complex(d["C_plus"][i]),
                      C_minus=complex(d["C_minus"][i]),
                      pw=pw, grid=grid, params=p)
        for i in range(len(d["k"])))
    contour = ContourSpec(tuple(d["vertices"]), tuple(d["n_per_segment"]))
    return DiscretizedBasis(states, int(d["n_res"]), contour)
