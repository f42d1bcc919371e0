"""Contour discretization and Berggren-basis assembly tests."""

import numpy as np
import pytest

from berggren.basis import (
    ContourError,
    ContourSpec,
    build_basis,
    default_contour,
    gauss_legendre_on_contour,
    load_basis,
    resolve_kmin,
    save_basis,
)
from berggren.coulomb import CoulombParams, coulomb_F_and_derivative
from berggren.potential import (
    HBAR2_OVER_2M_CALIBRATED,
    PartialWave,
    PotentialParams,
    sommerfeld_eta,
)
from berggren.radial import NoDecayError, RadialGrid, berggren_overlap, \
    find_pole, make_scattering

S12 = PartialWave(0, 1)
D52 = PartialWave(2, 5)
P_BASIS = PotentialParams(Z_c=10.0, hbar2_over_2m=HBAR2_OVER_2M_CALIBRATED)


@pytest.fixture(scope="module")
def grid():
    return RadialGrid.gauss_legendre(15.0, 300)


@pytest.fixture(scope="module")
def s12_poles(grid):
    return [find_pole(1.1j, P_BASIS, S12, grid),
            find_pole(0.23 - 0.015j, P_BASIS, S12, grid)]


@pytest.fixture(scope="module")
def s12_basis_45(grid, s12_poles):
    km = resolve_kmin(P_BASIS, S12, grid.R)
    return build_basis(default_contour(S12, km, 45), s12_poles,
                       P_BASIS, S12, grid)


# ------------------------------------------------------------- contour

def test_contour_validation():
    with pytest.raises(ContourError):
        ContourSpec((1.0,), ())
    with pytest.raises(ContourError):
        ContourSpec((0.0, 1.0), (10, 10))
    with pytest.raises(ContourError):
        ContourSpec((0.1j, 1.0), (10,))
    with pytest.raises(ContourError):
        ContourSpec((0.0, 0.5 - 0.1j, 4.0), (10, 0))
    with pytest.raises(ContourError):
        ContourSpec((0.0, 0.0, 4.0), (10, 10))


def test_contour_may_start_at_zero():
    spec = ContourSpec((0.0, 0.25 - 0.1j, 1.0, 4.0), (5, 5, 5))
    assert spec.k_min == 0.0
    assert spec.n_total == 15


def test_quadrature_integrates_one_and_k():
    spec = ContourSpec((0.0, 0.25 - 0.1j, 1.0, 4.0), (15, 15, 15))
    ks, ws = gauss_legendre_on_contour(spec)
    v = spec.vertices
    for s, (a, b) in enumerate(zip(v, v[1:])):
        sl = slice(15 * s, 15 * (s + 1))
        assert np.sum(ws[sl]) == pytest.approx(b - a, rel=1e-14)
        assert np.sum(ws[sl] * ks[sl]) == pytest.approx(
            (b * b - a * a) / 2, rel=1e-13)


def test_quadrature_degree_29_exact():
    a, b = 0.25 - 0.1j, 1.0 + 0j
    spec = ContourSpec((0.0, a, b.real), (15, 15))
    ks, ws = gauss_legendre_on_contour(spec)
    sl = slice(15, 30)
    got = np.sum(ws[sl] * ks[sl] ** 29)
    exact = (b ** 30 - a ** 30) / 30
    assert got == pytest.approx(exact, rel=1e-13)


def test_default_contours():
    spec = default_contour(S12, 0.05, 120)
    assert spec.vertices == (0.05 + 0j, 0.25 - 0.1j, 1.0 + 0j, 4.0 + 0j)
    assert spec.n_per_segment == (40, 40, 40)
    d32 = default_contour(PartialWave(2, 3), 0.0, 45)
    assert d32.vertices[1] == 0.4 - 0.39j
    with pytest.raises(ContourError):
        default_contour(S12, 0.05, 100)  # not a multiple of 3


# --------------------------------------------------------------- k_min

def test_resolve_kmin_root_contract(grid):
    km = resolve_kmin(P_BASIS, S12, grid.R)
    eta = sommerfeld_eta(km, 10.0, P_BASIS)
    f, fp = coulomb_F_and_derivative(CoulombParams(0, eta), km * grid.R)
    assert abs(f) + abs(km * fp) == pytest.approx(1e-5, abs=1e-9)


def test_resolve_kmin_condition_monotone(grid):
    def cond(k):
        eta = sommerfeld_eta(k, 10.0, P_BASIS)
        f, fp = coulomb_F_and_derivative(CoulombParams(0, eta), k * grid.R)
        return abs(f) + abs(k * fp)

    # monotone through the root region (the condition only turns over
    # near k ~ 0.27 where |F| starts oscillating, far above the root)
    vals = [cond(k) for k in np.linspace(0.01, 0.2, 20)]
    assert np.all(np.diff(vals) > 0)


# --------------------------------------------------------------- basis

def test_build_basis_ordering_and_counts(s12_basis_45):
    b = s12_basis_45
    assert b.n_res == 2  # 0s1/2 bound + 1s1/2 resonant
    assert b.n == 2 + 45
    assert b.states[0].kind == "bound"
    assert b.states[1].kind == "resonant"
    assert all(s.kind == "scattering" for s in b.states[2:])
    ks, ws = gauss_legendre_on_contour(b.contour)
    assert np.allclose([s.k for s in b.scattering], ks)
    assert np.allclose([s.w for s in b.scattering], ws)


def test_build_basis_rejects_scattering_pole(grid, s12_poles):
    st = make_scattering(0.5, P_BASIS, S12, grid)
    with pytest.raises(ValueError):
        build_basis(default_contour(S12, 0.05, 45), [st], P_BASIS, S12, grid)


def test_completeness_on_gaussian(grid, s12_poles):
    km = resolve_kmin(P_BASIS, S12, grid.R)
    basis = build_basis(default_contour(S12, km, 120), s12_poles,
                        P_BASIS, S12, grid)
    g = np.exp(-0.5 * (grid.nodes - 5.0) ** 2)
    target = grid.integrate(g * g)
    total = sum(s.w * grid.integrate(s.u_interior * g) ** 2
                for s in basis.states)
    assert abs(total - target) < 1e-4 * target


def test_discretized_orthonormality(s12_basis_45):
    b = s12_basis_45

    def entry(i, j):
        a, c = b.states[i], b.states[j]
        return np.sqrt(a.w) * np.sqrt(c.w) * berggren_overlap(a, c)

    # discrete diagonal entries are exactly the unit Berggren norms
    assert entry(0, 0) == pytest.approx(1.0, abs=1e-10)
    assert entry(1, 1) == pytest.approx(1.0, abs=1e-10)
    # off-diagonal entries vanish to quadrature accuracy
    for i, j in [(0, 1), (0, 10), (1, 20), (2, 3), (5, 30), (10, 44)]:
        assert abs(entry(i, j)) < 1e-3
    # a scattering diagonal is the delta(0) divergence: the (+,-) cross
    # component has kappa = 0 and no admissible rotation exists
    with pytest.raises(NoDecayError):
        entry(5, 5)


def test_basis_roundtrip(tmp_path, s12_basis_45):
    path = tmp_path / "basis.npz"
    save_basis(path, s12_basis_45)
    b2 = load_basis(path)
    assert b2.n == s12_basis_45.n
    assert b2.n_res == s12_basis_45.n_res
    assert b2.contour.vertices == s12_basis_45.contour.vertices
    for s, t in zip(b2.states, s12_basis_45.states):
        assert s.kind == t.kind
        assert s.k == t.k and s.w == t.w
        assert s.C_plus == t.C_plus and s.C_minus == t.C_minus
        assert np.array_equal(s.u_interior, t.u_interior)
    assert b2.states[3].pw.label == "s1/2"
    assert b2.states[3].params.Z_c == 10.0
