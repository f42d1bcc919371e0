"""Radial Schrödinger solver, pole search, and complex-ray continuation.

Solves

    u'' = [ l(l+1)/r^2 + (V(r) - e)/(hbar^2/2m) ] u,   e = (hbar^2/2m) k^2,

on [0, R] with the regular start u ~ r^{l+1}, matches to the outgoing /
incoming Coulomb pair at R,

    u(r) = C+ H+_{l eta}(kr) + C- H-_{l eta}(kr),   r >= R,

and continues the exterior components u^w(z) = C^w H^w(k z) along rays
z(x) = R + x e^{i theta}, theta in {+-pi/4, +-3pi/4}.  Discrete (bound /
resonant) states carry C- = 0 and Berggren norm 1 (bilinear, no complex
conjugation); scattering states are Dirac-delta normalized through
2 pi C+ C- = 1.

Overflow policy: exterior integrands are never built from H^w values
directly.  Each factor is represented as exp(i w phi(kz)) g(kz) with
phi(z) = z - eta ln 2z - l pi/2 + sigma_l; the phases of a product are
summed analytically before a single exponentiation, so the individually
huge/tiny factors never appear as floating-point numbers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .coulomb import (
    CoulombParams,
    CoulombEvaluationError,
    asym_factor_scalar,
    asym_factor_vec,
    coulomb_F_and_derivative,
    coulomb_H,
    sigma_l,
)
from .potential import PartialWave, PotentialParams, sommerfeld_eta, v_coul, v_ws

__all__ = [
    "RadialGrid",
    "BerggrenState",
    "RadialError",
    "PoleSearchError",
    "WrongPoleError",
    "NearPoleError",
    "NoDecayError",
    "ALLOWED_THETAS",
    "select_theta",
    "integrate_interior",
    "find_pole",
    "normalize_discrete",
    "make_scattering",
    "exterior_component",
    "TailH",
    "ray_pair_integral",
    "berggren_overlap",
    "berggren_norm",
]

log = logging.getLogger(__name__)

#: the four admissible rotation angles for exterior rays
ALLOWED_THETAS = (np.pi / 4, 3 * np.pi / 4, -3 * np.pi / 4, -np.pi / 4)

#: Re(pi eta) beyond which a scattering state is so deeply sub-barrier
#: that u is ~ sqrt(2/pi) F to far better than quadrature accuracy and
#: H+- at kR are no longer representable in double precision
_DEEP_BARRIER_PI_ETA = 40.0


class RadialError(Exception):
    """Base class for radial-solver failures."""


class PoleSearchError(RadialError):
    """Pole iteration did not converge; carries the iteration trace."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class WrongPoleError(RadialError):
    """Iteration converged far from the seeded pole."""


class NearPoleError(RadialError):
    """Scattering momentum accidentally close to a pole (|C+C-| ~ 0)."""


class NoDecayError(RadialError):
    """No admissible rotation angle yields exponential decay."""


@dataclass(frozen=True)
class RadialGrid:
    """Quadrature grid on (0, R): nodes/weights integrate smooth radial
    integrands; Gauss-Legendre of the stated order by construction."""

    R: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if n.ndim != 1 or n.shape != w.shape:
            raise ValueError("nodes/weights must be matching 1-d arrays")
        if not (np.all(np.diff(n) > 0) and n[0] > 0 and n[-1] < self.R):
            raise ValueError("nodes must increase strictly inside (0, R)")
        if not np.all(w > 0):
            raise ValueError("weights must be positive")

    @classmethod
    def gauss_legendre(cls, R: float, n: int = 300) -> "RadialGrid":
        x, w = leggauss(n)
        return cls(R=R, nodes=0.5 * R * (x + 1.0), weights=0.5 * R * w)

    def integrate(self, samples: np.ndarray) -> complex:
        return np.asarray(samples) @ self.weights


@dataclass(frozen=True, eq=False)
class BerggrenState:
    """One Berggren basis state (bound, resonant, or scattering).

    u_interior holds u(r) at the grid nodes with the state's final
    normalization; w is the contour quadrature weight (1 for discrete
    states) and is *not* folded into u_interior.
    """

    kind: str
    k: complex
    e: complex
    eta: complex
    w: complex
    u_interior: np.ndarray
    C_plus: complex
    C_minus: complex
    pw: PartialWave
    grid: RadialGrid
    params: PotentialParams

    def __post_init__(self):
        if self.kind not in ("bound", "resonant", "scattering"):
            raise ValueError(f"unknown state kind {self.kind!r}")

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("bound", "resonant")

    @property
    def E_MeV(self) -> float:
        return float(self.e.real)

    @property
    def Gamma_keV(self) -> float:
        return -2000.0 * float(self.e.imag)

    def coefficient(self, omega: int) -> complex:
        return self.C_plus if omega == +1 else self.C_minus


def select_theta(kappa: complex):
    """Rotation angle from {+-pi/4, +-3pi/4} for integrands ~ e^{i kappa z}.

    Picks the angle maximizing the decay rate Im(kappa e^{i theta}) along
    z = R + x e^{i theta}; raises NoDecayError when no angle decays
    (kappa = 0, i.e. a singular diagonal pairing).
    """
    rates = [(kappa * np.exp(1j * th)).imag for th in ALLOWED_THETAS]
    i = int(np.argmax(rates))
    if rates[i] <= 0.0:
        raise NoDecayError(f"no decaying rotation angle for kappa = {kappa}")
    return ALLOWED_THETAS[i], rates[i]


# ----------------------------------------------------------------------
# interior integration
# ----------------------------------------------------------------------

def _potential(r, p: PotentialParams, pw: PartialWave, Z: float):
    return v_ws(r, p, pw) + v_coul(r, Z, p)


def _frobenius_coeffs(e: complex, p: PotentialParams, pw: PartialWave,
                      Z: float):
    """First two corrections of u = r^{l+1}(1 + c1 r + c2 r^2 + ...).

    The potential behaves as q_{-1}/r + q_0 + O(r) near the origin: the
    1/r piece comes from the spin-orbit term (its form factor |df/dr|/r),
    the finite piece collects the central, spin-orbit-slope, and smeared
    Coulomb values at r = 0.
    """
    h2m = p.hbar2_over_2m
    x0 = np.exp(-p.R_0 / p.d)
    A0 = x0 / (p.d * (1.0 + x0) ** 2)            # |df/dr| at r=0
    A1 = x0 * (1.0 - x0) / (p.d ** 2 * (1.0 + x0) ** 3)  # d|df/dr|/dr at 0
    ls = pw.ls_eigenvalue
    q_m1 = -4.0 * ls * p.V_so * A0
    q_0 = (-p.V_o / (1.0 + x0) - 4.0 * ls * p.V_so * A1
           + p.C_c * Z * 2.0 * p.alpha / np.sqrt(np.pi))
    w_m1 = q_m1 / h2m
    w_0 = (q_0 - e) / h2m
    ell = pw.ell
    c1 = w_m1 / (2.0 * ell + 2.0)
    c2 = (w_m1 * c1 + w_0) / (2.0 * (2.0 * ell + 3.0))
    return c1, c2


def integrate_interior(k: complex, p: PotentialParams, pw: PartialWave,
                       grid: RadialGrid, Z: float | None = None,
                       r_eval: np.ndarray | None = None,
                       r_end: float | None = None):
    """Regular solution of the radial equation from the origin to R.

    Returns (u at r_eval or grid nodes, u(r_end), u'(r_end)) with r_end
    defaulting to grid.R; scale fixed by u ~ r^{l+1} at the origin.  Z
    defaults to params.Z_c.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    Z = p.Z_c if Z is None else Z
    h2m = p.hbar2_over_2m
    e = h2m * k * k
    ell = pw.ell
    c1, c2 = _frobenius_coeffs(e, p, pw, Z)

    r_out = grid.nodes if r_eval is None else np.asarray(r_eval, dtype=float)
    R_end = max(grid.R if r_end is None else r_end, r_out[-1])
    r0 = min(5e-4, 0.5 * r_out[0])

    def series(r):
        r = np.asarray(r, dtype=float)
        u = r ** (ell + 1) * (1.0 + c1 * r + c2 * r * r)
        up = r ** ell * ((ell + 1) + (ell + 2) * c1 * r
                         + (ell + 3) * c2 * r * r)
        return u, up

    def rhs(r, y):
        V = _potential(r, p, pw, Z)
        w = ell * (ell + 1) / (r * r) + (V - e) / h2m
        return [y[1], w * y[0]]

    u0, up0 = series(r0)
    small = r_out < r0
    t_eval = np.concatenate([r_out[~small], [R_end]]) if r_out[~small].size \
        else np.array([R_end])
    # t_eval must be increasing and unique for solve_ivp
    t_eval = np.unique(t_eval)
    sol = solve_ivp(rhs, (r0, R_end), np.array([u0, up0], dtype=complex),
                    method="DOP853", rtol=1e-12, atol=1e-300, t_eval=t_eval,
                    dense_output=True)
    if not sol.success:
        raise RadialError(f"interior integration failed at k={k}")
    u = np.empty(r_out.shape, dtype=complex)
    u[small] = series(r_out[small])[0]
    u[~small] = sol.sol(r_out[~small])[0]
    uR, duR = sol.sol(R_end)
    return u, complex(uR), complex(duR)


def _shoot_outward(k: complex, p: PotentialParams, pw: PartialWave,
                   Z: float, r_m: float):
    """(u, u') of the regular solution at r_m (origin series start)."""
    e = p.hbar2_over_2m * k * k
    ell = pw.ell
    c1, c2 = _frobenius_coeffs(e, p, pw, Z)
    r0 = 5e-4
    u0 = r0 ** (ell + 1) * (1.0 + c1 * r0 + c2 * r0 * r0)
    up0 = r0 ** ell * ((ell + 1) + (ell + 2) * c1 * r0 + (ell + 3) * c2
                       * r0 * r0)

    def rhs(r, y):
        V = _potential(r, p, pw, Z)
        w = ell * (ell + 1) / (r * r) + (V - e) / p.hbar2_over_2m
        return [y[1], w * y[0]]

    sol = solve_ivp(rhs, (r0, r_m), np.array([u0, up0], dtype=complex),
                    method="DOP853", rtol=1e-12, atol=1e-300)
    if not sol.success:
        raise RadialError(f"outward shooting failed at k={k}")
    return sol.y[0, -1], sol.y[1, -1]


# ----------------------------------------------------------------------
# exterior ray evaluation
# ----------------------------------------------------------------------

class TailH:
    """H^omega(k z(x)) along a ray z(x) = R + x e^{i theta}, split as
    exp(log_phase(x)) * g(x).

    g is obtained from the asymptotic series where it converges on the
    (branch-continued) ray and otherwise by propagating the modulating
    ODE

        g_xx = -2 i w c (1 - eta/zeta) g_x - c^2 (i w eta - eta^2
               - l(l+1)) / zeta^2 g,   c = k e^{i theta},

    in the direction in which the contaminating second solution decays:
    outward when Im(k e^{i theta}) has the sign opposite to omega,
    inward from an asymptotic anchor otherwise.  The phase uses the
    continuous branch arg(k) + arg(z(x)), which continues H across the
    cut of ln z for rays that wrap past the negative real axis.
    """

    def __init__(self, ell: int, eta: complex, k: complex, R: float,
                 omega: int, theta: float):
        if omega not in (+1, -1):
            raise ValueError("omega must be +1 or -1")
        self.ell, self.eta, self.k = ell, complex(eta), complex(k)
        self.R, self.omega, self.theta = float(R), omega, float(theta)
        self._c = self.k * np.exp(1j * self.theta)
        self._argk = float(np.angle(self.k))
        self._sigma = sigma_l(ell, self.eta)
        # sign of d Im(zeta)/dx: positive means H^omega decays outward,
        # so the contaminating solution grows and outward ODE use is
        # forbidden
        self._grow_out = omega * self._c.imag > 0.0
        self._out_sols = []   # dense solutions, contiguous from x = 0
        self._out_end = None  # (x, g, g_x) at the outward frontier
        self._in_sol = None   # dense solution of one inward sweep
        self._in_range = (0.0, 0.0)

    # -- geometry -----------------------------------------------------

    def z(self, x):
        return self.R + np.asarray(x, dtype=float) * np.exp(1j * self.theta)

    def zeta(self, x):
        return self.k * self.z(x)

    def _angle(self, x):
        """Continuous arg of zeta along the ray (may exceed +-pi)."""
        return self._argk + np.angle(self.z(x))

    def log_phase(self, x):
        """i omega phi(zeta(x)) with the continued-branch logarithm."""
        zt = self.zeta(x)
        ln = np.log(np.abs(2.0 * zt)) + 1j * self._angle(x)
        phi = zt - self.eta * ln - self.ell * np.pi / 2.0 + self._sigma
        return 1j * self.omega * phi

    # -- modulating factor g ------------------------------------------

    def _ode_rhs(self, x, y):
        zt = self.k * (self.R + x * np.exp(1j * self.theta))
        q = 1j * self.omega * self.eta - self.eta ** 2 \
            - self.ell * (self.ell + 1)
        gxx = (-2j * self.omega * self._c * (1.0 - self.eta / zt) * y[1]
               - self._c * self._c * q / (zt * zt) * y[0])
        return [y[1], gxx]

    def _series_anchor(self, x):
        """(g, g_x) from the asymptotic series at a single ray point."""
        g, gz, ok = asym_factor_scalar(self.omega, self.ell, self.eta,
                                       self.zeta(x))
        if not ok:
            raise CoulombEvaluationError(self.ell, self.eta, self.zeta(x),
                                         "anchor series did not converge")
        return g, gz * self._c

    def _origin_anchor(self):
        """(g, g_x) at x = 0 from the general-purpose evaluator."""
        p = CoulombParams(self.ell, self.eta)
        z0 = self.k * self.R
        h, hp = coulomb_H(self.omega, p, z0)
        ph = np.exp(-self.log_phase(0.0))
        g = h * ph
        gz = hp * ph - 1j * self.omega * (1.0 - self.eta / z0) * g
        return g, gz * self._c

    def _solve(self, x_from, x_to, y0):
        sol = solve_ivp(self._ode_rhs, (x_from, x_to), np.array(y0, complex),
                        method="DOP853", rtol=1e-12, atol=1e-13,
                        dense_output=True)
        if not sol.success:
            raise RadialError(
                f"g-factor propagation failed on ray theta={self.theta}")
        return sol

    def _extend_outward(self, x_max):
        if self._out_end is None:
            g, gx = self._origin_anchor()
            self._out_end = (0.0, g, gx)
        x0, g, gx = self._out_end
        if x_max > x0:
            sol = self._solve(x0, x_max, [g, gx])
            self._out_sols.append(sol)
            ge, gxe = sol.sol(x_max)
            self._out_end = (x_max, ge, gxe)

    def _eval_outward(self, x):
        out = np.empty(x.shape, dtype=complex)
        done = np.zeros(x.shape, dtype=bool)
        if self._out_end is not None and self._out_end[0] == 0.0 \
                and not self._out_sols:
            at0 = x == 0.0
            out[at0] = self._out_end[1]
            done |= at0
        for sol in self._out_sols:
            lo, hi = sol.t[0], sol.t[-1]
            m = ~done & (x >= lo) & (x <= hi)
            if m.any():
                out[m] = sol.sol(x[m])[0]
                done |= m
        if not done.all():
            raise RadialError("outward g coverage incomplete")
        return out

    def _ensure_inward(self, x_max):
        lo, hi = self._in_range
        if self._in_sol is not None and x_max <= hi:
            return
        xa = max(x_max, 1e-6)
        for _ in range(40):
            _, _, ok = asym_factor_scalar(self.omega, self.ell, self.eta,
                                          self.zeta(xa))
            # reject anchors outside the trusted series sector
            ang = self.omega * self._angle(xa)
            if ok and -np.pi / 2.0 <= ang <= np.pi:
                break
            xa *= 1.6
        else:
            raise RadialError(
                f"no asymptotic anchor on ray theta={self.theta}, k={self.k}")
        g, gx = self._series_anchor(xa)
        self._in_sol = self._solve(xa, 0.0, [g, gx])
        self._in_range = (0.0, xa)

    def g(self, x):
        """Modulating factor g at ray abscissae x (array)."""
        x = np.asarray(x, dtype=float)
        zt = self.zeta(x)
        gs, ok = asym_factor_vec(self.omega, self.ell, self.eta, zt,
                                 angle=self._angle(x))
        if ok.all():
            return gs
        bad = ~ok
        x_bad_max = float(x[bad].max())
        out = np.array(gs, dtype=complex)
        if self._grow_out:
            self._ensure_inward(x_bad_max)
            inside = bad & (x <= self._in_range[1])
            out[inside] = self._in_sol.sol(x[inside])[0]
            rest = bad & ~inside
            if rest.any():
                raise RadialError("inward g coverage incomplete")
        else:
            self._extend_outward(x_bad_max)
            out[bad] = self._eval_outward(x[bad])
        return out

    def values(self, x):
        """C-free H^omega(k z(x)); prefer log_phase/g for products."""
        x = np.asarray(x, dtype=float)
        return np.exp(self.log_phase(x)) * self.g(x)


def exterior_component(state: BerggrenState, omega: int, theta: float,
                       x) -> np.ndarray | complex:
    """C^omega H^omega(k z(x)) on the ray z(x) = R + x e^{i theta}."""
    if not any(np.isclose(theta, t) for t in ALLOWED_THETAS):
        raise ValueError(f"theta = {theta} not among the admissible angles")
    c = state.coefficient(omega)
    if c == 0:
        return np.zeros(np.shape(x)) if np.ndim(x) else 0.0
    tail = TailH(state.pw.ell, state.eta, state.k, state.grid.R, omega, theta)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    vals = c * np.exp(tail.log_phase(xa)) * tail.g(xa)
    return complex(vals[0]) if scalar else vals


# ----------------------------------------------------------------------
# improper ray integrals
# ----------------------------------------------------------------------

_PANEL_X, _PANEL_W = leggauss(32)


def ray_pair_integral(tail_a: TailH, tail_b: TailH, decay: float,
                      extra=None, rel_tol: float = 1e-15,
                      max_panels: int = 80) -> complex:
    """integral over x of exp(lp_a + lp_b) g_a g_b * extra(z) dx.

    Both tails must share the ray (R, theta).  `decay` is the exponential
    decay rate Im(kappa e^{i theta}) of the summed phase; it sets the
    panel layout (geometric, resolving the 1/z region near R first).
    `extra` maps ray points z to an algebraic factor (default 1/z is NOT
    implied -- pass it explicitly).  Truncation: panels stop once one
    contributes < rel_tol of the accumulated magnitude.
    """
    if decay <= 0.0:
        raise NoDecayError("ray integral requires a positive decay rate")
    R = tail_a.R
    h = min(R, 2.0 / decay)
    total = 0.0 + 0.0j
    x_lo = 0.0
    for _ in range(max_panels):
        x_hi = x_lo + h
        xs = x_lo + 0.5 * h * (_PANEL_X + 1.0)
        ws = 0.5 * h * _PANEL_W
        lp = tail_a.log_phase(xs) + tail_b.log_phase(xs)
        vals = np.exp(lp) * tail_a.g(xs) * tail_b.g(xs)
        if extra is not None:
            vals = vals * extra(tail_a.z(xs))
        part = vals @ ws
        total += part
        if abs(part) < rel_tol * max(abs(total), 1e-300):
            return total
        x_lo = x_hi
        h *= 1.6
    log.warning("ray integral hit the panel cap (decay=%g)", decay)
    return total


# ----------------------------------------------------------------------
# matching, normalization, state construction
# ----------------------------------------------------------------------

def _match_coefficients(k, eta, ell, uR, duR, R):
    """(C+, C-) from u(R), u'(R) via the H+- Wronskian (-2i)."""
    p = CoulombParams(ell, eta)
    z0 = k * R
    hp, hpp = coulomb_H(+1, p, z0)
    hm, hmp = coulomb_H(-1, p, z0)
    det = -2j * k
    C_plus = (uR * k * hmp - duR * hm) / det
    C_minus = (duR * hp - uR * k * hpp) / det
    return C_plus, C_minus


def berggren_overlap(a: BerggrenState, b: BerggrenState,
                     extra=None) -> complex:
    """Bilinear overlap <a|b>: interior grid quadrature plus one rotated
    exterior ray integral per (omega_a, omega_b) component pair.

    No complex conjugation is applied anywhere.  With extra(z) supplied,
    the integrand gains that factor on both the interior nodes and the
    exterior rays (used for potential matrix elements).
    """
    if a.grid is not b.grid and not np.array_equal(a.grid.nodes,
                                                  b.grid.nodes):
        raise ValueError("states live on different radial grids")
    f = 1.0 if extra is None else extra(a.grid.nodes)
    total = a.grid.integrate(a.u_interior * b.u_interior * f)
    for oa in (+1, -1):
        ca = a.coefficient(oa)
        if ca == 0:
            continue
        for ob in (+1, -1):
            cb = b.coefficient(ob)
            if cb == 0:
                continue
            kappa = oa * a.k + ob * b.k
            if kappa == 0:
                raise NoDecayError(
                    "non-decaying exterior component (diagonal hit)")
            theta, decay = select_theta(kappa)
            ta = TailH(a.pw.ell, a.eta, a.k, a.grid.R, oa, theta)
            tb = TailH(b.pw.ell, b.eta, b.k, b.grid.R, ob, theta)
            total += ca * cb * np.exp(1j * theta) * ray_pair_integral(
                ta, tb, decay, extra=extra)
    return total


def berggren_norm(state: BerggrenState) -> complex:
    """Bilinear norm: the self-overlap of the state."""
    return berggren_overlap(state, state)


def normalize_discrete(state: BerggrenState) -> BerggrenState:
    """Rescale a discrete state to unit Berggren norm."""
    if not state.is_discrete:
        raise ValueError("normalize_discrete expects a bound/resonant state")
    if state.C_minus != 0:
        raise ValueError("discrete state must be purely outgoing (C- = 0)")
    n = berggren_norm(state)
    s = 1.0 / np.sqrt(n)
    return replace(state, u_interior=state.u_interior * s,
                   C_plus=state.C_plus * s)


def find_pole(k_guess: complex, p: PotentialParams, pw: PartialWave,
              grid: RadialGrid, Z: float | None = None,
              tol: float = 1e-11, max_iter: int = 100) -> BerggrenState:
    """Secant search for a purely outgoing (C- = 0) discrete state.

    The mismatch is the Wronskian of the regular solution shot outward
    from the origin with the purely outgoing solution shot inward from
    R, evaluated at the nuclear surface.  It is proportional to the
    coefficient of the inadmissible (growing) exponential in the regular
    solution and so crosses zero linearly in k at the eigenvalue, which
    keeps the secant iteration well-conditioned even for deep bound
    states where log-derivative defects at R are exponentially blind.
    """
    Z = p.Z_c if Z is None else Z
    # bake the charge override into the stored parameters so the state
    # remains self-describing (re-solvable from params alone)
    p = p if Z == p.Z_c else p.with_charge(Z)
    h2m = p.hbar2_over_2m
    r_m = min(grid.R, p.R_0 + 6.0 * p.d)

    def mismatch(k):
        eta = sommerfeld_eta(k, Z, p)
        e = h2m * k * k
        um, dum = _shoot_outward(k, p, pw, Z, r_m)

        h, hp = coulomb_H(+1, CoulombParams(pw.ell, eta), k * grid.R)
        scale = max(abs(h), abs(k * hp))

        def rhs(r, y):
            V = _potential(r, p, pw, Z)
            w = pw.ell * (pw.ell + 1) / (r * r) + (V - e) / h2m
            return [y[1], w * y[0]]

        sol = solve_ivp(rhs, (grid.R, r_m),
                        np.array([h / scale, k * hp / scale], dtype=complex),
                        method="DOP853", rtol=1e-12, atol=1e-300)
        if not sol.success:
            raise RadialError(f"inward shooting failed at k={k}")
        ue, due = sol.y[0, -1], sol.y[1, -1]
        return um * due - dum * ue

    trace = []
    k0 = complex(k_guess)
    k1 = k0 * (1.0 + 1e-4)
    f0, f1 = mismatch(k0), mismatch(k1)
    trace += [(k0, f0), (k1, f1)]
    converged = False
    for _ in range(max_iter):
        if f1 == f0:
            break
        step = -f1 * (k1 - k0) / (f1 - f0)
        # damp the secant step: the mismatch has poles of its own, and an
        # overshoot can land on momenta where the interior solve overflows
        cap = 0.25 * abs(k1)
        if abs(step) > cap:
            step *= cap / abs(step)
        k2 = k1 + step
        k0, f0, k1 = k1, f1, k2
        f1 = mismatch(k1)
        trace.append((k1, f1))
        if abs(k1 - k0) < tol:
            converged = True
            break
    if not converged:
        raise PoleSearchError(
            f"pole search from k={k_guess} did not converge", trace)
    k = k1
    e_guess = h2m * complex(k_guess) ** 2
    e = h2m * k * k
    if abs(e - e_guess) > 0.5 * abs(e_guess):
        raise WrongPoleError(
            f"converged to e={e} from seed e={e_guess} (jump > 50%)")

    eta = sommerfeld_eta(k, Z, p)
    r_match = min(grid.R, p.R_0 + 20.0 * p.d)
    if grid.R - r_match > 1e-9:
        # extended grid (e.g. a real-axis momentum cut): match where the
        # nuclear tail is negligible and continue with C+ H+ outward.
        # Integrating the ODE all the way to grid.R would bury a bound
        # state under growing-solution contamination and spoil C+.
        inner = grid.nodes <= r_match
        u = np.empty(grid.nodes.shape, dtype=complex)
        u[inner], uR, duR = integrate_interior(
            k, p, pw, grid, Z=Z, r_eval=grid.nodes[inner], r_end=r_match)
        C_plus, C_minus = _match_coefficients(k, eta, pw.ell, uR, duR,
                                              r_match)
        cp = CoulombParams(pw.ell, eta)
        u[~inner] = C_plus * np.array(
            [coulomb_H(+1, cp, k * r)[0] for r in grid.nodes[~inner]])
    else:
        u, uR, duR = integrate_interior(k, p, pw, grid, Z=Z)
        C_plus, C_minus = _match_coefficients(k, eta, pw.ell, uR, duR,
                                              grid.R)
    rel_leak = abs(C_minus) / abs(C_plus)
    if rel_leak > 1e-7:
        log.warning("pole at k=%s has residual C-/C+ = %.2e", k, rel_leak)
    kind = "bound" if e.real < 0 and abs(e.imag) < 1e-10 * abs(e.real) \
        else "resonant"
    state = BerggrenState(kind=kind, k=k, e=e, eta=eta, w=1.0,
                          u_interior=u / C_plus, C_plus=1.0, C_minus=0.0,
                          pw=pw, grid=grid, params=p)
    return normalize_discrete(state)


def _coulomb_F_or_zero(cp: CoulombParams, rho: complex) -> complex:
    """F(rho), with evaluation failures below the barrier read as a
    completely suppressed (underflowed) amplitude."""
    try:
        f, _ = coulomb_F_and_derivative(cp, rho)
    except CoulombEvaluationError:
        return 0.0
    return f if np.isfinite(f) else 0.0


def make_scattering(k: complex, p: PotentialParams, pw: PartialWave,
                    grid: RadialGrid, Z: float | None = None,
                    w: complex = 1.0) -> BerggrenState:
    """Dirac-delta normalized scattering state: 2 pi C+ C- = 1."""
    if k == 0:
        raise ValueError("k must be nonzero")
    Z = p.Z_c if Z is None else Z
    p = p if Z == p.Z_c else p.with_charge(Z)  # keep params self-describing
    eta = sommerfeld_eta(k, Z, p)
    e = p.hbar2_over_2m * k * k
    u, uR, duR = integrate_interior(k, p, pw, grid, Z=Z)

    if (np.pi * eta).real > _DEEP_BARRIER_PI_ETA:
        # deeply sub-barrier: u is sqrt(2/pi) F to exponential accuracy
        # and H+- overflow; delta normalization reduces to matching the
        # regular Coulomb function
        cp = CoulombParams(pw.ell, eta)
        f, _ = coulomb_F_and_derivative(cp, k * grid.R)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.sqrt(2.0 / np.pi) * f / uR
        if f == 0 or not np.isfinite(scale):
            # the delta-normalized amplitude sits at or below the
            # double-precision floor (F or the integrated solution
            # underflows on a large grid): rebuild the suppressed state
            # from the regular Coulomb function directly
            u = np.array([_coulomb_F_or_zero(cp, k * r)
                          for r in grid.nodes])
            scale = np.sqrt(2.0 / np.pi)
        C_plus = -0.5j * np.sqrt(2.0 / np.pi)
        C_minus = +0.5j * np.sqrt(2.0 / np.pi)
        return BerggrenState(kind="scattering", k=k, e=e, eta=eta, w=w,
                             u_interior=u * scale, C_plus=C_plus,
                             C_minus=C_minus, pw=pw, grid=grid, params=p)

    C_plus, C_minus = _match_coefficients(k, eta, pw.ell, uR, duR, grid.R)
    prod = C_plus * C_minus
    if abs(prod) < 1e-30:
        raise NearPoleError(f"k={k} too close to a pole (|C+C-|={abs(prod)})")
    s = 1.0 / np.sqrt(2.0 * np.pi * prod)
    return BerggrenState(kind="scattering", k=k, e=e, eta=eta, w=w,
                         u_interior=u * s, C_plus=C_plus * s,
                         C_minus=C_minus * s, pw=pw, grid=grid, params=p)
