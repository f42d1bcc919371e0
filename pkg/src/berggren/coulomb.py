"""Coulomb wave functions for complex argument and Sommerfeld parameter.

Evaluates the regular Coulomb function F_{l,eta}(z) and the outgoing /
incoming functions H^{+/-}_{l,eta}(z) for complex z off the cut ]-inf, 0]
and complex eta.  Double precision throughout; no arbitrary-precision
arithmetic is used on this path.

Evaluation ladder
-----------------
* origin power series for F (always convergent; used while cancellation
  stays controlled, otherwise pushed outward by ODE propagation),
* asymptotic series for H^{+/-} at large |z|,
* high-order ODE propagation of the Coulomb equation

      u'' = [ l(l+1)/z^2 + 2 eta / z - 1 ] u

  along straight complex segments between a trusted anchor and the
  requested point, always in the direction in which the propagated
  solution dominates (contamination by the second solution decays).

Conventions
-----------
sigma_l = [lnGamma(l+1+i eta) - lnGamma(l+1-i eta)] / (2i) with principal
lnGamma, H^{+/-} ~ exp[+/-i(z - eta ln 2z - l pi/2 + sigma_l)] for
|z| -> inf, F = (H^+ - H^-) / (2i), and the Wronskian

      H^+ dH^-/dz - dH^+/dz H^- = -2i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import erf as _scipy_erf
from scipy.special import loggamma

__all__ = [
    "CoulombParams",
    "CoulombError",
    "CoulombDomainError",
    "CoulombEvaluationError",
    "sigma_l",
    "coulomb_norm",
    "coulomb_F",
    "coulomb_F_and_derivative",
    "coulomb_H",
    "erf_real",
    "asym_factor_vec",
    "asym_factor_scalar",
    "WRONSKIAN_HPHM",
]

#: Value of H^+ dH^-/dz - dH^+/dz H^- implied by the conventions above.
WRONSKIAN_HPHM = -2j

_ODE_RTOL = 1e-13
_ODE_ATOL = 1e-14


class CoulombError(Exception):
    """Base class for Coulomb wave function failures."""


class CoulombDomainError(CoulombError):
    """Argument on the cut ]-inf:0] or otherwise outside the domain."""


class CoulombEvaluationError(CoulombError):
    """All evaluation strategies failed for the requested point."""

    def __init__(self, ell: int, eta: complex, z: complex, msg: str = ""):
        self.ell = ell
        self.eta = eta
        self.z = z
        super().__init__(
            f"Coulomb evaluation failed at ell={ell}, eta={eta}, z={z}: {msg}"
        )


@dataclass(frozen=True)
class CoulombParams:
    """Orbital momentum and Sommerfeld parameter of a partial wave."""

    ell: int
    eta: complex

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError("ell must be non-negative")
        if not np.isfinite(self.eta):
            raise ValueError("eta must be finite")


def erf_real(x: float) -> float:
    """Error function for non-negative real x."""
    if x < 0.0:
        raise CoulombDomainError("erf_real expects x >= 0")
    return float(_scipy_erf(x))


def sigma_l(ell: int, eta: complex) -> complex:
    """Coulomb phase shift via the principal branch of lnGamma."""
    return (loggamma(ell + 1 + 1j * eta) - loggamma(ell + 1 - 1j * eta)) / 2j


def coulomb_norm(ell: int, eta: complex) -> complex:
    """Gamow normalization factor C_l(eta) of the regular solution.

    C_l = 2^l exp(-pi eta/2) sqrt(Gamma(l+1+i eta) Gamma(l+1-i eta)) / (2l+1)!
    with the square root taken through half the sum of the log-gammas.
    """
    lg = 0.5 * (loggamma(ell + 1 + 1j * eta) + loggamma(ell + 1 - 1j * eta))
    return np.exp(
        ell * np.log(2.0) - np.pi * eta / 2.0 + lg - loggamma(2 * ell + 2)
    )


def _on_cut(z: complex) -> bool:
    return z.imag == 0.0 and z.real <= 0.0


# ----------------------------------------------------------------------
# origin power series for F
# ----------------------------------------------------------------------

def _f_series_raw(ell: int, eta: complex, z: complex):
    """Power series of F and dF/dz at z; returns (F, F', max_term_ratio).

    max_term_ratio is the largest term magnitude divided by |sum| and
    measures the cancellation incurred; the relative rounding error is of
    order eps * max_term_ratio.
    """
    a_prev = 0.0 + 0.0j
    a = 1.0 + 0.0j
    s = a  # sum of a_n z^n
    sp = (ell + 1) * a  # sum of (l+1+n) a_n z^n
    term = a
    max_term = abs(term)
    zn = 1.0 + 0.0j
    small_run = 0
    for n in range(1, 4000):
        a_next = (2.0 * eta * a - a_prev) / (n * (n + 2 * ell + 1))
        a_prev, a = a, a_next
        zn *= z
        term = a * zn
        s += term
        sp += (ell + 1 + n) * term
        at = abs(term)
        if at > max_term:
            max_term = at
        # eta = 0 zeroes every other term: demand a sustained drop
        if at < 1e-18 * abs(s) and n > 4:
            small_run += 1
            if small_run >= 2:
                break
        else:
            small_run = 0
    c = coulomb_norm(ell, eta)
    zl = z ** (ell + 1)
    f = c * zl * s
    fp = c * zl / z * sp
    ratio = max_term / max(abs(s), 1e-300)
    return f, fp, ratio


# ----------------------------------------------------------------------
# asymptotic series for H
# ----------------------------------------------------------------------

def _stokes_ok(omega: int, eta: complex, z: complex) -> bool:
    """Check that the Stokes-line admixture is below ~1e-13 at z.

    The principal-branch asymptotic series of H^omega acquires a
    subdominant-solution admixture of relative size
    ~ exp(2 pi |eta|) * |exp(2 i omega z)| once arg z moves past
    -omega * pi/2; demand that this is negligible there.
    """
    if abs(eta) < 1e-14:
        return True
    ang = np.angle(z)
    if omega * ang >= -np.pi / 2.0:
        return True
    return abs(z.imag) > np.pi * abs(eta) + 19.0


def _asym_h(omega: int, ell: int, eta: complex, z: complex):
    """Asymptotic factor g with H = exp(i omega phi) g; returns (g, g', ok).

    g' is dg/dz.  ok is False when the series cannot reach ~1e-14
    relative truncation at this z (including Stokes contamination).
    """
    a = ell + 1 + 1j * omega * eta
    b = -ell + 1j * omega * eta
    den = 2j * omega * z
    t = 1.0 + 0.0j
    s = t
    sp = 0.0 + 0.0j
    best = np.inf
    small_run = 0
    ok = False
    for n in range(0, 200):
        t_next = t * (a + n) * (b + n) / ((n + 1) * den)
        at = abs(t_next)
        s += t_next
        sp += -(n + 1) * t_next / z
        t = t_next
        if at == 0.0:
            ok = True  # series terminated exactly (eta = 0, integer case)
            return s, sp, ok
        # complex eta makes |terms| non-monotonic; demand a sustained drop
        if at < 1e-16 * abs(s):
            small_run += 1
            if small_run >= 2:
                ok = True
                break
        else:
            small_run = 0
        if at > 4.0 * best:
            break  # divergent tail reached before convergence
        best = min(best, at)
    return s, sp, ok and _stokes_ok(omega, eta, z)


def asym_factor_scalar(omega: int, ell: int, eta: complex, z: complex):
    """Public scalar access to the asymptotic modulating factor."""
    return _asym_h(omega, ell, eta, z)


def asym_factor_vec(omega: int, ell: int, eta: complex, z: np.ndarray,
                    angle: np.ndarray | None = None):
    """Vectorized asymptotic factor g(z) with H = exp(i omega phi) g.

    Returns (g, ok_mask).  Entries with ok False did not converge to
    1e-14 and must be obtained by other means.  `angle` optionally
    supplies a continuous arg z (for evaluation on a branch continued
    across the cut); it defaults to the principal value.
    """
    z = np.asarray(z, dtype=complex)
    a = ell + 1 + 1j * omega * eta
    b = -ell + 1j * omega * eta
    den = 2j * omega * z
    t = np.ones_like(z)
    s = t.copy()
    best = np.full(z.shape, np.inf)
    small_run = np.zeros(z.shape, dtype=np.int64)
    ok = np.zeros(z.shape, dtype=bool)
    active = np.ones(z.shape, dtype=bool)
    for n in range(0, 200):
        t_next = t * (a + n) * (b + n) / ((n + 1) * den)
        at = np.abs(t_next)
        s[active] += t_next[active]
        t = t_next
        small = at < 1e-16 * np.abs(s)
        small_run = np.where(small, small_run + 1, 0)
        conv = active & (small_run >= 2)
        ok |= conv
        active &= ~conv
        # series diverging without having converged: give up
        exact = active & (at == 0.0)
        ok |= exact
        active &= ~exact
        div = active & (at > 4.0 * best)
        active &= ~div
        if not active.any():
            break
        best = np.where(active, np.minimum(best, at), best)
    ang = np.angle(z) if angle is None else np.asarray(angle, dtype=float)
    # outside the principal sector the series picks up a subdominant
    # admixture (Stokes phenomenon) unless Im z is deep enough; past
    # omega*arg z = pi the continued branch is not trusted at all
    wang = omega * ang
    deep = np.abs(z.imag) > np.pi * abs(eta) + 19.0
    if abs(eta) >= 1e-14:
        ok &= ~((wang < -np.pi / 2.0) & ~deep)
        ok &= ~(wang > np.pi + 1e-12)
    return s, ok


def _phase(omega: int, ell: int, eta: complex, z: complex) -> complex:
    """phi(z) = z - eta ln 2z - l pi/2 + sigma_l, principal log branch."""
    return z - eta * np.log(2.0 * z) - ell * np.pi / 2.0 + sigma_l(ell, eta)


# ----------------------------------------------------------------------
# ODE propagation
# ----------------------------------------------------------------------

def _propagate(ell: int, eta: complex, z_from: complex, z_to: complex,
               u0: complex, up0: complex):
    """Propagate (u, du/dz) of the Coulomb ODE along a straight segment.

    The equation is linear, so the initial condition is rescaled to unit
    magnitude before integration; tolerances then track the solution even
    when it is exponentially small in absolute terms.
    """
    d = z_to - z_from
    scale = max(abs(u0), abs(up0))
    if scale == 0.0:
        raise CoulombEvaluationError(ell, eta, z_to, "zero initial data")

    def rhs(t, y):
        z = z_from + t * d
        w = ell * (ell + 1) / (z * z) + 2.0 * eta / z - 1.0
        return np.array([d * y[1], d * w * y[0]])

    y0 = np.array([u0 / scale, up0 / scale], dtype=complex)
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853",
                    rtol=_ODE_RTOL, atol=_ODE_ATOL)
    if not sol.success:
        raise CoulombEvaluationError(ell, eta, z_to, "ODE propagation failed")
    return scale * sol.y[0, -1], scale * sol.y[1, -1]


def _anchor_h(omega: int, ell: int, eta: complex, z: complex):
    """Find an anchor along arg z where the asymptotic series converges.

    Returns (z_a, H(z_a), H'(z_a)).
    """
    direction = z / abs(z)
    rho = max(25.0, 1.2 * abs(z), 12.0 + 1.8 * abs(eta) ** 2)
    for _ in range(12):
        za = direction * rho
        g, gp, ok = _asym_h(omega, ell, eta, za)
        if ok:
            ph = np.exp(1j * omega * _phase(omega, ell, eta, za))
            h = ph * g
            hp = ph * (1j * omega * (1.0 - eta / za) * g + gp)
            return za, h, hp
        rho *= 1.7
    raise CoulombEvaluationError(ell, eta, z, "no asymptotic anchor found")


_F_SERIES_CANCEL_MAX = 1e4  # keeps rounding error of the F series ~1e-12


def coulomb_F_and_derivative(p: CoulombParams, z: complex):
    """Regular Coulomb function F_{l,eta}(z) and dF/dz."""
    z = complex(z)
    if z == 0:
        raise CoulombDomainError("F requested at z = 0")
    f, fp, ratio = _f_series_raw(p.ell, p.eta, z)
    if ratio <= _F_SERIES_CANCEL_MAX:
        return f, fp
    # push the series point inward until cancellation is controlled, then
    # propagate outward (the regular solution dominates away from the
    # origin, so outward propagation is stable)
    zs = z
    for _ in range(60):
        zs *= 0.82
        f, fp, ratio = _f_series_raw(p.ell, p.eta, zs)
        if ratio <= _F_SERIES_CANCEL_MAX:
            break
    else:
        raise CoulombEvaluationError(p.ell, p.eta, z, "F series never tame")
    f, fp = _propagate(p.ell, p.eta, zs, z, f, fp)
    return f, fp


def coulomb_F(p: CoulombParams, z: complex) -> complex:
    """Regular Coulomb wave function F_{l,eta}(z)."""
    return coulomb_F_and_derivative(p, z)[0]


def coulomb_H(omega: int, p: CoulombParams, z: complex):
    """H^{omega}_{l,eta}(z) and its derivative dH/dz, z off the cut.

    omega is +1 (outgoing) or -1 (incoming).
    """
    if omega not in (+1, -1):
        raise ValueError("omega must be +1 or -1")
    z = complex(z)
    if _on_cut(z):
        raise CoulombDomainError(f"z = {z} lies on the cut ]-inf:0]")
    ell, eta = p.ell, p.eta

    g, gp, ok = _asym_h(omega, ell, eta, z)
    if ok:
        ph = np.exp(1j * omega * _phase(omega, ell, eta, z))
        h = ph * g
        hp = ph * (1j * omega * (1.0 - eta / z) * g + gp)
        return h, hp

    # bridge from an asymptotic anchor along the ray through z; stable
    # whenever H^omega does not decay too strongly toward the anchor
    za, ha, hpa = _anchor_h(omega, ell, eta, z)
    instab = 2.0 * omega * (z.imag - za.imag)
    if instab <= 7.0:
        return _propagate(ell, eta, za, z, ha, hpa)

    # growing-solution regime: combine the stable opposite solution with
    # the regular one, H^omega = H^{-omega} + 2 i omega F
    hm, hmp = coulomb_H(-omega, p, z)
    f, fp = coulomb_F_and_derivative(p, z)
    return hm + 2j * omega * f, hmp + 2j * omega * fp
