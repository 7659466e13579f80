"""Closed-form spectra of the flow and the iteration on diagonal quadratics,
and the quadratic-constraint certificate for the flow."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import UnsupportedPathError
from .gm2 import Gm2Params, gm2_one_line_coeffs

DISCRIMINANT_TOL = 1e-12


@dataclass(frozen=True)
class ModeSpectrum:
    a: float
    eigenvalues: tuple  # pair of complex numbers
    discriminant: float


@dataclass
class SpectralReport:
    per_mode: List[ModeSpectrum]
    worst_rate: float
    critically_damped: List[bool] = field(default_factory=list)


def _pair(b, disc, scale):
    """Roots (b +- sqrt(disc)) / 2, collapsed to a double root when the
    discriminant is zero relative to ``scale``."""
    if abs(disc) <= DISCRIMINANT_TOL * scale:
        r = complex(b / 2.0)
        return (r, r), True
    root = cmath.sqrt(disc)
    return ((b + root) / 2.0, (b - root) / 2.0), False


def quad_cont_eigs(params: Gm2Params, diag) -> SpectralReport:
    """Decay exponents of the flow on f = 1/2 sum a_i x_i^2, one pair per mode.

    lambda = (m a + n + q +- sqrt((m a + n + q)^2 - 4 a (n p + m q))) / 2;
    the trajectory of each mode behaves like exp(-lambda t).
    """
    m, n, p, q = params.as_tuple()
    modes, crit = [], []
    for a in np.asarray(diag, dtype=float).ravel():
        tr = m * a + n + q
        disc = tr * tr - 4.0 * a * (n * p + m * q)
        eig, c = _pair(tr, disc, max(tr * tr, 1e-300))
        modes.append(ModeSpectrum(float(a), eig, float(disc)))
        crit.append(c)
    worst = min(min(e.real for e in md.eigenvalues) for md in modes)
    return SpectralReport(modes, float(worst), crit)


def critical_p(a_ii: float, m: float, q: float) -> float:
    """p that zeroes a mode's discriminant when n = q."""
    if q == 0:
        raise ZeroDivisionError("critical damping needs q > 0")
    return q / a_ii + (m * a_ii) ** 2 / (4.0 * q * a_ii)


def quad_disc_eigs(params: Gm2Params, s: float, diag) -> SpectralReport:
    """Roots of r^2 - B r - D per mode, from the two-step recursion
    x+ = x + c_mom (x - x-) - c_grad a x + c_prev a x-."""
    c_mom, c_grad, c_prev = gm2_one_line_coeffs(params, s)
    modes, crit = [], []
    for a in np.asarray(diag, dtype=float).ravel():
        B = 1.0 + c_mom - c_grad * a
        D = c_prev * a - c_mom
        disc = B * B + 4.0 * D
        roots, c = _pair(B, disc, max(B * B, abs(4.0 * D), 1e-300))
        modes.append(ModeSpectrum(float(a), roots, float(disc)))
        crit.append(c)
    worst = max(max(abs(r) for r in md.eigenvalues) for md in modes)
    return SpectralReport(modes, float(worst), crit)


@dataclass(frozen=True)
class IqcCertificate:
    lam: float
    p11: float
    p12: float
    p22: float
    t11: float
    t12: float
    t13: float
    t22: float
    t23: float
    t33: float
    p_psd: bool
    t_nsd: bool

    def p_matrix(self):
        return np.array([[self.p11, self.p12], [self.p12, self.p22]])

    def t_matrix(self):
        return np.array([[self.t11, self.t12, self.t13],
                         [self.t12, self.t22, self.t23],
                         [self.t13, self.t23, self.t33]])


def iqc_t_entries(params: Gm2Params, mu: float, lam: float, p11: float, p12: float, p22: float):
    """Entries of the 3x3 constraint matrix for a given 2x2 storage matrix (sigma = 0)."""
    m, n, p, q = params.as_tuple()
    return {
        "t11": -(2 * n - lam) * p11 + 2 * q * p12 - lam * mu / 2.0,
        "t12": n * p11 + q * p22 - (n + q - lam) * p12,
        "t13": -m * p11 - p * p12 + (lam - n) / 2.0,
        "t22": 2 * (n * p12 - q * p22) + lam * p22,
        "t23": -m * p12 - p * p22 + n / 2.0,
        "t33": -m,
    }


def iqc_certificate(params: Gm2Params, mu: float, lam: Optional[float] = None,
                    rtol: float = 1e-12) -> IqcCertificate:
    """Certificate along the path lambda = n = q, where the storage matrix is
    diag(0, n/(2p)) and the constraint matrix is block diagonal.

    Negative semidefiniteness reduces to q <= mu p; ``rtol`` absorbs round-off
    in the 2x2 determinant at that boundary.
    """
    m, n, p, q = params.as_tuple()
    if lam is None:
        lam = q
    if abs(lam - q) > 1e-12 * max(q, 1e-300) or abs(n - q) > 1e-12 * max(q, 1e-300):
        raise UnsupportedPathError("closed-form certificate needs lambda = n = q")
    if not lam > 0:
        raise UnsupportedPathError("lambda must be positive")
    if not p > 0:
        raise UnsupportedPathError("p must be positive")
    p11, p12, p22 = 0.0, 0.0, n / (2.0 * p)
    t11 = -q * mu / 2.0
    t12 = q * q / (2.0 * p)
    t22 = -q * q / (2.0 * p)
    t33 = -m
    det = t11 * t22 - t12 * t12
    t_nsd = (det >= -rtol * (abs(t11 * t22) + t12 * t12)) and t11 <= 0 and t22 <= 0 and t33 <= 0
    return IqcCertificate(lam=lam, p11=p11, p12=p12, p22=p22, t11=t11, t12=t12, t13=0.0,
                          t22=t22, t23=0.0, t33=t33, p_psd=p22 >= 0, t_nsd=bool(t_nsd))


def certificate_rate(cert: IqcCertificate) -> float:
    """Exponential rate implied by a passing certificate (zero otherwise)."""
    return cert.lam if (cert.p_psd and cert.t_nsd) else 0.0
