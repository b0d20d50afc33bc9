"""Memory-relevant scalar observables of a Bloch mode.

Group velocity and overlap are bilinear cell integrals of the forward and
conjugate modes; they are complex in an absorbing lattice and are kept
complex here (downstream consumers take real parts only for reporting).
The damping parameter mu measures the departure of Im{k} from the
uniform-medium value, and R is the entrance-face reflectivity obtained by
matching the carrier and its derivative across the free-space/lattice
interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from .bloch import BlochMode, simpson_periodic
from .errors import TotalReflectionError
from .scenario import DerivedParams, Modulation

_NORM_TOL = 1e-6


@dataclass(frozen=True)
class ModeObservables:
    """Scalar observables of one scenario point.

    ``v_g`` and ``alpha`` are complex; plots report their real parts.
    ``beta = 1/v_g - 1/c`` is the control walk-off rate per unit length,
    ``mu`` the dimensionless damping parameter and ``R`` the entrance-face
    reflectivity.
    """

    v_g: complex
    alpha: complex
    beta: complex
    mu: float
    R: float
    im_k: float


def _check_normalized(mode: BlochMode):
    norm = simpson_periodic(mode.psi * mode.phi, mode.grid.spacing)
    if abs(norm - 1.0) > _NORM_TOL:
        raise ValueError(
            f"mode is not normalized: bilinear cell integral = {norm:.3e}"
        )


def _spectral_derivative(f: np.ndarray, period: float) -> np.ndarray:
    n = f.shape[0]
    g = 2j * np.pi / period * np.fft.fftfreq(n, d=1.0 / n)
    return np.fft.ifft(g * np.fft.fft(f))


def group_velocity(mode: BlochMode, k_s: float) -> complex:
    """Complex group velocity (c/k_s) * cell integral of psi * (-i d_z phi).

    d_z phi is evaluated as exp(i*Re{k}z) (u' + i*Re{k} u) with u'
    obtained spectrally; the integrand is periodic, so the composite
    Simpson rule on the closed cell applies.
    """
    _check_normalized(mode)
    z = mode.grid.z
    re_k = mode.k.real
    du = _spectral_derivative(mode.u, mode.a)
    dphi = np.exp(1j * re_k * z) * (du + 1j * re_k * mode.u)
    integral = simpson_periodic(mode.psi * (-1j) * dphi, mode.grid.spacing)
    return (C_LIGHT / k_s) * integral


def overlap(mode: BlochMode, m: Modulation) -> complex:
    """Mode/lattice matching: bilinear cell integral of psi*phi*m."""
    _check_normalized(mode)
    return simpson_periodic(mode.psi * mode.phi * m.samples, mode.grid.spacing)


def walk_off(v_g: complex) -> complex:
    """Control walk-off rate beta = 1/v_g - 1/c (s/m)."""
    return 1.0 / v_g - 1.0 / C_LIGHT


def damping_parameter(im_k: float, d: float, gamma: float, Gamma: complex, L: float) -> float:
    """Dimensionless damping parameter mu = Im{k} L / Re{d gamma/Gamma} - 1.

    Zero for a uniform ensemble (to first order in the potential
    modulation).  Oriented so that excess carrier absorption gives mu > 0
    (the near-edge behaviour of a predominantly real site modulation) and
    reduced absorption gives mu < 0 (anomalous transmission of a purely
    absorptive modulation).
    """
    ref = (d * gamma / Gamma).real
    if ref == 0.0:
        raise ZeroDivisionError("Re{d gamma / Gamma} vanished")
    return im_k * L / ref - 1.0


def reflectivity(mode: BlochMode, k_s: float) -> float:
    """Entrance-face intensity reflectivity from carrier continuity.

    With r1 = k_s u(0) and r2 = k u(0) - i u'(0) (full complex k, periodic
    part u of the damping-stripped carrier), R = |(r1 - r2)/(r1 + r2)|^2.
    """
    r1 = k_s * mode.u0
    r2 = mode.k * mode.u0 - 1j * mode.du0
    denom = r1 + r2
    if abs(denom) < 1e-12 * (abs(r1) + abs(r2)):
        raise TotalReflectionError("interface matching denominator vanished")
    R = abs((r1 - r2) / denom) ** 2
    if R > 1.0 + 1e-9:
        raise ValueError(f"reflectivity {R!r} exceeds 1; mode is unphysical")
    return min(R, 1.0)


def compute_observables(mode: BlochMode, m: Modulation, p: DerivedParams) -> ModeObservables:
    """All observables of one mode in a single pass."""
    v_g = group_velocity(mode, p.k_s)
    return ModeObservables(
        v_g=v_g,
        alpha=overlap(mode, m),
        beta=walk_off(v_g),
        mu=damping_parameter(mode.im_k, p.d, p.gamma, p.Gamma, p.L),
        R=reflectivity(mode, p.k_s),
        im_k=mode.im_k,
    )
