"""Carrier-wave eigenproblem for complex periodic optical potentials.

The signal carrier obeys  phi'' + k_s^2 V(z) phi = 0  with V periodic and
complex.  Integrating the two fundamental solutions across one period in
the scaled state (phi, phi'/k_s) yields the one-period transfer
(monodromy) matrix; its eigenvalues are exp(+-i*k*a) with k the complex
crystal momentum.  The forward Bloch mode, its periodic part u and the
conjugate (left) mode psi used for bilinear projections are reconstructed
from the same fundamental system.

The eigenproblem is not Hermitian, so psi is not the complex conjugate of
phi.  Writing the carrier equation as an eigenproblem for
M = -V^{-1} d^2/dz^2 with right eigenfunction phi and eigenvalue k_s^2,
the left eigenfunction is psi = N*V*chi where chi solves the same carrier
ODE on the opposite branch (crystal momentum -k): substituting chi = psi/V
into the left-eigenfunction condition and integrating by parts shows chi
obeys phi's ODE, and the -k branch makes the bilinear product psi*phi
periodic, so the cell normalization integral is well defined.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (
    BandEdgeDegeneracyError,
    IntegrationFailure,
    ModeOrthogonalityError,
)
from .scenario import CellGrid

DEFAULT_TOL = 1e-10

# Mode reconstruction needs extra headroom: the periodicity of u is an
# eigenvector/integrator consistency check that tightens near band edges.
MODE_TOL = 1e-11

# Relative eigenvalue separation below which the transfer matrix is
# treated as defective (exact band-edge degeneracy).
_DEGENERACY_TOL = 1e-10

# Budget on right-hand-side evaluations per one-period integration; a
# healthy cell needs a few thousand, so exhausting this means the step
# size has effectively collapsed.
_MAX_RHS_CALLS = 100_000


def simpson_periodic(samples: np.ndarray, h: float) -> complex:
    """Composite Simpson integral over one period of a periodic function
    sampled at n (even) uniform points, with f(a) = f(0) appended."""
    f = np.asarray(samples)
    n = f.shape[0]
    if n % 2:
        raise ValueError("periodic Simpson rule needs an even sample count")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    closed = np.concatenate([f, f[:1]])
    return (h / 3.0) * np.sum(w * closed)


def _potential_interpolant(v_samples: np.ndarray, a: float):
    """Periodic cubic interpolant of the potential samples."""
    v = np.asarray(v_samples, dtype=complex)
    n = v.shape[0]
    z = np.arange(n + 1) * (a / n)
    return CubicSpline(z, np.concatenate([v, v[:1]]), bc_type="periodic")


@dataclass(frozen=True)
class Monodromy:
    """One-period transfer matrix of the carrier equation in the scaled
    state (phi, phi'/k_s)."""

    matrix: np.ndarray
    a: float
    k_s: float
    tol: float

    @property
    def trace(self) -> complex:
        return self.matrix[0, 0] + self.matrix[1, 1]

    @property
    def det(self) -> complex:
        m = self.matrix
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def _integrate_fundamental(v_samples, k_s, a, tol, t_eval=None):
    """Integrate the two fundamental solutions (1,0) and (0,1) across one
    period; returns (monodromy matrix, solution samples or None)."""
    v_arr = np.asarray(v_samples)
    if not np.all(np.isfinite(v_arr)):
        raise IntegrationFailure("potential samples contain non-finite values", z=0.0)
    spline = _potential_interpolant(v_arr, a)
    budget = [_MAX_RHS_CALLS]

    def rhs(z, y):
        budget[0] -= 1
        if budget[0] < 0:
            raise IntegrationFailure(
                f"step size collapsed near z = {z:.6e} m "
                f"(evaluation budget exhausted)",
                z=float(z),
            )
        v = spline(z)
        return k_s * np.array([y[1], -v * y[0], y[3], -v * y[2]])

    y0 = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)
    sol = solve_ivp(
        rhs,
        (0.0, a),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-3,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        z_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationFailure(
            f"carrier integration failed at z = {z_fail:.6e} m: {sol.message}",
            z=z_fail,
        )
    if t_eval is None:
        y_end = sol.y[:, -1]
        samples = None
    else:
        y_end = sol.y[:, -1]
        samples = sol.y
    matrix = np.array([[y_end[0], y_end[2]], [y_end[1], y_end[3]]], dtype=complex)
    return matrix, samples


def monodromy(v_samples: np.ndarray, k_s: float, a: float, tol: float = DEFAULT_TOL) -> Monodromy:
    """One-period transfer matrix for potential samples on the cell grid."""
    matrix, _ = _integrate_fundamental(v_samples, k_s, a, tol)
    det = matrix[0, 0] * matrix[1, 1] - matrix[0, 1] * matrix[1, 0]
    if abs(det - 1.0) > max(1e-8, 100.0 * tol):
        raise IntegrationFailure(
            f"Wronskian drift: det(M) - 1 = {det - 1.0:.3e}; tighten the tolerance"
        )
    return Monodromy(matrix=matrix, a=a, k_s=k_s, tol=tol)


def _eigensystem(M: Monodromy):
    """Eigenvalues and eigenvectors of the 2x2 transfer matrix, forward
    (|lambda| <= 1) branch first; ties resolved toward arg(lambda) >= 0."""
    m = M.matrix
    tr = m[0, 0] + m[1, 1]
    disc = cmath.sqrt(tr * tr - 4.0)
    lam1 = 0.5 * (tr + disc)
    lam2 = 0.5 * (tr - disc)
    if abs(lam1 - lam2) < _DEGENERACY_TOL * max(abs(lam1), abs(lam2), 1.0):
        raise BandEdgeDegeneracyError(
            "transfer matrix is defective: exact band-edge degeneracy"
        )

    def eigenvector(lam):
        # Pick the better-conditioned row of (M - lam I) v = 0.
        r1 = (m[0, 1], lam - m[0, 0])
        r2 = (lam - m[1, 1], m[1, 0])
        v = r1 if abs(r1[0]) + abs(r1[1]) >= abs(r2[0]) + abs(r2[1]) else r2
        vec = np.array(v, dtype=complex)
        return vec / np.linalg.norm(vec)

    mod1, mod2 = abs(lam1), abs(lam2)
    if abs(mod1 - mod2) <= 1e-9 * (mod1 + mod2):
        # Propagating pair: forward wave has positive reduced momentum.
        fwd, bwd = (lam1, lam2) if cmath.phase(lam1) >= 0.0 else (lam2, lam1)
    else:
        fwd, bwd = (lam1, lam2) if mod1 < mod2 else (lam2, lam1)
    return (fwd, eigenvector(fwd)), (bwd, eigenvector(bwd))


def crystal_momentum(M_a: Monodromy, a: float, k_s: float, lossless_trace=None):
    """Complex crystal momentum of the forward branch and the gap flag.

    The forward eigenvalue is the decaying one (|lambda| <= 1); for a
    propagating tie the sign is chosen so Re{k} >= 0.  Re{k} is the
    principal-branch value, reduced to (-pi/a, pi/a].  ``lossless_trace``
    is the transfer-matrix trace of the comparison problem with the same
    Re{V} and zero Im{V}; the frequency lies in a forbidden band when its
    magnitude exceeds 2.
    """
    (lam_f, _), (lam_b, _) = _eigensystem(M_a)
    k = -1j * cmath.log(lam_f) / a
    t = M_a.trace if lossless_trace is None else lossless_trace
    in_gap = abs(complex(t).real) > 2.0
    return k, in_gap


@dataclass(frozen=True)
class BlochMode:
    """Forward Bloch mode of one cell, damping-stripped.

    ``phi`` holds exp(i*Re{k}*z)*u(z); the decay exp(-Im{k}*z) carried by
    the full carrier is stored separately through ``im_k`` so it can be
    transferred to the slowly varying signal amplitude.  ``psi`` is the
    conjugate (left) mode, normalized so the bilinear cell integral of
    psi*phi is 1.  ``u0``/``du0`` are u(0) and du/dz at z = 0, taken from
    the integrator initial data (exact, no differentiation error).
    """

    k: complex
    band_index: int
    in_gap: bool
    grid: CellGrid
    phi: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    u0: complex
    du0: complex
    a: float
    k_s: float

    @property
    def im_k(self) -> float:
        return self.k.imag

    @property
    def re_k(self) -> float:
        return self.k.real


def _band_index(k: complex, a: float, k_s: float) -> int:
    """Band index by unfolding the reduced momentum toward the empty
    lattice: the extended-zone momentum nearest k_s picks the band."""
    theta = abs(k.real) * a  # folded, in [0, pi]
    x = k_s * a
    best = None
    n_max = int(x / (2.0 * math.pi)) + 2
    for n in range(0, n_max + 1):
        for cand in (theta + 2.0 * math.pi * n, -theta + 2.0 * math.pi * (n + 1)):
            if best is None or abs(cand - x) < abs(best - x):
                best = cand
    return max(1, math.ceil(best / math.pi - 1e-9))


def bloch_mode(
    v_samples: np.ndarray,
    k_s: float,
    a: float,
    k: complex,
    *,
    in_gap: bool = False,
    tol: float = MODE_TOL,
    grid: CellGrid | None = None,
) -> BlochMode:
    """Construct the forward Bloch mode and its conjugate mode for a
    crystal momentum previously obtained from ``crystal_momentum``.

    The full carrier is integrated from the transfer-matrix eigenvector
    initial conditions and split as exp(-Im{k}z) * phi with
    phi = exp(i*Re{k}z) u.  The conjugate mode is
    psi = N*V(z)*chi(z)*exp(-Im{k}z), with chi the carrier solution on the
    1/lambda (momentum -k) branch, stripped of its exp(+Im{k}z) growth so
    that psi*phi is periodic; N fixes the bilinear cell integral of
    psi*phi to 1.
    """
    v = np.asarray(v_samples, dtype=complex)
    n = v.shape[0]
    if grid is None:
        grid = CellGrid(a=a, n=n)
    z = grid.z
    t_eval = np.concatenate([z, [a]])
    matrix, samples = _integrate_fundamental(v, k_s, a, tol, t_eval=t_eval)
    M = Monodromy(matrix=matrix, a=a, k_s=k_s, tol=tol)
    (lam_f, vec_f), (lam_b, vec_b) = _eigensystem(M)

    # Match the supplied momentum to an eigenvalue; a 2*pi/a shift of
    # Re{k} maps to the same eigenvalue, so both representatives work.
    lam_k = cmath.exp(1j * k * a)
    if abs(lam_k - lam_f) > abs(lam_k - lam_b):
        lam_f, vec_f, lam_b, vec_b = lam_b, vec_b, lam_f, vec_f
    if abs(lam_k - lam_f) > 1e-6 * abs(lam_f):
        raise ValueError(
            "crystal momentum is inconsistent with the transfer matrix "
            f"(exp(ika) = {lam_k:.6e}, eigenvalues {lam_f:.6e}, {lam_b:.6e})"
        )

    phi_rows = samples[(0, 2), :]  # phi components of both fundamentals
    dphi_rows = samples[(1, 3), :]  # phi'/k_s components
    phi_full = vec_f[0] * phi_rows[0] + vec_f[1] * phi_rows[1]
    chi_full = vec_b[0] * phi_rows[0] + vec_b[1] * phi_rows[1]

    # Bilinear normalization: the exp(+-Im{k}z) factors of the stripped
    # modes cancel in psi*phi, which equals V*chi_full*phi_full exactly.
    h = grid.spacing
    v_closed = np.concatenate([v, v[:1]])
    pairing = v_closed * chi_full * phi_full
    norm = simpson_periodic(pairing[:-1], h)
    scale = a * float(np.max(np.abs(pairing)))
    if abs(norm) < 1e-12 * max(scale, 1e-300):
        raise ModeOrthogonalityError(
            "bilinear pairing of forward and conjugate carriers vanished; "
            "exact band-edge degeneracy"
        )

    im_k = k.imag
    strip = np.exp(im_k * t_eval)
    phi_stripped = phi_full * strip
    u = phi_full * np.exp(-1j * k * t_eval)
    psi = (v_closed * chi_full / strip) / norm

    u_err = abs(u[-1] - u[0])
    u_scale = float(np.max(np.abs(u)))
    if u_err > 1e-8 * max(u_scale, 1e-300):
        raise IntegrationFailure(
            f"periodic part not periodic: |u(a) - u(0)| = {u_err:.3e} "
            f"(scale {u_scale:.3e}); tighten the tolerance"
        )

    u0 = complex(vec_f[0])
    du0 = k_s * complex(vec_f[1]) - 1j * k * u0
    return BlochMode(
        k=k,
        band_index=_band_index(k, a, k_s),
        in_gap=in_gap,
        grid=grid,
        phi=phi_stripped[:-1],
        u=u[:-1],
        psi=psi[:-1],
        u0=u0,
        du0=du0,
        a=a,
        k_s=k_s,
    )


def lossless_trace(v_samples: np.ndarray, k_s: float, a: float, tol: float = DEFAULT_TOL) -> complex:
    """Transfer-matrix trace of the comparison problem with the same Re{V}
    and zero Im{V}.  A constant real part (purely absorptive modulation)
    short-circuits to the free-propagation trace."""
    v_re = np.real(np.asarray(v_samples))
    if np.ptp(v_re) < 1e-15 * max(1.0, float(np.max(np.abs(v_re)))):
        q = k_s * math.sqrt(float(v_re[0]))
        return complex(2.0 * math.cos(q * a))
    return monodromy(v_re.astype(complex), k_s, a, tol).trace


def solve_bloch(
    v_samples: np.ndarray,
    k_s: float,
    a: float,
    *,
    tol: float = MODE_TOL,
    grid: CellGrid | None = None,
) -> BlochMode:
    """Full pipeline for one cell: monodromy, branch selection, gap flag
    and mode construction."""
    M = monodromy(v_samples, k_s, a, tol)
    t_r = lossless_trace(v_samples, k_s, a, tol)
    k, in_gap = crystal_momentum(M, a, k_s, lossless_trace=t_r)
    return bloch_mode(v_samples, k_s, a, k, in_gap=in_gap, tol=tol, grid=grid)


def mode_residual(
    mode: BlochMode, v_samples: np.ndarray, refine: int = 2, keep_harmonics: int = 48
) -> float:
    """Relative residual of the carrier equation for the stored mode with
    the full complex momentum restored, evaluated spectrally on a grid
    refined by zero-padding.

    Smooth site modulations are strongly band limited (relative spectral
    content below 1e-12 past a few tens of harmonics), so the residual is
    measured on the lowest ``keep_harmonics`` harmonics.  Beyond them the
    periodic part carries only integrator noise, which the spectral second
    derivative would amplify quadratically without probing the equation.
    """
    u = mode.u
    n = u.shape[0]
    m = refine * n
    v = np.asarray(v_samples, dtype=complex)

    def resample(f):
        spec = np.fft.fft(f)
        out = np.zeros(m, dtype=complex)
        half = n // 2
        out[:half] = spec[:half]
        out[-half:] = spec[-half:]
        return np.fft.ifft(out) * (m / n)

    g = 2.0j * math.pi / mode.a * np.fft.fftfreq(m, d=1.0 / m)
    u_f = resample(u)
    v_f = resample(v)
    spec = np.fft.fft(u_f)
    du = np.fft.ifft(g * spec)
    d2u = np.fft.ifft(g * g * spec)
    k = mode.k
    res = d2u + 2j * k * du + (mode.k_s**2 * v_f - k * k) * u_f
    res_spec = np.fft.fft(res)
    order = np.abs(np.fft.fftfreq(m, d=1.0 / m))
    res_spec[order > keep_harmonics] = 0.0
    res = np.fft.ifft(res_spec)
    scale = float(np.max(np.abs(mode.k_s**2 * v_f * u_f)))
    return float(np.max(np.abs(res))) / scale


def band_scan(
    scenario,
    k_s_range: tuple[float, float],
    n_points: int,
    *,
    empty_lattice: bool = False,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
):
    """Crystal momentum along a monotone range of signal wavenumbers.

    Returns one row per point: (k_s, folded Re{k}, Im{k}, band index,
    in_gap).  The potential is rebuilt at every scanned wavenumber, since
    the signal wavenumber enters it explicitly.  The reported Re{k} is the
    zone-folded magnitude |Re{k}| in [0, pi/a], the quantity plotted in a
    reduced-zone dispersion diagram.
    """
    from .scenario import CellGrid as _CellGrid
    from .scenario import derive_params, modulation

    lo, hi = float(k_s_range[0]), float(k_s_range[1])
    if not (hi > lo > 0.0):
        raise ValueError("k_s_range must be positive and increasing")
    ks_values = np.linspace(lo, hi, int(n_points))
    a = scenario.a

    if empty_lattice:
        m_samples = None
        coeff = 0.0
    else:
        p = derive_params(scenario)
        grid = _CellGrid.for_scenario(scenario)
        m_samples = modulation(grid, scenario.a, scenario.w).samples
        coeff = 2j * p.d * p.gamma / (p.Gamma * p.L)

    def one(idx_ks):
        idx, ks = idx_ks
        try:
            if empty_lattice:
                lam = cmath.exp(1j * ks * a)
                k = -1j * cmath.log(lam) / a
                in_gap = False
            else:
                v = 1.0 + (coeff / ks) * m_samples
                M = monodromy(v, ks, a, tol)
                t_r = lossless_trace(v, ks, a, tol)
                k, in_gap = crystal_momentum(M, a, ks, lossless_trace=t_r)
            return idx, (ks, abs(k.real), k.imag, _band_index(k, a, ks), in_gap), None
        except IntegrationFailure as exc:
            raise IntegrationFailure(
                f"band scan failed at k_s = {ks:.9e} 1/m: {exc}", z=exc.z
            ) from exc

    items = list(enumerate(ks_values))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(item) for item in items]
    results.sort(key=lambda r: r[0])
    return [r[1] for r in results]
