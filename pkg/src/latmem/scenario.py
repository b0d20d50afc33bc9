"""Physical scenarios, derived parameters, lattice modulation and the
complex optical potential.

All quantities are SI throughout, with every rate in rad/s.  A scenario
bundles the signal wavelength, the atomic linewidth and detuning, the
resonant optical depth, the ensemble and lattice geometry and the control
pulse, from which everything else in the simulator is derived.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import ConfigError

# Truncation target for the periodized Gaussian image sum.
_IMAGE_SUM_TOL = 1e-13

# JSON keys accepted by Scenario.from_json, in canonical order.
_CONFIG_KEYS = (
    "lambda_s_nm",
    "gamma_inv_ns",
    "delta_over_invT",
    "d",
    "L_mm",
    "a_nm",
    "w_over_a",
    "omega0_T_product",
    "T_ns",
    "pulse_shape",
    "cell_points",
    "z_points",
    "tau_points",
)

_PRESETS = {
    # Broadband off-resonant protocol: d = 300, T = 3 ns, detuning 15/T.
    "raman": {
        "lambda_s_nm": 800.0,
        "gamma_inv_ns": 30.0,
        "delta_over_invT": 15.0,
        "d": 300.0,
        "L_mm": 1.0,
        "a_nm": 320.0,
        "w_over_a": 0.1,
        "omega0_T_product": 5.5,
        "T_ns": 3.0,
        "pulse_shape": "gaussian",
        "cell_points": 1024,
        "z_points": 200,
        "tau_points": 400,
    },
    # Narrowband resonant protocol: d = 30, T = 30 ns, zero detuning.
    "eit": {
        "lambda_s_nm": 800.0,
        "gamma_inv_ns": 30.0,
        "delta_over_invT": 0.0,
        "d": 30.0,
        "L_mm": 1.0,
        "a_nm": 320.0,
        "w_over_a": 0.1,
        "omega0_T_product": 5.5,
        "T_ns": 30.0,
        "pulse_shape": "gaussian",
        "cell_points": 1024,
        "z_points": 200,
        "tau_points": 400,
    },
}


def _require_positive(name, value):
    if not np.isfinite(value) or value <= 0.0:
        raise ConfigError(f"{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True)
class Scenario:
    """Complete physical description of one memory configuration.

    Parameters
    ----------
    lambda_s : float
        Signal wavelength (m).
    gamma : float
        Homogeneous linewidth of the optical transition (rad/s).
    delta : float
        One-photon detuning (rad/s); zero for resonant operation.
    d : float
        Resonant optical depth of the whole ensemble (dimensionless).
    L : float
        Ensemble length (m).
    a : float
        Lattice constant (m).
    w : float
        Width of the per-site Gaussian density modulation (m).
    omega0 : float
        Peak Rabi frequency of the control pulse (rad/s).
    T : float
        Control pulse duration (s).
    pulse_shape : str
        Either ``"gaussian"`` or ``"square"``.
    cell_points, z_points, tau_points : int
        Samples per unit cell and grid sizes for the kernel/propagation
        solvers.
    """

    lambda_s: float
    gamma: float
    delta: float
    d: float
    L: float
    a: float
    w: float
    omega0: float
    T: float
    pulse_shape: str = "gaussian"
    cell_points: int = 1024
    z_points: int = 200
    tau_points: int = 400

    def __post_init__(self):
        for name in ("lambda_s", "gamma", "d", "L", "a", "T", "omega0"):
            _require_positive(name, getattr(self, name))
        if not np.isfinite(self.delta) or self.delta < 0.0:
            raise ConfigError(f"delta must be finite and >= 0, got {self.delta!r}")
        if not 0.0 < self.w < 0.5 * self.a:
            raise ConfigError(
                f"modulation width w must satisfy 0 < w < a/2, got w={self.w!r}, a={self.a!r}"
            )
        if self.L / self.a < 10.0:
            raise ConfigError(
                f"continuum envelope treatment needs L/a >= 10, got {self.L / self.a:.2f}"
            )
        if self.pulse_shape not in ("gaussian", "square"):
            raise ConfigError(f"unknown pulse_shape {self.pulse_shape!r}")
        if self.cell_points < 256 or self.cell_points % 2:
            raise ConfigError("cell_points must be even and >= 256")
        if self.z_points < 8 or self.tau_points < 8:
            raise ConfigError("z_points and tau_points must be >= 8")
        if self.adiabaticity < 10.0:
            warnings.warn(
                f"adiabaticity indicator T*d*gamma = {self.adiabaticity:.3g} < 10; "
                "results may be outside the adiabatic regime",
                stacklevel=2,
            )

    @property
    def adiabaticity(self) -> float:
        """Dimensionless adiabaticity indicator T*d*gamma."""
        return self.T * self.d * self.gamma

    @property
    def diagnostics(self) -> dict:
        """Dimensionless groups useful for sanity checks."""
        return {
            "T_d_gamma": self.adiabaticity,
            "delta_over_gamma": self.delta / self.gamma,
            "a_ks_over_pi": self.a * (2.0 * math.pi / self.lambda_s) / math.pi,
            "cells": self.L / self.a,
        }

    def with_lattice_constant(self, a: float) -> "Scenario":
        """Copy of this scenario at a different lattice constant, keeping
        the relative modulation width w/a fixed."""
        return replace(self, a=a, w=(self.w / self.a) * a)

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        unknown = set(cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        missing = set(_CONFIG_KEYS) - set(cfg)
        if missing:
            raise ConfigError(f"missing configuration keys: {sorted(missing)}")
        T = float(cfg["T_ns"]) * 1e-9
        if T <= 0.0:
            raise ConfigError("T_ns must be positive")
        a = float(cfg["a_nm"]) * 1e-9
        return cls(
            lambda_s=float(cfg["lambda_s_nm"]) * 1e-9,
            gamma=1.0 / (float(cfg["gamma_inv_ns"]) * 1e-9),
            delta=float(cfg["delta_over_invT"]) / T,
            d=float(cfg["d"]),
            L=float(cfg["L_mm"]) * 1e-3,
            a=a,
            w=float(cfg["w_over_a"]) * a,
            omega0=float(cfg["omega0_T_product"]) / T,
            T=T,
            pulse_shape=str(cfg["pulse_shape"]),
            cell_points=int(cfg["cell_points"]),
            z_points=int(cfg["z_points"]),
            tau_points=int(cfg["tau_points"]),
        )

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path} must contain a JSON object")
        return cls.from_dict(cfg)

    @classmethod
    def preset(cls, name: str, **overrides) -> "Scenario":
        """Built-in named parameter sets ``"raman"`` and ``"eit"``."""
        try:
            cfg = dict(_PRESETS[name])
        except KeyError:
            raise ConfigError(
                f"unknown preset {name!r}; available: {sorted(_PRESETS)}"
            ) from None
        cfg.update(overrides)
        return cls.from_dict(cfg)

    def to_dict(self) -> dict:
        return {
            "lambda_s_nm": self.lambda_s * 1e9,
            "gamma_inv_ns": 1.0 / (self.gamma * 1e-9),
            "delta_over_invT": self.delta * self.T,
            "d": self.d,
            "L_mm": self.L * 1e3,
            "a_nm": self.a * 1e9,
            "w_over_a": self.w / self.a,
            "omega0_T_product": self.omega0 * self.T,
            "T_ns": self.T * 1e9,
            "pulse_shape": self.pulse_shape,
            "cell_points": self.cell_points,
            "z_points": self.z_points,
            "tau_points": self.tau_points,
        }


@dataclass(frozen=True)
class DerivedParams:
    """Quantities derived from a Scenario.

    ``k_s`` is the signal wavenumber 2*pi/lambda_s, ``omega_s = c*k_s``,
    ``Gamma = gamma + i*delta`` the complex detuning, ``kappa`` the
    collective coupling sqrt(d*gamma/L) and ``n_cells = floor(L/a)``.

    The detuning sign is fixed so that a positive ``delta`` raises the
    real part of the optical potential at the lattice sites (the sites act
    as high-index wells for the signal).  Near the first forbidden band
    the lowest-band carrier then piles onto the sites, which is the regime
    in which the off-resonant protocol shows growing overlap and growing
    carrier absorption.  Observable rates depend on the detuning only
    through d*gamma/Gamma and |Gamma|, which are insensitive to this
    convention except for the site-index sign itself.
    """

    k_s: float
    omega_s: float
    Gamma: complex
    kappa: float
    n_cells: int
    gamma: float
    delta: float
    d: float
    L: float


def derive_params(s: Scenario) -> DerivedParams:
    """Deterministic derived parameters for one scenario."""
    for name in ("lambda_s", "gamma", "d", "L", "a"):
        _require_positive(name, getattr(s, name))
    k_s = 2.0 * math.pi / s.lambda_s
    return DerivedParams(
        k_s=k_s,
        omega_s=C_LIGHT * k_s,
        Gamma=complex(s.gamma, s.delta),
        kappa=math.sqrt(s.d * s.gamma / s.L),
        n_cells=int(s.L // s.a),
        gamma=s.gamma,
        delta=s.delta,
        d=s.d,
        L=s.L,
    )


@dataclass(frozen=True)
class CellGrid:
    """Uniform sample grid over one lattice cell, z_j = j*a/n, j < n."""

    a: float
    n: int
    z: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        _require_positive("a", self.a)
        if self.n < 256 or self.n % 2:
            raise ConfigError("cell grid needs an even sample count >= 256")
        object.__setattr__(self, "z", np.arange(self.n) * (self.a / self.n))

    @property
    def spacing(self) -> float:
        return self.a / self.n

    @classmethod
    def for_scenario(cls, s: Scenario) -> "CellGrid":
        return cls(a=s.a, n=s.cell_points)


@dataclass(frozen=True)
class Modulation:
    """Samples of the periodic density modulation m(z) on a cell grid.

    The cell average (1/a) * integral of m over one period is 1, so m = 1
    describes a uniform ensemble.
    """

    grid: CellGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.samples, dtype=float)
        if m.shape != (self.grid.n,):
            raise ConfigError("modulation samples must match the cell grid")
        if np.any(m < -1e-12):
            raise ConfigError("modulation must be non-negative")
        mean = float(np.mean(m))
        if abs(mean - 1.0) > 1e-10:
            raise ConfigError(f"modulation cell average must be 1, got {mean!r}")
        object.__setattr__(self, "samples", m)


def _periodized_gaussian(z: np.ndarray, a: float, w: float) -> np.ndarray:
    """Sum of Gaussian images exp(-((z - a/2 - n*a)/w)^2), truncated once
    additional images contribute less than _IMAGE_SUM_TOL relatively."""
    total = np.exp(-(((z - 0.5 * a) / w) ** 2))
    n = 1
    while True:
        term = np.exp(-(((z - 0.5 * a - n * a) / w) ** 2)) + np.exp(
            -(((z - 0.5 * a + n * a) / w) ** 2)
        )
        total += term
        if np.max(term) < _IMAGE_SUM_TOL * max(np.max(total), 1.0):
            return total
        n += 1


def modulation(grid: CellGrid, a: float, w: float) -> Modulation:
    """Periodized Gaussian density modulation, one site per cell centred at
    a/2, normalized to unit cell average.

    The per-site profile is exp(-(z/w)^2); periodization sums image cells
    until truncation is negligible, and the overall constant is fixed so
    that the mean of the samples (the spectrally exact cell average for a
    smooth periodic function on a uniform grid) is exactly 1.
    """
    if grid.a != a:
        raise ConfigError("grid period and lattice constant disagree")
    if not 0.0 < w < 0.5 * a:
        raise ConfigError(f"modulation width must satisfy 0 < w < a/2, got {w!r}")
    raw = _periodized_gaussian(grid.z, a, w)
    return Modulation(grid=grid, samples=raw / np.mean(raw))


def potential(m_samples: np.ndarray, p: DerivedParams) -> np.ndarray:
    """Complex optical potential V(z) = 1 + 2i*d*gamma*m(z)/(Gamma*L*k_s)
    on the cell grid.

    Accepts raw sample arrays so that diagnostic potentials (vacuum, or a
    uniform medium) can be built directly; normal use passes
    ``Modulation.samples``.
    """
    m = np.asarray(m_samples, dtype=float)
    coeff = 2j * p.d * p.gamma / (p.Gamma * p.L * p.k_s)
    return 1.0 + coeff * m


def uniform_potential_value(p: DerivedParams) -> complex:
    """V for a uniform ensemble (m = 1)."""
    return 1.0 + 2j * p.d * p.gamma / (p.Gamma * p.L * p.k_s)


def build_cell(s: Scenario):
    """Convenience: (grid, modulation, potential samples, derived params)."""
    p = derive_params(s)
    grid = CellGrid.for_scenario(s)
    m = modulation(grid, s.a, s.w)
    return grid, m, potential(m.samples, p), p
