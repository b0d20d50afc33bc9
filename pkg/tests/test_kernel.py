import math

import mpmath
import numpy as np
import pytest
from scipy.constants import c as C_LIGHT
from scipy.integrate import quad

from latmem.errors import EfficiencyBoundError, WalkOffTooLargeError
from latmem.kernel import (
    ControlPulse,
    KernelGrids,
    KernelMatrix,
    build_kernel,
    integrated_rabi,
    kernel_entry,
    optimal_efficiency,
    power_iteration_sigma_max,
    quadrature_weights,
    storage_efficiency,
)
from latmem.observables import ModeObservables
from latmem.scenario import Scenario, derive_params
from conftest import kernel_at, solve_point


def far_point(preset="raman", frac=0.49):
    s = Scenario.preset(preset).with_lattice_constant(frac * 800e-9)
    return s, *kernel_at(s)


class TestControlPulse:
    def test_gaussian_total_energy(self, raman):
        pulse = ControlPulse.for_scenario(raman)
        closed = pulse.omega0**2 * pulse.T * math.sqrt(math.pi / 2.0)
        numeric, err = quad(lambda t: pulse.amplitude(t) ** 2, -20 * pulse.T, 20 * pulse.T)
        assert pulse.total_energy == pytest.approx(closed, rel=1e-14)
        assert pulse.total_energy == pytest.approx(numeric, rel=1e-10)

    def test_gaussian_integrated_profile(self, raman):
        pulse = ControlPulse.for_scenario(raman)
        w_tot = pulse.total_energy
        assert integrated_rabi(pulse, -5.0 * pulse.T) <= 1e-10 * w_tot
        assert integrated_rabi(pulse, 0.0) == pytest.approx(0.5 * w_tot, rel=1e-12)
        assert integrated_rabi(pulse, 60.0 * pulse.T) == pytest.approx(w_tot, rel=1e-12)
        # quadrature cross-check at an interior point
        numeric, _ = quad(lambda t: pulse.amplitude(t) ** 2, -30 * pulse.T, 0.7 * pulse.T)
        assert integrated_rabi(pulse, 0.7 * pulse.T) == pytest.approx(numeric, rel=1e-9)

    def test_monotone_non_decreasing(self, raman):
        pulse = ControlPulse.for_scenario(raman)
        tau = np.linspace(-5 * pulse.T, 5 * pulse.T, 2001)
        w = integrated_rabi(pulse, tau)
        assert np.all(np.diff(w) >= 0.0)

    def test_square_matches_gaussian_energy(self, raman):
        gauss = ControlPulse.for_scenario(raman)
        square = ControlPulse(shape="square", omega0=gauss.omega0, T=gauss.T)
        assert square.total_energy == pytest.approx(gauss.total_energy, rel=1e-14)
        matched = ControlPulse.square_matching(gauss, 1.25 * gauss.T)
        assert matched.total_energy == pytest.approx(gauss.total_energy, rel=1e-14)
        numeric, _ = quad(
            lambda t: matched.amplitude(t) ** 2, -2 * gauss.T, 2 * gauss.T, limit=200
        )
        assert numeric == pytest.approx(gauss.total_energy, rel=1e-9)

    def test_rejects_bad_pulses(self):
        with pytest.raises(ValueError):
            ControlPulse(shape="triangle", omega0=1.0, T=1.0)
        with pytest.raises(ValueError):
            ControlPulse(shape="gaussian", omega0=-1.0, T=1.0)
        with pytest.raises(ValueError):
            ControlPulse(shape="gaussian", omega0=1.0, T=1.0, support=1.0)


class TestQuadratureWeights:
    def test_polynomial_exactness(self):
        x = np.linspace(0.0, 1.0, 64)
        w = quadrature_weights(x)
        for p in range(4):
            assert np.sum(w * x**p) == pytest.approx(1.0 / (p + 1), rel=1e-10)

    def test_smooth_function_accuracy(self):
        x = np.linspace(0.0, 2.0, 200)
        w = quadrature_weights(x)
        assert np.sum(w * np.exp(-x)) == pytest.approx(1.0 - math.exp(-2.0), rel=1e-9)


class TestBuildKernel:
    def test_late_tail_bessel_factor_is_unity(self):
        # Once the control energy is spent, the kernel collapses to the
        # bare prefactor times the carrier attenuation.
        s, p, obs, pulse, grids, K, res = far_point()
        tau = 4.0 * s.T
        z = 0.5 * s.L
        expected = (
            1j
            * (p.kappa / p.Gamma)
            * pulse.amplitude(tau)
            * np.exp(-obs.im_k * z - (pulse.total_energy - pulse.integrated(tau)) / p.Gamma)
        )
        assert kernel_entry(p, obs, pulse, z, tau) == pytest.approx(complex(expected), rel=1e-6)

    def test_zero_control_means_zero_kernel(self):
        s, p, obs, pulse, grids, K, res = far_point()
        off = ControlPulse(shape="gaussian", omega0=0.0, T=s.T)
        K0 = build_kernel(p, obs, off, grids)
        assert np.all(K0.weighted == 0.0)
        assert optimal_efficiency(K0).eta_opt == 0.0

    def test_spot_check_against_mpmath(self):
        # Arbitrary-precision oracle for one entry at (L/2, 0).
        s, p, obs, pulse, grids, K, res = far_point()
        z, tau = 0.5 * s.L, 0.0
        mpmath.mp.dps = 50
        Gamma = mpmath.mpc(p.Gamma)
        remaining = mpmath.mpf(pulse.total_energy) * mpmath.mpf(0.5)
        coupling = (
            mpmath.mpc(obs.alpha)
            * (mpmath.mpf(C_LIGHT) / mpmath.mpc(obs.v_g))
            * (mpmath.mpf(p.kappa) / Gamma) ** 2
        )
        arg = 2 * mpmath.sqrt(coupling * mpmath.mpf(z) * remaining)
        oracle = (
            1j
            * (mpmath.mpf(p.kappa) / Gamma)
            * mpmath.mpf(float(pulse.amplitude(tau)))
            * mpmath.exp(-mpmath.mpf(obs.im_k) * z - remaining / Gamma)
            * mpmath.besseli(0, arg)
        )
        oracle = complex(oracle)
        value = kernel_entry(p, obs, pulse, z, tau)
        assert value == pytest.approx(oracle, rel=1e-10)
        # the assembled matrix holds the same entry under the weights
        i = np.argmin(np.abs(grids.z - z))
        j = np.argmin(np.abs(grids.tau - tau))
        unweighted = K.weighted[i, j] / math.sqrt(grids.wz[i] * grids.wtau[j])
        assert unweighted == pytest.approx(
            kernel_entry(p, obs, pulse, grids.z[i], grids.tau[j]), rel=1e-12
        )

    def test_walk_off_gate(self):
        s, p, obs, pulse, grids, K, res = far_point()
        crawling = ModeObservables(
            v_g=1e-4 * C_LIGHT,
            alpha=obs.alpha,
            beta=1.0 / (1e-4 * C_LIGHT) - 1.0 / C_LIGHT,
            mu=obs.mu,
            R=obs.R,
            im_k=obs.im_k,
        )
        with pytest.raises(WalkOffTooLargeError, match="propagation"):
            build_kernel(p, crawling, pulse, grids)

    def test_efficiency_bound_guard(self, eit):
        s = eit.with_lattice_constant(0.4999 * eit.lambda_s)
        p, grid, m, v, mode, obs = solve_point(s)
        pulse = ControlPulse.for_scenario(s)
        grids = KernelGrids.for_scenario(s)
        K = build_kernel(p, obs, pulse, grids)
        with pytest.raises(EfficiencyBoundError):
            optimal_efficiency(K)


class TestEfficiency:
    def test_separable_kernel_is_rank_one(self):
        s, p, obs, pulse, grids, K, res = far_point()
        f = np.exp(-((grids.z / s.L - 0.3) ** 2) / 0.02) * (1.0 + 0.5j)
        g = np.sin(grids.tau / s.T) * np.exp(-((grids.tau / s.T) ** 2))
        weighted = np.sqrt(grids.wz)[:, None] * np.outer(f, g) * np.sqrt(grids.wtau)[None, :]
        weighted = weighted * (0.9 / np.linalg.norm(weighted, 2))
        K1 = KernelMatrix(weighted=weighted, grids=grids, pulse=pulse, im_k=obs.im_k)
        result = optimal_efficiency(K1)
        norm_f = np.sum(grids.wz * np.abs(K1.weighted[:, 0]) ** 2)
        expected = np.linalg.norm(weighted, 2) ** 2
        assert result.eta_opt == pytest.approx(expected, rel=1e-12)
        assert result.sigma[1] <= 1e-12 * result.sigma[0]

    def test_power_iteration_agrees_with_svd(self):
        s, p, obs, pulse, grids, K, res = far_point()
        sigma_pi = power_iteration_sigma_max(K)
        assert sigma_pi == pytest.approx(res.sigma[0], rel=1e-9)

    def test_optimal_input_reaches_eta_opt(self):
        s, p, obs, pulse, grids, K, res = far_point()
        assert np.sum(grids.wtau * np.abs(res.A_in) ** 2) == pytest.approx(1.0, abs=1e-10)
        b_out, eta = storage_efficiency(K, res.A_in)
        assert eta == pytest.approx(res.eta_opt, rel=1e-9)
        assert np.allclose(b_out, res.B_out, rtol=1e-9)

    def test_null_space_input(self):
        s, p, obs, pulse, grids, K, res = far_point()
        rng = np.random.default_rng(7)
        v = rng.normal(size=grids.tau.size) + 1j * rng.normal(size=grids.tau.size)
        u_mat, sig, vh = np.linalg.svd(K.weighted, full_matrices=False)
        coeffs = vh @ v
        keep = sig > 1e-12
        v = v - vh[keep].conj().T @ coeffs[keep]
        a_in = v / np.sqrt(grids.wtau)
        _, eta = storage_efficiency(K, a_in)
        assert eta <= 1e-20

    def test_random_inputs_bounded(self):
        s, p, obs, pulse, grids, K, res = far_point()
        rng = np.random.default_rng(11)
        for _ in range(20):
            a_in = rng.normal(size=grids.tau.size) + 1j * rng.normal(size=grids.tau.size)
            _, eta = storage_efficiency(K, a_in)
            assert eta <= res.eta_opt * (1.0 + 1e-12)
            assert eta <= 1.0

    def test_zero_input_rejected(self):
        s, p, obs, pulse, grids, K, res = far_point()
        with pytest.raises(ValueError, match="zero norm"):
            storage_efficiency(K, np.zeros(grids.tau.size))

    def test_sigma_sorted_nonnegative(self):
        s, p, obs, pulse, grids, K, res = far_point()
        assert np.all(res.sigma >= 0.0)
        assert np.all(np.diff(res.sigma) <= 0.0)


class TestInvariances:
    def test_pulse_shape_invariance(self):
        s, p, obs, pulse, grids, K, res = far_point()
        square = ControlPulse(shape="square", omega0=pulse.omega0, T=pulse.T)
        K_sq = build_kernel(p, obs, square, KernelGrids.for_pulse(s.L, square, 200, 400))
        eta_sq = optimal_efficiency(K_sq).eta_opt
        assert eta_sq == pytest.approx(res.eta_opt, rel=1e-4)

    def test_grid_doubling(self):
        s, p, obs, pulse, grids, K, res = far_point()
        fine = KernelGrids.build(s.L, s.T, 2 * s.z_points, 2 * s.tau_points)
        eta_fine = optimal_efficiency(build_kernel(p, obs, pulse, fine)).eta_opt
        assert eta_fine == pytest.approx(res.eta_opt, rel=1e-3)

    def test_export(self, tmp_path):
        s, p, obs, pulse, grids, K, res = far_point()
        from latmem.kernel import export_result

        paths = export_result(res, tmp_path, "point")
        header = paths["input"].read_text().splitlines()[0]
        assert header == "tau_ns,re_Ain,im_Ain"
        header = paths["spinwave"].read_text().splitlines()[0]
        assert header == "z_um,re_Bout,im_Bout"
        import json

        summary = json.loads(paths["summary"].read_text())
        assert summary["eta_opt"] == pytest.approx(res.eta_opt)
        assert len(summary["sigma"]) == len(res.sigma)
