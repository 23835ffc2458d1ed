"""Coupled-system integrator: conservation, analytics, order, consistency."""

import numpy as np
import pytest

from hfbsim.grid import OneBodyField, PairKernel, make_grid
from hfbsim.evolution import (
    EvolutionError,
    GaussianProfile,
    HFBState,
    energy_report,
    evolve,
    init_state,
    rank_one_pair_kernel,
    step,
)
from hfbsim.kernels import difference_kernel
from hfbsim.potential import build_base_potential, scale_potential


def standard_setup(points=64, epsilon=0.05, N=None, k0_amp=0.1):
    if N is None:
        N = 8.0 if points >= 64 else 4.0
    g = make_grid(1, points, 16.0)
    pot = scale_potential(build_base_potential(g, epsilon), N, 1.0)
    k0 = rank_one_pair_kernel(g, k0_amp) if k0_amp else None
    state = init_state(g, GaussianProfile(width=1.0), k0, N)
    return g, pot, state, N


def free_gaussian(x, t, center, sigma, length, amplitude, images=2):
    """Closed-form free evolution of a Gaussian packet, torus-periodized."""
    den = sigma**2 + 2j * t
    out = np.zeros_like(x, dtype=complex)
    for n in range(-images, images + 1):
        xs = x - center + n * length
        out += (sigma**2 / den) ** 0.5 * np.exp(-(xs**2) / (2 * den))
    return amplitude * out


class TestInitState:
    def test_pure_condensate_normalization(self):
        g, pot, state, N = standard_setup(k0_amp=0.0)
        assert state.trace_gamma() == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(state.lam_p.values)) == 0.0

    def test_mixed_normalization(self):
        g, pot, state, N = standard_setup()
        assert state.trace_gamma() == pytest.approx(1.0, abs=1e-12)

    def test_pair_only_requires_rescale(self):
        g = make_grid(1, 32, 16.0)
        k0 = rank_one_pair_kernel(g, 0.3)
        with pytest.raises(EvolutionError, match="rescale_k"):
            init_state(g, None, k0, 4.0)
        state = init_state(g, None, k0, 4.0, rescale_k=True)
        assert state.trace_gamma() == pytest.approx(1.0, abs=1e-9)
        # rank-one kernel: trace = sinh(mu)^2 / N forces mu = asinh(sqrt(N)),
        # so trace gamma_p alone carries the whole unit mass
        assert np.max(np.abs(state.phi.values)) == 0.0

    def test_empty_data_rejected(self):
        g = make_grid(1, 32, 16.0)
        with pytest.raises(EvolutionError):
            init_state(g, None, None, 4.0)


class TestStep:
    def test_zero_state_is_fixed_point(self):
        g = make_grid(1, 32, 16.0)
        pot = scale_potential(build_base_potential(g, 0.05), 4.0, 1.0)
        zero = HFBState(
            0.0,
            OneBodyField(g, np.zeros(32, complex)),
            PairKernel(g, np.zeros((32, 32), complex), symmetry="symmetric"),
            PairKernel(g, np.zeros((32, 32), complex), symmetry="hermitian"),
        )
        out = step(zero, 1e-3, pot, 4.0)
        assert np.all(out.phi.values == 0)
        assert np.all(out.lam_p.values == 0)
        assert np.all(out.gam_p.values == 0)

    def test_stability_guard(self):
        g, pot, state, N = standard_setup(points=128, epsilon=0.5, N=16.0)
        with pytest.raises(EvolutionError, match="stability"):
            step(state, 100.0, pot, N)

    def test_symmetry_preserved(self):
        g, pot, state, N = standard_setup(points=32)
        st = state
        for _ in range(20):
            st = step(st, 1e-3, pot, N)
        assert st.lam_p.symmetry_defect() < 1e-10
        assert st.gam_p.symmetry_defect() < 1e-10

    def test_richardson_order(self):
        g, pot, state, N = standard_setup(points=32, epsilon=0.2, N=4.0, k0_amp=0.2)
        T = 0.2
        sols = {}
        for dt in (4e-3, 2e-3, 1e-3):
            traj = evolve(state, pot, N, T, dt,
                          sample_every=int(round(T / dt)))
            sols[dt] = traj.data["lam_p"][-1]
        e1 = np.max(np.abs(sols[4e-3] - sols[2e-3]))
        e2 = np.max(np.abs(sols[2e-3] - sols[1e-3]))
        order = np.log2(e1 / e2)
        assert 1.8 <= order <= 2.2


class TestEvolve:
    def test_zero_horizon(self):
        g, pot, state, N = standard_setup(points=32)
        traj = evolve(state, pot, N, 0.0, 1e-3)
        assert traj.n_samples == 1

    def test_free_flow_conserves_exactly(self):
        g = make_grid(1, 64, 16.0)
        pot = scale_potential(build_base_potential(g, 1e-300), 8.0, 1.0)
        state = init_state(g, GaussianProfile(width=1.0),
                           rank_one_pair_kernel(g, 0.1), 8.0)
        traj = evolve(state, pot, 8.0, 0.2, 1e-3, sample_every=20)
        tr = traj.data["trace"]
        en = traj.data["energy"]
        assert np.max(np.abs(tr - tr[0])) < 1e-10
        assert np.max(np.abs(en - en[0])) < 1e-10

    def test_conservation_short_run(self):
        g, pot, state, N = standard_setup()
        traj = evolve(state, pot, N, 0.2, 1e-3, sample_every=20)
        tr = traj.data["trace"]
        en = traj.data["energy"]
        assert np.max(np.abs(tr - 1.0)) < 1e-9
        assert np.max(np.abs(en - en[0])) / max(1.0, abs(en[0])) < 1e-7

    def test_free_gaussian_analytic(self):
        g = make_grid(1, 64, 16.0)
        pot = scale_potential(build_base_potential(g, 1e-300), 8.0, 1.0)
        state = init_state(g, GaussianProfile(width=1.0), None, 8.0)
        amp = np.max(np.abs(state.phi.values))
        traj = evolve(state, pot, 8.0, 0.1, 1e-3, sample_every=100)
        expected = free_gaussian(g.axis(), 0.1, 8.0, 1.0, 16.0, amp)
        err = np.max(np.abs(traj.data["phi"][-1] - expected))
        assert err < 1e-8

    def test_shadow_condensate_consistency(self):
        # Shadow kernels evolved by their own (derived) equations track
        # phi (x) phi.  The exact kinetic phases are product-compatible and
        # the RK4 product defect only enters at fifth order with eps-small
        # coefficients, so the agreement sits far below the C dt^2 bound.
        g, pot, state, N = standard_setup(points=32, epsilon=0.2, N=4.0)
        dt = 1e-3
        traj = evolve(state, pot, N, 0.2, dt,
                      sample_every=int(round(0.2 / dt)), shadow=True)
        phi = traj.data["phi"][-1]
        lam_c = np.outer(phi, phi)
        gam_c = np.outer(phi.conj(), phi)
        err = max(
            np.max(np.abs(traj.data["lam_c_shadow"][-1] - lam_c)),
            np.max(np.abs(traj.data["gam_c_shadow"][-1] - gam_c)))
        assert err < 10.0 * dt**2  # the consistency bound; observed ~1e-14

    def test_dt_must_divide_horizon(self):
        g, pot, state, N = standard_setup(points=32)
        with pytest.raises(EvolutionError, match="divide"):
            evolve(state, pot, N, 0.25, 1e-3 * 3, sample_every=1)


class TestEnergyReport:
    def test_zero_state_energy(self):
        g = make_grid(1, 32, 16.0)
        pot = scale_potential(build_base_potential(g, 0.05), 4.0, 1.0)
        zero = HFBState(
            0.0,
            OneBodyField(g, np.zeros(32, complex)),
            PairKernel(g, np.zeros((32, 32), complex), symmetry="symmetric"),
            PairKernel(g, np.zeros((32, 32), complex), symmetry="hermitian"),
        )
        rep = energy_report(zero, pot, 4.0)
        assert rep.energy == 0.0
        assert rep.trace_gamma == 0.0

    def test_free_energy_is_gradient_norm(self):
        g, pot0, state, N = standard_setup(points=64, k0_amp=0.0)
        pot = scale_potential(build_base_potential(g, 1e-300), 8.0, 1.0)
        rep = energy_report(state, pot, N)
        xi = g.freq_axis()
        phi_hat = np.fft.fft(state.phi.values)
        grad_sq = g.h * np.sum(np.abs(xi * phi_hat) ** 2) / 64
        assert rep.energy == pytest.approx(grad_sq, rel=1e-10)
        assert rep.kinetic == pytest.approx(rep.energy, rel=1e-12)

    def test_condensate_potential_closed_form(self):
        # k = 0: total potential part collapses to (1/2) iint V |phi|^2 |phi|^2
        g, pot, state, N = standard_setup(points=64, k0_amp=0.0)
        rep = energy_report(state, pot, N)
        vd = difference_kernel(pot.scaled).real
        phi2 = np.abs(state.phi.values) ** 2
        oracle = 0.5 * g.h**2 * np.sum(vd * np.outer(phi2, phi2))
        pot_total = sum(rep.potential_terms)
        assert abs(pot_total - oracle) / abs(oracle) < 1e-9
        # and the structure: three +1/2 contributions, one -1 contribution
        e_lam, e_gam, e_rho, e_phi = rep.potential_terms
        assert e_lam == pytest.approx(oracle, rel=1e-9)
        assert e_gam == pytest.approx(oracle, rel=1e-9)
        assert e_rho == pytest.approx(oracle, rel=1e-9)
        assert e_phi == pytest.approx(-2 * oracle, rel=1e-9)

    def test_energy_components_sum(self):
        g, pot, state, N = standard_setup(points=32)
        rep = energy_report(state, pot, N)
        assert rep.energy == pytest.approx(
            rep.kinetic + sum(rep.potential_terms), rel=1e-12)

    def test_kinetic_parseval(self):
        # tr{grad_x . grad_y Gamma} equals the diagonal frequency sum
        # (h/M) sum_xi xi^2 Gamma_hat(xi, -xi), with the phi part reducing
        # to sum |xi|^2 |phi_hat|^2
        g, pot, state, N = standard_setup(points=64)
        M = g.points
        rep = energy_report(state, pot, N)
        xi = g.freq_axis()
        gam_hat = np.fft.fft2(state.gam())
        diag = np.array([gam_hat[m, (-m) % M] for m in range(M)])
        fourier_side = (g.h / M) * np.sum(xi**2 * diag).real
        assert abs(rep.kinetic - fourier_side) < 1e-10
        phi_hat = np.fft.fft(state.phi.values)
        phi_part = g.h * np.sum(np.abs(xi * phi_hat) ** 2) / M
        gam_c_hat = np.fft.fft2(state.gam_c())
        diag_c = np.array([gam_c_hat[m, (-m) % M] for m in range(M)])
        assert (g.h / M) * np.sum(xi**2 * diag_c).real == pytest.approx(
            phi_part, rel=1e-10)
