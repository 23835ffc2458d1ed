"""Time integration of the coupled condensate / pair-excitation system.

Evolved unknowns are (phi, Lambda_p, Gamma_p); the condensate kernels
Lambda_c = phi (x) phi and Gamma_c = conj(phi) (x) phi are derived.  With
A = V_N * rho (Hartree mean field), V the pointwise multiplier V_N(x-y),
symm(X) = X + X^T and skew(X) = X - adj(X), the system integrated here is

  (1/i dt - Lap) phi = -A phi - int V_N(x-y) Gamma_p(y,x) phi(y) dy
                              - int V_N(x-y) Lambda_p(x,y) conj(phi)(y) dy

  (1/i dt - Lap_x - Lap_y) L_p = -{A, L_p} - (V_N/N)(L_p + L_c)
                                 - symm((V_N conj(Gamma)) o L_p + (V_N Lambda) o G_p)

  (1/i dt + Lap_x - Lap_y) G_p = +[A, G_p]
                                 + skew((V_N Gamma) o G_p + (V_N conj(Lambda)) o L_p)

The relative signs between the equations are not free: they are pinned by
requiring that

  * Lambda_c = phi (x) phi and Gamma_c = conj(phi) (x) phi solve the
    condensate-kernel analogues exactly at the continuum level (product
    rule applied to the phi equation), and
  * tr Gamma and the energy functional are conserved identically, not just
    to integrator order.

Both properties are verified to round-off by the test suite; flipping any
single interaction sign breaks at least one of them.

Integrator: Strang splitting with the exact Fourier kinetic propagator and
a classical RK4 substep for the interaction terms; second order in dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import GridSpec, OneBodyField, PairKernel
from .kernels import assemble_densities, difference_kernel, sh_ch_from_k
from .potential import PotentialSpec, convolve_density


class EvolutionError(RuntimeError):
    """Integrator misuse or numerical failure (stability guard, NaN)."""


class BlowupError(EvolutionError):
    """Non-finite values encountered during time stepping."""


@dataclass
class HFBState:
    """Evolved unknowns at one time; condensate kernels derived on demand."""

    t: float
    phi: OneBodyField
    lam_p: PairKernel     # symmetric
    gam_p: PairKernel     # hermitian

    @property
    def grid(self) -> GridSpec:
        return self.phi.grid

    def lam_c(self) -> np.ndarray:
        f = self.phi.values.reshape(-1)
        return (f[:, None] * f[None, :]).reshape(self.grid.shape * 2)

    def gam_c(self) -> np.ndarray:
        f = self.phi.values.reshape(-1)
        return (np.conj(f)[:, None] * f[None, :]).reshape(self.grid.shape * 2)

    def lam(self) -> np.ndarray:
        return self.lam_p.values + self.lam_c()

    def gam(self) -> np.ndarray:
        return self.gam_p.values + self.gam_c()

    def rho(self) -> np.ndarray:
        g = self.grid
        return np.einsum("ii->i", self.gam().reshape(g.size, g.size)).real.reshape(g.shape)

    def trace_gamma(self) -> float:
        g = self.grid
        tr_p = np.trace(self.gam_p.as_matrix()).real * g.cell
        return float(g.cell * np.sum(np.abs(self.phi.values) ** 2) + tr_p)

    def copy(self) -> "HFBState":
        return HFBState(self.t, self.phi.copy(), self.lam_p.copy(), self.gam_p.copy())


@dataclass
class EnergyReport:
    trace_gamma: float
    energy: float
    kinetic: float
    potential_terms: tuple[float, float, float, float]
    drift_trace: float = 0.0
    drift_energy: float = 0.0


@dataclass
class Trajectory:
    """Uniformly sampled evolution history; substrate for all time norms."""

    times: np.ndarray
    grid: GridSpec
    data: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size >= 2:
            steps = np.diff(self.times)
            if np.max(np.abs(steps - steps[0])) > 1e-10 * max(steps[0], 1e-30):
                raise EvolutionError("trajectory samples are not uniformly spaced")
            if steps[0] <= 0:
                raise EvolutionError("trajectory times must be strictly increasing")

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    @property
    def dt_sample(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float(self.times[1] - self.times[0])


class _EvolutionContext:
    """Precomputed arrays shared by all steps of one run."""

    def __init__(self, grid: GridSpec, pot: PotentialSpec, N: float, dt: float):
        if dt <= 0:
            raise EvolutionError(f"dt must be positive, got {dt}")
        vmax = float(np.max(np.abs(pot.scaled.values.real)))
        if dt * vmax > 1.0:
            raise EvolutionError(
                f"stability guard violated: dt * ||V_N||_inf = {dt * vmax:.3g} > 1"
            )
        self.grid = grid
        self.pot = pot
        self.N = float(N)
        self.dt = float(dt)
        self.vd = difference_kernel(pot.scaled).real.reshape(grid.size, grid.size)
        self.un = self.vd / N
        k2 = grid.freq_modulus() ** 2
        n = grid.size
        kx = k2.reshape(-1)[:, None]
        ky = k2.reshape(-1)[None, :]
        half = 0.5 * dt
        # free propagators for a half step: phi and Lambda rotate with
        # exp(-i |xi|^2 t)-type phases, Gamma with exp(+i(|xi|^2 - |eta|^2) t)
        self.phase_phi = np.exp(-1j * k2 * half)
        self.phase_lam = np.exp(-1j * (kx + ky) * half).reshape(grid.shape * 2)
        self.phase_gam = np.exp(1j * (kx - ky) * half).reshape(grid.shape * 2)
        # workspaces reused by every interaction evaluation (dominant cost)
        self._w = [np.empty((n, n), dtype=complex) for _ in range(3)]


def _rhs(ctx: _EvolutionContext, phi: np.ndarray, lp: np.ndarray, gp: np.ndarray,
         shadow: Optional[tuple[np.ndarray, np.ndarray]] = None):
    """Interaction right-hand sides (kinetic part handled spectrally)."""
    g = ctx.grid
    n = g.size
    h = g.cell
    vd, un, N = ctx.vd, ctx.un, ctx.N

    f = phi.reshape(-1)
    fbar = np.conj(f)
    lc = f[:, None] * f[None, :]
    gc = fbar[:, None] * f[None, :]
    lpm = lp.reshape(n, n)
    gpm = gp.reshape(n, n)
    gamma = gpm + gc
    lam = lpm + lc
    rho = np.einsum("ii->i", gamma).real
    a = convolve_density(ctx.pot.scaled,
                         OneBodyField(g, rho.reshape(g.shape).astype(complex))).values.real
    av = a.reshape(-1)

    w0, w1, w2 = ctx._w

    np.multiply(vd, gpm.T, out=w0)
    b_phi = h * (w0 @ f)
    np.multiply(vd, lpm, out=w0)
    c_phi = h * (w0 @ fbar)
    dphi = 1j * (-av * f - b_phi - c_phi)

    # symm((V conj(Gamma)) o L_p + (V Lambda) o G_p), two fused products
    np.conjugate(gamma, out=w0)
    w0 *= vd
    np.matmul(w0, lpm, out=w1)            # (V conj(Gamma)) o L_p / h
    np.multiply(vd, lam, out=w0)
    np.matmul(w0, gpm, out=w2)            # (V Lambda) o G_p / h
    w1 += w2
    sym = w1 + w1.T
    dlp = 1j * (-(av[:, None] + av[None, :]) * lpm
                - un * lpm - un * lc - h * sym)

    np.multiply(vd, gamma, out=w0)
    np.matmul(w0, gpm, out=w1)            # (V Gamma) o G_p / h
    np.conjugate(lam, out=w0)
    w0 *= vd
    np.matmul(w0, lpm, out=w2)            # (V conj(Lambda)) o L_p / h
    w1 += w2
    skew = w1 - w1.conj().T
    dgp = 1j * ((av[:, None] - av[None, :]) * gpm + h * skew)

    if shadow is None:
        return (dphi.reshape(g.shape), dlp.reshape(g.shape * 2),
                dgp.reshape(g.shape * 2), None, None)

    # shadow condensate kernels evolved by their own (derived) equations
    lcs, gcs = shadow
    lcm = lcs.reshape(n, n)
    gcm = gcs.reshape(n, n)
    wg_c = h * ((vd * np.conj(gpm)) @ lcm)
    wl_c = h * ((vd * lpm) @ gcm)
    sym_c = wg_c + wl_c
    dlc = 1j * (-(av[:, None] + av[None, :]) * lcm - (sym_c + sym_c.T))
    qg_c = h * ((vd * gpm) @ gcm)
    ql_c = h * ((vd * np.conj(lpm)) @ lcm)
    skew_c = qg_c + ql_c
    dgc = 1j * ((av[:, None] - av[None, :]) * gcm
                + (skew_c - skew_c.conj().T))
    return (dphi.reshape(g.shape), dlp.reshape(g.shape * 2),
            dgp.reshape(g.shape * 2), dlc.reshape(g.shape * 2),
            dgc.reshape(g.shape * 2))


def _kinetic_half(ctx: _EvolutionContext, phi, lp, gp, lcs=None, gcs=None):
    phi = np.fft.ifftn(ctx.phase_phi * np.fft.fftn(phi))
    lp = np.fft.ifftn(ctx.phase_lam * np.fft.fftn(lp))
    gp = np.fft.ifftn(ctx.phase_gam * np.fft.fftn(gp))
    if lcs is not None:
        lcs = np.fft.ifftn(ctx.phase_lam * np.fft.fftn(lcs))
        gcs = np.fft.ifftn(ctx.phase_gam * np.fft.fftn(gcs))
    return phi, lp, gp, lcs, gcs


def _rk4_nonlinear(ctx: _EvolutionContext, phi, lp, gp, lcs=None, gcs=None):
    dt = ctx.dt
    shadow = None if lcs is None else (lcs, gcs)
    k1 = _rhs(ctx, phi, lp, gp, shadow)
    s2 = None if lcs is None else (lcs + 0.5 * dt * k1[3], gcs + 0.5 * dt * k1[4])
    k2 = _rhs(ctx, phi + 0.5 * dt * k1[0], lp + 0.5 * dt * k1[1],
              gp + 0.5 * dt * k1[2], s2)
    s3 = None if lcs is None else (lcs + 0.5 * dt * k2[3], gcs + 0.5 * dt * k2[4])
    k3 = _rhs(ctx, phi + 0.5 * dt * k2[0], lp + 0.5 * dt * k2[1],
              gp + 0.5 * dt * k2[2], s3)
    s4 = None if lcs is None else (lcs + dt * k3[3], gcs + dt * k3[4])
    k4 = _rhs(ctx, phi + dt * k3[0], lp + dt * k3[1], gp + dt * k3[2], s4)

    c = dt / 6.0
    phi = phi + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    lp = lp + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    gp = gp + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    if lcs is not None:
        lcs = lcs + c * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        gcs = gcs + c * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
    return phi, lp, gp, lcs, gcs


def step(state: HFBState, dt: float, pot: PotentialSpec, N: float) -> HFBState:
    """One Strang step: half kinetic, RK4 interaction, half kinetic."""
    ctx = _EvolutionContext(state.grid, pot, N, dt)
    phi, lp, gp, _, _ = _strang(ctx, state.phi.values, state.lam_p.values,
                                state.gam_p.values)
    return HFBState(
        state.t + dt,
        OneBodyField(state.grid, phi),
        PairKernel(state.grid, lp, symmetry="symmetric"),
        PairKernel(state.grid, gp, symmetry="hermitian"),
    )


def _strang(ctx, phi, lp, gp, lcs=None, gcs=None):
    phi, lp, gp, lcs, gcs = _kinetic_half(ctx, phi, lp, gp, lcs, gcs)
    phi, lp, gp, lcs, gcs = _rk4_nonlinear(ctx, phi, lp, gp, lcs, gcs)
    phi, lp, gp, lcs, gcs = _kinetic_half(ctx, phi, lp, gp, lcs, gcs)
    return phi, lp, gp, lcs, gcs


def _check_finite(*arrays):
    for a in arrays:
        if a is not None and not np.all(np.isfinite(a.view(float))):
            raise BlowupError("non-finite values during evolution "
                              "(blow-up or dt too large)")


@dataclass
class GaussianProfile:
    """Condensate initial shape A exp(-(x-center)^2 / (2 width^2)), per axis."""

    width: float = 1.0
    center: Optional[float] = None
    amplitude: float = 1.0

    def sample(self, grid: GridSpec) -> np.ndarray:
        c = self.center if self.center is not None else grid.length / 2.0
        out = np.ones(grid.shape, dtype=complex) * self.amplitude
        mesh = grid.mesh()
        for ax in range(grid.dim):
            # minimal periodic distance keeps the profile even on the torus
            dxa = (mesh[ax] - c + grid.length / 2.0) % grid.length - grid.length / 2.0
            out = out * np.exp(-(dxa**2) / (2.0 * self.width**2))
        return out


def rank_one_pair_kernel(grid: GridSpec, amplitude: float,
                         width: float = 1.0) -> PairKernel:
    """k0 = amplitude * g (x) g with g a unit-L2 Gaussian; symmetric by construction."""
    prof = GaussianProfile(width=width)
    gvals = prof.sample(grid).reshape(-1)
    norm = np.sqrt(grid.cell * np.sum(np.abs(gvals) ** 2))
    gvals = gvals / norm
    vals = amplitude * (gvals[:, None] * gvals[None, :])
    return PairKernel(grid, vals.reshape(grid.shape * 2), symmetry="symmetric")


def init_state(grid: GridSpec, phi_profile: Optional[GaussianProfile],
               k0: Optional[PairKernel], N: float,
               rescale_k: bool = False) -> HFBState:
    """Initial data normalized to unit particle number.

    Scales phi so that ||phi||_2^2 + ||sh(k0)||_2^2 / N = 1.  With no
    condensate component, rescale_k=True instead rescales k0 to reach unit
    trace; otherwise the construction fails.
    """
    if k0 is None:
        pair_norm_sq = 0.0
        pair = None
    else:
        pair = sh_ch_from_k(k0, tol=1e-14)
        pair_norm_sq = pair.sh.l2() ** 2 / N

    phi_vals = None
    if phi_profile is not None:
        phi_vals = phi_profile.sample(grid)
        if np.max(np.abs(phi_vals)) == 0.0:
            phi_vals = None

    if phi_vals is None and pair is None:
        raise EvolutionError("initial data requires a condensate or a pair kernel")

    if phi_vals is not None:
        mass = 1.0 - pair_norm_sq
        if mass <= 0:
            raise EvolutionError(
                f"pair excitation alone carries trace {pair_norm_sq:.6g} >= 1; "
                f"reduce k0 or enable rescale_k"
            )
        cur = grid.cell * np.sum(np.abs(phi_vals) ** 2)
        phi_vals = phi_vals * np.sqrt(mass / cur)
    else:
        if not rescale_k:
            raise EvolutionError(
                "no condensate: normalization requires rescale_k=True to "
                "rescale the pair kernel to unit trace"
            )
        # bisect the amplitude so that ||sh(mu k0)||^2 / N = 1
        lo, hi = 0.0, 1.0
        while _pair_trace(k0, hi, N) < 1.0:
            hi *= 2.0
            if hi > 64:
                raise EvolutionError("cannot rescale pair kernel to unit trace")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _pair_trace(k0, mid, N) < 1.0:
                lo = mid
            else:
                hi = mid
        from .kernels import scale as kscale

        k0 = kscale(k0, 0.5 * (lo + hi))
        pair = sh_ch_from_k(k0, tol=1e-14)
        phi_vals = np.zeros(grid.shape, dtype=complex)

    phi = OneBodyField(grid, phi_vals)
    if pair is None:
        n = grid.size
        lam_p = PairKernel(grid, np.zeros(grid.shape * 2, complex), "symmetric")
        gam_p = PairKernel(grid, np.zeros(grid.shape * 2, complex), "hermitian")
    else:
        dens = assemble_densities(phi, pair, N)
        lam_p, gam_p = dens.lam_p, dens.gamma_p
    return HFBState(0.0, phi, lam_p, gam_p)


def _pair_trace(k0: PairKernel, mu: float, N: float) -> float:
    from .kernels import scale as kscale

    pair = sh_ch_from_k(kscale(k0, mu), tol=1e-14)
    return pair.sh.l2() ** 2 / N


def energy_report(state: HFBState, pot: PotentialSpec, N: float,
                  ref_trace: Optional[float] = None,
                  ref_energy: Optional[float] = None) -> EnergyReport:
    """Conserved quantities: particle trace and energy per particle."""
    g = state.grid
    h = g.cell
    vd = difference_kernel(pot.scaled).real.reshape(g.size, g.size)
    gamma = state.gam().reshape(g.size, g.size)
    lam = state.lam().reshape(g.size, g.size)
    rho = np.einsum("ii->i", gamma).real
    phi2 = np.abs(state.phi.values.reshape(-1)) ** 2

    kin = _mixed_gradient_trace(g, gamma)
    e_lam = 0.5 * h * h * float(np.sum(vd * np.abs(lam) ** 2))
    e_gam = 0.5 * h * h * float(np.sum(vd * np.abs(gamma) ** 2))
    e_rho = 0.5 * h * h * float(np.sum(vd * (rho[:, None] * rho[None, :])))
    e_phi = -h * h * float(np.sum(vd * (phi2[:, None] * phi2[None, :])))
    energy = kin + e_lam + e_gam + e_rho + e_phi
    tr = state.trace_gamma()
    return EnergyReport(
        trace_gamma=tr,
        energy=energy,
        kinetic=kin,
        potential_terms=(e_lam, e_gam, e_rho, e_phi),
        drift_trace=abs(tr - ref_trace) if ref_trace is not None else 0.0,
        drift_energy=(abs(energy - ref_energy) / max(1.0, abs(ref_energy))
                      if ref_energy is not None else 0.0),
    )


def _mixed_gradient_trace(g: GridSpec, gamma_matrix: np.ndarray) -> float:
    """tr{grad_x . grad_y Gamma} via the spectral mixed derivative."""
    k = g.freq_axis()
    gam = gamma_matrix.reshape(g.shape * 2)
    total = 0.0
    for ax in range(g.dim):
        shape_x = [1] * (2 * g.dim)
        shape_x[ax] = g.points
        shape_y = [1] * (2 * g.dim)
        shape_y[g.dim + ax] = g.points
        sym = (1j * k.reshape(shape_x)) * (1j * k.reshape(shape_y))
        dk = np.fft.ifftn(sym * np.fft.fftn(gam))
        total += float(np.trace(dk.reshape(g.size, g.size)).real) * g.cell
    return total


def evolve(state0: HFBState, pot: PotentialSpec, N: float, T: float, dt: float,
           sample_every: int = 1, shadow: bool = False) -> Trajectory:
    """Iterate Strang steps to time T, recording every `sample_every` steps.

    With shadow=True the condensate kernels are co-evolved by their own
    equations (for the consistency check against phi (x) phi); this doubles
    the interaction cost and is off by default.
    """
    if T < 0:
        raise EvolutionError(f"horizon T must be nonnegative, got {T}")
    if sample_every < 1:
        raise EvolutionError("sample_every must be >= 1")
    n_steps = int(round(T / dt)) if T > 0 else 0
    if T > 0 and abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise EvolutionError(f"dt {dt} does not divide horizon {T}")
    if n_steps % sample_every != 0:
        raise EvolutionError("sample_every must divide the number of steps")

    g = state0.grid
    ctx = _EvolutionContext(g, pot, N, dt) if n_steps > 0 else None
    phi = state0.phi.values.copy()
    lp = state0.lam_p.values.copy()
    gp = state0.gam_p.values.copy()
    lcs = gcs = None
    if shadow:
        lcs = state0.lam_c()
        gcs = state0.gam_c()

    times = [state0.t]
    phis = [phi.copy()]
    lps = [lp.copy()]
    gps = [gp.copy()]
    lcss = [lcs.copy()] if shadow else None
    gcss = [gcs.copy()] if shadow else None
    traces = [state0.trace_gamma()]
    rep0 = energy_report(state0, pot, N)
    energies = [rep0.energy]

    for i in range(1, n_steps + 1):
        phi, lp, gp, lcs, gcs = _strang(ctx, phi, lp, gp, lcs, gcs)
        if i % sample_every == 0:
            _check_finite(phi, lp, gp, lcs, gcs)
            st = HFBState(state0.t + i * dt, OneBodyField(g, phi),
                          PairKernel(g, lp, symmetry="symmetric"),
                          PairKernel(g, gp, symmetry="hermitian"))
            times.append(st.t)
            phis.append(phi.copy())
            lps.append(lp.copy())
            gps.append(gp.copy())
            if shadow:
                lcss.append(lcs.copy())
                gcss.append(gcs.copy())
            traces.append(st.trace_gamma())
            energies.append(energy_report(st, pot, N).energy)

    data = {
        "phi": np.stack(phis),
        "lam_p": np.stack(lps),
        "gam_p": np.stack(gps),
        "trace": np.asarray(traces),
        "energy": np.asarray(energies),
    }
    if shadow:
        data["lam_c_shadow"] = np.stack(lcss)
        data["gam_c_shadow"] = np.stack(gcss)
    meta = {
        "N": float(N),
        "epsilon": pot.epsilon,
        "beta": pot.beta,
        "dt": dt,
        "sample_every": sample_every,
        "trace0": traces[0],
        "energy0": energies[0],
        # size of the initial data, the constant tracked by the estimates
        "C0": max(1.0, energies[0]),
    }
    return Trajectory(times=np.asarray(times), grid=g, data=data, meta=meta)
