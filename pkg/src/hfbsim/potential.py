"""Base interaction potential and its N-scaled dilations.

The base potential is built as v = (A w)^2 where w has a real radial bump
Fourier profile supported in |xi| <= 1/2, so that

  * v >= 0 exactly (it is a square of a real function),
  * v-hat = (A w-hat) * (A w-hat) is supported in |xi| <= 1,
  * v(x) = v(-x),

and A is calibrated so max(||v||_1, ||v||_inf) = epsilon (1 - 1e-6).

The scaled potential V_N(x) = N^{d beta} v(N^beta x) is realized by dilating
the same closed-form bump profile in Fourier space and squaring on the grid,
which keeps positivity exact and the Fourier support inside |xi| <= N^beta;
the DC mode is then rescaled so that the discrete integral of V_N equals the
integral of v exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, OneBodyField, mother_bump


class PotentialError(ValueError):
    """Invalid potential construction or scaling request."""


_W_SUPPORT = 0.5  # Fourier support radius of the square root profile w


def _w_hat_profile(r: np.ndarray) -> np.ndarray:
    """Closed-form radial profile of w-hat: bump equal to 1 below 1/4, 0 beyond 1/2."""
    return mother_bump(r / (_W_SUPPORT / 2.0))


def _square_root_field(grid: GridSpec, dilation: float) -> np.ndarray:
    """Real even field w_s with w_s-hat(xi) = profile(|xi| / dilation), on the grid."""
    w_hat = _w_hat_profile(grid.freq_modulus() / dilation)
    w = np.fft.ifftn(w_hat) / grid.cell
    return w.real


@dataclass
class PotentialSpec:
    """Base potential v, its Fourier samples, and one N-scaled instance."""

    epsilon: float
    N: float
    beta: float
    base: OneBodyField
    base_hat: np.ndarray
    scaled: OneBodyField
    amplitude: float          # calibration constant A^2 applied to w^2
    monotone_defect: float    # max positive radial increment of v (0 = monotone)
    clamp_magnitude: float = 0.0

    @property
    def grid(self) -> GridSpec:
        return self.base.grid


def _field_hat(f: OneBodyField) -> np.ndarray:
    """Quadrature Fourier coefficients h^d * FFT(f): v-hat(0) = integral of v."""
    return f.grid.cell * np.fft.fftn(f.values)


def _lp_norms(f: OneBodyField) -> tuple[float, float]:
    vals = np.abs(f.values.real)
    return float(f.grid.cell * np.sum(vals)), float(np.max(vals))


def _radial_monotone_defect(v: np.ndarray, grid: GridSpec) -> float:
    """Largest increase of v along the +axis rays out to L/2 (0 when monotone)."""
    M = grid.points
    half = M // 2 + 1
    worst = 0.0
    for ax in range(grid.dim):
        idx = [0] * grid.dim
        ray = np.moveaxis(v, ax, 0)[(slice(0, half),) + tuple(idx[1:])]
        inc = np.diff(ray.real)
        if inc.size:
            worst = max(worst, float(np.max(inc, initial=0.0)))
    return worst


def build_base_potential(grid: GridSpec, epsilon: float) -> PotentialSpec:
    """Construct the unscaled base potential on `grid` with smallness epsilon."""
    if epsilon <= 0:
        raise PotentialError(f"epsilon must be positive, got {epsilon}")
    if grid.nyquist <= 1.0:
        raise PotentialError(
            f"grid Nyquist {grid.nyquist:.4g} too small to hold the unit-ball support"
        )
    w = _square_root_field(grid, dilation=1.0)
    v_raw = w**2
    n1, ninf = _lp_norms(OneBodyField(grid, v_raw.astype(complex)))
    amp = epsilon * (1.0 - 1e-6) / max(n1, ninf)
    v = amp * v_raw
    field = OneBodyField(grid, v.astype(complex))
    spec = PotentialSpec(
        epsilon=float(epsilon),
        N=1.0,
        beta=1.0,
        base=field,
        base_hat=_field_hat(field),
        scaled=field.copy(),
        amplitude=amp,
        monotone_defect=_radial_monotone_defect(v, grid),
    )
    return spec


def scale_potential(spec: PotentialSpec, N: float, beta: float = 1.0) -> PotentialSpec:
    """V_N(x) = N^{d beta} v(N^beta x), band-limited; DC mode matched to v exactly."""
    if N < 1:
        raise PotentialError(f"N must be >= 1, got {N}")
    if not 0.0 < beta <= 1.0:
        raise PotentialError(f"beta must lie in (0, 1], got {beta}")
    grid = spec.grid
    dil = float(N) ** beta
    if dil > grid.nyquist:
        raise PotentialError(
            f"N^beta = {dil:.4g} exceeds grid Nyquist {grid.nyquist:.4g}; "
            f"the grid cannot resolve this scaling"
        )
    d = grid.dim
    w_n = _square_root_field(grid, dilation=dil)
    v_n = spec.amplitude * dil**d * w_n**2
    # enforce exact DC preservation: integral of V_N == integral of v
    base_int = float(np.sum(spec.base.values.real))
    scaled_int = float(np.sum(v_n))
    if scaled_int > 0:
        v_n *= base_int / scaled_int
    field = OneBodyField(grid, v_n.astype(complex))
    return PotentialSpec(
        epsilon=spec.epsilon,
        N=float(N),
        beta=float(beta),
        base=spec.base,
        base_hat=spec.base_hat,
        scaled=field,
        amplitude=spec.amplitude,
        monotone_defect=_radial_monotone_defect(v_n, grid),
    )


def convolve_density(v: OneBodyField, rho: OneBodyField) -> OneBodyField:
    """Periodic convolution (V * rho)(x) = h^d sum_z V(x - z) rho(z), real output."""
    if v.grid != rho.grid:
        raise PotentialError("grid mismatch in density convolution")
    for f, name in ((v, "potential"), (rho, "density")):
        scalemax = max(float(np.max(np.abs(f.values))), 1e-300)
        if np.max(np.abs(f.values.imag)) > 1e-12 * scalemax:
            raise PotentialError(f"{name} must be real-valued")
    g = v.grid
    out = np.fft.ifftn(np.fft.fftn(v.values.real) * np.fft.fftn(rho.values.real))
    out = out.real * g.cell
    return OneBodyField(g, out.astype(complex))
