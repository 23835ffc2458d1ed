"""Kernel algebra: composition, hyperbolic operator functions, density matrices.

Compositions are discrete operator products, (a o b)(x,y) = h^d sum_z a(x,z) b(z,y),
so the identity element is the discrete delta, delta_h = I / h^d.

The hyperbolic pair (sh, ch) of a symmetric kernel k is defined by the block
matrix exponential of [[0, k], [conj(k), 0]]:

    sh(k) = k + (k o kbar o k)/3! + (k o kbar)^2 o k/5! + ...     (symmetric)
    ch(k) = delta_h + (k o kbar)/2! + (k o kbar)^2/4! + ...       (hermitian)

where kbar is the entrywise conjugate.  The exponential is the authority for
the placement of conjugates in the series; with this arrangement the Bogoliubov
(symplectic) identity reads

    ch o adj(ch) - sh o adj(sh) = delta_h,

with adj the operator adjoint; adj(ch) = ch (hermitian) and adj(sh) = conj(sh)
(symmetric), so the sh term matches the entrywise-conjugate form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .grid import GridSpec, OneBodyField, PairKernel


class KernelError(ValueError):
    """Kernel algebra misuse (grid mismatch, wrong symmetry, series divergence)."""


SERIES_TERM_CAP = 40

_ORACLE_MAX_SIZE = 64  # dense 2n x 2n exponentiation limit, n = M^d


def _check_same_grid(*objs):
    g0 = objs[0].grid
    for o in objs[1:]:
        if o.grid != g0:
            raise KernelError("grid mismatch between kernel operands")
    return g0


def delta_kernel(grid: GridSpec) -> PairKernel:
    """Discrete delta(x - y): identity matrix divided by h^d."""
    vals = np.eye(grid.size, dtype=complex) / grid.cell
    return PairKernel(grid, vals.reshape(grid.shape + grid.shape), symmetry="hermitian")


def compose(a: PairKernel, b: PairKernel, symmetry: str = "none") -> PairKernel:
    """(a o b)(x,y) = h^d sum_z a(x,z) b(z,y)."""
    g = _check_same_grid(a, b)
    vals = g.cell * (a.as_matrix() @ b.as_matrix())
    return PairKernel(g, vals.reshape(g.shape + g.shape), symmetry=symmetry)


def difference_kernel(v: OneBodyField) -> np.ndarray:
    """Array V(x - z) on the pair lattice, periodic difference per axis."""
    g = v.grid
    M, d = g.points, g.dim
    diff = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    idx = []
    for ax in range(d):
        shape = [1] * (2 * d)
        shape[ax] = M
        shape[d + ax] = M
        idx.append(diff.reshape(shape))
    return v.values[tuple(idx)]


def weighted_compose(v: OneBodyField, a: PairKernel, b: PairKernel) -> PairKernel:
    """((V a) o b)(x,y) = h^d sum_z V(x-z) a(x,z) b(z,y), V real."""
    g = _check_same_grid(v, a, b)
    if np.max(np.abs(v.values.imag)) > 1e-12 * max(np.max(np.abs(v.values)), 1e-300):
        raise KernelError("weight potential must be real-valued")
    w = difference_kernel(v).real * a.values
    vals = g.cell * (w.reshape(g.size, g.size) @ b.as_matrix())
    return PairKernel(g, vals.reshape(g.shape + g.shape))


def trace(k: PairKernel) -> complex:
    """h^d sum_x k(x, x)."""
    return complex(k.grid.cell * np.trace(k.as_matrix()))


def frobenius(k: PairKernel) -> float:
    """Discrete L2(dx dy) norm, the Frobenius norm used for series control."""
    return k.l2()


@dataclass
class BogoliubovPair:
    """sh/ch blocks of the Bogoliubov exponential generated by a kernel k."""

    ch: PairKernel
    sh: PairKernel
    source_k: PairKernel
    series_terms_used: int
    truncation_residual: float

    def symplectic_defect(self) -> float:
        """L2(dx dy) norm of ch o adj(ch) - sh o adj(sh) - delta_h."""
        g = self.ch.grid
        chm = self.ch.as_matrix() * g.cell
        shm = self.sh.as_matrix() * g.cell
        resid = chm @ chm.conj().T - shm @ shm.conj().T - np.eye(g.size)
        # operator-normalized residual equals the kernel L2 norm directly
        return float(np.linalg.norm(resid))


def _require_symmetric(k: PairKernel):
    if k.symmetry != "symmetric" or k.symmetry_defect() > 1e-10:
        raise KernelError("pair excitation kernel must carry a valid symmetric tag")


def sh_ch_from_k(k: PairKernel, tol: float = 1e-12) -> BogoliubovPair:
    """Sum the alternating-conjugate series for sh(k), ch(k) until term norm < tol."""
    _require_symmetric(k)
    if tol <= 0:
        raise KernelError("series tolerance must be positive")
    g = k.grid
    km = k.as_matrix()
    kbar = km.conj()
    cell = g.cell

    sh = km.copy()
    ch = np.eye(g.size, dtype=complex) / cell
    term_sh = km.copy()          # (k kbar)^n k / (2n+1)!
    term_ch = None               # (k kbar)^n / (2n)!, n >= 1
    terms = 1
    residual = float(np.sqrt(np.sum(np.abs(term_sh) ** 2)) * cell)
    if residual < tol:  # k = 0 degenerates to sh = 0, ch = delta_h
        sh_k = PairKernel(g, sh.reshape(g.shape + g.shape), symmetry="symmetric")
        ch_k = PairKernel(g, ch.reshape(g.shape + g.shape), symmetry="hermitian")
        return BogoliubovPair(ch=ch_k, sh=sh_k, source_k=k.copy(),
                              series_terms_used=1, truncation_residual=residual)
    for n in range(1, SERIES_TERM_CAP + 1):
        # advance both series by one composition with (k o kbar)
        term_sh = cell**2 * (km @ (kbar @ term_sh)) / ((2 * n) * (2 * n + 1))
        if term_ch is None:
            term_ch = cell * (km @ kbar) / 2.0
        else:
            term_ch = cell**2 * (km @ (kbar @ term_ch)) / ((2 * n - 1) * (2 * n))
        sh += term_sh
        ch += term_ch
        terms = n + 1
        residual = float(
            np.sqrt(np.sum(np.abs(term_sh) ** 2) + np.sum(np.abs(term_ch) ** 2)) * cell
        )
        if residual < tol:
            break
    else:
        raise KernelError(
            f"sh/ch series did not converge within {SERIES_TERM_CAP} terms "
            f"(residual {residual:.3e}); kernel too large, use block_exp_oracle"
        )
    sh_k = PairKernel(g, sh.reshape(g.shape + g.shape), symmetry="symmetric")
    ch_k = PairKernel(g, ch.reshape(g.shape + g.shape), symmetry="hermitian")
    return BogoliubovPair(ch=ch_k, sh=sh_k, source_k=k.copy(),
                          series_terms_used=terms, truncation_residual=residual)


def block_exp_oracle(k: PairKernel) -> BogoliubovPair:
    """sh/ch via dense exponentiation of [[0, k h^d], [conj(k) h^d, 0]].

    Independent of the series path; scaling-and-squaring Pade exponential.
    """
    _require_symmetric(k)
    g = k.grid
    n = g.size
    if n > _ORACLE_MAX_SIZE:
        raise KernelError(
            f"grid size M^d = {n} too large for the dense exponential oracle "
            f"(limit {_ORACLE_MAX_SIZE})"
        )
    km = k.as_matrix() * g.cell
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[:n, n:] = km
    block[n:, :n] = km.conj()
    e = expm(block)
    ch_vals = e[:n, :n] / g.cell
    sh_vals = e[:n, n:] / g.cell
    ch_k = PairKernel(g, ch_vals.reshape(g.shape + g.shape), symmetry="hermitian")
    sh_k = PairKernel(g, sh_vals.reshape(g.shape + g.shape), symmetry="symmetric")
    return BogoliubovPair(ch=ch_k, sh=sh_k, source_k=k.copy(),
                          series_terms_used=0, truncation_residual=0.0)


def scale(k: PairKernel, c: complex) -> PairKernel:
    return PairKernel(k.grid, c * k.values, k.symmetry)


def sh_double(pair: BogoliubovPair) -> PairKernel:
    """sh(2k) = 2 sh(k) o conj(ch(k)); cross-checked against the doubled series."""
    g = pair.sh.grid
    conj_ch = PairKernel(g, np.conj(pair.ch.values))
    return scale(compose(pair.sh, conj_ch, symmetry="symmetric"), 2.0)


@dataclass
class Densities:
    """Two-point correlation kernels split into pair and condensate parts."""

    gamma: PairKernel       # hermitian
    lam: PairKernel         # symmetric
    gamma_p: PairKernel
    lam_p: PairKernel
    gamma_c: PairKernel
    lam_c: PairKernel
    rho: OneBodyField       # real diagonal gamma(x, x)


def condensate_gamma(phi: OneBodyField) -> PairKernel:
    """conj(phi) (x) phi: kernel conj(phi(x)) phi(y)."""
    g = phi.grid
    f = phi.values.reshape(-1)
    vals = np.conj(f)[:, None] * f[None, :]
    return PairKernel(g, vals.reshape(g.shape + g.shape), symmetry="hermitian")


def condensate_lambda(phi: OneBodyField) -> PairKernel:
    """phi (x) phi: kernel phi(x) phi(y)."""
    g = phi.grid
    f = phi.values.reshape(-1)
    vals = f[:, None] * f[None, :]
    return PairKernel(g, vals.reshape(g.shape + g.shape), symmetry="symmetric")


def assemble_densities(phi: OneBodyField, pair: BogoliubovPair, N: float) -> Densities:
    """Build (Gamma, Lambda) and their parts from the condensate and sh/ch blocks.

    Gamma_p = conj(sh) o sh / N, Lambda_p = sh(2k) / 2N,
    Gamma_c = conj(phi)(x)phi(y), Lambda_c = phi(x)phi(y).
    """
    if N <= 0:
        raise KernelError(f"particle number N must be positive, got {N}")
    g = _check_same_grid(phi, pair.sh)
    sh = pair.sh
    conj_sh = PairKernel(g, np.conj(sh.values))
    gamma_p = scale(compose(conj_sh, sh, symmetry="hermitian"), 1.0 / N)
    lam_p = scale(sh_double(pair), 1.0 / (2.0 * N))
    gamma_c = condensate_gamma(phi)
    lam_c = condensate_lambda(phi)
    gamma = PairKernel(g, gamma_p.values + gamma_c.values, symmetry="hermitian")
    lam = PairKernel(g, lam_p.values + lam_c.values, symmetry="symmetric")
    diag = np.einsum("ii->i", gamma.as_matrix()).reshape(g.shape)
    if np.min(diag.real) < -1e-10 or np.max(np.abs(diag.imag)) > 1e-10:
        raise KernelError("density gamma(x,x) is not real nonnegative")
    rho = OneBodyField(g, diag.real.astype(complex))
    return Densities(gamma=gamma, lam=lam, gamma_p=gamma_p, lam_p=lam_p,
                     gamma_c=gamma_c, lam_c=lam_c, rho=rho)
