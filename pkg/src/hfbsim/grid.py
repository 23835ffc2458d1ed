"""Periodic spectral grids, FFT-based Fourier multipliers, Littlewood-Paley projections.

Conventions used throughout the package:

* The torus is [0, L)^d sampled at M points per axis, spacing h = L/M.
* The frequency lattice per axis is {2*pi*m/L : m = -M/2 .. M/2-1}, stored in
  standard FFT order (numpy ``fftfreq``); Nyquist frequency is pi*M/L.
* Pair kernels K(x, y) are arrays of shape (M,)*d + (M,)*d, the first d axes
  indexing x and the last d indexing y.  Their Fourier transform carries the
  frequency pair (xi, eta); multipliers "on x-y" are functions of |xi - eta|
  and multipliers "on x+y" are functions of |xi + eta|.
* Discrete integrals are rectangle-rule sums weighted by h^d per axis block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class GridError(ValueError):
    """Invalid grid construction or multiplier application."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: `dim` axes, `points` samples per axis, period `length`."""

    dim: int
    points: int
    length: float

    @property
    def h(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def cell(self) -> float:
        """Quadrature weight h^d of one grid cell."""
        return self.h**self.dim

    @property
    def nyquist(self) -> float:
        return np.pi * self.points / self.length

    def axis(self) -> np.ndarray:
        """Spatial sample positions along one axis."""
        return np.arange(self.points) * self.h

    def freq_axis(self) -> np.ndarray:
        """Frequency lattice along one axis, FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.h)

    def freq_modulus(self) -> np.ndarray:
        """|xi| on the full d-dimensional frequency lattice, shape `self.shape`."""
        k = self.freq_axis()
        mods = np.meshgrid(*([k] * self.dim), indexing="ij")
        return np.sqrt(sum(m**2 for m in mods))

    def mesh(self) -> list[np.ndarray]:
        x = self.axis()
        return np.meshgrid(*([x] * self.dim), indexing="ij")


def make_grid(dim: int, points: int, length: float) -> GridSpec:
    if dim not in (1, 2, 3):
        raise GridError(f"dim must be 1, 2 or 3, got {dim}")
    if points < 8 or (points & (points - 1)) != 0:
        raise GridError(f"points must be a power of two >= 8, got {points}")
    if not length > 0:
        raise GridError(f"length must be positive, got {length}")
    return GridSpec(dim=dim, points=points, length=float(length))


@dataclass
class OneBodyField:
    """Complex scalar function on the torus (condensate, potential, density)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values.view(float))):
            raise GridError("field contains non-finite entries")

    def copy(self) -> "OneBodyField":
        return OneBodyField(self.grid, self.values.copy())

    def l2(self) -> float:
        """Discrete L2 norm (h^d-weighted)."""
        return float(np.sqrt(self.grid.cell * np.sum(np.abs(self.values) ** 2)))


@dataclass
class PairKernel:
    """Complex function K(x, y) on torus x torus with a symmetry tag.

    symmetry: "symmetric"  -> K(x,y) = K(y,x)
              "hermitian"  -> K(x,y) = conj(K(y,x))
              "none"       -> no constraint
    """

    grid: GridSpec
    values: np.ndarray
    symmetry: str = "none"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        expected = self.grid.shape + self.grid.shape
        if self.values.shape != expected:
            raise GridError(
                f"kernel shape {self.values.shape} does not match grid pair {expected}"
            )
        if self.symmetry not in ("symmetric", "hermitian", "none"):
            raise GridError(f"unknown symmetry tag {self.symmetry!r}")

    def copy(self) -> "PairKernel":
        return PairKernel(self.grid, self.values.copy(), self.symmetry)

    def as_matrix(self) -> np.ndarray:
        n = self.grid.size
        return self.values.reshape(n, n)

    def transpose(self) -> np.ndarray:
        """Values of K(y, x)."""
        d = self.grid.dim
        axes = tuple(range(d, 2 * d)) + tuple(range(d))
        return self.values.transpose(axes)

    def symmetry_defect(self) -> float:
        """Relative deviation from the declared symmetry tag."""
        if self.symmetry == "none":
            return 0.0
        swapped = self.transpose()
        if self.symmetry == "hermitian":
            swapped = np.conj(swapped)
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        return float(np.max(np.abs(self.values - swapped))) / scale

    def l2(self) -> float:
        """Discrete L2(dx dy) norm (h^{2d}-weighted)."""
        return float(np.sqrt(self.grid.cell**2 * np.sum(np.abs(self.values) ** 2)))


# In rotated coordinates the L2 norm against d(x-y) d(x+y) picks up this factor
# per L2 pairing relative to L2(dx dy): d(x+y) = 2^d dy along each x-y line.
def rotation_l2_factor(dim: int) -> float:
    return 2.0 ** (dim / 2.0)


def rotate_pair_coords(kernel: PairKernel, direction: str = "forward") -> PairKernel:
    """Exact lattice shear to difference coordinates: R(u, y) = K(u + y mod L, y).

    The row index is u = x - y; the column retains y, which parameterizes the
    line {x - y = u} on which x + y = u + 2y.  (The literal (x-y, x+y) index
    map is 2-to-1 on an even torus, so a bijective change of variables must
    keep y as the line parameter.)  Norms taken against d(x+y) on the rotated
    rows therefore carry the Jacobian weight 2^d per inner integral; in L2
    this is the factor `rotation_l2_factor` = 2^{d/2}.

    forward:  out[u, y] = K[(u + y) mod M, y]
    inverse:  exact inverse permutation; inverse(forward(K)) == K.
    """
    if direction not in ("forward", "inverse"):
        raise GridError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    g = kernel.grid
    M, d = g.points, g.dim
    vals = kernel.values
    out = vals
    for ax in range(d):
        # shear the pair (axis ax, axis d+ax); other axes ride along
        out = np.moveaxis(out, (ax, d + ax), (0, 1))
        if direction == "forward":
            # out[u, j] = in[(u+j)%M, j]
            idx = (np.arange(M)[:, None] + np.arange(M)[None, :]) % M
        else:
            idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
        out = out[idx, np.arange(M)[None, :]]
        out = np.moveaxis(out, (0, 1), (ax, d + ax))
    return PairKernel(g, out, symmetry="none")


# ---------------------------------------------------------------------------
# Fourier multipliers
# ---------------------------------------------------------------------------

_PAIR_AXES = ("x", "y", "x-y", "x+y", "both")


@dataclass(frozen=True)
class FourierMultiplier:
    """Radial Fourier multiplier acting on one coordinate block of a field/kernel.

    `symbol` maps the modulus of the block frequency (|xi|, |eta|, |xi-eta| or
    |xi+eta|) to the multiplier value; for axes="both" it takes (|xi|, |eta|).
    """

    symbol: Callable[..., np.ndarray]
    axes: str = "x"
    name: str = ""

    def __post_init__(self):
        if self.axes not in _PAIR_AXES:
            raise GridError(f"unknown multiplier axes {self.axes!r}")


def bracket(axes: str = "x", order: float = 0.5) -> FourierMultiplier:
    """<grad>^order on the given block: symbol (1 + r^2)^(order/2)."""
    return FourierMultiplier(
        symbol=lambda r: (1.0 + r**2) ** (order / 2.0),
        axes=axes,
        name=f"bracket{order}[{axes}]",
    )


def bracket_sum(axes_a: str, axes_b: str, order: float = 0.5) -> FourierMultiplier:
    """(<grad_a>^order + <grad_b>^order) as a single multiplier."""

    def sym(rx, ry, rdiff, rsum):
        blocks = {"x": rx, "y": ry, "x-y": rdiff, "x+y": rsum}
        ra, rb = blocks[axes_a], blocks[axes_b]
        return (1.0 + ra**2) ** (order / 2.0) + (1.0 + rb**2) ** (order / 2.0)

    m = FourierMultiplier(symbol=sym, axes="both",
                          name=f"bracket{order}[{axes_a}]+bracket{order}[{axes_b}]")
    object.__setattr__(m, "_takes_all_blocks", True)
    return m


def constant_multiplier(value: complex = 1.0, axes: str = "x") -> FourierMultiplier:
    return FourierMultiplier(symbol=lambda r: np.full_like(r, value, dtype=complex),
                             axes=axes, name=f"const{value}")


def multiplier_product(*ms: FourierMultiplier) -> FourierMultiplier:
    """Pointwise product of multipliers, evaluated as a single 'both' symbol."""

    def sym(rx, ry, rdiff, rsum):
        out = 1.0
        for m in ms:
            if getattr(m, "_takes_all_blocks", False):
                out = out * m.symbol(rx, ry, rdiff, rsum)
            elif m.axes == "x":
                out = out * m.symbol(rx)
            elif m.axes == "y":
                out = out * m.symbol(ry)
            elif m.axes == "x-y":
                out = out * m.symbol(rdiff)
            elif m.axes == "x+y":
                out = out * m.symbol(rsum)
            else:
                out = out * m.symbol(rx, ry)
        return out

    prod = FourierMultiplier(symbol=sym, axes="both",
                             name="*".join(m.name for m in ms))
    object.__setattr__(prod, "_takes_all_blocks", True)
    return prod


def _pair_freq_moduli(grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(|xi|, |eta|, |xi-eta|, |xi+eta|) broadcast over the pair frequency lattice."""
    k = grid.freq_axis()
    d = grid.points
    dim = grid.dim
    comps_x = []
    comps_y = []
    for ax in range(dim):
        shape = [1] * (2 * dim)
        shape[ax] = d
        comps_x.append(k.reshape(shape))
        shape = [1] * (2 * dim)
        shape[dim + ax] = d
        comps_y.append(k.reshape(shape))
    rx = np.sqrt(sum(np.broadcast_to(c**2, grid.shape + grid.shape) for c in comps_x))
    ry = np.sqrt(sum(np.broadcast_to(c**2, grid.shape + grid.shape) for c in comps_y))
    rdiff = np.sqrt(sum((cx - cy) ** 2 for cx, cy in zip(comps_x, comps_y)))
    rsum = np.sqrt(sum((cx + cy) ** 2 for cx, cy in zip(comps_x, comps_y)))
    return rx, ry, rdiff, rsum


def pair_symbol_array(grid: GridSpec, m: FourierMultiplier) -> np.ndarray:
    """Evaluate a multiplier symbol on the pair frequency lattice."""
    rx, ry, rdiff, rsum = _pair_freq_moduli(grid)
    if getattr(m, "_takes_all_blocks", False):
        arr = m.symbol(rx, ry, rdiff, rsum)
    elif m.axes == "x":
        arr = m.symbol(rx)
    elif m.axes == "y":
        arr = m.symbol(ry)
    elif m.axes == "x-y":
        arr = m.symbol(rdiff)
    elif m.axes == "x+y":
        arr = m.symbol(rsum)
    else:  # both
        arr = m.symbol(rx, ry)
    arr = np.broadcast_to(np.asarray(arr), grid.shape + grid.shape)
    if not np.all(np.isfinite(np.asarray(arr).view(float) if np.iscomplexobj(arr) else arr)):
        raise GridError(f"multiplier {m.name!r} is unbounded on the frequency lattice")
    return arr


def field_symbol_array(grid: GridSpec, m: FourierMultiplier) -> np.ndarray:
    if m.axes != "x":
        raise GridError(
            f"multiplier on {m.axes!r} block is not applicable to a one-body field"
        )
    arr = np.asarray(m.symbol(grid.freq_modulus()))
    if not np.all(np.isfinite(np.asarray(arr).view(float) if np.iscomplexobj(arr) else arr)):
        raise GridError(f"multiplier {m.name!r} is unbounded on the frequency lattice")
    return arr


def apply_multiplier(inp, m: FourierMultiplier):
    """inverse-FFT( symbol(frequencies) * FFT(input) ) over the declared block."""
    if isinstance(inp, OneBodyField):
        sym = field_symbol_array(inp.grid, m)
        out = np.fft.ifftn(sym * np.fft.fftn(inp.values))
        return OneBodyField(inp.grid, out)
    if isinstance(inp, PairKernel):
        sym = pair_symbol_array(inp.grid, m)
        out = np.fft.ifftn(sym * np.fft.fftn(inp.values))
        keep = m.axes in ("x-y", "x+y")
        tag = inp.symmetry if (keep and inp.symmetry != "none") else "none"
        return PairKernel(inp.grid, out, symmetry=tag)
    raise GridError(f"cannot apply multiplier to {type(inp).__name__}")


# ---------------------------------------------------------------------------
# Littlewood-Paley projections
# ---------------------------------------------------------------------------

def mother_bump(r: np.ndarray) -> np.ndarray:
    """Fixed radial bump: 1 on r <= 1, 0 on r >= 2, smooth exponential decay between.

    Profile on 1 < r < 2:  exp(1 - 1/(1 - (r-1)^2)).  Any smooth choice with
    these support properties is valid; this one is frozen by golden tests.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    out[r <= 1.0] = 1.0
    mid = (r > 1.0) & (r < 2.0)
    t = r[mid] - 1.0
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - t**2))
    return out


def ball_multiplier(cut: float, axes: str = "x") -> FourierMultiplier:
    """P_{|.| < cut}: mother bump dilated by cut (identically 1 below cut)."""
    if cut <= 0:
        raise GridError(f"ball cutoff must be positive, got {cut}")
    return FourierMultiplier(symbol=lambda r: mother_bump(r / cut), axes=axes,
                             name=f"P(<{cut})[{axes}]")


def highpass_multiplier(cut: float, axes: str = "x") -> FourierMultiplier:
    """P_{|.| >= cut} = identity - P_{|.| < cut}."""
    if cut <= 0:
        raise GridError(f"cutoff must be positive, got {cut}")
    return FourierMultiplier(symbol=lambda r: 1.0 - mother_bump(r / cut), axes=axes,
                             name=f"P(>={cut})[{axes}]")


def annulus_multiplier(level: int, axes: str = "x") -> FourierMultiplier:
    """P_{|.| ~ 2^level}: dyadic annulus bump; level 0 is the unit ball bump."""
    if level < 0:
        raise GridError(f"annulus level must be >= 0, got {level}")
    if level == 0:
        return FourierMultiplier(symbol=mother_bump, axes=axes, name=f"P(~1)[{axes}]")
    c = 2.0**level
    return FourierMultiplier(
        symbol=lambda r: mother_bump(r / c) - mother_bump(2.0 * r / c),
        axes=axes,
        name=f"P(~{c})[{axes}]",
    )


def lp_project(inp, band: str, cut: float, axes: str = "x", strict: bool = True):
    """Littlewood-Paley projection of a field or kernel.

    band: "low"  -> P_{|.| < cut}  (smooth bump, = 1 for |.| <= cut, 0 beyond 2 cut)
          "band" -> P_{|.| ~ cut}  (dyadic annulus with outer scale cut)
          "high" -> P_{|.| >= cut}

    With strict=True a cutoff above the grid Nyquist raises; internal callers
    pass strict=False, for which a saturated low-pass is exactly the identity.
    """
    grid = inp.grid
    if strict and cut > grid.nyquist:
        raise GridError(
            f"cutoff {cut} exceeds grid Nyquist {grid.nyquist:.6g}"
        )
    if band == "low":
        m = ball_multiplier(cut, axes)
    elif band == "high":
        m = highpass_multiplier(cut, axes)
    elif band == "band":
        if cut <= 0:
            raise GridError(f"band scale must be positive, got {cut}")
        m = FourierMultiplier(
            symbol=lambda r: mother_bump(r / cut) - mother_bump(2.0 * r / cut),
            axes=axes,
            name=f"P(~{cut})[{axes}]",
        )
    else:
        raise GridError(f"unknown band kind {band!r}")
    return apply_multiplier(inp, m)
