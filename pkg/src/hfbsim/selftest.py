"""Brute-force oracle self-checks; the first thing CI runs.

Each check recomputes a core operation with a direct nested-loop or dense
reference and compares.  Prints one pass/fail line per check.
"""

from __future__ import annotations

import numpy as np

from .grid import OneBodyField, PairKernel, make_grid, rotate_pair_coords
from .kernels import (
    block_exp_oracle,
    compose,
    delta_kernel,
    sh_ch_from_k,
    trace,
    weighted_compose,
)
from .potential import build_base_potential, convolve_density


def _random_kernel(rng, grid, symmetry="none"):
    shape = grid.shape * 2
    vals = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if symmetry == "symmetric":
        d = grid.dim
        vals = 0.5 * (vals + np.moveaxis(vals, tuple(range(d, 2 * d)),
                                         tuple(range(d))))
    return PairKernel(grid, vals, symmetry=symmetry)


def check_compose(rng) -> tuple[bool, float]:
    g = make_grid(1, 8, 2.0)
    a = _random_kernel(rng, g)
    b = _random_kernel(rng, g)
    got = compose(a, b).values
    ref = np.zeros_like(got)
    for i in range(8):
        for j in range(8):
            for z in range(8):
                ref[i, j] += g.h * a.values[i, z] * b.values[z, j]
    err = float(np.max(np.abs(got - ref)))
    return err < 1e-12, err


def check_weighted_compose(rng) -> tuple[bool, float]:
    g = make_grid(1, 8, 2.0)
    v = OneBodyField(g, rng.standard_normal(8).astype(complex))
    a = _random_kernel(rng, g)
    b = _random_kernel(rng, g)
    got = weighted_compose(v, a, b).values
    ref = np.zeros_like(got)
    for i in range(8):
        for j in range(8):
            for z in range(8):
                ref[i, j] += (g.h * v.values[(i - z) % 8].real
                              * a.values[i, z] * b.values[z, j])
    err = float(np.max(np.abs(got - ref)))
    return err < 1e-12, err


def check_block_exponential(rng) -> tuple[bool, float]:
    g = make_grid(1, 16, 8.0)
    k = _random_kernel(rng, g, "symmetric")
    k = PairKernel(g, 0.5 * k.values / k.l2(), symmetry="symmetric")
    series = sh_ch_from_k(k, tol=1e-14)
    oracle = block_exp_oracle(k)
    err = max(
        float(np.max(np.abs(series.sh.values - oracle.sh.values))),
        float(np.max(np.abs(series.ch.values - oracle.ch.values))),
    )
    sympl = oracle.symplectic_defect()
    return err < 1e-10 and sympl < 1e-10, max(err, sympl)


def check_convolution(rng) -> tuple[bool, float]:
    g = make_grid(1, 16, 4.0)
    v = OneBodyField(g, rng.standard_normal(16).astype(complex))
    r = OneBodyField(g, rng.standard_normal(16).astype(complex))
    got = convolve_density(v, r).values.real
    ref = np.zeros(16)
    for i in range(16):
        for z in range(16):
            ref[i] += g.h * v.values[(i - z) % 16].real * r.values[z].real
    err = float(np.max(np.abs(got - ref)))
    return err < 1e-12, err


def check_rotation(rng) -> tuple[bool, float]:
    g = make_grid(1, 8, 2.0)
    k = _random_kernel(rng, g)
    rot = rotate_pair_coords(k, "forward")
    back = rotate_pair_coords(rot, "inverse")
    err = float(np.max(np.abs(back.values - k.values)))
    return err == 0.0, err


def check_quadrature(rng) -> tuple[bool, float]:
    g = make_grid(1, 128, 16.0)
    pot = build_base_potential(g, 0.1)
    integral = g.cell * np.sum(pot.base.values.real)
    dc = pot.base_hat.reshape(-1)[0].real
    err = abs(integral - dc)
    return err < 1e-10, float(err)


def check_trace_identity(rng) -> tuple[bool, float]:
    g = make_grid(1, 8, 2.0)
    a = _random_kernel(rng, g)
    val = trace(compose(a, delta_kernel(g)))
    ref = trace(a)
    err = abs(val - ref)
    return err < 1e-12, float(err)


CHECKS = (
    ("kernel composition vs triple loop", check_compose),
    ("weighted composition vs triple loop", check_weighted_compose),
    ("sh/ch series vs block exponential", check_block_exponential),
    ("density convolution vs double loop", check_convolution),
    ("coordinate shear round trip", check_rotation),
    ("potential integral vs DC mode", check_quadrature),
    ("delta kernel is the composition identity", check_trace_identity),
)


def run(verbose: bool = True, seed: int = 2024) -> bool:
    rng = np.random.default_rng(seed)
    all_ok = True
    for name, fn in CHECKS:
        ok, err = fn(rng)
        all_ok = all_ok and ok
        if verbose:
            print(f"[selftest] {'PASS' if ok else 'FAIL'} {name} (err {err:.3e})")
    return all_ok
