"""Mixed space-time Lebesgue norms, Strichartz/collapsing norms, |dt|^(1/4).

Quadrature conventions:

* Spatial L^r norms are rectangle sums, (h^d sum |f|^r)^(1/r); L^inf is the
  grid maximum (no interpolation).
* Time integrals use the left rectangle rule on the uniform samples (the
  final sample enters only sup-type norms), so a constant integrand over
  [0, T] integrates to exactly T.
* Norms ordered (x-y)-then-(x+y) run through the exact lattice shear; the
  inner integral against d(x+y) along each x-y line carries the Jacobian
  factor 2^d (2^(d/r) on the inner L^r norm).

The admissible exponent pairs satisfy 2/p + d/q = d/2 with p in [2, inf];
supremum-type norms are evaluated over a finite list of pairs (endpoints
plus interior points linearly spaced in 1/p) and are therefore lower bounds
of the true supremum.  Dual-restricted norms take the minimum over pairs
with p in [DUAL_P0, DUAL_P1] of the conjugate-exponent mixed norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .evolution import Trajectory
from .grid import (
    FourierMultiplier,
    GridSpec,
    ball_multiplier,
    bracket,
    highpass_multiplier,
    multiplier_product,
    pair_symbol_array,
    field_symbol_array,
    rotate_pair_coords,
    PairKernel,
)


class NormError(ValueError):
    """Norm evaluation misuse (bad exponents, unknown selector/ordering)."""


Selector = Callable[[Trajectory, int], np.ndarray]

DUAL_P0 = 2.2
DUAL_P1 = 64.0
DUAL_COUNT = 6
ADMISSIBLE_COUNT = 6
LOW_COLLAPSING_THRESHOLD = 20.0


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------

def select_component(name: str) -> Selector:
    def sel(traj: Trajectory, i: int) -> np.ndarray:
        try:
            return traj.data[name][i]
        except KeyError as e:
            raise NormError(f"trajectory has no component {name!r}") from e
    return sel


def select_phi(traj: Trajectory, i: int) -> np.ndarray:
    return traj.data["phi"][i]


def select_lambda_p(traj: Trajectory, i: int) -> np.ndarray:
    return traj.data["lam_p"][i]


def select_gamma_p(traj: Trajectory, i: int) -> np.ndarray:
    return traj.data["gam_p"][i]


def select_lambda_c(traj: Trajectory, i: int) -> np.ndarray:
    f = traj.data["phi"][i].reshape(-1)
    return (f[:, None] * f[None, :]).reshape(traj.grid.shape * 2)


def select_gamma_c(traj: Trajectory, i: int) -> np.ndarray:
    f = traj.data["phi"][i].reshape(-1)
    return (np.conj(f)[:, None] * f[None, :]).reshape(traj.grid.shape * 2)


def select_lambda(traj: Trajectory, i: int) -> np.ndarray:
    return select_lambda_p(traj, i) + select_lambda_c(traj, i)


def select_gamma(traj: Trajectory, i: int) -> np.ndarray:
    return select_gamma_p(traj, i) + select_gamma_c(traj, i)


def select_sh2k(traj: Trajectory, i: int) -> np.ndarray:
    return 2.0 * traj.meta["N"] * traj.data["lam_p"][i]


def select_p2(traj: Trajectory, i: int) -> np.ndarray:
    return traj.meta["N"] * traj.data["gam_p"][i]


# ---------------------------------------------------------------------------
# admissible exponent pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissiblePair:
    p: float
    q: float

    def check(self, d: int, tol: float = 1e-12) -> bool:
        lhs = 2.0 / self.p + d / self.q if np.isfinite(self.q) else 2.0 / self.p
        if not np.isfinite(self.p):
            lhs = d / self.q
        return abs(lhs - d / 2.0) <= tol


def _endpoint_p(d: int) -> float:
    # the non-(inf,2) endpoint of the admissibility line per dimension
    return {1: 4.0, 2: 2.0, 3: 2.0}[d]


def admissible_pairs(d: int, count: int = ADMISSIBLE_COUNT) -> list[AdmissiblePair]:
    """Endpoints plus count-2 interior pairs, spaced linearly in 1/p."""
    if d not in (1, 2, 3):
        raise NormError(f"dimension must be 1, 2 or 3, got {d}")
    if count < 2:
        raise NormError(f"need at least the two endpoint pairs, got count={count}")
    inv_p = np.linspace(1.0 / _endpoint_p(d), 0.0, count)
    pairs = []
    for ip in inv_p:
        p = np.inf if ip == 0.0 else 1.0 / ip
        denom = d / 2.0 - (0.0 if np.isinf(p) else 2.0 / p)
        q = np.inf if denom <= 1e-15 else d / denom
        pairs.append(AdmissiblePair(p=float(p), q=float(q)))
    return pairs


def conjugate_exponent(p: float) -> float:
    if np.isinf(p):
        return 1.0
    if p == 1.0:
        return np.inf
    return p / (p - 1.0)


# ---------------------------------------------------------------------------
# core spatial/time reductions
# ---------------------------------------------------------------------------

def _lp_reduce(vals: np.ndarray, axes: tuple[int, ...], r: float,
               weight: float) -> np.ndarray:
    """(weight * sum |vals|^r over axes)^(1/r); r = inf gives the max."""
    a = np.abs(vals)
    if np.isinf(r):
        return np.max(a, axis=axes)
    return (weight * np.sum(a**r, axis=axes)) ** (1.0 / r)


def _time_weights(traj: Trajectory) -> np.ndarray:
    """Left-rectangle weights: dt_sample on all but the final sample."""
    n = traj.n_samples
    w = np.full(n, traj.dt_sample)
    if n >= 1:
        w[-1] = 0.0
    return w


def _time_norm(series: np.ndarray, p: float, weights: np.ndarray) -> np.ndarray:
    """L^p(dt) along axis 0 of `series` with quadrature `weights`."""
    if np.isinf(p):
        return np.max(series, axis=0)
    wshape = (-1,) + (1,) * (series.ndim - 1)
    return (np.sum(weights.reshape(wshape) * series**p, axis=0)) ** (1.0 / p)


_ORDERINGS = ("x-then-y", "y-then-x", "diff-then-sum")


def sample_inner_reduction(traj: Trajectory, selector: Selector,
                           ordering: str, r_inner: float,
                           multiplier: Optional[FourierMultiplier] = None
                           ) -> np.ndarray:
    """Inner L^r per sample: array of shape (n_samples, M^d outer positions).

    ordering fixes which block is reduced first: "x-then-y" reduces over y
    (outer variable x), "y-then-x" over x, "diff-then-sum" over the x+y line
    (outer variable x-y, with the 2^(d/r) rotation factor on the inner norm).
    """
    if ordering not in _ORDERINGS:
        raise NormError(f"unknown ordering {ordering!r}")
    g = traj.grid
    d = g.dim
    sym = None
    if multiplier is not None:
        sym = pair_symbol_array(g, multiplier)
    out = np.empty((traj.n_samples, g.size))
    rot_factor = 2.0 ** (d / r_inner) if np.isfinite(r_inner) else 1.0
    for i in range(traj.n_samples):
        vals = selector(traj, i)
        if vals.ndim != 2 * d:
            raise NormError("pair-kernel selector required for this ordering")
        if sym is not None:
            vals = np.fft.ifftn(sym * np.fft.fftn(vals))
        if ordering == "x-then-y":
            red = _lp_reduce(vals, tuple(range(d, 2 * d)), r_inner, g.cell)
        elif ordering == "y-then-x":
            red = _lp_reduce(vals, tuple(range(d)), r_inner, g.cell)
        else:
            sheared = rotate_pair_coords(
                PairKernel(g, vals), "forward").values
            red = rot_factor * _lp_reduce(
                sheared, tuple(range(d, 2 * d)), r_inner, g.cell)
        out[i] = red.reshape(-1)
    return out


def _field_samples(traj: Trajectory, selector: Selector,
                   multiplier: Optional[FourierMultiplier]) -> np.ndarray:
    g = traj.grid
    sym = field_symbol_array(g, multiplier) if multiplier is not None else None
    out = np.empty((traj.n_samples, g.size))
    for i in range(traj.n_samples):
        vals = selector(traj, i)
        if vals.ndim != g.dim:
            raise NormError("one-body selector required")
        if sym is not None:
            vals = np.fft.ifftn(sym * np.fft.fftn(vals))
        out[i] = np.abs(vals).reshape(-1)
    return out


def mixed_norm(traj: Trajectory, selector: Selector, p_t: float,
               q_outer: float, r_inner: float = 2.0,
               ordering: str = "x-then-y",
               multiplier: Optional[FourierMultiplier] = None) -> float:
    """L^{p_t}(dt) L^{q}(outer) L^{r}(inner) of a pair-kernel trajectory."""
    for e, nm in ((p_t, "p_t"), (q_outer, "q_outer"), (r_inner, "r_inner")):
        if not (e >= 1.0):
            raise NormError(f"exponent {nm} must be >= 1, got {e}")
    red = sample_inner_reduction(traj, selector, ordering, r_inner, multiplier)
    per_t = _lp_reduce(red, (1,), q_outer, traj.grid.cell)
    return float(_time_norm(per_t, p_t, _time_weights(traj)))


def field_mixed_norm(traj: Trajectory, selector: Selector, p_t: float,
                     q_x: float,
                     multiplier: Optional[FourierMultiplier] = None) -> float:
    """L^{p_t}(dt) L^{q}(dx) for a one-body-field trajectory."""
    samples = _field_samples(traj, selector, multiplier)
    per_t = _lp_reduce(samples, (1,), q_x, traj.grid.cell)
    return float(_time_norm(per_t, p_t, _time_weights(traj)))


def outer_time_norm(traj: Trajectory, selector: Selector, q_outer: float,
                    p_t: float = 2.0, r_inner: float = 2.0,
                    ordering: str = "diff-then-sum",
                    multiplier: Optional[FourierMultiplier] = None) -> float:
    """L^{q}(outer) [ L^{p_t}(dt) L^{r}(inner) ]: time inside the outer norm.

    With q_outer = inf and the rotated ordering this is the collapsing norm
    L^inf(d(x-y)) L^2(dt) L^2(d(x+y)).
    """
    red = sample_inner_reduction(traj, selector, ordering, r_inner, multiplier)
    per_u = _time_norm(red, p_t, _time_weights(traj))
    if np.isinf(q_outer):
        return float(np.max(per_u))
    return float((traj.grid.cell * np.sum(per_u**q_outer)) ** (1.0 / q_outer))


# ---------------------------------------------------------------------------
# Strichartz-type norms
# ---------------------------------------------------------------------------

def strichartz_norm(traj: Trajectory, selector: Selector,
                    multiplier: Optional[FourierMultiplier] = None,
                    which: str = "S_xy",
                    pairs: Optional[Sequence[AdmissiblePair]] = None) -> float:
    """Partial/full/dual-restricted Strichartz norms of a pair trajectory.

    S_xy     max over admissible pairs and both x/y orderings of
             L^p(dt) L^q(outer) L^2(inner);
    S_full   additionally includes the (x-y)-then-(x+y) ordering;
    S_dual_r min over pairs with p in [DUAL_P0, DUAL_P1] of the
             conjugate-exponent mixed norms in both x/y orderings.
    """
    if which not in ("S_xy", "S_full", "S_dual_r"):
        raise NormError(f"unknown Strichartz variant {which!r}")
    d = traj.grid.dim
    if which == "S_dual_r":
        # endpoint-excluded p range; the factor 1.1 reproduces p0 = 2.2 at d = 3
        # and generalizes it to the d-dependent admissibility endpoint
        p0 = max(DUAL_P0, 1.1 * _endpoint_p(d))
        ps = np.geomspace(p0, max(DUAL_P1, 2 * p0), DUAL_COUNT)
        best = np.inf
        for p in ps:
            denom = d / 2.0 - 2.0 / p
            q = np.inf if denom <= 1e-15 else d / denom
            pp, qq = conjugate_exponent(p), conjugate_exponent(q)
            for ordering in ("x-then-y", "y-then-x"):
                best = min(best, mixed_norm(traj, selector, pp, qq, 2.0,
                                            ordering, multiplier))
        return float(best)

    if pairs is None:
        pairs = admissible_pairs(d)
    orderings = ["x-then-y", "y-then-x"]
    if which == "S_full":
        orderings.append("diff-then-sum")
    # reductions are ordering-dependent but pair-independent: hoist them
    best = 0.0
    weights = _time_weights(traj)
    for ordering in orderings:
        red = sample_inner_reduction(traj, selector, ordering, 2.0, multiplier)
        for pr in pairs:
            per_t = _lp_reduce(red, (1,), pr.q, traj.grid.cell)
            best = max(best, float(_time_norm(per_t, pr.p, weights)))
    return best


def phi_strichartz(traj: Trajectory, selector: Selector = select_phi,
                   multiplier: Optional[FourierMultiplier] = bracket("x", 0.5),
                   pairs: Optional[Sequence[AdmissiblePair]] = None) -> float:
    """sup over admissible pairs of L^p(dt) L^q(dx) for the condensate."""
    d = traj.grid.dim
    if pairs is None:
        pairs = admissible_pairs(d)
    samples = _field_samples(traj, selector, multiplier)
    weights = _time_weights(traj)
    best = 0.0
    for pr in pairs:
        per_t = _lp_reduce(samples, (1,), pr.q, traj.grid.cell)
        best = max(best, float(_time_norm(per_t, pr.p, weights)))
    return best


# ---------------------------------------------------------------------------
# collapsing norms
# ---------------------------------------------------------------------------

def collapsing_norm(traj: Trajectory, selector: Selector,
                    multiplier: Optional[FourierMultiplier] = None,
                    which: str = "full", N: Optional[float] = None,
                    threshold: float = LOW_COLLAPSING_THRESHOLD) -> float:
    """Full or low (frequency-restricted) collapsing norm.

    full: L^inf(d(x-y)) L^2(dt) L^2(d(x+y));
    low:  sum of the full norms of the three projections onto
          |xi-eta| < threshold*N, |xi| < threshold*N, |eta| < threshold*N.
    Ball projections saturating above the lattice Nyquist act as the
    identity (the band covers the whole grid).
    """
    if which == "full":
        return outer_time_norm(traj, selector, np.inf, 2.0, 2.0,
                               "diff-then-sum", multiplier)
    if which != "low":
        raise NormError(f"unknown collapsing variant {which!r}")
    if N is None:
        N = traj.meta.get("N")
    if N is None or N <= 0:
        raise NormError("low collapsing norm requires the particle parameter N")
    if N > traj.grid.nyquist:
        raise NormError(
            f"N = {N} exceeds grid Nyquist {traj.grid.nyquist:.4g}")
    cut = threshold * N
    total = 0.0
    for axes in ("x-y", "x", "y"):
        proj = ball_multiplier(cut, axes)
        m = proj if multiplier is None else multiplier_product(multiplier, proj)
        total += outer_time_norm(traj, selector, np.inf, 2.0, 2.0,
                                 "diff-then-sum", m)
    return float(total)


# ---------------------------------------------------------------------------
# fractional time derivative
# ---------------------------------------------------------------------------

def time_frac_deriv(traj: Trajectory, selector: Selector, order: float = 0.25,
                    taper: str = "hann", pad_factor: int = 1) -> Trajectory:
    """Apply |dt|^order via the DFT in time; finite-horizon approximation.

    A Hann taper is applied to the sampled window before the DFT (pass
    taper="none" to disable, e.g. for DFT-resolved pure tones).  The
    returned trajectory holds the single component "u" on the same time
    lattice; downstream norms treat it like any other selector target.
    """
    n = traj.n_samples
    if n < 16:
        raise NormError(f"|dt|^{order} needs at least 16 samples, got {n}")
    if taper not in ("hann", "none"):
        raise NormError(f"unknown taper {taper!r}")
    if pad_factor < 1:
        raise NormError("pad_factor must be >= 1")
    stack = np.stack([selector(traj, i) for i in range(n)]).astype(complex)
    if taper == "hann":
        w = np.hanning(n)
        stack = stack * w.reshape((-1,) + (1,) * (stack.ndim - 1))
    n_fft = n * pad_factor
    tau = 2.0 * np.pi * np.fft.fftfreq(n_fft, d=traj.dt_sample)
    sym = np.abs(tau) ** order
    spec = np.fft.fft(stack, n=n_fft, axis=0)
    out = np.fft.ifft(sym.reshape((-1,) + (1,) * (stack.ndim - 1)) * spec, axis=0)
    out = out[:n]
    return Trajectory(times=traj.times, grid=traj.grid,
                      data={"u": out}, meta=dict(traj.meta))


# ---------------------------------------------------------------------------
# named norm registry and reports
# ---------------------------------------------------------------------------

@dataclass
class NormReport:
    """Named norm values for one scenario run."""

    entries: dict[str, float]
    scenario_id: str = ""
    N: float = 0.0
    epsilon: float = 0.0
    t_final: float = 0.0
    drift_trace: float = 0.0
    drift_energy: float = 0.0

    def __post_init__(self):
        for k, v in self.entries.items():
            if not (np.isfinite(v) and v >= 0):
                raise NormError(f"norm {k!r} is not finite nonnegative: {v}")


def _xy_half_brackets() -> FourierMultiplier:
    return multiplier_product(bracket("x", 0.5), bracket("y", 0.5))


def n1_norm(traj: Trajectory, selector: Selector, N: float,
            thresholds: tuple[float, float, float] = (10.0, 0.1, 20.0)) -> float:
    """Bootstrap norm for the pair part: Strichartz + low collapsing pieces.

    thresholds = (high-frequency multiple, x+y-low multiple, low-collapsing
    multiple), defaulting to (10 N, N/10, 20 N).
    """
    hi, lo, col = thresholds
    bxy = _xy_half_brackets()
    total = strichartz_norm(traj, selector, bxy, "S_xy")
    total += collapsing_norm(traj, selector, bracket("x+y", 0.5), "low", N, col)
    dt_traj = time_frac_deriv(traj, selector)
    total += collapsing_norm(dt_traj, select_component("u"), None, "low", N, col)

    p_hi = multiplier_product(highpass_multiplier(hi * N, "x"),
                              highpass_multiplier(hi * N, "y"),
                              highpass_multiplier(lo * N, "x+y"))
    total += mixed_norm(traj, selector, 2.0, 6.0, 2.0, "diff-then-sum",
                        multiplier_product(bxy, p_hi))
    p_diag = multiplier_product(highpass_multiplier(hi * N, "x-y"),
                                ball_multiplier(lo * N, "x+y"))
    m2 = multiplier_product(bracket("x+y", 0.5), bracket("x-y", 0.5), p_diag)
    total += mixed_norm(traj, selector, 2.0, 6.0, 2.0, "diff-then-sum", m2)
    m3 = multiplier_product(bracket("x-y", 0.5), p_diag)
    total += mixed_norm(dt_traj, select_component("u"), 2.0, 6.0, 2.0,
                        "diff-then-sum", m3)
    return float(total)


def n2_norm(traj: Trajectory, selector: Selector) -> float:
    """Bootstrap norm for the condensate pair kernel: full collapsing pieces."""
    bxy = _xy_half_brackets()
    total = strichartz_norm(traj, selector, bxy, "S_xy")
    total += collapsing_norm(traj, selector, bracket("x+y", 0.5), "full")
    dt_traj = time_frac_deriv(traj, selector)
    total += collapsing_norm(dt_traj, select_component("u"), None, "full")
    total += collapsing_norm(traj, selector, bracket("x", 0.5), "full")
    total += collapsing_norm(traj, selector, bracket("y", 0.5), "full")
    total += mixed_norm(traj, selector, 2.0, 6.0, 2.0, "diff-then-sum", bxy)
    return float(total)


def apriori_gamma_norm(traj: Trajectory, selector: Selector = select_gamma,
                       alpha: float = 1.0) -> float:
    """L^8(dt) L^inf(d(x-y)) L^{4/3}(d(x+y)) of <grad_{x+y}>^alpha Gamma."""
    red = sample_inner_reduction(traj, selector, "diff-then-sum", 4.0 / 3.0,
                                 bracket("x+y", alpha))
    per_t = np.max(red, axis=1)
    return float(_time_norm(per_t, 8.0, _time_weights(traj)))


NORM_NAMES = (
    "S_xy", "S_full", "S_dual_r", "collapsing", "low_collapsing",
    "N1_lambda_p", "N2_lambda_c", "phi_S", "sh2k_S_xy", "p2_S_xy",
    "apriori_gamma",
)


def compute_named_norm(traj: Trajectory, name: str) -> float:
    """Evaluate one of the fixed-vocabulary norms on an evolution trajectory."""
    bxy = _xy_half_brackets()
    N = traj.meta.get("N", 0.0)
    if name == "S_xy":
        return strichartz_norm(traj, select_lambda, bxy, "S_xy")
    if name == "S_full":
        return strichartz_norm(traj, select_lambda, bxy, "S_full")
    if name == "S_dual_r":
        return strichartz_norm(traj, select_lambda, bxy, "S_dual_r")
    if name == "collapsing":
        return collapsing_norm(traj, select_lambda, bracket("x+y", 0.5), "full")
    if name == "low_collapsing":
        return collapsing_norm(traj, select_lambda, bracket("x+y", 0.5),
                               "low", N)
    if name == "N1_lambda_p":
        return n1_norm(traj, select_lambda_p, N)
    if name == "N2_lambda_c":
        return n2_norm(traj, select_lambda_c)
    if name == "phi_S":
        return phi_strichartz(traj)
    if name == "sh2k_S_xy":
        return strichartz_norm(traj, select_sh2k, None, "S_xy")
    if name == "p2_S_xy":
        return strichartz_norm(traj, select_p2, None, "S_xy")
    if name == "apriori_gamma":
        return apriori_gamma_norm(traj)
    raise NormError(f"unknown norm name {name!r}; valid: {NORM_NAMES}")


# ---------------------------------------------------------------------------
# N-sweep growth summary
# ---------------------------------------------------------------------------

@dataclass
class GrowthSummary:
    """Per-norm max/min ratios across an N sweep."""

    ratios: dict[str, float]
    monotone_growth: dict[str, bool]
    values: dict[str, dict[float, float]]


def uniform_in_n_report(runs: Sequence[tuple[float, NormReport]]) -> GrowthSummary:
    """Compare named norms across N; ratio max/min and monotonicity flags."""
    if len(runs) < 2:
        raise NormError("uniform-in-N report needs at least two N values")
    names = set(runs[0][1].entries)
    for _, rep in runs[1:]:
        if set(rep.entries) != names:
            raise NormError("norm reports disagree on the measured norm set")
    scen = {rep.scenario_id for _, rep in runs}
    if len(scen) > 1:
        raise NormError(f"inconsistent scenario metadata across runs: {scen}")
    ratios, monotone, values = {}, {}, {}
    ordered = sorted(runs, key=lambda t: t[0])
    for name in sorted(names):
        vals = [rep.entries[name] for _, rep in ordered]
        lo, hi = min(vals), max(vals)
        ratios[name] = hi / lo if lo > 0 else (1.0 if hi == 0 else np.inf)
        monotone[name] = all(b >= a for a, b in zip(vals, vals[1:]))
        values[name] = {n: rep.entries[name] for n, rep in ordered}
    return GrowthSummary(ratios=ratios, monotone_growth=monotone, values=values)


# ---------------------------------------------------------------------------
# diagnostics used by regression tests
# ---------------------------------------------------------------------------

def square_function_ratio(traj: Trajectory, selector: Selector,
                          multiplier: Optional[FourierMultiplier] = None,
                          k_max: Optional[int] = None) -> float:
    """(sum_k ||P_{|xi-eta| ~ 2^k} u||_{S_xy}^2) / ||u||_{S_xy}^2."""
    from .grid import annulus_multiplier

    g = traj.grid
    if k_max is None:
        k_max = max(1, int(math.ceil(math.log2(max(g.nyquist, 2.0)))))
    total = 0.0
    for k in range(0, k_max + 1):
        band = annulus_multiplier(k, "x-y")
        m = band if multiplier is None else multiplier_product(multiplier, band)
        total += strichartz_norm(traj, selector, m, "S_xy") ** 2
    denom = strichartz_norm(traj, selector, multiplier, "S_xy") ** 2
    if denom == 0:
        return 1.0
    return float(total / denom)


def projector_l1_constant(grid: GridSpec, cut: float, axes: str = "x-y") -> float:
    """Discrete L^1 norm of the ball projector kernel (Young constant)."""
    sym = ball_multiplier(cut, "x").symbol(grid.freq_modulus())
    kernel = np.fft.ifftn(sym)
    return float(np.sum(np.abs(kernel)))
