"""Scenario configuration, execution, N sweeps, and report emission.

Configs are flat TOML documents mirroring ScenarioConfig; runs are
deterministic given (config, seed).  CSV rows carry exactly the columns

    scenario_id,N,epsilon,t_final,norm_name,value,drift_trace,drift_energy

with reals printed to 17 significant digits and LF line endings; the JSON
format mirrors the same rows.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .evolution import (
    GaussianProfile,
    evolve,
    init_state,
    rank_one_pair_kernel,
)
from .grid import make_grid
from .linear import evaluate_inequalities, manufacture_data, LinearProblem, solve_linear
from .norms import GrowthSummary, NormReport, compute_named_norm, uniform_in_n_report
from .potential import build_base_potential, scale_potential


class ConfigError(ValueError):
    """Invalid scenario configuration; message names the offending field."""


DEFAULT_NORMS = ("S_xy", "sh2k_S_xy", "p2_S_xy", "phi_S")

CSV_COLUMNS = ("scenario_id", "N", "epsilon", "t_final", "norm_name",
               "value", "drift_trace", "drift_energy")


@dataclass
class ScenarioConfig:
    """One experiment: grid, physics knobs, integration, and norm list."""

    scenario_id: str = "standard"
    dim: int = 1
    points: int = 128
    length: float = 16.0
    n_list: tuple[float, ...] = (8.0,)
    beta: float = 1.0
    epsilon: float = 0.05
    phi_width: float = 1.0
    phi_amplitude: float = 1.0
    k0_amplitude: float = 0.1
    k0_width: float = 1.0
    t_final: float = 1.0
    dt: float = 1e-3
    sample_every: int = 10
    norms: tuple[str, ...] = DEFAULT_NORMS
    seed: int = 0
    jobs: int = 1

    def validate(self) -> "ScenarioConfig":
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim: must be 1, 2 or 3, got {self.dim}")
        if self.points < 8 or (self.points & (self.points - 1)) != 0:
            raise ConfigError(f"points: must be a power of two >= 8, got {self.points}")
        if self.length <= 0:
            raise ConfigError(f"length: must be positive, got {self.length}")
        nyq = np.pi * self.points / self.length
        for n in self.n_list:
            if n < 1:
                raise ConfigError(f"n_list: every N must be >= 1, got {n}")
            if float(n) ** self.beta > nyq:
                raise ConfigError(
                    f"n_list: N = {n} with beta = {self.beta} exceeds the grid "
                    f"Nyquist {nyq:.4g} (points={self.points}, length={self.length})"
                )
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta: must lie in (0, 1], got {self.beta}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon: must be nonnegative, got {self.epsilon}")
        if self.t_final <= 0:
            raise ConfigError(f"t_final: must be positive, got {self.t_final}")
        if self.dt <= 0:
            raise ConfigError(f"dt: must be positive, got {self.dt}")
        n_steps = int(round(self.t_final / self.dt))
        if abs(n_steps * self.dt - self.t_final) > 1e-9 * max(self.t_final, 1.0):
            raise ConfigError(f"dt: {self.dt} does not divide t_final {self.t_final}")
        if self.sample_every < 1 or n_steps % self.sample_every != 0:
            raise ConfigError(
                f"sample_every: must be >= 1 and divide the {n_steps} steps")
        from .norms import NORM_NAMES

        for nm in self.norms:
            if nm not in NORM_NAMES:
                raise ConfigError(f"norms: unknown norm name {nm!r}")
        if self.jobs < 1:
            raise ConfigError(f"jobs: must be >= 1, got {self.jobs}")
        return self


_TUPLE_FIELDS = {"n_list": float, "norms": str}


def parse_config(text: str) -> ScenarioConfig:
    """Parse a flat TOML document into a validated ScenarioConfig."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML parse error: {e}") from e
    known = {f.name: f for f in fields(ScenarioConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration field")
        if key in _TUPLE_FIELDS:
            if not isinstance(value, list):
                raise ConfigError(f"{key}: expected a list")
            kwargs[key] = tuple(_TUPLE_FIELDS[key](v) for v in value)
        else:
            kwargs[key] = value
    try:
        cfg = ScenarioConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    return cfg.validate()


def serialize_config(cfg: ScenarioConfig) -> str:
    """Emit the flat TOML form; parse(serialize(cfg)) round-trips."""
    lines = []
    for f in fields(ScenarioConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            if f.name == "norms":
                items = ", ".join(f'"{s}"' for s in v)
            else:
                items = ", ".join(_fmt_value(x) for x in v)
            lines.append(f"{f.name} = [{items}]")
        elif isinstance(v, str):
            lines.append(f'{f.name} = "{v}"')
        elif isinstance(v, bool):
            lines.append(f"{f.name} = {str(v).lower()}")
        elif isinstance(v, int):
            lines.append(f"{f.name} = {v}")
        else:
            lines.append(f"{f.name} = {_fmt_value(v)}")
    return "\n".join(lines) + "\n"


def _fmt_value(x) -> str:
    if isinstance(x, int):
        return str(x)
    s = repr(float(x))
    return s


def _fmt_real(x: float) -> str:
    """17 significant digits: lossless float round trip."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------

def run_scenario(cfg: ScenarioConfig, N: float) -> NormReport:
    """Build, evolve, and measure one (config, N) combination."""
    cfg.validate()
    grid = make_grid(cfg.dim, cfg.points, cfg.length)
    base = build_base_potential(grid, cfg.epsilon) if cfg.epsilon > 0 else None
    if base is not None:
        pot = scale_potential(base, N, cfg.beta)
    else:
        pot = scale_potential(build_base_potential(grid, 1e-300), N, cfg.beta)
    profile = GaussianProfile(width=cfg.phi_width, amplitude=cfg.phi_amplitude)
    k0 = (rank_one_pair_kernel(grid, cfg.k0_amplitude, cfg.k0_width)
          if cfg.k0_amplitude != 0 else None)
    state0 = init_state(grid, profile, k0, N)
    traj = evolve(state0, pot, N, cfg.t_final, cfg.dt, cfg.sample_every)
    tr = traj.data["trace"]
    en = traj.data["energy"]
    drift_trace = float(np.max(np.abs(tr - tr[0])))
    drift_energy = float(np.max(np.abs(en - en[0])) / max(1.0, abs(en[0])))
    entries = {name: compute_named_norm(traj, name) for name in cfg.norms}
    return NormReport(entries=entries, scenario_id=cfg.scenario_id, N=N,
                      epsilon=cfg.epsilon, t_final=cfg.t_final,
                      drift_trace=drift_trace, drift_energy=drift_energy)


def _run_scenario_task(args) -> NormReport:
    cfg_dict, N = args
    cfg = ScenarioConfig(**cfg_dict)
    return run_scenario(cfg, N)


def run_all(cfg: ScenarioConfig) -> list[NormReport]:
    """Run every N in the config's list, scenario-parallel when jobs > 1."""
    cfg.validate()
    ns = list(cfg.n_list)
    if cfg.jobs == 1 or len(ns) == 1:
        return [run_scenario(cfg, n) for n in ns]
    cfg_dict = {f.name: getattr(cfg, f.name) for f in fields(ScenarioConfig)}
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        reports = list(pool.map(_run_scenario_task,
                                [(cfg_dict, n) for n in ns]))
    return reports


def sweep_n(cfg: ScenarioConfig) -> tuple[list[NormReport], GrowthSummary]:
    """Run the N list and summarize max/min growth ratios per norm."""
    if len(cfg.n_list) < 2:
        raise ConfigError("n_list: N sweep needs at least 2 values")
    reports = run_all(cfg)
    summary = uniform_in_n_report([(r.N, r) for r in reports])
    return reports, summary


def run_linear_validation(cfg: ScenarioConfig,
                          estimates=("main", "collapsing_full")) -> list[dict]:
    """Solve the linear model over the N list on fixed manufactured data."""
    cfg.validate()
    grid = make_grid(cfg.dim, cfg.points, cfg.length)
    band = min(4.0, 0.5 * grid.nyquist)
    lam0, g_s, h_s = manufacture_data(cfg.seed, grid, band, 1.0,
                                      cfg.t_final, cfg.dt)
    base = build_base_potential(grid, cfg.epsilon if cfg.epsilon > 0 else 1e-300)
    rows = []
    for n in cfg.n_list:
        pot = scale_potential(base, n, cfg.beta)
        prob = LinearProblem(grid, pot, lam0, g_s, h_s, cfg.t_final, cfg.dt)
        sol = solve_linear(prob, cfg.sample_every)
        for rec in evaluate_inequalities(sol, prob, estimates):
            rows.append({
                "scenario_id": cfg.scenario_id,
                "N": n,
                "estimate": rec.name,
                "lhs": rec.lhs,
                "rhs": rec.rhs,
                "ratio": rec.ratio,
                "degenerate": rec.degenerate,
                "lhs_terms": rec.lhs_terms,
                "rhs_terms": rec.rhs_terms,
            })
    return rows


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def report_rows(reports: list[NormReport]) -> list[dict]:
    rows = []
    for rep in reports:
        for name in sorted(rep.entries):
            rows.append({
                "scenario_id": rep.scenario_id,
                "N": rep.N,
                "epsilon": rep.epsilon,
                "t_final": rep.t_final,
                "norm_name": name,
                "value": rep.entries[name],
                "drift_trace": rep.drift_trace,
                "drift_energy": rep.drift_energy,
            })
    return rows


def emit_report(reports: list[NormReport], fmt: str, path) -> None:
    """Write CSV or JSON rows; deterministic ordering, LF endings."""
    rows = report_rows(reports)
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in rows:
            lines.append(",".join(
                r[c] if isinstance(r[c], str) else _fmt_real(r[c])
                for c in CSV_COLUMNS))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigError(f"format: unknown report format {fmt!r}")
    with open(path, "w", newline="\n") as f:
        f.write(text)


def emit_summary(summary: GrowthSummary, path) -> None:
    payload = {
        "ratios": summary.ratios,
        "monotone_growth": summary.monotone_growth,
        "values": {k: {_fmt_real(n): v for n, v in d.items()}
                   for k, d in summary.values.items()},
    }
    with open(path, "w", newline="\n") as f:
        f.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
