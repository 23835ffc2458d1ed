"""Command-line driver: simulate, sweep-n, validate-linear, selftest.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure (NaN/blow-up or unstable step).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .evolution import BlowupError, EvolutionError
from .grid import GridError
from .harness import (
    ConfigError,
    ScenarioConfig,
    emit_report,
    emit_summary,
    parse_config,
    run_all,
    run_linear_validation,
    sweep_n,
)
from .kernels import KernelError
from .norms import NormError
from .potential import PotentialError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_VALIDATION_ERRORS = (ConfigError, GridError, KernelError, PotentialError,
                      NormError)


def _load_config(args) -> ScenarioConfig:
    if args.config is None:
        cfg = ScenarioConfig()
    else:
        cfg = parse_config(Path(args.config).read_text())
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    return cfg.validate()


def _out_dir(args) -> Path:
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    reports = run_all(cfg)
    out = _out_dir(args)
    emit_report(reports, "csv", out / f"{cfg.scenario_id}_norms.csv")
    emit_report(reports, "json", out / f"{cfg.scenario_id}_norms.json")
    for rep in reports:
        print(f"[simulate] N={rep.N:g} drift_trace={rep.drift_trace:.3e} "
              f"drift_energy={rep.drift_energy:.3e}")
    print(f"[simulate] wrote {cfg.scenario_id}_norms.csv / .json in {out}")
    return EXIT_OK


def cmd_sweep_n(args) -> int:
    cfg = _load_config(args)
    reports, summary = sweep_n(cfg)
    out = _out_dir(args)
    emit_report(reports, "csv", out / f"{cfg.scenario_id}_sweep.csv")
    emit_summary(summary, out / f"{cfg.scenario_id}_sweep_summary.json")
    for name in sorted(summary.ratios):
        print(f"[sweep-n] {name}: max/min ratio {summary.ratios[name]:.4f} "
              f"monotone={summary.monotone_growth[name]}")
    return EXIT_OK


def cmd_validate_linear(args) -> int:
    cfg = _load_config(args)
    rows = run_linear_validation(cfg, estimates=tuple(args.estimates))
    out = _out_dir(args)
    path = out / f"{cfg.scenario_id}_linear.json"
    with open(path, "w", newline="\n") as f:
        f.write(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    for row in rows:
        tag = " (degenerate)" if row["degenerate"] else ""
        print(f"[validate-linear] N={row['N']:g} {row['estimate']}: "
              f"ratio={row['ratio']:.4f}{tag}")
    print(f"[validate-linear] wrote {path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from . import selftest

    ok = selftest.run(verbose=True)
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hfbsim",
        description="Spectral simulator and norm harness for coupled "
                    "condensate/pair-excitation dynamics.")
    ap.add_argument("--config", help="TOML scenario file", default=None)
    ap.add_argument("--out", help="output directory", default=None)
    ap.add_argument("--jobs", type=int, default=None,
                    help="parallel scenario workers")
    ap.add_argument("--seed", type=int, default=None, help="seed override")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="run each N and emit the norm report")
    sub.add_parser("sweep-n", help="run the N list and summarize growth ratios")
    vl = sub.add_parser("validate-linear",
                        help="evaluate the linear-model estimates over N")
    vl.add_argument("--estimates", nargs="+", default=["main", "collapsing_full"])
    sub.add_parser("selftest", help="run the brute-force oracle suites")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "sweep-n": cmd_sweep_n,
        "validate-linear": cmd_validate_linear,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except _VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowupError, EvolutionError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
