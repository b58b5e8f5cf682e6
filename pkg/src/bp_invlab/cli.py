"""Command-line front end: run experiments, estimate rates, run acceptance.

Exit codes: 0 on success, 1 on any failed experiment cell, 2 on a
configuration error.  BP_INVLAB_THREADS caps the cell work pool.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError
from .experiments import ExperimentConfig, emit_csv, run_experiment
from .rate_lab import estimate_restricted_rates
from .rng import SeededRng
from .transforms import gaussian_sensing


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.from_toml(args.config, paper_scale=args.paper_scale)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out_path = args.out or cfg.out_path
    if not out_path:
        print("config error: no output path (set 'out_path' or pass --out)", file=sys.stderr)
        return 2
    table = run_experiment(cfg)
    emit_csv(table, out_path)
    print(f"{len(table.rows)} rows -> {out_path}")
    for failure in table.failures:
        print(f"cell failed: {failure}", file=sys.stderr)
    return 1 if table.failures else 0


def _cmd_rates(args) -> int:
    op = gaussian_sensing(args.m, args.n, SeededRng(args.seed, args.stream))
    est = estimate_restricted_rates(op, args.k, args.supports, SeededRng(args.seed, args.stream + 1))
    print(
        f"n={args.n} m={args.m} k={args.k} supports={args.supports} seed={args.seed} "
        f"p_ls_hat={est.p_ls_hat:.6f} p_bp_hat={est.p_bp_hat:.6f} ratio={est.ratio:.6f}"
    )
    return 0


def _cmd_check(args) -> int:
    try:
        import pytest
    except ImportError:
        print("the acceptance suite needs pytest (pip install bp-invlab[test])", file=sys.stderr)
        return 2
    candidates = [
        Path.cwd() / "tests" / "test_acceptance.py",
        Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py",
    ]
    for candidate in candidates:
        if candidate.exists():
            code = pytest.main(["-v", "-s", str(candidate)])
            return 0 if code == 0 else 1
    print("tests/test_acceptance.py not found; run from the repository root", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bp-invlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config and emit CSV")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--paper-scale", action="store_true", help="apply the config's [paper_scale] overrides")
    run_p.add_argument("--out", default=None, help="output CSV path (overrides the config)")
    run_p.set_defaults(func=_cmd_run)

    rates_p = sub.add_parser("rates", help="Monte Carlo restricted-rate estimate for a Gaussian operator")
    rates_p.add_argument("--n", type=int, required=True)
    rates_p.add_argument("--m", type=int, required=True)
    rates_p.add_argument("--k", type=int, required=True)
    rates_p.add_argument("--supports", type=int, default=500)
    rates_p.add_argument("--seed", type=int, required=True)
    rates_p.add_argument("--stream", type=int, default=0)
    rates_p.set_defaults(func=_cmd_rates)

    check_p = sub.add_parser("check", help="run the acceptance suite")
    check_p.set_defaults(func=_cmd_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
