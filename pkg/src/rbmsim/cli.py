"""Command-line runner for the four experiment families.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(non-finite state or a singular pair encountered mid-run).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .core import SimulationError
from .experiments import run_scenario, write_manifest
from .scenario import FAMILIES, ConfigError, load_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbmsim",
        description=(
            "Random-batch simulation engine: 1D Langevin benchmarks, "
            "Lennard-Jones equation of state, scaling and estimator checks."
        ),
    )
    sub = parser.add_subparsers(dest="family", required=True)
    for family in FAMILIES:
        sp = sub.add_parser(family, help=f"run the {family} scenario family")
        sp.add_argument("--config", type=str, default=None,
                        help="JSON scenario overrides")
        sp.add_argument("--seed", type=int, default=None,
                        help="master seed (64-bit)")
        sp.add_argument("--out", type=str, default=None,
                        help="output directory (env RBMSIM_OUT)")
        sp.add_argument("--paper-scale", action="store_true",
                        help="restore the published run lengths")
        sp.add_argument("--no-rbm", action="store_true",
                        help="force full (non-batched) simulation")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads hint (env RBMSIM_THREADS); "
                             "results do not depend on it")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    threads = args.threads
    if threads is None and os.environ.get("RBMSIM_THREADS"):
        threads = int(os.environ["RBMSIM_THREADS"])
    if threads is not None:
        # numpy's vectorized kernels are the only threaded component
        os.environ.setdefault("OMP_NUM_THREADS", str(threads))

    out = args.out or os.environ.get("RBMSIM_OUT") or f"runs/{args.family}"
    out_dir = Path(out)

    try:
        scenario = load_scenario(
            args.family,
            config_path=args.config,
            seed=args.seed,
            paper_scale=args.paper_scale,
            no_rbm=args.no_rbm,
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        result = run_scenario(scenario, out_dir)
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        write_manifest(out_dir, scenario, status=f"failed: {exc}")
        return 3

    for name, path in result["outputs"].items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
