"""Command line entry point: ``maxwellfem {cavity,pml,scattering} ...``."""
from __future__ import annotations

import argparse
import json
import sys

from .runner import ExperimentConfig, run_experiment


def _parser():
    ap = argparse.ArgumentParser(prog="maxwellfem", description="Run a Maxwell model experiment and emit CSV.")
    sub = ap.add_subparsers(dest="kind", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file whose keys mirror the flags")
        p.add_argument("--p", type=int)
        p.add_argument("--omega", type=float)
        p.add_argument("--sigma-star", type=float, dest="sigma_star")
        p.add_argument("--out", help="CSV path (stdout when omitted)")

    cav = sub.add_parser("cavity", help="PEC cavity, uniform refinement")
    pml = sub.add_parser("pml", help="plane wave in a PML-truncated box, uniform refinement")
    for p in (cav, pml):
        common(p)
        p.add_argument("--n0", type=int)
        p.add_argument("--nmax", type=int)
    cav.add_argument("--delta", type=float, help="omega = 3 pi/2 + delta pi/2")
    cav.add_argument("--ell", type=float, help="omega = (ell + 0.3) 2 pi")

    sc = sub.add_parser("scattering", help="penetrable obstacle, adaptive refinement")
    common(sc)
    sc.add_argument("--n0", type=int, help="initial structured mesh size")
    sc.add_argument("--iters", type=int)
    sc.add_argument("--theta", type=float)
    sc.add_argument("--max-dofs", type=int, dest="max_dofs")
    return ap


def build_config(argv=None) -> ExperimentConfig:
    args = vars(_parser().parse_args(argv))
    kind = args.pop("kind")
    data = {}
    path = args.pop("config")
    if path:
        with open(path) as fh:
            data = json.load(fh)
        data.pop("kind", None)
    data.update({k: v for k, v in args.items() if v is not None})
    return ExperimentConfig.from_dict({"kind": kind, **data})


def main(argv=None) -> int:
    try:
        config = build_config(argv)
    except ValueError as exc:
        print(f"maxwellfem: {exc}", file=sys.stderr)
        return 2
    text = run_experiment(config)
    if not config.out:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
