"""Command-line entry point: single solves, Monte-Carlo sweeps, self-checks."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import harness, verify
from .schemes import SchemeId, run_scheme


def _base_config(args) -> harness.ExperimentConfig:
    if getattr(args, "config", None):
        return harness.load_config(args.config)
    if getattr(args, "scale", "desk") == "paper":
        return harness.paper_scale_config()
    return harness.desk_config()


def cmd_solve(args) -> int:
    cfg = _base_config(args)
    geom = cfg.geometry
    scenario = harness.sample_scenario(cfg, args.seed)
    scenario = harness.auto_thresholds(geom, scenario, cfg.crb_margin)
    rep = run_scheme(SchemeId(args.scheme), geom, scenario, schedule=cfg.schedule)
    print(f"scheme={args.scheme} seed={args.seed} status={rep.status} "
          f"secrecy={rep.secrecy:.6f} bps/Hz "
          f"crb_theta={rep.crb_angle:.6g} rad^2 crb_range={rep.crb_range:.6g} m^2 "
          f"solves={rep.inner_solves} seconds={rep.seconds:.2f}")
    return 0 if rep.status in ("converged", "relaxed", "infeasible") else 1


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    overrides = {}
    if args.axis:
        overrides["axis"] = args.axis
    if args.values:
        overrides["values"] = tuple(float(v) for v in args.values.split(","))
    if args.schemes:
        overrides["schemes"] = tuple(s.strip() for s in args.schemes.split(","))
    if args.seeds:
        overrides["seeds"] = harness._parse_seq(args.seeds, int)
    if overrides:
        cfg = replace(cfg, **overrides)
    if cfg.axis not in harness.SWEEP_AXES:
        print(f"unknown sweep axis {cfg.axis!r}", file=sys.stderr)
        return 2
    rows = harness.run_sweep(cfg)
    text = harness.emit_csv(rows, out=args.out)
    if args.out is None:
        sys.stdout.write(text)
    bad = [r for r in rows
           if r.status not in ("converged", "relaxed", "infeasible")]
    for r in bad:
        print(f"cell failed: {r.axis} {r.scheme} seed={r.seed} -> {r.status}",
              file=sys.stderr)
    return 1 if bad else 0


def cmd_verify(args) -> int:
    results = verify.run_all()
    ok = True
    for name, err, tol, passed in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: error {err:.3e} "
              f"(tolerance {tol:.0e})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nfisac",
        description="Secure near-field ISAC transmit design: solver, sweeps, "
                    "and numerical self-checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment file")
    common.add_argument("--scale", choices=("desk", "paper"), default="desk",
                        help="built-in size preset when no config is given")

    p = sub.add_parser("solve", parents=[common],
                       help="design beams for one sampled scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", default="rsma_hb",
                   choices=[s.value for s in SchemeId])
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common],
                       help="run a Monte-Carlo sweep and emit CSV")
    p.add_argument("--axis", choices=harness.SWEEP_AXES)
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--schemes", help="comma-separated scheme names")
    p.add_argument("--seeds", help="comma list and/or lo-hi ranges, e.g. 0-19")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run built-in numerical self-checks")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
