"""Command-line entry point (``dads`` / ``python -m dads``)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import harness
from .errors import DadsError

log = logging.getLogger("dads")


def _load_config(path: str):
    try:
        return cfgmod.load(path)
    except OSError as exc:
        raise DadsError(f"cannot read config {path}: {exc}") from exc


def cmd_train(args) -> int:
    config = _load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.method is not None:
        changes["train.method"] = args.method
    if args.overlap is not None:
        changes["overlap"] = args.overlap
    if changes:
        config = config.replace(**changes)
    run_dir = Path(args.out) if args.out else Path("runs") / f"{config.method}-{config.env}-{config.overlap}"
    result = harness.run_experiment(config, run_dir, workers=args.workers)
    for row in harness.aggregate(result.records)[-1:]:
        log.info("final step %d: return %.2f +- %.2f over %d seeds",
                 row["step"], row["mean"], row["std"], row["n"])
    for fail in result.failures:
        log.error("seed %d failed at step %d: %s: %s", fail.seed, fail.step, fail.error, fail.message)
    print(result.csv_path)
    return 0 if result.ok else 1


def cmd_ablate(args) -> int:
    base = _load_config(args.config)
    overlaps = None if args.overlap is None else [args.overlap]
    run_dir = Path(args.out) if args.out else Path("runs") / f"ablate-{args.suite}"
    results = harness.run_ablation_suite(base, args.suite, run_dir, overlaps, workers=args.workers)
    ok = True
    for name, result in results.items():
        finals = harness.final_returns(result.records)
        mean = sum(finals.values()) / len(finals) if finals else float("nan")
        print(f"{name}\t{mean:.2f}\t{result.csv_path}")
        ok &= result.ok
    return 0 if ok else 1


def cmd_verify_bounds(args) -> int:
    report = harness.verify_bounds(args.instances, seed=args.seed)
    if not args.quiet:
        for r in report.rows:
            flag = "VIOLATED" if r.violated else "ok"
            print(f"{r.instance_id:4d} {r.kind:9s} S={r.n_states:<2d} A={r.n_actions} "
                  f"gamma={r.gamma:<4g} gap={r.gap:.6e} bound={r.bound:.6e} {flag}")
    print(report.summary())
    if args.csv:
        report.write_csv(args.csv)
    ok = report.violations == 0 and report.max_telescoping_error < 1e-8
    return 0 if ok else 1


def cmd_eval(args) -> int:
    mean, std = harness.evaluate_checkpoint(args.checkpoint, args.episodes, args.seed)
    print(f"return {mean:.3f} +- {std:.3f} over {args.episodes} episodes")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dads", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one method over the configured seeds")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--method", choices=cfgmod.METHODS)
    t.add_argument("--overlap", choices=("large", "medium", "small"))
    t.add_argument("--out", help="run directory (default runs/<method>-<env>-<overlap>)")
    t.add_argument("--workers", type=int, default=1)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("ablate", help="run an ablation grid")
    a.add_argument("--config", required=True)
    a.add_argument("--suite", required=True, choices=harness.SUITES)
    a.add_argument("--overlap", choices=("large", "medium", "small"),
                   help="restrict skew/mixup suites to one overlap level")
    a.add_argument("--out")
    a.add_argument("--workers", type=int, default=1)
    a.set_defaults(func=cmd_ablate)

    v = sub.add_parser("verify-bounds", help="check the tabular gap bounds on random MDPs")
    v.add_argument("--instances", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--csv", help="write per-instance rows here")
    v.add_argument("-q", "--quiet", action="store_true", help="print the summary only")
    v.set_defaults(func=cmd_verify_bounds)

    e = sub.add_parser("eval", help="evaluate a saved agent on its target domain")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, help="evaluation seed (default: the training seed)")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DadsError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
