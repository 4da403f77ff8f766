"""Command-line entry point: ``ghostcorr {run, validate, oracle}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..exceptions import GhostCorrError
from .config import load_config, parse_pairs, from_flat, validate
from .experiment import format_number, build_plan, evaluate_oracle, run


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, type=Path, help="experiment config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostcorr", description="Correlated-imaging Monte-Carlo experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and write G.csv, stats.csv, manifest.json")
    _add_config(p_run)
    p_run.add_argument("--shots", type=int, help="override run.shots")
    p_run.add_argument("--seed", type=int, help="override run.master_seed")
    p_run.add_argument("--threads", type=int, help="override run.threads")
    p_run.add_argument("--deterministic", action="store_true", default=None, help="merge blocks in fixed order")
    p_run.add_argument("--out-dir", type=Path, default=Path("."), help="output directory (default: .)")

    p_val = sub.add_parser("validate", help="list every configuration violation")
    _add_config(p_val)

    p_orc = sub.add_parser("oracle", help="closed-form G only; writes oracle.csv or prints it")
    _add_config(p_orc)
    p_orc.add_argument("--out-dir", type=Path, help="write oracle.csv here instead of stdout")
    return parser


def cmd_validate(args) -> int:
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"CONFIG_UNREADABLE: {exc}")
        return 2
    pairs, problems = parse_pairs(text)
    config, more = from_flat(pairs, base_dir=str(args.config.parent))
    problems = problems + more + validate(config)
    for problem in problems:
        print(problem)
    if not problems:
        print("OK")
    return 1 if problems else 0


def cmd_run(args) -> int:
    config = load_config(args.config).with_overrides(
        shots=args.shots,
        master_seed=args.seed,
        threads=args.threads,
        deterministic=args.deterministic,
    )
    out = run(config, out_dir=args.out_dir)
    s = out.stats
    print(
        f"{config.experiment}: {s['n_shots']} shots, L2 error {s['l2_error']:.4f}, "
        f"peak visibility {s['visibility_at_peak']:.4f}, wall {out.manifest['wall_time_s']:.2f} s -> {args.out_dir}"
    )
    return 0


def cmd_oracle(args) -> int:
    plan = build_plan(load_config(args.config))
    oracle = evaluate_oracle(plan)
    det = plan.detection_grid
    header = "# x2_index,x2_meters,G_oracle" + (",G_approx" if oracle.approx is not None else "")
    lines = [f"# ghostcorr closed-form correlation ({plan.config.experiment})", header]
    for k in range(det.n_points):
        row = [k, det.x[k], oracle.G[k]] + ([oracle.approx[k]] if oracle.approx is not None else [])
        lines.append(",".join(format_number(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out_dir is None:
        sys.stdout.write(text)
    else:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "oracle.csv").write_text(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "validate": cmd_validate, "oracle": cmd_oracle}
    try:
        return handlers[args.command](args)
    except GhostCorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
