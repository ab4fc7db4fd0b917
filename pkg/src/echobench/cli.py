"""Command-line entry points: run, aggregate, params, export-weights."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import cells, harness
from .errors import ConfigurationError, EchobenchError


def _load_config(path: str) -> harness.ExperimentConfig:
    return harness.ExperimentConfig.from_file(path)


def cmd_run(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        raw = config.resolved_dict()
        raw["base_seed"] = args.seed
        raw.pop("out_dir", None)
        config = harness.ExperimentConfig.from_dict(raw)
    out_dir = args.out or config.out_dir
    if out_dir is None:
        raise ConfigurationError("no output directory: set out_dir in the config or pass --out")

    def progress(res):
        print(f"[{res.model} run {res.run_index}] {len(res.metrics)} episodes "
              f"in {res.duration_s:.1f}s", file=sys.stderr)

    out = harness.run_experiment(config, out_dir, jobs=args.jobs, progress=progress)
    print(f"wrote results to {out}")
    return 0


def cmd_aggregate(args) -> int:
    out = Path(args.in_dir)
    window = args.window
    task = "experiment"
    report_path = out / "report.json"
    if report_path.exists():
        with open(report_path) as fh:
            report = json.load(fh)
        task = report["config"]["task"]
        if window is None:
            window = report["config"]["smoothing_window"]
    if window is None:
        window = 100
    curves = harness.aggregate_directory(out, window)
    from . import plots
    (out / "figures").mkdir(exist_ok=True)
    plots.render_reward_figure(curves, task, out / "figures" / f"{task}_curves.png")
    print(f"aggregated {len(curves)} model curve(s) under {out}")
    return 0


def cmd_params(args) -> int:
    config = _load_config(args.config)
    table = harness.sizing_report(config)
    header = (f"{'model':<10} {'mem_hidden':>10} {'state':>6} {'width':>6} "
              f"{'mem_params':>10} {'dec_params':>10} {'total':>8} {'dev':>7} ok")
    print(header)
    all_ok = True
    for kind in config.models:
        row = table[kind]
        ok = row["within_tolerance"]
        all_ok = all_ok and ok
        print(f"{kind:<10} {row['memory_hidden']:>10} {row['state_dim']:>6} "
              f"{row['decoder_width']:>6} {row['memory_params']:>10} "
              f"{row['decoder_params']:>10} {row['total_params']:>8} "
              f"{row['deviation_from_median']:>6.2%} {'yes' if ok else 'NO'}")
    print(f"parity within {cells.PARITY_TOLERANCE:.0%} of median: "
          f"{'yes' if all_ok else 'NO'}")
    return 0


def cmd_export_weights(args) -> int:
    config = _load_config(args.config)
    written = harness.export_weights(config, args.out)
    if not written:
        print("config contains no ESN models; nothing to export", file=sys.stderr)
        return 0
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echobench",
        description="Compare reservoir and trainable memory agents on POMDP tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute all seeded runs for a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--jobs", type=int, default=None,
                       help="worker processes (0 = all cores)")
    p_run.add_argument("--seed", type=int, default=None, help="override base seed")
    p_run.set_defaults(fn=cmd_run)

    p_agg = sub.add_parser("aggregate", help="rebuild curves from runs/*.csv")
    p_agg.add_argument("--in", dest="in_dir", required=True)
    p_agg.add_argument("--window", type=int, default=None,
                       help="smoothing window override")
    p_agg.set_defaults(fn=cmd_aggregate)

    p_par = sub.add_parser("params", help="print the parameter-parity table")
    p_par.add_argument("--config", required=True)
    p_par.set_defaults(fn=cmd_params)

    p_exp = sub.add_parser("export-weights",
                           help="dump reservoir matrices as CSV and figures")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(fn=cmd_export_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except EchobenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
