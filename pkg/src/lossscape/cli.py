"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from lossscape import __version__
from lossscape.config import SCHEMA, ConfigError, read_config_file, resolve
from lossscape.field import FieldFormatError
from lossscape.pipeline import (
    PipelineError,
    run_analyze,
    run_beta_sweep,
    run_mlp_demo,
    run_pipeline,
    run_sample,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("lossscape")


def _add_config_flags(p):
    p.add_argument("--config", help="INI config file; flags override its values")
    for name, key in SCHEMA.items():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        helptext = key.help or f"[{key.section}]"
        if key.choices:
            helptext += f" ({'|'.join(key.choices)})"
        p.add_argument(*flags, dest=name, default=None, metavar="VALUE", help=helptext)


def _config_from_args(args):
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {name: getattr(args, name) for name in SCHEMA if getattr(args, name) is not None}
    return resolve(file_values, overrides)


def _exit_code(exc):
    cause = exc.cause if isinstance(exc, PipelineError) else exc
    if isinstance(cause, (OSError, FieldFormatError)):
        return EXIT_IO
    if isinstance(cause, ArithmeticError):
        return EXIT_NUMERIC
    if isinstance(cause, (ConfigError, ValueError, KeyError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def _print_metrics(m):
    keys = ("n_saddles", "n_minima", "avg_persistence", "avg_persistence_finite_only",
            "lambda1", "lambda2", "trace", "final_loss", "abs_error", "accuracy")
    for k in keys:
        if k in m and m[k] is not None:
            print(f"{k:28s} {m[k]}")


def cmd_sample(args):
    cfg = _config_from_args(args)
    manifest = run_sample(cfg)
    print(f"landscape written to {manifest.output_dir}/landscape.csv")


def cmd_pipeline(args):
    cfg = _config_from_args(args)
    manifest = run_pipeline(cfg)
    _print_metrics(manifest.summary)
    print(f"outputs in {manifest.output_dir}")


def cmd_analyze(args):
    metrics = run_analyze(args.field, args.output_dir, include_essential=not args.finite_only,
                          meta_path=args.meta)
    _print_metrics(metrics)


def cmd_beta_sweep(args):
    cfg = _config_from_args(args)
    rows = run_beta_sweep(cfg)
    for row in rows:
        print(f"beta={row['beta']:<5g} saddles={row.get('n_saddles')} minima={row.get('n_minima')} "
              f"avg_pers={row.get('avg_persistence')} abs_err={row.get('abs_error')} {row['flags']}")
    print(f"table written to {cfg['output_dir']}/sweep.csv")


def cmd_mlp_demo(args):
    cfg = _config_from_args(args)
    rows = run_mlp_demo(cfg)
    for row in rows:
        print(f"{row['variant']:>14s} seed={row['seed']:<7d} saddles={row.get('n_saddles')} "
              f"minima={row.get('n_minima')} avg_pers={row.get('avg_persistence')} {row['flags']}")
    print(f"table written to {cfg['output_dir']}/sweep.csv")


def cmd_oracle_check(args):
    from lossscape.oracle import run_oracle_suite

    n_failed, examples = run_oracle_suite(args.n_fields, args.seed, args.rows, args.cols)
    status = "PASS" if n_failed == 0 else "FAIL"
    print(f"{status} oracle equivalence: {args.n_fields - n_failed}/{args.n_fields} "
          f"{args.rows}x{args.cols} fields match the flood-fill reference")
    for i, problems in examples:
        print(f"  field {i}: {'; '.join(problems)}")
    return EXIT_OK if n_failed == 0 else EXIT_NUMERIC


def build_parser():
    parser = argparse.ArgumentParser(prog="lossscape", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="train/load a model and write the sampled landscape")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pipeline", help="landscape, merge tree, diagram and metrics")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("analyze", help="topology and metrics of an existing landscape CSV")
    p.add_argument("field", help="landscape CSV (alpha1,alpha2,loss)")
    p.add_argument("--meta", help="sidecar JSON (default: <stem>.meta.json)")
    p.add_argument("--output-dir", "--output_dir", dest="output_dir", default=".")
    p.add_argument("--finite-only", action="store_true",
                   help="average persistence over finite pairs only")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("beta-sweep", help="PINN pipeline for each beta; writes sweep.csv")
    _add_config_flags(p)
    p.set_defaults(func=cmd_beta_sweep)

    p = sub.add_parser("mlp-demo", help="MLP variants x seeds; writes sweep.csv")
    _add_config_flags(p)
    p.set_defaults(func=cmd_mlp_demo)

    p = sub.add_parser("oracle-check", help="compare the sweep against brute-force flood fill")
    p.add_argument("--n-fields", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=int, default=6)
    p.add_argument("--cols", type=int, default=6)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineError, OSError, FieldFormatError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
