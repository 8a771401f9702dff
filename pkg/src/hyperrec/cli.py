"""Command-line front end: train, eval, export, sweep.

Flags mirror TrainConfig fields and override values from an optional flat
`key = value` config file. Exit codes: 0 success, 2 configuration error,
3 data/format error, 4 numerical or sampling error, 1 anything else.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys

from .config import TrainConfig, load_config, parse_config_text
from .errors import (ConfigError, DataFormatError, InvalidInputError,
                     NumericalError, OutOfBallError, SamplingExhaustedError)
from .model import load_embeddings
from .train import run_eval, run_sweep, run_train


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--data", dest="input_path", help="interactions file")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--variant", choices=["hyperbolic", "tangent", "euclidean"])
    parser.add_argument("--curvature", "--c", dest="curvature", type=float)
    parser.add_argument("--dim", type=int)
    parser.add_argument("--margin", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--eval-every", dest="eval_every", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--n-negatives", dest="n_negatives", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--min-interactions", dest="min_interactions", type=int)
    parser.add_argument("--k-core", dest="k_core", type=int)
    parser.add_argument("--optimizer", choices=["rsgd", "sgd"])
    parser.add_argument("--grad-clip", dest="grad_clip", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--generalized-rescale", dest="generalized_rescale",
                        action="store_const", const=True)
    parser.add_argument("--delimiter")
    parser.add_argument("--header", action="store_const", const=True)


_CONFIG_KEYS = set(TrainConfig().to_dict())


def _build_config(args: argparse.Namespace) -> TrainConfig:
    overrides = {k: v for k, v in vars(args).items()
                 if k in _CONFIG_KEYS and v is not None}
    if getattr(args, "config", None):
        return load_config(args.config, overrides)
    return TrainConfig(**{**TrainConfig().to_dict(), **overrides}).validate()


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    result = run_train(cfg, progress=print)
    print(f"run summary written to {os.path.join(cfg.output_dir, 'run_summary.json')}")
    best = result.summary["best_validation"]
    test = result.summary["test_at_best"]
    print(f"best epoch {result.summary['best_epoch']}: "
          f"val nDCG@{cfg.k} {best['ndcg']:.5f}, test nDCG@{cfg.k} {test['ndcg']:.5f} "
          f"HR@{cfg.k} {test['hr']:.5f}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    result = run_eval(args.checkpoint, cfg, args.split)
    print(f"{result.split}\t{result.hr_at_k:.5f}\t{result.ndcg_at_k:.5f}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    source = args.checkpoint
    if args.run:
        source = os.path.join(args.run, f"{args.which}.emb")
    if not source:
        raise ConfigError("export: provide --checkpoint or --run")
    if not os.path.isfile(source):
        raise ConfigError(f"export: no such checkpoint: {source}")
    load_embeddings(source)  # validates before copying
    shutil.copyfile(source, args.out)
    print(f"exported {source} -> {args.out}")
    return 0


def _parse_sweep_specs(specs: list[str]) -> dict[str, list[float]]:
    if not specs:
        raise ConfigError("sweep: at least one --sweep param=v1,v2,... is required")
    out: dict[str, list[float]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"sweep: expected param=v1,v2,..., got {spec!r}")
        name, _, values = spec.partition("=")
        try:
            out[name.strip()] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"sweep: bad value in {spec!r}: {exc}") from None
    return out


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    spec = _parse_sweep_specs(args.sweep or [])
    out_path = args.table
    if out_path is None:
        if not cfg.output_dir:
            raise ConfigError("output_dir: required (or pass --table)")
        os.makedirs(cfg.output_dir, exist_ok=True)
        out_path = os.path.join(cfg.output_dir, "sweep.tsv")
    rows = run_sweep(cfg, spec, repeats=args.repeats, out_path=out_path, progress=print)
    failures = sum(1 for r in rows if r["status"] != "ok")
    print(f"sweep table written to {out_path} ({len(rows)} points, {failures} failures)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperrec",
        description="Train and evaluate ball / tangent / Euclidean metric-learning recommenders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write run artifacts")
    _add_config_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a persisted checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", choices=["validation", "test"], default="test")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_export = sub.add_parser("export", help="copy embeddings out of a run directory")
    p_export.add_argument("--run", help="run directory containing best.emb/final.emb")
    p_export.add_argument("--which", choices=["best", "final"], default="best")
    p_export.add_argument("--checkpoint", help="explicit embedding file to export")
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=_cmd_export)

    p_sweep = sub.add_parser("sweep", help="grid sweep over c / gamma / m / lr")
    p_sweep.add_argument("--sweep", action="append", metavar="PARAM=V1,V2,...",
                         help="may be given once or twice")
    p_sweep.add_argument("--repeats", type=int, default=1,
                         help="seeds per grid point (mean and std reported)")
    p_sweep.add_argument("--table", help="output table path (default <out>/sweep.tsv)")
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (InvalidInputError, OutOfBallError, NumericalError, SamplingExhaustedError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
