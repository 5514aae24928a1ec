"""Command-line entry point.

Exit codes: 0 success, 2 configuration problem, 3 input-data problem,
4 numerical failure. Stage subcommands mirror the pipeline order (ingest,
retrieve, perturb, select, truth, evaluate, report); ``run`` chains all of
them, and ``synthbench`` materializes the bundled synthetic benchmark.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from drselect import pipeline, synthbench
from drselect.corpusio import SIMILARITIES, ModelEntry, ModelRegistry
from drselect.errors import ConfigError, DataValidationError, NumericError


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="run config JSON")


def _prepare(args) -> tuple[pipeline.PipelineConfig, pipeline.Workspace]:
    cfg = pipeline.load_config(args.config)
    return cfg, pipeline.Workspace(cfg)


def _cmd_ingest(args) -> int:
    cfg, ws = _prepare(args)
    pipeline.stage_ingest(cfg, ws)
    return 0


def _cmd_retrieve(args) -> int:
    cfg, ws = _prepare(args)
    if args.k is not None:
        if args.k < 1:
            raise ConfigError("--k must be positive")
        cfg = dataclasses.replace(cfg, retrieval_depth=args.k)
    if args.sim is not None:
        entries = tuple(
            ModelEntry(e.model_id, args.sim, e.display_name) for e in cfg.registry
        )
        cfg = dataclasses.replace(cfg, registry=ModelRegistry(entries))
        ws = pipeline.Workspace(cfg)
    pipeline.stage_retrieve(cfg, ws, models=args.model, datasets=args.dataset)
    return 0


def _cmd_perturb(args) -> int:
    cfg, ws = _prepare(args)
    if "qalter" not in cfg.methods:
        raise ConfigError("config does not enable the qalter method")
    params = dict(cfg.methods["qalter"])
    if args.p is not None:
        params["p_values"] = args.p
    if args.trials is not None:
        params["trials"] = args.trials
    methods = dict(cfg.methods)
    methods["qalter"] = params
    cfg = dataclasses.replace(cfg, methods=methods)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    pipeline.stage_perturb(cfg, ws)
    return 0


def _cmd_select(args) -> int:
    cfg, ws = _prepare(args)
    if args.method is not None:
        if args.method not in cfg.methods:
            raise ConfigError(f"method {args.method!r} not enabled in config")
        cfg = dataclasses.replace(cfg, methods={args.method: cfg.methods[args.method]})
    pipeline.stage_select(cfg, ws)
    return 0


def _cmd_truth(args) -> int:
    cfg, ws = _prepare(args)
    pipeline.stage_truth(cfg, ws, metric=args.metric)
    return 0


def _cmd_evaluate(args) -> int:
    cfg, _ = _prepare(args)
    pipeline.stage_evaluate(cfg)
    return 0


def _cmd_report(args) -> int:
    cfg, _ = _prepare(args)
    pipeline.stage_report(cfg)
    return 0


def _cmd_run(args) -> int:
    pipeline.run_pipeline(args.config)
    return 0


def _cmd_synthbench(args) -> int:
    config_path = synthbench.generate(args.out, seed=args.seed)
    print(config_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drselect",
        description="Rank dense retrieval models for an unlabeled target corpus.",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="-v for progress, -vv for debug output",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate every configured input file")
    _add_config(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("retrieve", help="write per-model run files")
    _add_config(p)
    p.add_argument("--model", action="append", help="restrict to a model id (repeatable)")
    p.add_argument("--dataset", action="append", help="restrict to a dataset (repeatable)")
    p.add_argument("--k", type=int, help="override retrieval depth")
    p.add_argument("--sim", choices=SIMILARITIES, help="override similarity for all models")
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("perturb", help="write masked-query TSVs")
    _add_config(p)
    p.add_argument("--p", type=float, action="append", help="mask proportion (repeatable)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--trials", type=int, help="override trials per query")
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("select", help="score models with the configured methods")
    _add_config(p)
    p.add_argument("--method", choices=pipeline.KNOWN_METHODS, help="run one method only")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("truth", help="measure ground-truth effectiveness on targets")
    _add_config(p)
    p.add_argument("--metric", default=pipeline.TRUTH_METRIC, help="effectiveness metric")
    p.set_defaults(func=_cmd_truth)

    p = sub.add_parser("evaluate", help="meta-evaluate methods against the truth")
    _add_config(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render the evaluation report")
    _add_config(p)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="all stages in order")
    _add_config(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synthbench", help="generate the synthetic mini-benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_synthbench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataValidationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
