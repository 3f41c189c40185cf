"""Command-line entry point: ``deepsearch-data <stage> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 missing upstream artifact,
4 backend failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import pipeline
from .config import ConfigError, load_config
from .gateways import CacheMissError, GatewayError

EXIT_OK, EXIT_CONFIG, EXIT_DEPENDENCY, EXIT_BACKEND = 0, 2, 3, 4
STAGES = ("annotate", "sample", "synthesize", "curate", "export-sft", "export-dpo", "reward", "eval", "stats")
NEEDS_BACKENDS = {"annotate", "synthesize"}

logger = logging.getLogger("deepsearch_data")


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(raw) if raw else None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--out", help="output directory (overrides paths.output_dir)")
    common.add_argument("--corpus", help="QA corpus path (overrides paths.corpus)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. loop.max_turns=12")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--mock", action="store_const", dest="mode", const="mock",
                      help="offline heuristic backends (default)")
    mode.add_argument("--replay", metavar="DIR", help="serve LLM and search calls from a recorded archive")
    mode.add_argument("--live", action="store_const", dest="mode", const="live", help="call real endpoints")
    common.add_argument("--record", metavar="DIR", help="record mock-mode exchanges into an archive")
    common.add_argument("--force", action="store_true", help="rerun even if outputs are up to date")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="deepsearch-data",
                                     description="Deep-search training data pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, parents=[common])
        if name == "sample":
            p.add_argument("--n", type=int, help="number of queries to select")
        if name in ("reward", "eval", "stats"):
            p.add_argument("--input", help="trajectory JSONL (default: <out>/trajectories.jsonl)")
        if name == "eval":
            p.add_argument("--metrics", default="f1,stages,stats",
                           help="comma-separated subset of f1,judge,stages,stats")
        if name == "export-dpo":
            p.add_argument("--strong", required=True, help="strong-model trajectory JSONL")
            p.add_argument("--weak", required=True, help="weak-model trajectory JSONL")
    return parser


def run(args: argparse.Namespace) -> pipeline.StageResult:
    overrides = _parse_set(args.set)
    if args.out:
        overrides["paths.output_dir"] = args.out
    if args.corpus:
        overrides["paths.corpus"] = args.corpus
    cfg = load_config(args.config, overrides=overrides)
    out = Path(cfg.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    mode = "replay" if args.replay else (args.mode or "mock")
    backends = None
    if args.command in NEEDS_BACKENDS or (args.command == "eval" and "judge" in args.metrics):
        from .backends import build_backends

        backends = build_backends(cfg, mode, replay_dir=args.replay, record_dir=args.record)

    cmd = args.command
    if cmd == "annotate":
        return pipeline.annotate(cfg, backends, out, args.force)
    if cmd == "sample":
        return pipeline.sample(cfg, out, args.n, args.force)
    if cmd == "synthesize":
        return pipeline.synthesize(cfg, backends, out, args.force)
    if cmd == "curate":
        return pipeline.curate_stage(cfg, out, args.force)
    if cmd == "export-sft":
        return pipeline.export_sft(cfg, out, args.force)
    if cmd == "export-dpo":
        return pipeline.export_dpo(cfg, out, Path(args.strong), Path(args.weak), args.force)
    if cmd == "reward":
        return pipeline.reward(cfg, out, args.input, args.force)
    if cmd == "eval":
        metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
        return pipeline.eval_stage(cfg, out, backends, metrics, args.input, args.force)
    return pipeline.stats(cfg, out, args.input, args.force)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pipeline.DependencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (pipeline.BackendFailure, GatewayError, CacheMissError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    if result.skipped:
        print(f"{result.stage}: up to date (use --force to rerun)")
    else:
        detail = ", ".join(f"{k}={v}" for k, v in (result.summary or {}).items() if not isinstance(v, dict))
        print(f"{result.stage}: wrote {len(result.outputs)} file(s)" + (f" [{detail}]" if detail else ""))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
