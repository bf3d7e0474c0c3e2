"""Command-line entry point: ``mpcorr run | verify | list-experiments``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, MpCorrError
from .experiments import EXPERIMENTS, load_config, manifest_text, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mpcorr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path)
    verify = sub.add_parser("verify", help="run the acceptance criteria")
    verify.add_argument("--suite", choices=("fast", "full"), default="fast")
    sub.add_parser("list-experiments", help="list experiment names and parameters")
    return parser


def cmd_run(args) -> int:
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        doc = load_config(text)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed: expected a non-negative integer")
        out = args.out or (Path(doc["output_dir"]) if doc.get("output_dir") else None)
        if out is None:
            raise ConfigError("output_dir: required (config field or --out)")
        params, seed, result = run_experiment(doc, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MpCorrError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out.mkdir(parents=True, exist_ok=True)
    files = dict(result.files)
    files["summary.txt"] = result.summary + "\n"
    files["manifest.json"] = manifest_text(doc, params, seed, files)
    for name, content in files.items():
        (out / name).write_text(content, encoding="utf-8", newline="\n")
    print(result.summary)
    return EXIT_OK if result.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    from .acceptance import run_suite
    results = run_suite(args.suite)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_list(args) -> int:
    for name, exp in EXPERIMENTS.items():
        params = ", ".join(f"{k}={json.dumps(v.default)}" for k, v in exp.params.items())
        print(f"{name}: {exp.description}\n    {params}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "verify": cmd_verify, "list-experiments": cmd_list}[args.command]
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
