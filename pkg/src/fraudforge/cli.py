"""``forge`` command line: preprocess | oversample | train-eval | compare.

Exit codes: 0 success, 1 partial grid failure, 2 usage, IO or data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .classifiers import CLASSIFIERS
from .config import ExperimentConfig, load_config
from .errors import ForgeError
from .oversample import METHODS

EXIT_OK, EXIT_PARTIAL, EXIT_ERROR = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override seeds with a single seed")
        p.add_argument("--out", default=None, help="override out_dir")
        return p

    common(sub.add_parser("preprocess", help="clean, split and normalize the dataset"))
    p = common(sub.add_parser("oversample", help="train one oversampler and write synthetic rows"))
    p.add_argument("--method", required=True, choices=[m for m in METHODS if m != "original"])
    p = common(sub.add_parser("train-eval", help="train one classifier and score the test split"))
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--classifier", required=True, choices=CLASSIFIERS)
    common(sub.add_parser("compare", help="run the full method x classifier x seed grid"))
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.out is not None:
        cfg.out_dir = str(Path(args.out).resolve())
    return cfg.validate()


def run(args) -> int:
    cfg = _config(args)
    if args.command == "preprocess":
        counts = pipeline.cmd_preprocess(cfg)
        print(json.dumps({k: counts[k] for k in ("train", "test")}, sort_keys=True))
        return EXIT_OK
    if args.command == "oversample":
        path = pipeline.cmd_oversample(cfg, args.method, cfg.seeds[0])
        print(path / "synthetic.csv")
        return EXIT_OK
    if args.command == "train-eval":
        rep = pipeline.cmd_train_eval(cfg, args.method, args.classifier, cfg.seeds[0])
        print(rep.to_json())
        return EXIT_OK
    grid = pipeline.cmd_compare(cfg)
    print(Path(cfg.out_dir) / "summary.md")
    for f in grid.failures:
        print(f"FAILED {f['method']} x {f['classifier']} seed {f['seed']}: {f['error']}", file=sys.stderr)
    return EXIT_PARTIAL if grid.failures else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ForgeError, OSError, ValueError) as exc:
        print(f"forge {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
