"""Command line entry point: ``scedae run|gen|eval``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .datasets import GENERATORS, LIFT_KINDS, lift_dataset, save_binary, save_csv
from .experiment import run
from .metrics import accuracy, ari, nmi

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def load_labels(path) -> np.ndarray:
    """Integer labels from a CSV: the ``label`` column if present, otherwise the
    single column (an optional non-numeric header line is skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no labels")
    header = [c.strip() for c in rows[0]]
    col = 0
    if "label" in header:
        col = header.index("label")
        rows = rows[1:]
    elif len(header) == 1:
        try:
            int(header[0])
        except ValueError:
            rows = rows[1:]
    else:
        raise ValueError(f"{path}: expected a 'label' column or a single column of labels")
    out = []
    for lineno, r in enumerate(rows, start=2):
        try:
            out.append(int(r[col]))
        except (ValueError, IndexError):
            raise ValueError(f"{path}: row {lineno}: not an integer label") from None
    return np.asarray(out, dtype=np.int64)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output:
        cfg = cfg.model_copy(update={"output": args.output})
    try:
        report = run(cfg, n_jobs=args.jobs)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if cfg.output:
        report.write(cfg.output)
    else:
        sys.stdout.write(report.to_json())
    for f in report.failures:
        print(f"replicate {f['replicate']} failed: {f['error']}", file=sys.stderr)
    return EXIT_RUNTIME if report.failures else EXIT_OK


def cmd_gen(args) -> int:
    ds = GENERATORS[args.dataset](args.seed)
    if args.lift != "none":
        ds = lift_dataset(ds, args.lift, args.seed if args.lift_seed is None else args.lift_seed)
    out = Path(args.out)
    if out.suffix.lower() == ".csv":
        save_csv(ds, out)
    else:
        save_binary(ds, out)
    print(f"wrote {ds.name}: {ds.n}x{ds.d}, k={ds.k_true} -> {out}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        pred = load_labels(args.pred)
        truth = load_labels(args.truth)
        scores = {"acc": accuracy(pred, truth), "nmi": nmi(pred, truth), "ari": ari(pred, truth)}
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(scores, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scedae", description="Spectral clustering over an ensemble of autoencoder encodings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="report path (overrides the config's 'output')")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for autoencoder training")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="write a synthetic dataset (.bin, or .csv by suffix)")
    p.add_argument("--dataset", required=True, choices=sorted(GENERATORS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lift", default="none", choices=("none",) + LIFT_KINDS)
    p.add_argument("--lift-seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
