"""Command line interface: ``shl {train,encode,eval,lsh,segment}``.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .codebook import within_class_distances
from .dataio import (
    load_codes_csv,
    load_csv,
    load_image_ppm,
    load_model,
    load_scribbles_pgm,
    save_codes_csv,
    save_mask_pgm,
    save_model,
)
from .errors import FormatError, InputError, NumericalError
from .evalkit import CodeDatabase, lsh_fit, lsh_encode, pr_curve, topk_precision
from .kernels import parse_specs
from .segment import MAX_TRAIN_PIXELS, segment_image
from .trainer import TrainConfig, encode, resolve_threads, train, transductive_train

log = logging.getLogger("shl")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULT_K = "10,15,20,25,30,35,40,45,50"


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _labels_col(text):
    if text is None or text.lower() == "none":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'none', got {text!r}") from None


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_training_flags(p, bits_default):
    p.add_argument("--bits", type=int, default=bits_default, help="code length B")
    p.add_argument("--lambda1", type=float, default=1000.0, help="SVM cost (default 1000)")
    p.add_argument(
        "--lambda2",
        type=float,
        default=2000.0,
        help="within-class codeword penalty (default 2000; 6000 was used for the larger image sets)",
    )
    p.add_argument("--p", type=float, default=2.0, help="MKL norm, must be > 1 (default 2)")
    p.add_argument(
        "--kernels",
        default="default",
        help="comma separated kernels: linear, poly:DEG:BIAS, gauss:SIGMA, or 'default' "
        "for the 11-kernel bank",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-outer", type=int, default=20, help="outer iteration cap")
    p.add_argument("--tol", type=float, default=1e-4, help="relative loss decrease to stop")
    p.add_argument("--svm-tol", type=float, default=1e-3, help="SMO KKT tolerance")
    p.add_argument("--psd-eta", type=float, default=0.1, help="codeword step length")
    p.add_argument("--psd-iters", type=int, default=50, help="codeword inner iterations")
    p.add_argument("--standardize", action="store_true", help="z-score features before kernels")
    p.add_argument("--threads", type=int, default=1, help="per-bit worker threads (SHL_THREADS overrides)")


def _config_from_args(args, n_classes=None, n_slots=1) -> TrainConfig:
    try:
        config = TrainConfig(
            n_bits=args.bits,
            n_slots=n_slots,
            n_classes=n_classes,
            lambda1=args.lambda1,
            lambda2=args.lambda2,
            p=args.p,
            kernels=parse_specs(args.kernels),
            max_outer=args.max_outer,
            outer_tol=args.tol,
            svm_tol=args.svm_tol,
            psd_eta=args.psd_eta,
            psd_iters=args.psd_iters,
            standardize=args.standardize,
            seed=args.seed,
            threads=resolve_threads(args.threads),
        )
        config.validate()
    except InputError as exc:
        raise UsageError(str(exc)) from None
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a hash model")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--labels-col", type=_labels_col, default=-1,
                   help="label column index (-1 = last, 'none' = unlabeled); label -1 marks unlabeled rows")
    p.add_argument("--unlabeled", help="CSV of unlabeled (test) features for transductive training")
    p.add_argument("--classes", type=int, help="number of classes (inferred from labels if omitted)")
    p.add_argument("--codewords", type=int, default=1, help="codewords per class S")
    _add_training_flags(p, bits_default=8)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("encode", help="hash a data file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels-col", type=_labels_col, default=None,
                   help="label column to strip and append after the code (default: none)")
    p.add_argument("--out", required=True, help="codes CSV")

    p = sub.add_parser("eval", help="top-k precision and PR-over-radius metrics")
    p.add_argument("--queries", required=True, help="query codes CSV with trailing label column")
    p.add_argument("--db", required=True, help="database codes CSV with trailing label column")
    p.add_argument("--k", type=_int_list, default=_int_list(DEFAULT_K), help=f"k values (default {DEFAULT_K})")
    p.add_argument("--exclude-self", action="store_true",
                   help="treat row i of queries and row i of db as the same item and skip that match")
    p.add_argument("--out", required=True, help="metrics CSV")

    p = sub.add_parser("lsh", help="random-projection LSH baseline codes")
    p.add_argument("--data", required=True, help="CSV to encode")
    p.add_argument("--fit", help="CSV whose mean sets the thresholds (default: --data)")
    p.add_argument("--labels-col", type=_labels_col, default=None)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="codes CSV")

    p = sub.add_parser(
        "segment",
        help="foreground/background segmentation from scribbles",
        description="Scribbles are a binary PGM (P5): gray 254 = foreground, 127 = background, "
        "0 = unlabeled. Output mask: 255 = foreground, 0 = background.",
    )
    p.add_argument("--image", required=True, help="binary PPM (P6)")
    p.add_argument("--scribbles", required=True, help="binary PGM (P5)")
    p.add_argument("--max-train", type=int, default=MAX_TRAIN_PIXELS,
                   help="cap on training pixels; unlabeled pixels are subsampled")
    _add_training_flags(p, bits_default=5)
    p.add_argument("--out", required=True, help="output mask PGM")
    return parser


def _write_manifest(path, args, argv, inputs, outputs, started, extra=None):
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "version": __version__,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def cmd_train(args, argv, started):
    config = _config_from_args(args, n_classes=args.classes, n_slots=args.codewords)
    data = load_csv(args.data, args.labels_col)
    inputs = [args.data]
    if args.unlabeled:
        extra = load_csv(args.unlabeled)
        model = transductive_train(config, data, extra.features)
        inputs.append(args.unlabeled)
    else:
        model = train(config, data)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path, trace_path = out / "model.json", out / "trace.csv"
    save_model(model, model_path)
    with open(trace_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "surrogate_loss", "objective"])
        for i, loss in enumerate(model.loss_trace):
            obj = model.objective_trace[i - 1] if i > 0 else ""
            w.writerow([i, repr(float(loss)), obj if obj == "" else repr(float(obj))])
    extra = {
        "resolved_config": model.config.to_dict(),
        "threads": config.threads,
        "iterations": model.info.get("iterations"),
        "stop": model.info.get("stop"),
        "final_loss": model.loss_trace[-1],
    }
    if model.codebook.n_slots > 1:
        extra["within_class_codeword_distances"] = within_class_distances(model.codebook).tolist()
    _write_manifest(out / "manifest.json", args, argv, inputs, [model_path, trace_path], started, extra)
    log.info("trained %d bits in %d iterations (%s)", model.n_bits, model.info["iterations"], model.info["stop"])


def cmd_encode(args, argv, started):
    model = load_model(args.model)
    data = load_csv(args.data, args.labels_col)
    codes = encode(model, data.features)
    labels = data.labels if args.labels_col is not None else None
    save_codes_csv(codes, args.out, labels)
    _write_manifest(f"{args.out}.manifest.json", args, argv, [args.model, args.data], [args.out], started)


def cmd_eval(args, argv, started):
    qc, ql = load_codes_csv(args.queries)
    dc, dl = load_codes_csv(args.db)
    if qc.shape[1] != dc.shape[1]:
        raise InputError("query and database code lengths differ")
    ids_q = ids_d = None
    if args.exclude_self:
        ids_q, ids_d = np.arange(len(ql)), np.arange(len(dl))
    queries, db = CodeDatabase(qc, ql, ids_q), CodeDatabase(dc, dl, ids_d)
    limit = len(db) - (1 if args.exclude_self and len(queries) <= len(db) else 0)
    for k in args.k:
        if not 1 <= k <= limit:
            raise InputError(f"k={k} is outside [1, {limit}] for a database of {len(db)} codes")
    rows = [("topk", k, topk_precision(queries, db, k, args.exclude_self), "") for k in args.k]
    rows += [
        ("pr", pt.radius, pt.precision, pt.recall)
        for pt in pr_curve(queries, db, args.exclude_self, on_missing="skip")
    ]
    relevant = (ql[:, None] == dl[None, :])
    if args.exclude_self:
        relevant &= ids_q[:, None] != ids_d[None, :]
    orphans = int(np.sum(~relevant.any(axis=1)))
    if orphans:
        log.warning("%d queries have no relevant database item; they are left out of recall", orphans)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "k_or_radius", "precision", "recall"])
        for kind, param, prec, rec in rows:
            rec = "" if rec == "" or np.isnan(rec) else repr(rec)
            w.writerow([kind, param, "" if np.isnan(prec) else repr(prec), rec])
    _write_manifest(
        f"{args.out}.manifest.json", args, argv, [args.queries, args.db], [args.out], started,
        {"queries_without_relevant_items": orphans},
    )


def cmd_lsh(args, argv, started):
    if args.bits < 1:
        raise UsageError("--bits must be >= 1")
    data = load_csv(args.data, args.labels_col)
    fit = load_csv(args.fit) if args.fit else data
    if fit.dim != data.dim:
        raise InputError(f"--fit has dimension {fit.dim}, --data has {data.dim}")
    model = lsh_fit(fit.features, args.bits, args.seed)
    codes = lsh_encode(model, data.features)
    labels = data.labels if args.labels_col is not None else None
    save_codes_csv(codes, args.out, labels)
    inputs = [args.data] + ([args.fit] if args.fit else [])
    _write_manifest(f"{args.out}.manifest.json", args, argv, inputs, [args.out], started)


def cmd_segment(args, argv, started):
    config = _config_from_args(args)
    image = load_image_ppm(args.image)
    scribbles = load_scribbles_pgm(args.scribbles)
    if scribbles.shape != image.shape[:2]:
        raise InputError(f"scribbles {scribbles.shape} do not match image {image.shape[:2]}")
    if not (np.any(scribbles == 0) and np.any(scribbles == 1)):
        raise UsageError("the scribble file must mark both foreground (254) and background (127)")
    mask, _ = segment_image(image, scribbles, config, max_train=args.max_train)
    save_mask_pgm(mask, args.out)
    _write_manifest(f"{args.out}.manifest.json", args, argv, [args.image, args.scribbles], [args.out], started)


COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "eval": cmd_eval,
    "lsh": cmd_lsh,
    "segment": cmd_segment,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = time.perf_counter()
    try:
        COMMANDS[args.command](args, argv, started)
    except UsageError as exc:
        parser.error(str(exc))
    except (InputError, FormatError, OSError) as exc:
        print(f"shl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"shl {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
