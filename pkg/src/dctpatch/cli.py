"""Command-line entry point: prepare, train, eval, bench, figures.

Exit codes: 0 success, 2 usage or missing input, 3 malformed data.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import figures, nn, training
from .bench import check_equivalence, run_bench, write_reports_csv
from .dataset import (DEFAULT_TAU, FormatError, load_cache, load_mnist, make_pixel_dataset,
                      pixel_to_dct_dataset, save_cache, zeroed_fraction)
from .models import LeNet, build_model, model_from_weights

log = logging.getLogger("dctpatch")

EXIT_USAGE = 2
EXIT_FORMAT = 3

MODEL_DOMAIN = {"lenet": "pixel", "dct_mlp": "dct"}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def cache_name(split: str, domain: str) -> str:
    return f"{split}_{domain}.dctc"


def _load(path, what):
    path = Path(path)
    if not path.is_file():
        raise CliError(f"{what} not found: {path}")
    return load_cache(path)


def cmd_prepare(args):
    mnist_dir = args.mnist_dir or os.environ.get("MNIST_DIR")
    if mnist_dir is None:
        raise CliError("pass --mnist-dir or set MNIST_DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    domains = ["pixel", "dct"] if args.domain == "both" else [args.domain]
    for split in ("train", "test"):
        try:
            raw = load_mnist(mnist_dir, split)
        except FileNotFoundError as exc:
            raise CliError(f"missing MNIST file: {exc.filename or exc}") from exc
        pixels = make_pixel_dataset(raw)
        for domain in domains:
            ds = pixels if domain == "pixel" else pixel_to_dct_dataset(pixels, args.tau)
            path = out / cache_name(split, domain)
            save_cache(ds, path)
            print(f"{split:5s} {domain:5s} samples={len(ds)} threshold={ds.threshold:g} "
                  f"zeroed_fraction={zeroed_fraction(ds):.6f} -> {path}")
    return 0


def _train_config(args) -> training.TrainConfig:
    overrides = {"seed": args.seed, "tau": args.tau}
    for flag, key in [("phase1_batches", "phase1_batches"), ("phase3_batches", "phase3_batches"),
                      ("hard_sweeps", "hard_pass_sweeps"), ("lr1", "phase1_lr"), ("lr3", "phase3_lr"),
                      ("momentum", "phase3_momentum"), ("batch_size", "batch_size"),
                      ("augment_domain", "augment_domain")]:
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.no_augment:
        overrides["augment"] = False
    return training.preset(args.preset, args.model, **overrides)


def cmd_train(args):
    kind = args.model
    domain = MODEL_DOMAIN[kind]
    data = Path(args.data)
    train_set = _load(args.train_cache or data / cache_name("train", domain), "training cache")
    test_path = Path(args.test_cache or data / cache_name("test", domain))
    if train_set.domain != domain and not args.allow_domain_mismatch:
        raise CliError(f"{kind} expects {domain}-domain inputs but the cache holds {train_set.domain}; "
                       "pass --allow-domain-mismatch to override")
    if train_set.domain == "dct" and abs(train_set.threshold - float(args.tau)) > 1e-6:
        raise CliError(f"cache threshold {train_set.threshold:g} does not match --tau {args.tau:g}")
    cfg = _train_config(args)

    pixel_source = None
    if cfg.augment and train_set.domain == "dct" and cfg.augment_domain == "pixel" and cfg.phase3_batches:
        pixel_source = _load(args.pixel_cache or data / cache_name("train", "pixel"),
                             "pixel-domain training cache (needed for shift augmentation)")

    model = build_model(kind, seed=cfg.seed)
    if args.checkpoint_dir:
        Path(args.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    log.info("training %s: %s", kind, cfg)
    result = training.train(model, train_set, cfg, pixel_source, args.checkpoint_dir)
    nn.save_weights(model.params(), args.out)
    print(f"weights -> {args.out} ({result.hard_updates} hard-example updates)")
    if args.loss_csv:
        training.write_loss_csv(result.loss_trace, args.loss_csv)
    if test_path.is_file():
        res = training.evaluate(model, load_cache(test_path))
        print(f"accuracy: {res.accuracy:.2f}")
    return 0


def cmd_eval(args):
    try:
        arrays = nn.load_weights(args.weights)
    except FileNotFoundError as exc:
        raise CliError(f"checkpoint not found: {args.weights}") from exc
    model = model_from_weights(arrays)
    test = _load(args.cache, "evaluation cache")
    if test.domain != MODEL_DOMAIN[model.kind] and not args.allow_domain_mismatch:
        raise CliError(f"{model.kind} checkpoint expects {MODEL_DOMAIN[model.kind]} inputs, "
                       f"cache holds {test.domain}")
    res = training.evaluate(model, test)
    print(f"accuracy: {res.accuracy:.2f}")
    if args.misclassified:
        with open(args.misclassified, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "true", "predicted"])
            writer.writerows(res.misclassified)
    return 0


def cmd_bench(args):
    if args.iters < 1:
        raise CliError("--iters must be >= 1")
    reports = []
    for n in args.n:
        gap = check_equivalence(n)
        report = run_bench(n, args.iters, args.warmup)
        reports.append(report)
        print(f"n={n:3d} dense_mults={report.dense_mults:>12,d} separable_mults={report.separable_mults:>9,d} "
              f"theory={report.theoretical_speedup:6.1f}x dense={report.dense_ns / 1e3:10.2f}us "
              f"separable={report.separable_ns / 1e3:8.2f}us speedup={report.speedup:6.1f}x "
              f"kron_check={gap:.1e} [{report.backend}]")
    if args.csv:
        write_reports_csv(reports, args.csv)
    return 0


def cmd_figures(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    which = figures.FIGURES if args.which == "all" else (args.which,)
    written = []
    patches = None
    if any(w != "basis" and w != "kernels" for w in which):
        ds = _load(args.cache or Path(args.data) / cache_name("test", "pixel"), "pixel-domain cache")
        if ds.domain != "pixel":
            raise CliError("figures need a pixel-domain cache")
        patches = ds.inputs.astype("float64")
        sample = patches[args.sample]
    for w in which:
        if w == "dctgrid":
            written += figures.fig_dctgrid(patches, out)
        elif w == "zigzag":
            written += figures.fig_zigzag(sample, out)
        elif w == "recon":
            written += figures.fig_recon(sample, out, args.taus or figures.DEFAULT_RECON_TAUS)
        elif w == "counts":
            written += figures.fig_counts(sample, out)
        elif w == "basis":
            written += figures.fig_basis(out)
        elif w == "kernels":
            if not args.weights:
                raise CliError("kernels figure needs --weights of a LeNet checkpoint")
            model = model_from_weights(nn.load_weights(args.weights))
            if not isinstance(model, LeNet):
                raise CliError("kernels figure needs a LeNet checkpoint")
            written += figures.fig_kernels(model, out)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dctpatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build pixel/DCT caches from MNIST IDX files")
    p.add_argument("--mnist-dir", help="directory with the IDX files (default: $MNIST_DIR)")
    p.add_argument("--out", default="data", help="output directory for caches")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--domain", choices=["pixel", "dct", "both"], default="both")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run the three-phase regimen")
    p.add_argument("--model", type=lambda s: s.replace("-", "_"), choices=list(MODEL_DOMAIN), required=True)
    p.add_argument("--data", default="data", help="directory holding caches from `prepare`")
    p.add_argument("--train-cache")
    p.add_argument("--test-cache")
    p.add_argument("--pixel-cache", help="pixel-domain training cache used for shifting DCT inputs")
    p.add_argument("--preset", choices=["desk", "paper"], default="desk")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--phase1-batches", type=int)
    p.add_argument("--phase3-batches", type=int)
    p.add_argument("--hard-sweeps", type=int)
    p.add_argument("--lr1", type=float)
    p.add_argument("--lr3", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--augment-domain", choices=["pixel", "coefficient"])
    p.add_argument("--allow-domain-mismatch", action="store_true")
    p.add_argument("--checkpoint-dir", help="write a checkpoint after each phase")
    p.add_argument("--loss-csv")
    p.add_argument("--out", default="weights.nnwt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a cache")
    p.add_argument("--weights", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--misclassified", help="CSV of (index, true, predicted)")
    p.add_argument("--allow-domain-mismatch", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="dense vs separable projection timing")
    p.add_argument("--n", type=int, nargs="+", default=[32])
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("figures", help="emit figure data (PGM images, CSV tables)")
    p.add_argument("which", choices=list(figures.FIGURES) + ["all"])
    p.add_argument("--data", default="data")
    p.add_argument("--cache", help="pixel-domain cache (default: <data>/test_pixel.dctc)")
    p.add_argument("--weights", help="LeNet checkpoint for the kernels figure")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--taus", type=float, nargs="+")
    p.add_argument("--out", default="figures")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, nn.CheckpointError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
