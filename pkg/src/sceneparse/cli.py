"""Command line entry point: ``sceneparse <command> ...``."""
import argparse
import logging
import os
import sys
import time

from sceneparse import __version__, pipeline
from sceneparse.bundle import ModelBundle
from sceneparse.config import Config
from sceneparse.errors import (
    BundleError,
    DegenerateRetrievalError,
    InvalidInputError,
    NoNeighborsError,
    UndefinedMetricError,
)
from sceneparse.imageio import colorize, read_image, write_image, write_mask
from sceneparse.retrieval import write_retrieval_csv
from sceneparse.smoothing import write_energy_trace
from sceneparse.synth import gen_synth

logger = logging.getLogger("sceneparse")

_ERRORS = (InvalidInputError, BundleError, DegenerateRetrievalError, NoNeighborsError, UndefinedMetricError)


def _config(args):
    cfg = Config.load(args.config) if getattr(args, "config", None) else Config()
    if getattr(args, "loo_max_images", None) is not None:
        cfg = cfg.replace(loo_max_images=args.loo_max_images)
    return cfg


def _progress(label):
    def report(done, total):
        if done == total or done % max(1, total // 10) == 0:
            logger.info("%s %d/%d", label, done, total)
    return report


def cmd_train(args):
    t0 = time.perf_counter()
    bundle = pipeline.train(args.data, _config(args), workers=args.workers, progress=_progress("leave-one-out"))
    bundle.save(args.out)
    print(f"trained on {bundle.index.n_images} images, {bundle.index.size} super-pixels, "
          f"{bundle.n_labels} labels in {time.perf_counter() - t0:.1f}s -> {args.out}")


def cmd_parse(args):
    bundle = ModelBundle.load(args.model)
    rgb = read_image(args.image)
    res = pipeline.Parser(bundle).parse(rgb, fixed_k=args.fixed_k, lam=args.lam)
    write_mask(args.out, res.labels)
    if args.color:
        write_image(args.color, colorize(res.labels, bundle.n_labels))
    if args.dump_retrieval:
        write_retrieval_csv(args.dump_retrieval, res.retrieval, bundle.index.image_names)
    if args.trace_energy:
        write_energy_trace(args.trace_energy, res.swap)
    mode = "adaptive" if res.adaptive else "fixed"
    print(f"k={res.k} ({mode}), k_r={res.retrieval.k_r}, energy {res.swap.initial_energy:.4f} -> "
          f"{res.swap.energy:.4f} -> {args.out}")


def cmd_eval(args):
    bundle = ModelBundle.load(args.model)
    result = pipeline.evaluate(args.data, bundle, split=args.split, fixed_k=args.fixed_k, lam=args.lam,
                               workers=args.workers)
    report = result.report
    report.to_json(args.report)
    stem = os.path.splitext(args.report)[0]
    report.write_category_csv(args.categories or stem + "_categories.csv")
    report.write_image_csv(args.images or stem + "_images.csv")
    print(report.to_text())


def cmd_gridsearch(args):
    res = pipeline.grid_search(args.data, args.tau_grid, args.km_grid, _config(args), workers=args.workers,
                               progress=_progress("grid"))
    if args.out:
        res.write_csv(args.out)
    sys.stdout.write(res.to_csv())
    print(f"best tau={res.best_tau:g} k_m={res.best_km} score={res.best_score:.4f}")


def cmd_gen_synth(args):
    path = gen_synth(args.seed, args.count, args.out, test_count=args.test_count)
    print(f"wrote {args.count} images -> {path}")


def build_parser():
    p = argparse.ArgumentParser(prog="sceneparse", description="Nonparametric scene parsing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def workers(sp):
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: $SCENEPARSE_THREADS or CPU count)")

    t = sub.add_parser("train", help="build a model bundle from a dataset")
    t.add_argument("--data", required=True, help="dataset directory or manifest JSON")
    t.add_argument("--out", required=True, help="bundle directory to write")
    t.add_argument("--config", help="JSON configuration file")
    t.add_argument("--loo-max-images", type=int, default=None,
                   help="cap on leave-one-out images for the accuracy table")
    workers(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("parse", help="label one image")
    s.add_argument("--model", required=True, help="bundle directory")
    s.add_argument("--image", required=True)
    s.add_argument("--out", required=True, help="output label mask PNG")
    s.add_argument("--fixed-k", type=int, default=None, help="use this k instead of the adaptive one")
    s.add_argument("--lambda", dest="lam", type=float, default=None, help="smoothing weight")
    s.add_argument("--color", help="also write a colourised PNG")
    s.add_argument("--dump-retrieval", metavar="CSV", help="write the ranked training images")
    s.add_argument("--trace-energy", metavar="CSV", help="write one row per accepted swap move")
    s.set_defaults(func=cmd_parse)

    e = sub.add_parser("eval", help="score a bundle on a dataset split")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True, help="JSON report path")
    e.add_argument("--split", default="test", choices=("train", "test"))
    e.add_argument("--fixed-k", type=int, default=None)
    e.add_argument("--lambda", dest="lam", type=float, default=None)
    e.add_argument("--categories", metavar="CSV", help="per-category CSV (default: next to the report)")
    e.add_argument("--images", metavar="CSV", help="per-image CSV (default: next to the report)")
    workers(e)
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gridsearch", help="choose tau and k_m by leave-one-out accuracy")
    g.add_argument("--data", required=True)
    g.add_argument("--tau-grid", type=float, nargs="+", default=list(pipeline.DEFAULT_TAU_GRID))
    g.add_argument("--km-grid", type=int, nargs="+", default=list(pipeline.DEFAULT_KM_GRID))
    g.add_argument("--config")
    g.add_argument("--loo-max-images", type=int, default=None)
    g.add_argument("--out", metavar="CSV", help="score table CSV")
    workers(g)
    g.set_defaults(func=cmd_gridsearch)

    y = sub.add_parser("gen-synth", help="write a synthetic dataset")
    y.add_argument("--seed", type=int, required=True)
    y.add_argument("--count", type=int, required=True)
    y.add_argument("--out", required=True)
    y.add_argument("--test-count", type=int, default=None, help="images in the test split (default count // 6)")
    y.set_defaults(func=cmd_gen_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
