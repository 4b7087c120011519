"""Command line interface: ``mpgk {gram,embed,classify,features}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigurationError, FormatError, MPGKError, ParameterError
from .evaluation import DEFAULT_C_GRID, cross_validate
from .graph import BASE_KERNELS, VARIANTS, GraphDataset, KernelParams, make_barbell, validate
from .graph_kernel import compute_grams, graph_nystrom_features
from .io import (load_tu_dataset, two_class_dataset, write_coordinates, write_features, write_gram,
                 write_precomputed)
from .linalg import kernel_pca
from .vertex_kernel import run_message_passing

log = logging.getLogger("mpgk")


class UsageError(MPGKError):
    pass


@contextmanager
def phase(name):
    t0 = time.perf_counter()
    yield
    log.info("%s: %.3fs", name, time.perf_counter() - t0)


def _add_dataset_args(p, barbell=False):
    g = p.add_argument_group("input")
    g.add_argument("--dataset", help="TU dataset name (files {name}_A.txt, ...)")
    g.add_argument("--data-dir", default=".", help="directory holding the dataset files or a {name}/ subdirectory")
    g.add_argument("--synthetic", type=int, metavar="N", help="use a generated two-class dataset of N graphs")
    g.add_argument("--standardize", action="store_true", help="standardize vertex attributes per dimension")
    if barbell:
        g.add_argument("--barbell", type=int, nargs=2, metavar=("H", "K"), help="embed the barbell graph B(H, K)")


def _add_kernel_args(p, iterations=4):
    g = p.add_argument_group("kernel")
    g.add_argument("--variant", default="RR", type=str.upper, choices=VARIANTS)
    g.add_argument("--T", "--iterations", dest="iterations", type=int, default=iterations)
    g.add_argument("--alpha", type=float, default=0.8)
    g.add_argument("--beta", type=float, default=0.2)
    g.add_argument("--base-kernel", choices=BASE_KERNELS)
    g.add_argument("--exact", action="store_true", help="force exact vertex kernels")
    g.add_argument("--landmarks", type=int, help="Nyström landmark count (default 200)")
    g.add_argument("--exact-threshold", type=int, default=4000,
                   help="datasets with at most this many vertices are computed exactly")
    g.add_argument("--depth", type=int, default=4, help="hierarchy depth")
    g.add_argument("--branching", type=int, default=4, help="hierarchy branching factor")
    g.add_argument("--kmeans-iter", type=int, default=50)
    g.add_argument("--normalize", action="store_true", help="cosine-normalize graph Grams")


def _default_threads() -> int:
    try:
        return int(os.environ.get("MPGK_THREADS", "1"))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker cap for kernel and CV phases (env MPGK_THREADS)")
    common.add_argument("-o", "--output", default=".", help="output directory")
    parser = argparse.ArgumentParser(prog="mpgk", description="Message passing graph kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gram", parents=[common], help="write one graph Gram CSV per iteration")
    _add_dataset_args(p)
    _add_kernel_args(p)
    p.add_argument("--t", type=int, dest="only_t", help="write only iteration t")
    p.add_argument("--precomputed", action="store_true",
                   help="also write each Gram in precomputed-kernel SVM text form (.txt)")

    p = sub.add_parser("embed", parents=[common], help="kernel PCA embedding of vertices")
    _add_dataset_args(p, barbell=True)
    _add_kernel_args(p, iterations=5)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--uncentered", action="store_true", help="skip kernel centering")

    p = sub.add_parser("classify", parents=[common], help="repeated nested cross-validation with an SVM")
    _add_dataset_args(p)
    _add_kernel_args(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--C-grid", type=float, nargs="+", default=list(DEFAULT_C_GRID))
    p.add_argument("--svm-scaling", choices=("mean_diag", "none"), default="mean_diag")

    p = sub.add_parser("features", parents=[common], help="graph-level Nyström features, concatenated over iterations")
    _add_dataset_args(p)
    _add_kernel_args(p)
    p.add_argument("--graph-landmarks", type=int, default=200)
    return parser


def load_input(args) -> GraphDataset:
    if getattr(args, "barbell", None):
        h, k = args.barbell
        g = make_barbell(h, k)
        return GraphDataset((g,), np.zeros(1, dtype=np.int64), (0,), f"barbell_{h}_{k}")
    if args.synthetic is not None:
        if args.synthetic < 2:
            raise UsageError("--synthetic needs at least 2 graphs")
        return two_class_dataset(args.synthetic, seed=args.seed)
    if not args.dataset:
        raise UsageError("no input: give --dataset, --synthetic" + (" or --barbell" if hasattr(args, "barbell") else ""))
    try:
        ds = load_tu_dataset(args.data_dir, args.dataset, standardize=args.standardize)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None
    problems = validate(ds)
    if problems:
        raise UsageError(f"invalid dataset: {problems[0]}")
    return ds


def kernel_params(args, exact_default=False) -> KernelParams:
    exact = args.exact or (exact_default and args.landmarks is None)
    landmarks = None if exact else (args.landmarks or 200)
    threshold = args.exact_threshold
    if exact_default and args.landmarks is not None and not args.exact:
        threshold = 0  # an explicit landmark count asks for Nyström
    try:
        return KernelParams(
            alpha=args.alpha, beta=args.beta, iterations=args.iterations, variant=args.variant,
            base_kernel=args.base_kernel, landmarks=landmarks,
            hierarchy_depth=args.depth, hierarchy_branching=args.branching, kmeans_iter=args.kmeans_iter,
            seed=args.seed, normalize=args.normalize, exact_threshold=threshold,
        )
    except ParameterError as e:
        raise UsageError(str(e)) from None


def cmd_gram(args) -> int:
    ds = load_input(args)
    params = kernel_params(args)
    with phase("kernel"):
        grams = compute_grams(ds, params)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    ids = [f"g{i}" for i in range(len(ds))]
    for g in grams:
        if args.only_t is not None and g.iteration != args.only_t:
            continue
        path = out / f"mpgk_{params.variant.lower()}_t{g.iteration}_{g.mode}.csv"
        write_gram(g.values, ids, path)
        if args.precomputed:
            write_precomputed(g.values, ds.targets, path.with_suffix(".txt"))
        log.info("wrote %s", path)
    return 0


def cmd_embed(args) -> int:
    if args.dims < 1:
        raise UsageError("--dims must be >= 1")
    ds = load_input(args)
    if args.base_kernel is None:
        args.base_kernel = "degree"
    params = kernel_params(args, exact_default=True)
    if not params.use_exact(ds.n_total) and args.dims > params.landmarks:
        raise UsageError(f"--dims {args.dims} exceeds the {params.landmarks} Nyström landmarks")
    if args.dims > ds.n_total:
        raise UsageError(f"--dims {args.dims} exceeds the {ds.n_total} vertices")
    with phase("kernel"):
        state = run_message_passing(ds, params)[-1]
    with phase("kernel pca"):
        coords = kernel_pca(state.matrix(), args.dims, center=not args.uncentered)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_coordinates(coords, ds, out / "embedding.csv")
    return 0


def cmd_classify(args) -> int:
    ds = load_input(args)
    if not ds.is_classification:
        raise UsageError("classify needs class labels, the dataset has regression targets")
    if ds.n_classes < 2:
        raise UsageError("need >= 2 classes")
    params = kernel_params(args)
    with phase("kernel"):
        grams = compute_grams(ds, params)
    with phase("cv"):
        try:
            report = cross_validate(grams, ds.targets, folds=args.folds, repeats=args.repeats,
                                    C_grid=args.C_grid, seed=args.seed, n_jobs=args.threads,
                                    scaling=args.svm_scaling)
        except ParameterError as e:
            raise UsageError(str(e)) from None
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / f"cv_{params.variant.lower()}_{grams[0].mode}.csv")
    print(f"{ds.name} MPGK {params.variant}: {100 * report.mean_accuracy:.2f} (+- {100 * report.std_accuracy:.2f})")
    return 0


def cmd_features(args) -> int:
    ds = load_input(args)
    if not 1 <= args.graph_landmarks <= len(ds):
        raise UsageError(f"--graph-landmarks must be in [1, {len(ds)}]")
    params = kernel_params(args)
    with phase("kernel"):
        states = run_message_passing(ds, params)
    with phase("graph nystrom"):
        blocks = graph_nystrom_features(ds, states, args.graph_landmarks, params)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_features(np.hstack(blocks), out / f"features_{params.variant.lower()}.csv", targets=ds.targets)
    return 0


COMMANDS = {"gram": cmd_gram, "embed": cmd_embed, "classify": cmd_classify, "features": cmd_features}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if args.threads < 1:
        print("mpgk: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        with threadpool_limits(args.threads):
            return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, FormatError, ParameterError) as e:
        print(f"mpgk: error: {e}", file=sys.stderr)
        return 2
    except (MPGKError, ArithmeticError, ValueError, OSError) as e:
        print(f"mpgk: failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
