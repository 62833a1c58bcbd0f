"""Command-line pipeline: simulate, transform, train, predict, cv, dissim,
cluster, cer, and the replication harness.

Every subcommand writes its outputs plus a ``manifest.json`` into
``--out-dir``; the manifest records the resolved options, the seed, SHA-256
digests of the input files, the tool version, and wall time, so a run can
be reproduced from the manifest alone. Exit codes: 0 success, 2 for usage
or validation problems, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import cer, cer_sweep, complete_linkage, cut_tree, write_newick
from .count_matrix import (
    Partition,
    format_number,
    read_count_matrix,
    read_labels,
    read_partition,
    read_two_column_tsv,
    write_count_matrix,
    write_labels,
    write_partition,
)
from .dissimilarity import (
    feature_dissimilarity_matrix,
    poisson_dissimilarity_matrix,
    read_dissimilarity,
    sq_euclidean_dissimilarity_matrix,
    write_dissimilarity,
)
from .errors import PoiskitError, ValidationError
from .plda import (
    cross_validate,
    fit,
    predict_matrix,
    read_model,
    write_model,
)
from .replicate import replicate_classification, replicate_clustering
from .simulate import SimulationConfig, simulate, write_truth
from .size_factors import canonical_method, write_size_factors
from .transform import find_alpha


def _default_threads() -> int:
    env = os.environ.get("POISKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"POISKIT_THREADS must be an integer, got '{env}'")
    return os.cpu_count() or 1


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def _write_manifest(out_dir: Path, args, inputs: list[Path], started: float, extra=None):
    options = {
        key: (str(val) if isinstance(val, Path) else val)
        for key, val in vars(args).items()
        if key not in ("func",)
    }
    manifest = {
        "tool": "poiskit",
        "version": __version__,
        "subcommand": args.subcommand,
        "options": options,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "wall_time_seconds": time.perf_counter() - started,
    }
    if extra:
        manifest.update(extra)
    _write_json(out_dir / "manifest.json", manifest)


def _read_counts(args):
    return read_count_matrix(args.counts, orientation=args.orientation)


def cmd_simulate(args, out_dir: Path):
    config = SimulationConfig(
        n=args.n, p=args.p, K=args.k, phi=args.phi, sigma=args.sigma,
        de_prob=args.de_prob, seed=args.seed,
    )
    dataset = simulate(config)
    write_count_matrix(dataset.data.matrix, out_dir / "counts.tsv")
    write_labels(out_dir / "labels.tsv", dataset.data)
    write_truth(out_dir / "truth.json", dataset)
    return [], {"outputs": ["counts.tsv", "labels.tsv", "truth.json"]}


def cmd_transform(args, out_dir: Path):
    matrix = _read_counts(args)
    result = find_alpha(matrix)
    write_count_matrix(result.matrix, out_dir / "transformed.tsv")
    report = {
        "alpha": result.alpha,
        "statistic": result.statistic,
        "target": result.target,
        "converged": result.converged,
    }
    _write_json(out_dir / "transform.json", report)
    print(json.dumps(report))
    return [Path(args.counts)], {"transform": report}


def cmd_train(args, out_dir: Path):
    matrix = _read_counts(args)
    data = read_labels(args.labels, matrix)
    model = fit(
        data,
        method=args.size_factors,
        rho=args.rho,
        beta=args.beta,
        prior_mode=args.priors,
        transform=args.transform == "on",
    )
    write_model(model, out_dir / "model.json")
    write_size_factors(
        out_dir / "size_factors.tsv", matrix.sample_ids, model.size_factors
    )
    return [Path(args.counts), Path(args.labels)], {
        "alpha": model.alpha,
        "nonzero_features": model.nonzero_features(),
        "outputs": ["model.json", "size_factors.tsv"],
    }


def cmd_predict(args, out_dir: Path):
    model = read_model(args.model)
    matrix = _read_counts(args)
    predictions = predict_matrix(model, matrix)
    with open(out_dir / "predictions.tsv", "w", encoding="utf-8") as handle:
        header = ["id", "class"] + [f"posterior_{c}" for c in model.class_names]
        handle.write("\t".join(header) + "\n")
        for sid, pred in zip(matrix.sample_ids, predictions):
            cells = [sid, model.class_names[pred.class_index - 1]]
            cells += [format_number(v) for v in pred.posterior]
            handle.write("\t".join(cells) + "\n")
    inputs = [Path(args.model), Path(args.counts)]
    extra = {"outputs": ["predictions.tsv"]}
    if args.labels:
        by_id = dict(read_two_column_tsv(args.labels))
        index_of = {name: k + 1 for k, name in enumerate(model.class_names)}
        truth = []
        for sid in matrix.sample_ids:
            if sid not in by_id:
                raise ValidationError(f"no label for sample '{sid}'")
            if by_id[sid] not in index_of:
                raise ValidationError(f"unknown class '{by_id[sid]}' in labels")
            truth.append(index_of[by_id[sid]])
        predicted = np.array([p.class_index for p in predictions])
        extra["errors"] = int((predicted != np.array(truth)).sum())
        extra["n"] = matrix.n
        inputs.append(Path(args.labels))
    return inputs, extra


def cmd_cv(args, out_dir: Path):
    matrix = _read_counts(args)
    data = read_labels(args.labels, matrix)
    grid = None
    if args.rho_grid:
        try:
            grid = [float(tok) for tok in args.rho_grid.split(",") if tok != ""]
        except ValueError:
            raise ValidationError(f"bad --rho-grid '{args.rho_grid}'")
    result = cross_validate(
        data,
        method=args.size_factors,
        rho_grid=grid,
        folds=args.folds,
        seed=args.seed,
        prior_mode=args.priors,
        transform=args.transform == "on",
        beta=args.beta,
    )
    _write_json(out_dir / "cv.json", result.to_json())
    model = fit(
        data,
        method=args.size_factors,
        rho=result.selected_rho,
        beta=args.beta,
        prior_mode=args.priors,
        transform=args.transform == "on",
    )
    write_model(model, out_dir / "model.json")
    return [Path(args.counts), Path(args.labels)], {
        "selected_rho": result.selected_rho,
        "outputs": ["cv.json", "model.json"],
    }


def cmd_dissim(args, out_dir: Path):
    matrix = _read_counts(args)
    method = canonical_method(args.size_factors)
    transform = args.transform == "on"
    threads = args.threads if args.threads else _default_threads()
    if args.axis == "features":
        dm = feature_dissimilarity_matrix(
            matrix, measure=args.measure, method=method, beta=args.beta,
            transform=transform, threads=threads,
        )
    elif args.measure == "poisson":
        dm = poisson_dissimilarity_matrix(
            matrix, method=method, beta=args.beta, transform=transform, threads=threads
        )
    else:
        dm = sq_euclidean_dissimilarity_matrix(matrix, method=method)
    write_dissimilarity(dm, out_dir / "dissim.tsv")
    return [Path(args.counts)], {
        "outputs": ["dissim.tsv", "dissim.tsv.json"],
        "n": dm.n,
    }


def cmd_cluster(args, out_dir: Path):
    dm = read_dissimilarity(args.dissim)
    dendrogram = complete_linkage(dm)
    write_newick(dendrogram, out_dir / "tree.newick")
    partition = cut_tree(dendrogram, args.cut_k)
    write_partition(out_dir / "partition.tsv", dm.ids, partition)
    inputs = [Path(args.dissim)]
    extra = {"outputs": ["tree.newick", "partition.tsv"]}
    if args.sweep:
        if not args.labels:
            raise ValidationError("--sweep needs a --labels reference file")
        pairs = dict(read_two_column_tsv(args.labels))
        order: list[str] = []
        for sid in dm.ids:
            if sid not in pairs:
                raise ValidationError(f"no reference label for sample '{sid}'")
            if pairs[sid] not in order:
                order.append(pairs[sid])
        index_of = {name: i + 1 for i, name in enumerate(order)}
        reference = Partition(
            np.array([index_of[pairs[sid]] for sid in dm.ids]), len(order)
        )
        sweep = [{"k": k, "cer": value} for k, value in cer_sweep(dendrogram, reference)]
        _write_json(out_dir / "sweep.json", sweep)
        extra["outputs"].append("sweep.json")
        inputs.append(Path(args.labels))
    return inputs, extra


def cmd_cer(args, out_dir: Path):
    ids_a, part_a = read_partition(args.partition_a)
    ids_b, part_b = read_partition(args.partition_b)
    if set(ids_a) != set(ids_b):
        raise ValidationError("partitions cover different id sets")
    if ids_a != ids_b:
        lookup = {sid: part_b.assignments[i] for i, sid in enumerate(ids_b)}
        reordered = np.array([lookup[sid] for sid in ids_a])
        part_b = Partition(reordered, part_b.num_clusters)
    value = cer(part_a, part_b)
    report = {"cer": value, "n": part_a.n}
    _write_json(out_dir / "cer.json", report)
    print(json.dumps(report))
    return [Path(args.partition_a), Path(args.partition_b)], report


def cmd_replicate(args, out_dir: Path):
    if args.task == "classification":
        summary = replicate_classification(
            n=args.n, p=args.p, K=args.k, phi=args.phi, sigma=args.sigma,
            reps=args.reps, seed=args.seed, method=args.size_factors,
            folds=args.folds, de_prob=args.de_prob,
            transform=args.transform == "on", beta=args.beta,
        )
        headline = (
            f"mean test errors {summary['errors']['mean']:.3f} "
            f"(se {summary['errors']['se']:.3f}) over {args.reps} replicates"
        )
        rows = [
            ("mean_errors", summary["errors"]["mean"]),
            ("se_errors", summary["errors"]["se"]),
            ("mean_nonzero", summary["nonzero"]["mean"]),
            ("se_nonzero", summary["nonzero"]["se"]),
        ]
    else:
        threads = args.threads if args.threads else _default_threads()
        summary = replicate_clustering(
            n=args.n, p=args.p, K=args.k, phi=args.phi, sigma=args.sigma,
            reps=args.reps, seed=args.seed, measure=args.measure,
            method=args.size_factors, cut_k=args.cut_k, de_prob=args.de_prob,
            transform=args.transform == "on", beta=args.beta, threads=threads,
        )
        headline = (
            f"mean CER {summary['cer']['mean']:.4f} "
            f"(se {summary['cer']['se']:.4f}) over {args.reps} replicates"
        )
        rows = [("mean_cer", summary["cer"]["mean"]), ("se_cer", summary["cer"]["se"])]
    _write_json(out_dir / "summary.json", summary)
    with open(out_dir / "summary.tsv", "w", encoding="utf-8") as handle:
        for name, value in rows:
            handle.write(f"{name}\t{format_number(value)}\n")
    print(headline)
    return [], {"outputs": ["summary.json", "summary.tsv"], "headline": headline}


def _add_counts_options(parser):
    parser.add_argument("--counts", required=True, help="count matrix TSV")
    parser.add_argument(
        "--orientation", choices=("samples", "features"), default="samples",
        help="whether file rows are samples (default) or features",
    )


def _add_fit_options(parser):
    parser.add_argument(
        "--size-factors", default="total",
        choices=("total", "total-count", "quantile", "median-ratio"),
    )
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--priors", choices=("uniform", "empirical"), default="uniform")
    parser.add_argument("--transform", choices=("on", "off"), default="on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poiskit",
        description="Poisson log-linear classification and clustering of count matrices",
    )
    parser.add_argument("--version", action="version", version=f"poiskit {__version__}")
    commands = parser.add_subparsers(dest="subcommand", required=True)

    sim = commands.add_parser("simulate", help="generate negative-binomial count data")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--k", type=int, required=True)
    sim.add_argument("--phi", type=float, required=True)
    sim.add_argument("--sigma", type=float, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--de-prob", type=float, default=0.3)
    sim.set_defaults(func=cmd_simulate)

    trans = commands.add_parser("transform", help="calibrate and apply the power transform")
    _add_counts_options(trans)
    trans.set_defaults(func=cmd_transform)

    train = commands.add_parser("train", help="fit the classifier")
    _add_counts_options(train)
    train.add_argument("--labels", required=True)
    train.add_argument("--rho", type=float, default=0.0)
    _add_fit_options(train)
    train.set_defaults(func=cmd_train)

    pred = commands.add_parser("predict", help="classify observations with a saved model")
    _add_counts_options(pred)
    pred.add_argument("--model", required=True)
    pred.add_argument("--labels", help="optional reference labels for an error count")
    pred.set_defaults(func=cmd_predict)

    cv = commands.add_parser("cv", help="cross-validate the shrinkage parameter")
    _add_counts_options(cv)
    cv.add_argument("--labels", required=True)
    cv.add_argument("--rho-grid", help="comma-separated values; default is automatic")
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--seed", type=int, default=0)
    _add_fit_options(cv)
    cv.set_defaults(func=cmd_cv)

    dis = commands.add_parser("dissim", help="pairwise dissimilarity matrix")
    _add_counts_options(dis)
    dis.add_argument("--measure", choices=("poisson", "sq-euclidean"), default="poisson")
    dis.add_argument(
        "--size-factors", default="total",
        choices=("total", "total-count", "quantile", "median-ratio"),
    )
    dis.add_argument("--axis", choices=("samples", "features"), default="samples")
    dis.add_argument("--transform", choices=("on", "off"), default="on")
    dis.add_argument("--beta", type=float, default=1.0)
    dis.add_argument("--threads", type=int, default=0, help="0 = POISKIT_THREADS or all cores")
    dis.set_defaults(func=cmd_dissim)

    clus = commands.add_parser("cluster", help="complete-linkage clustering of a dissimilarity TSV")
    clus.add_argument("--dissim", required=True)
    clus.add_argument("--cut-k", type=int, required=True)
    clus.add_argument("--sweep", action="store_true", help="also emit CER for every cut 2..n")
    clus.add_argument("--labels", help="reference labels for --sweep")
    clus.set_defaults(func=cmd_cluster)

    cercmd = commands.add_parser("cer", help="clustering error rate between two partitions")
    cercmd.add_argument("--partition-a", required=True)
    cercmd.add_argument("--partition-b", required=True)
    cercmd.set_defaults(func=cmd_cer)

    rep = commands.add_parser("replicate", help="simulation benchmark harness")
    rep.add_argument("task", choices=("classification", "clustering"))
    rep.add_argument("--n", type=int, required=True)
    rep.add_argument("--p", type=int, required=True)
    rep.add_argument("--k", type=int, default=3)
    rep.add_argument("--phi", type=float, required=True)
    rep.add_argument("--sigma", type=float, required=True)
    rep.add_argument("--reps", type=int, required=True)
    rep.add_argument("--seed", type=int, required=True)
    rep.add_argument("--de-prob", type=float, default=0.3)
    rep.add_argument(
        "--size-factors", default="total",
        choices=("total", "total-count", "quantile", "median-ratio"),
    )
    rep.add_argument("--measure", choices=("poisson", "sq-euclidean"), default="poisson")
    rep.add_argument("--cut-k", type=int, default=None)
    rep.add_argument("--folds", type=int, default=5)
    rep.add_argument("--transform", choices=("on", "off"), default="on")
    rep.add_argument("--beta", type=float, default=1.0)
    rep.add_argument("--threads", type=int, default=0)
    rep.set_defaults(func=cmd_replicate)

    for sub in (sim, trans, train, pred, cv, dis, clus, cercmd, rep):
        sub.add_argument("--out-dir", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        out_dir = _out_dir(args)
        inputs, extra = args.func(args, out_dir)
        _write_manifest(out_dir, args, inputs, started, extra)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PoiskitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
