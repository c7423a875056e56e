"""Command-line front end: ``psdreg <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure (divergence, line-search failure, gradient-check breach).
"""
import argparse
import contextlib
import os
import sys
from pathlib import Path

import numpy as np

from . import applications as app
from . import dataio
from .checks import gradient_suite
from .errors import (ConfigurationError, DataError, DivergenceError, FormatError,
                     DimensionError, DegenerateInputError)
from .optim import BatchConfig, OnlineConfig, batch_fit, online_fit
from .regression import MODEL_TYPES, empirical_cost, model_from_factor

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class NumericalFailure(Exception):
    pass


def _add_optimizer_flags(p, geometry=True):
    if geometry:
        p.add_argument("--geometry", choices=sorted(MODEL_TYPES), default="polar")
        p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--mode", choices=("batch", "online"), default="batch")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--eps-tol", type=float, default=1e-5)
    p.add_argument("--max-iters", type=int, default=1000)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="psdreg", description="Regression on fixed-rank PSD matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic regression problem")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--r", type=int, default=5)
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("train", help="fit a model on rank-one regression data")
    p.add_argument("--train", type=Path, default=None,
                   help="training table (default: <out>/train.csv)")
    p.add_argument("--test", type=Path, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))
    _add_optimizer_flags(p)

    p = sub.add_parser("kernel-learn", help="learn a low-rank kernel from distance constraints")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
    p.add_argument("--gamma", type=float, default=1e-3)
    p.add_argument("--center", action="store_true")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--constraints", type=int, default=1000)
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))
    _add_optimizer_flags(p)

    p = sub.add_parser("metric-learn", help="learn a Mahalanobis distance")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--init", choices=("identity", "pca"), default=None)
    p.add_argument("--constraints", type=int, default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))
    _add_optimizer_flags(p)

    p = sub.add_parser("evaluate", help="k-NN accuracy and K-means NMI of a model")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _config(args):
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    if "lam" in cfg:
        cfg["lambda"] = cfg.pop("lam")
    cfg.pop("out", None)
    return cfg


def _check_lambda(args):
    if hasattr(args, "lam") and not 0.0 <= args.lam <= 1.0:
        raise ConfigurationError("--lambda must lie in [0, 1]")


def _fit(model, samples, args):
    lam = args.lam
    if args.mode == "batch":
        config = BatchConfig(s0=args.s0, c=args.c, eps_tol=args.eps_tol, max_iters=args.max_iters)
        model, report = batch_fit(model, samples, lam, config)
        if report.termination == "linesearch-failure":
            raise NumericalFailure("line search failed", report)
        return model, report
    config = OnlineConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    return online_fit(model, samples, lam, config)


def _initial_factor(geometry, d, r, rng):
    if geometry.startswith("cone"):
        if r != d:
            raise ConfigurationError(f"{geometry} requires rank == d ({d})")
    return rng.standard_normal((d, r))


def cmd_synth(args):
    if args.noise_std >= 1:
        raise ConfigurationError("--noise-std must be < 1 so that targets stay mostly positive")
    spec = dataio.SyntheticSpec(args.d, args.r, args.n_train, args.n_test, args.noise_std, args.seed)
    prob = dataio.synth_regression(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.save_regression(args.out / "train.csv", prob.train)
    dataio.save_regression(args.out / "test.csv", prob.test)
    dataio.save_model(args.out / "truth.psdr", prob.truth)
    metrics = {"oracle_train_cost": empirical_cost(prob.truth, prob.train),
               "oracle_test_cost": empirical_cost(prob.truth, prob.test),
               "negative_targets": prob.n_negative}
    dataio.write_report(args.out / "synth_report.json", dataio.report_payload(_config(args), None, metrics))
    print(f"wrote {args.out}/train.csv, test.csv, truth.psdr")
    return EXIT_OK


def cmd_train(args):
    _check_lambda(args)
    train_path = args.train or args.out / "train.csv"
    test_path = args.test or (args.out / "test.csv" if args.train is None else None)
    train = dataio.load_regression(train_path)
    test = dataio.load_regression(test_path) if test_path and Path(test_path).exists() else None
    d = train.dim
    rank = args.rank or (d if args.geometry.startswith("cone") else max(1, d // 2))
    rng = np.random.default_rng(args.seed)
    model = model_from_factor(args.geometry, _initial_factor(args.geometry, d, rank, rng))
    model, report = _fit(model, train, args)
    metrics = {"train_cost": empirical_cost(model, train), "iterations": report.iterations}
    if test is not None:
        metrics["test_cost"] = empirical_cost(model, test)
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.save_model(args.out / "model.psdr", model)
    payload = dataio.report_payload(_config(args), report, metrics)
    dataio.write_report(args.out / "report.json", payload)
    print(f"termination={report.termination} train_cost={metrics['train_cost']:.6g}")
    return EXIT_OK


def cmd_kernel_learn(args):
    _check_lambda(args)
    ds, _ = dataio.normalize(dataio.load_dataset(args.data))
    K = app.build_kernel(ds, args.kernel, args.gamma, args.center)
    rng = np.random.default_rng(args.seed)
    cons = app.generate_kernel_constraints(K, ds.labels, args.alpha, args.constraints, rng)
    rank = ds.n if args.geometry.startswith("cone") else args.rank
    if args.geometry.startswith("cone"):
        G0 = np.linalg.cholesky(K + 1e-6 * np.trace(K) / ds.n * np.eye(ds.n))
    else:
        G0 = app.kernel_embedding(K, rank)
    model0 = model_from_factor(args.geometry, G0)
    model, report = _fit(model0, cons.samples, args)
    c = ds.n_classes
    metrics = {"constraints": cons.info}
    for tag, m in (("initial", model0), ("learned", model)):
        knn = app.knn_evaluate(app.kernel_distances(m.matrix()), ds.labels, args.k,
                               args.folds, args.repeats, args.seed)
        metrics[f"{tag}_knn_accuracy"] = knn.mean
        metrics[f"{tag}_knn_std"] = knn.std
        if c >= 2:
            metrics[f"{tag}_nmi"] = app.kmeans_nmi(m.factor(), ds.labels, c, 10, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.save_constraints(args.out / "constraints.txt", cons)
    dataio.save_model(args.out / "model.psdr", model)
    dataio.write_report(args.out / "report.json", dataio.report_payload(_config(args), report, metrics))
    print(" ".join(f"{k}={v:.4g}" for k, v in metrics.items() if isinstance(v, float)))
    return EXIT_OK


def cmd_metric_learn(args):
    _check_lambda(args)
    ds, _ = dataio.normalize(dataio.load_dataset(args.data))
    rank = args.rank or ds.d
    if args.geometry.startswith("cone") and rank != ds.d:
        raise ConfigurationError(f"{args.geometry} requires rank == d ({ds.d})")
    init = args.init or ("identity" if rank == ds.d else "pca")
    if init == "identity" and rank != ds.d:
        raise ConfigurationError("identity initialization needs rank == d")
    count = args.constraints or app.default_constraint_count(ds.n_classes)
    accs, base_accs, reports = [], [], []
    for rep_idx, assign in enumerate(dataio.split(ds.n, args.folds, args.repeats, args.seed)):
        for f in range(args.folds):
            tr = np.flatnonzero(assign != f)
            te = np.flatnonzero(assign == f)
            train = app.LabeledDataset(ds.features[tr], ds.labels[tr])
            G0 = np.eye(ds.d) if init == "identity" else app.pca_subspace(train, rank)[0]
            model0 = model_from_factor(args.geometry, G0)
            rng = np.random.default_rng([args.seed, rep_idx, f])
            cons = app.generate_mahalanobis_constraints(train, model0.matrix(), count, rng)
            model, report = _fit(model0, cons.samples, args)
            reports.append(report.termination)
            for m, out in ((model0, base_accs), (model, accs)):
                Z = ds.features @ m.factor()
                D = app.mahalanobis_distances(np.eye(Z.shape[1]), Z)
                pred = app.knn_predict(D[np.ix_(te, tr)], ds.labels[tr], args.k)
                out.append(float(np.mean(pred == ds.labels[te])))
    # final model on all data for export
    G0 = np.eye(ds.d) if init == "identity" else app.pca_subspace(ds, rank)[0]
    model0 = model_from_factor(args.geometry, G0)
    cons = app.generate_mahalanobis_constraints(ds, model0.matrix(), count, args.seed)
    model, report = _fit(model0, cons.samples, args)
    metrics = {"knn_accuracy": float(np.mean(accs)), "knn_std": float(np.std(accs)),
               "baseline_knn_accuracy": float(np.mean(base_accs)),
               "baseline_knn_std": float(np.std(base_accs)),
               "fold_terminations": reports, "constraints": cons.info, "init": init}
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.save_model(args.out / "model.psdr", model)
    dataio.write_report(args.out / "report.json", dataio.report_payload(_config(args), report, metrics))
    dataio.write_series_csv(args.out / "knn_folds.csv", ["fold", "baseline_accuracy", "accuracy"],
                            [(i, b, a) for i, (b, a) in enumerate(zip(base_accs, accs))])
    print(f"knn_accuracy={metrics['knn_accuracy']:.4f} baseline={metrics['baseline_knn_accuracy']:.4f}")
    return EXIT_OK


def cmd_evaluate(args):
    ds, _ = dataio.normalize(dataio.load_dataset(args.data))
    model = dataio.load_model(args.model)
    d = model.shape[0]
    if d == ds.d:
        kind = "mahalanobis"
        Z = ds.features @ model.factor()
    elif d == ds.n:
        kind = "kernel"
        Z = model.factor()
    else:
        raise DataError(f"model dimension {d} matches neither features ({ds.d}) nor samples ({ds.n})")
    D = app.mahalanobis_distances(np.eye(Z.shape[1]), Z)
    knn = app.knn_evaluate(D, ds.labels, args.k, args.folds, args.repeats, args.seed)
    rows = [("knn_accuracy", knn.mean, knn.std)]
    metrics = {"kind": kind, "knn_accuracy": knn.mean, "knn_std": knn.std}
    if ds.n_classes >= 2:
        score = app.kmeans_nmi(Z, ds.labels, ds.n_classes, 10, args.seed)
        rows.append(("nmi", score, 0.0))
        metrics["nmi"] = score
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.write_series_csv(args.out / "metrics.csv", ["metric", "mean", "std"], rows)
    dataio.write_series_csv(args.out / "knn_folds.csv", ["fold", "accuracy"],
                            list(enumerate(knn.accuracies)))
    dataio.write_report(args.out / "evaluation.json", dataio.report_payload(_config(args), None, metrics))
    for name, mean, std in rows:
        print(f"{name},{mean:.6f},{std:.6f}")
    return EXIT_OK


def cmd_gradcheck(args):
    results = gradient_suite(seed=args.seed)
    ok = True
    rows = []
    for res in results:
        passed = res.passed(args.tol)
        ok &= passed
        rows.append((res.geometry, res.lam, res.max_violation, int(passed)))
        print(f"{res.geometry:<18} lambda={res.lam:.1f} max_violation={res.max_violation:.3e} "
              f"{'PASS' if passed else 'FAIL'}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        dataio.write_series_csv(args.out / "gradcheck.csv",
                                ["geometry", "lambda", "max_violation", "passed"], rows)
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "kernel-learn": cmd_kernel_learn,
    "metric-learn": cmd_metric_learn,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
}


def _thread_limit():
    value = os.environ.get("PSDREG_THREADS")
    if not value:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(value))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit():
            return COMMANDS[args.command](args)
    except (ConfigurationError, DegenerateInputError) as exc:
        print(f"psdreg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FormatError, DimensionError, OSError) as exc:
        print(f"psdreg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, NumericalFailure) as exc:
        print(f"psdreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
