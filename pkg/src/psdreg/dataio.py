"""Dataset loading/normalization, synthetic problems, splits and model files."""
import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .applications import LabeledDataset
from .errors import DataError, FormatError, ConfigurationError
from .regression import (ConeAffineModel, ConeLogModel, FlatModel, PolarModel,
                         Relation, SampleSet)

MAGIC = "PSDR1"


def _parse_rows(path, delimiter):
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DataError(f"non-numeric cell {bad!r}", line=lineno) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(f"expected {width} columns, found {len(values)}", line=lineno)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_dataset(path, label_column=-1, delimiter=","):
    """Read a delimited numeric table.

    ``label_column`` selects the integer class column (``None`` for
    unlabeled data, in which case every label is 0).
    """
    table = _parse_rows(path, delimiter)
    if label_column is None:
        return LabeledDataset(table, np.zeros(table.shape[0], dtype=np.intp))
    ncol = table.shape[1]
    col = label_column % ncol if -ncol <= label_column < ncol else None
    if col is None or ncol < 2:
        raise DataError(f"label column {label_column} missing (table has {ncol} columns)")
    labels = table[:, col]
    bad = np.flatnonzero((labels != np.round(labels)) | (labels < 0))
    if bad.size:
        raise DataError("label is not a nonnegative integer", line=int(bad[0]) + 1)
    features = np.delete(table, col, axis=1)
    return LabeledDataset(features, labels.astype(np.intp))


def save_dataset(path, dataset, delimiter=","):
    """Write features followed by the label column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        for x, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(label)])


def load_regression(path, delimiter=","):
    """Rank-one regression samples: feature columns followed by the target."""
    table = _parse_rows(path, delimiter)
    if table.shape[1] < 2:
        raise DataError("regression file needs feature columns and a target column")
    return SampleSet.rank_one(table[:, :-1], table[:, -1])


def save_regression(path, samples, delimiter=","):
    if samples.kind != "rank_one":
        raise ValueError("only rank-one samples can be written as a table")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        for x, y in zip(samples.data, samples.targets):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def save_constraints(path, constraints):
    """One line ``i j target relation`` per pair constraint."""
    samples = getattr(constraints, "samples", constraints)
    if samples.kind != "pair":
        raise ValueError("constraint files hold pair-difference samples")
    with open(path, "w", encoding="utf-8") as fh:
        for (i, j), y, rho in zip(samples.data, samples.targets, samples.rho):
            fh.write(f"{i} {j} {float(y)!r} {Relation(int(rho)).token}\n")


def load_constraints(path, n):
    ij, y, rho = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError("expected 'i j target relation'", line=lineno)
            try:
                i, j, target = int(parts[0]), int(parts[1]), float(parts[2])
                rel = Relation.parse(parts[3])
            except ValueError as exc:
                raise DataError(str(exc), line=lineno) from None
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise DataError(f"invalid pair ({i}, {j}) for n={n}", line=lineno)
            ij.append((i, j))
            y.append(target)
            rho.append(rel.rho)
    if not ij:
        raise DataError(f"{path}: no constraints")
    return SampleSet.pairs(ij, n, y, rho)


@dataclass(frozen=True)
class Normalization:
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    def apply(self, X):
        return (np.asarray(X, float) - self.mean) / self.scale


def normalize(dataset):
    """Center every column and rescale to unit (population) standard
    deviation. Zero-variance columns are only centered and flagged."""
    X = dataset.features
    mean = X.mean(axis=0)
    Xc = X - mean
    std = np.sqrt(np.mean(Xc ** 2, axis=0))
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    scale = np.where(constant, 1.0, std)
    return LabeledDataset(Xc / scale, dataset.labels), Normalization(mean, scale, constant)


@dataclass(frozen=True)
class SyntheticSpec:
    d: int = 10
    r: int = 5
    n_train: int = 500
    n_test: int = 500
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.r <= self.d:
            raise ConfigurationError("need 1 <= r <= d")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigurationError("sample sizes must be positive")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be nonnegative")


@dataclass
class SyntheticProblem:
    train: SampleSet
    test: SampleSet
    truth: FlatModel
    n_negative: int


def synth_regression(spec):
    """Toy problem ``y = (x^T W* x)(1 + nu)`` with Gaussian ``x`` and ``G*``,
    ``W* = G* G*^T`` and ``nu ~ N(0, noise_std^2)``."""
    rng = np.random.default_rng(spec.seed)
    G = rng.standard_normal((spec.d, spec.r))
    n = spec.n_train + spec.n_test
    X = rng.standard_normal((n, spec.d))
    nu = spec.noise_std * rng.standard_normal(n)
    Z = X @ G
    y = np.einsum("ij,ij->i", Z, Z) * (1.0 + nu)
    tr = slice(0, spec.n_train)
    te = slice(spec.n_train, n)
    return SyntheticProblem(SampleSet.rank_one(X[tr], y[tr]), SampleSet.rank_one(X[te], y[te]),
                            FlatModel(G), int(np.sum(y < 0)))


def split(n, folds=2, repeats=10, seed=0):
    """Fold assignments (one int array of length ``n`` per repeat) from a
    seeded permutation; fold sizes differ by at most one."""
    if folds < 2:
        raise ConfigurationError("need at least two folds")
    if folds > n:
        raise ConfigurationError(f"cannot split {n} items into {folds} folds")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(repeats):
        assign = np.empty(n, dtype=np.intp)
        assign[rng.permutation(n)] = np.arange(n) % folds
        out.append(assign)
    return out


# ---------------------------------------------------------------------------
# model files

def _model_payload(model):
    if isinstance(model, FlatModel):
        return "flat", model.G.shape, [model.G]
    if isinstance(model, PolarModel):
        return "polar", model.U.shape, [model.U, model.R]
    if isinstance(model, ConeAffineModel):
        return "cone-affine", model.W.shape, [model.W]
    if isinstance(model, ConeLogModel):
        return "cone-logeuclidean", model.S.shape, [model.S]
    raise TypeError(f"cannot serialize {type(model).__name__}")


def dump_model(model):
    kind, (d, r), arrays = _model_payload(model)
    header = f"{MAGIC} {kind} {d} {r}\n".encode("ascii")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return header + body


def parse_model(blob):
    nl = blob.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line")
    try:
        parts = blob[:nl].decode("ascii").split()
    except UnicodeDecodeError:
        raise FormatError("header is not ASCII") from None
    if not parts or parts[0] != MAGIC:
        raise FormatError(f"bad magic/version {parts[0] if parts else ''!r}, expected {MAGIC}")
    if len(parts) != 4:
        raise FormatError("malformed header")
    kind = parts[1]
    try:
        d, r = int(parts[2]), int(parts[3])
    except ValueError:
        raise FormatError("non-integer dimensions in header") from None
    sizes = {"flat": [(d, r)], "polar": [(d, r), (r, r)],
             "cone-affine": [(d, r)], "cone-logeuclidean": [(d, r)]}
    if kind not in sizes:
        raise FormatError(f"unknown model kind {kind!r}")
    payload = np.frombuffer(blob[nl + 1:], dtype="<f8")
    need = sum(a * b for a, b in sizes[kind])
    if payload.size != need:
        raise FormatError(f"payload has {payload.size} values, expected {need}")
    arrays, pos = [], 0
    for shape in sizes[kind]:
        k = shape[0] * shape[1]
        arrays.append(payload[pos:pos + k].reshape(shape).astype(float))
        pos += k
    if kind == "flat":
        return FlatModel(arrays[0])
    if kind == "polar":
        return PolarModel(arrays[0], arrays[1])
    if kind == "cone-affine":
        return ConeAffineModel(arrays[0])
    return ConeLogModel(arrays[0])


def save_model(path, model):
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return parse_model(fh.read())


REPORT_KEYS = ("config", "cost_history", "step_history", "grad_norm_history",
               "timings", "termination", "metrics")


def report_payload(config, fit_report=None, metrics=None):
    """Assemble the JSON report object; wall-clock data lives under ``timings``."""
    fit = fit_report.to_dict() if fit_report is not None else {}
    return {
        "config": config,
        "cost_history": fit.get("cost", []),
        "step_history": fit.get("step", []),
        "grad_norm_history": fit.get("grad_norm", []),
        "timings": {"wall_time": fit.get("wall_time", [])},
        "termination": fit.get("termination"),
        "metrics": metrics or {},
    }


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _finite(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def write_report(path, payload):
    text = json.dumps(_finite(payload), indent=2, sort_keys=True, default=_json_default)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def write_series_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
