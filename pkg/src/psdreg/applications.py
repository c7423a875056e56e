"""Kernel learning and Mahalanobis distance learning on top of the
regression core, plus the evaluation protocols (k-NN accuracy, K-means NMI)."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, DimensionError
from .regression import Relation, SampleSet, RankOne, predict

UPPER = Relation.UPPER.rho
LOWER = Relation.LOWER.rho


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        labels = np.asarray(self.labels)
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise ValueError("labels must be integers")
        labels = labels.astype(np.intp)
        if X.shape[0] != labels.shape[0]:
            raise DimensionError("features and labels have different lengths")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be nonnegative class ids")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass
class ConstraintSet:
    """Distance constraints as samples, with the generating pairs and
    bookkeeping about the realized class balance."""

    samples: SampleSet
    pairs: np.ndarray
    same_class: np.ndarray
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)


# ---------------------------------------------------------------------------
# kernels

def center_kernel(K):
    """Double centering ``H K H`` with ``H = I - 11^T / n``."""
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=0)
    Kc = K - row[None, :] - K.mean(axis=1)[:, None] + K.mean()
    return 0.5 * (Kc + Kc.T)


def build_kernel(features, kind="linear", gamma=1e-3, center=False):
    """Linear (``X X^T``) or Gaussian RBF kernel matrix of the rows of ``features``."""
    X = np.asarray(getattr(features, "features", features), dtype=float)
    if X.size == 0:
        raise ValueError("empty dataset")
    if kind == "linear":
        K = X @ X.T
    elif kind == "rbf":
        if gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        sq = np.sum(X * X, axis=1)
        D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
        np.fill_diagonal(D, 0.0)
        K = np.exp(-gamma * D)
    else:
        raise ConfigurationError(f"unknown kernel {kind!r}")
    K = 0.5 * (K + K.T)
    return center_kernel(K) if center else K


def kernel_distance(K, i, j):
    return K[i, i] + K[j, j] - 2.0 * K[i, j]


def kernel_distances(K):
    diag = np.diag(K)
    return diag[:, None] + diag[None, :] - 2.0 * K


def kernel_embedding(K, r):
    """Rank-``r`` factor ``G`` with ``G G^T`` the best PSD approximation of ``K``
    (kernel PCA)."""
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    w, V = w[::-1][:r], V[:, ::-1][:, :r]
    if w[-1] <= 1e-12 * max(w[0], 1e-300):
        raise DegenerateInputError(f"kernel has numerical rank below {r}")
    return V * np.sqrt(w)


def _random_pairs(n, m, rng):
    i = rng.integers(0, n, size=m)
    j = rng.integers(0, n - 1, size=m)
    j = j + (j >= i)
    return np.stack([i, j], axis=1)


def generate_kernel_constraints(K, labels, alpha=0.0, m=1000, rng=None):
    """Random pairwise distance constraints from a kernel matrix.

    Same-class pairs get ``y_hat <= (1 - alpha) y_ij``, different-class
    pairs ``y_hat >= (1 + alpha) y_ij`` with ``y_ij = K_ii + K_jj - 2 K_ij``.
    """
    if alpha < 0:
        raise ConfigurationError("alpha must be nonnegative")
    if m < 1:
        raise ConfigurationError("need at least one constraint")
    rng = np.random.default_rng(rng)
    K = np.asarray(K, dtype=float)
    labels = np.asarray(labels)
    n = K.shape[0]
    if labels.shape[0] != n:
        raise DimensionError("labels do not match the kernel size")
    info = {}
    if np.unique(labels).size < 2:
        msg = "single class: only same-class constraints can be generated"
        warnings.warn(msg)
        info["warning"] = msg
    ij = _random_pairs(n, m, rng)
    i, j = ij[:, 0], ij[:, 1]
    dist = kernel_distance(K, i, j)
    same = labels[i] == labels[j]
    targets = np.where(same, (1.0 - alpha) * dist, (1.0 + alpha) * dist)
    rho = np.where(same, UPPER, LOWER)
    info.update(same_class=int(same.sum()), different_class=int((~same).sum()), alpha=alpha)
    return ConstraintSet(SampleSet.pairs(ij, n, targets, rho), ij, same, info)


def default_constraint_count(n_classes):
    return 40 * n_classes * (n_classes - 1)


def pairwise_percentiles(features, W0, q=(5.0, 95.0), probe=10_000, rng=None):
    """Percentiles of ``d_W0`` over a random probe of at most ``probe`` pairs
    (all pairs when that is fewer)."""
    rng = np.random.default_rng(rng)
    X = np.asarray(features, dtype=float)
    n = X.shape[0]
    total = n * (n - 1) // 2
    if total <= probe:
        i, j = np.triu_indices(n, k=1)
    else:
        ij = _random_pairs(n, probe, rng)
        i, j = ij[:, 0], ij[:, 1]
    D = X[i] - X[j]
    d = np.einsum("ij,ij->i", D @ W0, D)
    return np.percentile(d, q)


def generate_mahalanobis_constraints(dataset, W0, count=None, rng=None, probe=10_000):
    """Pairwise constraints ``d_W(x_i, x_j) <= l`` (same class) and
    ``d_W(x_i, x_j) >= u`` (different class), with ``l``/``u`` the 5th/95th
    percentiles of ``d_W0``. Data points are ``RankOne(x_i - x_j)``."""
    rng = np.random.default_rng(rng)
    X = dataset.features
    W0 = np.asarray(W0.matrix() if hasattr(W0, "matrix") else W0, dtype=float)
    if count is None:
        count = default_constraint_count(dataset.n_classes)
    if count < 1:
        raise ConfigurationError("need at least one constraint")
    lo, hi = pairwise_percentiles(X, W0, rng=rng, probe=probe)
    if hi <= 0:
        raise ConfigurationError("all probed distances are zero (identical features?)")
    ij = _random_pairs(dataset.n, count, rng)
    i, j = ij[:, 0], ij[:, 1]
    same = dataset.labels[i] == dataset.labels[j]
    targets = np.where(same, lo, hi)
    rho = np.where(same, UPPER, LOWER)
    samples = SampleSet.rank_one(X[i] - X[j], targets, rho)
    info = dict(lower=float(lo), upper=float(hi), same_class=int(same.sum()),
                different_class=int((~same).sum()))
    return ConstraintSet(samples, ij, same, info)


def pca_subspace(dataset, r):
    """Top-``r`` principal directions ``U0`` and the scaled factor
    ``G0 = U0 diag(sqrt(eigenvalues))`` of the (population) covariance."""
    X = np.asarray(getattr(dataset, "features", dataset), dtype=float)
    n, d = X.shape
    if not 1 <= r <= min(n, d):
        raise DegenerateInputError(f"rank {r} must lie in [1, min(n, d)] = [1, {min(n, d)}]")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / n
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    w, V = w[::-1][:r], V[:, ::-1][:, :r]
    if w[-1] <= 1e-12 * max(w[0], 1e-300):
        raise DegenerateInputError(f"data has numerical rank below {r}")
    # fix the eigenvector sign for reproducibility
    V = V * np.where(V[np.abs(V).argmax(axis=0), range(r)] < 0, -1.0, 1.0)
    return V * np.sqrt(w), V


def mahalanobis_distance(model, xi, xj):
    """``(x_i - x_j)^T W (x_i - x_j)`` for a learned model."""
    return predict(model, RankOne(np.asarray(xi, float) - np.asarray(xj, float)))


def mahalanobis_distances(model_or_W, X):
    """All pairwise squared distances of the rows of ``X`` under ``W``."""
    if hasattr(model_or_W, "factor"):
        Z = np.asarray(X, float) @ model_or_W.factor()
    else:
        W = np.asarray(model_or_W, dtype=float)
        w, V = np.linalg.eigh(0.5 * (W + W.T))
        Z = np.asarray(X, float) @ (V * np.sqrt(np.clip(w, 0.0, None)))
    sq = np.sum(Z * Z, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def model_embedding(model):
    """Rows of a rank-r factor of the model (flat: G, polar: U R)."""
    return model.factor()


# ---------------------------------------------------------------------------
# evaluation

def knn_predict(distances, train_labels, k, exclude_self=False, train_index=None,
                query_index=None):
    """Majority vote among the ``k`` nearest training points.

    ``distances`` has one row per query and one column per training point.
    Distance ties are resolved by training index, vote ties by smallest class.
    """
    D = np.asarray(distances, dtype=float)
    train_labels = np.asarray(train_labels)
    if exclude_self:
        D = D.copy()
        qi = np.asarray(query_index)
        ti = np.asarray(train_index)
        D[qi[:, None] == ti[None, :]] = np.inf
    kk = min(k, D.shape[1] - (1 if exclude_self else 0))
    order = np.argsort(D, axis=1, kind="stable")[:, :kk]
    votes = train_labels[order]
    n_classes = int(train_labels.max()) + 1
    counts = np.zeros((D.shape[0], n_classes), dtype=np.intp)
    for c in range(n_classes):
        counts[:, c] = np.sum(votes == c, axis=1)
    return np.argmax(counts, axis=1)


@dataclass
class KnnResult:
    mean: float
    std: float
    accuracies: np.ndarray


def knn_evaluate(distances, labels, k=5, folds=2, repeats=10, rng=None):
    """Cross-validated k-NN accuracy from a full pairwise distance matrix.

    Returns the mean and standard deviation over ``repeats x folds`` test folds.
    """
    from .dataio import split

    if k < 1 or folds < 2:
        raise ConfigurationError("need k >= 1 and folds >= 2")
    D = np.asarray(distances, dtype=float)
    labels = np.asarray(labels)
    n = labels.shape[0]
    seed = rng if isinstance(rng, (int, np.integer)) or rng is None else \
        int(np.random.default_rng(rng).integers(2 ** 31))
    accs = []
    for assign in split(n, folds, repeats, seed):
        for f in range(folds):
            test = np.flatnonzero(assign == f)
            train = np.flatnonzero(assign != f)
            missing = set(np.unique(labels[test])) - set(np.unique(labels[train]))
            if missing:
                warnings.warn(f"classes {sorted(missing)} absent from a training fold")
            pred = knn_predict(D[np.ix_(test, train)], labels[train], k)
            accs.append(float(np.mean(pred == labels[test])))
    accs = np.asarray(accs)
    return KnnResult(float(accs.mean()), float(accs.std()), accs)


def kmeans(Z, c, restarts=10, rng=None, max_iter=300):
    """Lloyd's K-means keeping the restart with the smallest objective.

    Each restart seeds with ``c`` distinct points; an empty cluster is
    re-seeded from the point farthest from its centroid.
    Returns ``(assignment, objective)``.
    """
    rng = np.random.default_rng(rng)
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if c < 1 or c > n:
        raise ConfigurationError(f"cannot form {c} clusters from {n} points")
    best = None
    for _ in range(restarts):
        centers = Z[rng.choice(n, size=c, replace=False)].copy()
        assign = None
        for _ in range(max_iter):
            d2 = np.sum((Z[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new = np.argmin(d2, axis=1)
            for j in range(c):
                if not np.any(new == j):
                    far = int(np.argmax(d2[np.arange(n), new]))
                    new[far] = j
                    d2[far, :] = 0.0
            if assign is not None and np.array_equal(new, assign):
                break
            assign = new
            for j in range(c):
                centers[j] = Z[assign == j].mean(axis=0)
        objective = float(np.sum((Z - centers[assign]) ** 2))
        if best is None or objective < best[1]:
            best = (assign.copy(), objective)
    return best


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(a, b):
    """Normalized mutual information ``2 I(A;B) / (H(A) + H(B))``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError("partitions have different lengths")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha + hb == 0.0:
        return 1.0
    mi = ha + hb - _entropy(table.ravel())
    return float(np.clip(2.0 * mi / (ha + hb), 0.0, 1.0))


def kmeans_nmi(embedding, labels, c=None, restarts=10, rng=None):
    """K-means on the embedding rows followed by NMI against ``labels``."""
    labels = np.asarray(labels)
    c = c or np.unique(labels).size
    if c < 2:
        raise ConfigurationError("need at least two clusters")
    assign, _ = kmeans(embedding, c, restarts, rng)
    return nmi(assign, labels)
