"""Trace regression ``y_hat = Tr(W X)`` over fixed-rank PSD and SPD models.

Data points come in three flavours: dense symmetric matrices, rank-one
outer products ``x x^T`` and pair differences ``(e_i - e_j)(e_i - e_j)^T``.
A :class:`SampleSet` stores a homogeneous batch of them as arrays so that
predictions and gradients cost O(n d r) on structured data instead of
O(n d^2 r).

Every model class exposes the same small protocol used by the optimizers:
``predict``, ``gradient``, ``grad_norm``, ``descend``, ``params``.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from . import geometry as geo
from .errors import DimensionError, ConfigurationError


class Relation(Enum):
    EQUALITY = 0
    UPPER = 1    # y_hat <= y required
    LOWER = -1   # y_hat >= y required

    @property
    def rho(self):
        return self.value

    @classmethod
    def parse(cls, token):
        table = {"eq": cls.EQUALITY, "le": cls.UPPER, "ge": cls.LOWER}
        if isinstance(token, cls):
            return token
        try:
            return table[token]
        except KeyError:
            raise ValueError(f"unknown relation {token!r} (expected eq, le or ge)")

    @property
    def token(self):
        return {0: "eq", 1: "le", -1: "ge"}[self.value]


@dataclass(frozen=True)
class Dense:
    X: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", geo.sym(self.X))

    @property
    def dim(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class RankOne:
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("rank-one data vector must be finite")
        object.__setattr__(self, "x", x)

    @property
    def dim(self):
        return self.x.shape[0]


@dataclass(frozen=True)
class PairDiff:
    i: int
    j: int
    n: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("pair difference needs i != j")
        if not (0 <= self.i < self.n and 0 <= self.j < self.n):
            raise DimensionError(f"pair ({self.i}, {self.j}) out of range for n={self.n}")

    @property
    def dim(self):
        return self.n


DataPoint = Union[Dense, RankOne, PairDiff]


@dataclass(frozen=True)
class Sample:
    point: DataPoint
    target: float
    relation: Relation = Relation.EQUALITY

    def __post_init__(self):
        if not np.isfinite(self.target):
            raise ValueError("sample target must be finite")


def _active_residuals(y_hat, y, rho):
    e = y_hat - y
    # inequality samples only count when violated
    active = (rho == 0) | (rho * e > 0)
    return np.where(active, e, 0.0)


def residual(y_hat, sample):
    """Scalar residual ``e`` that scales every gradient (zero if a
    constraint is satisfied)."""
    rho = np.array([sample.relation.rho])
    return float(_active_residuals(np.array([y_hat], dtype=float),
                                   np.array([sample.target], dtype=float), rho)[0])


def loss(y_hat, sample):
    """Quadratic loss, with inequalities handled as one-sided squares."""
    return 0.5 * residual(y_hat, sample) ** 2


class SampleSet:
    """Homogeneous batch of samples stored as arrays.

    ``kind`` is ``"dense"`` (``data`` n x d x d, symmetrized),
    ``"rank_one"`` (``data`` n x d) or ``"pair"`` (``data`` n x 2 int).
    ``rho`` holds 0 for equalities, +1 for upper bounds, -1 for lower bounds.
    """

    def __init__(self, kind, data, targets, rho=None, dim=None):
        if kind not in ("dense", "rank_one", "pair"):
            raise ValueError(f"unknown sample kind {kind!r}")
        targets = np.asarray(targets, dtype=float).ravel()
        if kind == "pair":
            data = np.asarray(data, dtype=np.intp).reshape(-1, 2)
            if dim is None:
                raise ValueError("pair samples need the ambient size")
            if data.size and (data.min() < 0 or data.max() >= dim):
                raise DimensionError(f"pair index out of range for n={dim}")
            if np.any(data[:, 0] == data[:, 1]):
                raise ValueError("pair difference needs i != j")
        else:
            data = np.asarray(data, dtype=float)
            if kind == "dense":
                if data.ndim != 3 or data.shape[1] != data.shape[2]:
                    raise DimensionError(f"dense data must be n x d x d, got {data.shape}")
                data = 0.5 * (data + data.transpose(0, 2, 1))
            elif data.ndim != 2:
                raise DimensionError(f"rank-one data must be n x d, got {data.shape}")
            dim = data.shape[1]
        if data.shape[0] != targets.shape[0]:
            raise DimensionError("number of data points and targets differ")
        if not np.all(np.isfinite(targets)):
            raise ValueError("targets must be finite")
        rho = np.zeros(targets.shape[0], dtype=np.int8) if rho is None \
            else np.asarray(rho, dtype=np.int8).ravel()
        if rho.shape != targets.shape:
            raise DimensionError("relation array does not match targets")
        self.kind = kind
        self.data = data
        self.targets = targets
        self.rho = rho
        self.dim = int(dim)

    # -- construction -----------------------------------------------------
    @classmethod
    def rank_one(cls, X, y, rho=None):
        return cls("rank_one", X, y, rho)

    @classmethod
    def pairs(cls, ij, n, y, rho=None):
        return cls("pair", ij, y, rho, dim=n)

    @classmethod
    def dense(cls, Xs, y, rho=None):
        return cls("dense", Xs, y, rho)

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            raise ValueError("empty batch")
        kinds = {type(s.point) for s in samples}
        if len(kinds) != 1:
            raise ValueError("a SampleSet must hold a single data-point type")
        y = [s.target for s in samples]
        rho = [s.relation.rho for s in samples]
        first = samples[0].point
        if isinstance(first, RankOne):
            return cls.rank_one(np.stack([s.point.x for s in samples]), y, rho)
        if isinstance(first, PairDiff):
            ns = {s.point.n for s in samples}
            if len(ns) != 1:
                raise DimensionError("pair samples with different ambient sizes")
            ij = [(s.point.i, s.point.j) for s in samples]
            return cls.pairs(ij, first.n, y, rho)
        return cls.dense(np.stack([s.point.X for s in samples]), y, rho)

    def __len__(self):
        return self.targets.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return SampleSet(self.kind, self.data[idx], self.targets[idx],
                         self.rho[idx], dim=self.dim)

    def sample(self, k):
        rel = Relation(int(self.rho[k]))
        if self.kind == "rank_one":
            point = RankOne(self.data[k])
        elif self.kind == "pair":
            point = PairDiff(int(self.data[k, 0]), int(self.data[k, 1]), self.dim)
        else:
            point = Dense(self.data[k])
        return Sample(point, float(self.targets[k]), rel)

    def __iter__(self):
        return (self.sample(k) for k in range(len(self)))

    def scaled(self, data_scale=1.0, target_scale=1.0):
        """Copy with data points multiplied by ``data_scale`` and targets by
        ``target_scale`` (pair data only supports ``data_scale == 1``)."""
        if self.kind == "pair":
            if data_scale != 1.0:
                raise ValueError("pair data cannot be rescaled")
            data = self.data
        elif self.kind == "rank_one":
            data = self.data * np.sqrt(data_scale)
        else:
            data = self.data * data_scale
        return SampleSet(self.kind, data, self.targets * target_scale, self.rho, self.dim)

    def _check(self, rows):
        if rows != self.dim:
            raise DimensionError(f"model dimension {rows} does not match data dimension {self.dim}")

    # -- linear algebra kernels -------------------------------------------
    def predict_factor(self, B):
        """``Tr(B B^T X_k)`` for every sample."""
        self._check(B.shape[0])
        if self.kind == "rank_one":
            Z = self.data @ B
            return np.einsum("ij,ij->i", Z, Z)
        if self.kind == "pair":
            D = B[self.data[:, 0]] - B[self.data[:, 1]]
            return np.einsum("ij,ij->i", D, D)
        T = self.data @ B
        return np.einsum("nij,ij->n", T, B)

    def predict_full(self, W):
        """``Tr(W X_k)`` for a full symmetric ``W``."""
        self._check(W.shape[0])
        if self.kind == "rank_one":
            return np.einsum("ij,ij->i", self.data @ W, self.data)
        if self.kind == "pair":
            i, j = self.data[:, 0], self.data[:, 1]
            return W[i, i] + W[j, j] - 2.0 * W[i, j]
        return np.einsum("nij,ij->n", self.data, W)

    def apply(self, e, B):
        """``sum_k e_k Sym(X_k) B`` in input order."""
        self._check(B.shape[0])
        if self.kind == "rank_one":
            return self.data.T @ (e[:, None] * (self.data @ B))
        if self.kind == "pair":
            i, j = self.data[:, 0], self.data[:, 1]
            D = e[:, None] * (B[i] - B[j])
            out = np.zeros_like(B, dtype=float)
            np.add.at(out, i, D)
            np.add.at(out, j, -D)
            return out
        return np.einsum("n,nij,jk->ik", e, self.data, B)

    def assemble(self, e):
        """``sum_k e_k Sym(X_k)`` as a dense symmetric matrix."""
        if self.kind == "rank_one":
            return self.data.T @ (e[:, None] * self.data)
        if self.kind == "pair":
            i, j = self.data[:, 0], self.data[:, 1]
            out = np.zeros((self.dim, self.dim))
            np.add.at(out, (i, i), e)
            np.add.at(out, (j, j), e)
            np.add.at(out, (i, j), -e)
            np.add.at(out, (j, i), -e)
            return out
        return np.tensordot(e, self.data, axes=1)

    def residuals(self, y_hat):
        return _active_residuals(y_hat, self.targets, self.rho)


def as_sample_set(samples):
    if isinstance(samples, SampleSet):
        return samples
    if isinstance(samples, Sample):
        return SampleSet.from_samples([samples])
    return SampleSet.from_samples(samples)


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class PolarGradient:
    """Polar gradient in update form: ``xi_u`` is the horizontal subspace
    part, ``H = R^-1 xi_R2 R^-1`` the exponent form of the shape part."""

    xi_u: np.ndarray
    H: np.ndarray

    def __add__(self, other):
        return PolarGradient(self.xi_u + other.xi_u, self.H + other.H)

    def __mul__(self, a):
        return PolarGradient(a * self.xi_u, a * self.H)

    __rmul__ = __mul__

    def tangent(self, R):
        return geo.PolarTangent(self.xi_u, R @ self.H @ R)


@dataclass(frozen=True)
class FlatModel:
    """``W = G G^T`` with full-column-rank ``G`` (d x r), flat metric."""

    G: np.ndarray
    geometry = "flat"

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim != 2 or G.shape[0] < G.shape[1]:
            raise DimensionError(f"flat factor must be d x r with d >= r, got {G.shape}")
        object.__setattr__(self, "G", G)

    @property
    def shape(self):
        return self.G.shape

    def matrix(self):
        return self.G @ self.G.T

    def factor(self):
        return self.G

    def predict(self, samples):
        return samples.predict_factor(self.G)

    def gradient(self, samples, lam=None, e=None):
        if e is None:
            e = samples.residuals(self.predict(samples))
        return (2.0 / len(samples)) * samples.apply(e, self.G)

    def grad_norm(self, grad, lam=None):
        return float(np.linalg.norm(grad))

    def descend(self, grad, step):
        return FlatModel(self.G - step * grad)

    def params(self):
        return self.G.ravel()


@dataclass(frozen=True)
class PolarModel(geo.PolarPoint):
    """``W = U R^2 U^T`` under the lambda-weighted polar metric."""

    geometry = "polar"

    def predict(self, samples):
        return samples.predict_factor(self.U @ self.R)

    def gradient(self, samples, lam=0.5, e=None):
        wu, wr = geo._weights(lam)
        if e is None:
            e = samples.residuals(self.predict(samples))
        n = len(samples)
        A = samples.apply(e, self.U) / n
        M = geo.sym(self.U.T @ A)
        if wu > 0:
            xi_u = (2.0 * wu) * (A - self.U @ M) @ self.R2()
        else:
            xi_u = np.zeros_like(self.U)
        if wr > 0:
            H = wr * geo.sym(self.R @ M @ self.R)
        else:
            H = np.zeros_like(self.R)
        return PolarGradient(xi_u, H)

    def grad_norm(self, grad, lam=0.5):
        wu, wr = geo._weights(lam)
        total = 0.0
        if wu > 0:
            total += np.sum(grad.xi_u ** 2) / wu
        if wr > 0:
            total += np.sum(grad.H ** 2) / wr
        return float(np.sqrt(total))

    def descend(self, grad, step):
        return geo.polar_retract(self, -grad.xi_u, -grad.H, step)

    def params(self):
        return np.concatenate([self.U.ravel(), self.R.ravel()])


@dataclass(frozen=True)
class ConeAffineModel:
    """Full-rank SPD ``W`` under the affine-invariant metric."""

    W: np.ndarray
    geometry = "cone-affine"

    def __post_init__(self):
        W = geo._square(self.W, "W")
        object.__setattr__(self, "W", 0.5 * (W + W.T))

    @property
    def shape(self):
        return self.W.shape

    def matrix(self):
        return self.W

    def factor(self):
        return geo.spd_sqrt(self.W)

    def predict(self, samples):
        return samples.predict_full(self.W)

    def gradient(self, samples, lam=None, e=None):
        if e is None:
            e = samples.residuals(self.predict(samples))
        A = samples.assemble(e) / len(samples)
        return geo.sym(self.W @ A @ self.W)

    def grad_norm(self, grad, lam=None):
        return geo.metric_norm("cone-affine", self.W, grad)

    def descend(self, grad, step):
        return ConeAffineModel(geo.cone_affine_exp(self.W, -step * grad))

    def params(self):
        return self.W.ravel()


@dataclass(frozen=True)
class ConeLogModel:
    """SPD ``W = exp(S)`` parametrized by the symmetric ``S = log W``.

    With ``exact=True`` (default) the gradient is the true gradient of
    ``S -> f(exp(S))``, i.e. ``e * Dexp(S)[Sym(X)]``. With ``exact=False`` it
    is the commuting approximation ``e * Sym(X)``, whose descent step is the
    von Neumann divergence update.
    """

    S: np.ndarray
    exact: bool = True
    geometry = "cone-logeuclidean"

    def __post_init__(self):
        S = geo._square(self.S, "S")
        S = 0.5 * (S + S.T)
        w, V = np.linalg.eigh(S)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "_eig", (w, V))

    @classmethod
    def from_spd(cls, W, exact=True):
        return cls(geo.spd_log(W), exact)

    @property
    def shape(self):
        return self.S.shape

    def matrix(self):
        w, V = self._eig
        return geo._from_eig(np.exp(w), V)

    def factor(self):
        w, V = self._eig
        return V * np.exp(0.5 * w)

    def predict(self, samples):
        return samples.predict_full(self.matrix())

    def gradient(self, samples, lam=None, e=None):
        if e is None:
            e = samples.residuals(self.predict(samples))
        A = geo.sym(samples.assemble(e) / len(samples))
        if not self.exact:
            return A
        w, V = self._eig
        return geo._from_eig_frechet(w, V, A)

    def grad_norm(self, grad, lam=None):
        return float(np.linalg.norm(grad))

    def descend(self, grad, step):
        return ConeLogModel(self.S - step * grad, self.exact)

    def params(self):
        return self.S.ravel()


Model = Union[FlatModel, PolarModel, ConeAffineModel, ConeLogModel]

MODEL_TYPES = {
    "flat": FlatModel,
    "polar": PolarModel,
    "cone-affine": ConeAffineModel,
    "cone-logeuclidean": ConeLogModel,
}


def model_from_factor(geometry, G):
    """Build a model of the given geometry representing ``W = G G^T``."""
    G = np.asarray(G, dtype=float)
    if geometry == "flat":
        return FlatModel(G)
    if geometry == "polar":
        P = geo.PolarPoint.from_factor(G)
        return PolarModel(P.U, P.R)
    if G.shape[0] != G.shape[1]:
        raise ConfigurationError(f"{geometry} requires r == d")
    W = G @ G.T
    if geometry == "cone-affine":
        return ConeAffineModel(W)
    if geometry == "cone-logeuclidean":
        return ConeLogModel.from_spd(W)
    raise ConfigurationError(f"unknown geometry {geometry!r}")


def empirical_cost(model, samples):
    """``(1/2n) sum_k e_k^2`` with inactive inequalities contributing zero."""
    e = samples.residuals(model.predict(samples))
    return 0.5 * float(np.mean(e ** 2))


# ---------------------------------------------------------------------------
# single-sample API

def predict(model, point):
    """Prediction ``Tr(W Sym(X))`` for a single data point."""
    batch = SampleSet.from_samples([Sample(point, 0.0)])
    return float(model.predict(batch)[0])


def _single(model, sample, lam):
    return model.gradient(as_sample_set(sample), lam)


def grad_flat(G, sample):
    """Horizontal gradient ``2 e Sym(X) G`` of the flat geometry."""
    model = G if isinstance(G, FlatModel) else FlatModel(G)
    return _single(model, sample, None)


def grad_polar(P, sample, lam=0.5):
    """Polar gradient ``(2 lam e Pi_U Sym(X) U R^2, (1-lam) e R U^T Sym(X) U R)``."""
    model = P if isinstance(P, PolarModel) else PolarModel(P.U, P.R)
    return _single(model, sample, lam)


def grad_cone_affine(W, sample):
    """Affine-invariant gradient ``e W Sym(X) W``."""
    model = W if isinstance(W, ConeAffineModel) else ConeAffineModel(W)
    return _single(model, sample, None)


def grad_logeuclidean(S, sample, exact=True):
    """Log-Euclidean gradient in log coordinates (see :class:`ConeLogModel`)."""
    model = S if isinstance(S, ConeLogModel) else ConeLogModel(S, exact)
    return _single(model, sample, None)


def minibatch_gradient(model, samples: Union[SampleSet, Sequence[Sample]], lam=0.5):
    """Mean of the per-sample gradients over a mini-batch."""
    batch = as_sample_set(samples)
    if len(batch) == 0:
        raise ValueError("empty batch")
    return model.gradient(batch, lam)


def oja_update(U, x, s):
    """Oja's subspace-tracking step ``qf(U + s (I - U U^T) x x^T U)``."""
    U = np.asarray(U, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != U.shape[0]:
        raise DimensionError("data vector does not match the subspace dimension")
    if s == 0:
        return U.copy()
    px = x - U @ (U.T @ x)
    return geo.qf(U + s * np.outer(px, x @ U))
