"""Matrix-manifold primitives for the Grassmann manifold, the SPD cone and
fixed-rank PSD matrices.

All functions are pure: they never modify their inputs and return fresh
arrays. Symmetric matrix functions (exp, log, square roots) go through a
symmetric eigendecomposition.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateInputError, DimensionError, DomainError, \
    ConfigurationError, StepFailureError

# relative threshold used for rank and positivity decisions
EIG_RTOL = 1e-12

GEOMETRIES = ("flat", "polar", "cone-affine", "cone-logeuclidean")


def _square(B, name="matrix"):
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {B.shape}")
    return B


def sym(B):
    """Symmetric part ``(B + B^T) / 2`` of a square matrix."""
    B = _square(B)
    return 0.5 * (B + B.T)


def qf(A):
    """Orthogonal factor of the thin QR decomposition of ``A``.

    The sign ambiguity of QR is removed by forcing a strictly positive
    diagonal on the triangular factor, which makes ``qf`` deterministic and
    equivariant: ``qf(O @ A) == O @ qf(A)`` for orthogonal ``O``.

    Raises
    ------
    DegenerateInputError
        If ``A`` is (numerically) rank deficient.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise DimensionError(f"qf expects a tall d x r matrix, got {A.shape}")
    Q, R = np.linalg.qr(A)
    diag = np.diag(R)
    scale = max(np.abs(diag).max(initial=0.0), np.finfo(float).tiny)
    if np.any(np.abs(diag) <= EIG_RTOL * scale) or not np.all(np.isfinite(diag)):
        raise DegenerateInputError("qf: input does not have full column rank")
    return Q * np.sign(diag)


def qr_positive(A):
    """Thin QR with positive diagonal, returning both factors ``(Q, R)``."""
    Q = qf(A)
    return Q, Q.T @ A


def grassmann_project(U, D):
    """Horizontal projection ``(I - U U^T) D`` at the Stiefel point ``U``."""
    U = np.asarray(U, dtype=float)
    D = np.asarray(D, dtype=float)
    if U.shape != D.shape:
        raise DimensionError(f"shape mismatch {U.shape} vs {D.shape}")
    return D - U @ (U.T @ D)


def _check_horizontal(U, xi, tol=1e-8):
    if U.shape != xi.shape:
        raise DimensionError(f"shape mismatch {U.shape} vs {xi.shape}")
    scale = 1.0 + np.linalg.norm(xi)
    if np.linalg.norm(U.T @ xi) > tol * scale:
        raise DomainError("tangent vector is not horizontal (U^T xi != 0)")


def grassmann_exp(U, xi, s=1.0):
    """Geodesic of the Grassmann manifold from ``U`` along ``s * xi``.

    Uses the closed form ``U V cos(S) V^T + Z sin(S) V^T`` from the thin SVD
    ``s * xi = Z S V^T``.
    """
    U = np.asarray(U, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_horizontal(U, xi)
    if s == 0:
        return U.copy()
    Z, sigma, Vt = np.linalg.svd(s * xi, full_matrices=False)
    return (U @ Vt.T) * np.cos(sigma) @ Vt + (Z * np.sin(sigma)) @ Vt


def grassmann_retract_qf(U, xi, s=1.0):
    """QR-based retraction ``qf(U + s * xi)``."""
    U = np.asarray(U, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if U.shape != xi.shape:
        raise DimensionError(f"shape mismatch {U.shape} vs {xi.shape}")
    if s == 0:
        return U.copy()
    return qf(U + s * xi)


def _eigh_sym(S, name="matrix"):
    S = _square(S, name)
    if not np.allclose(S, S.T, rtol=0, atol=1e-10 * (1 + np.abs(S).max(initial=0))):
        raise DomainError(f"{name} is not symmetric")
    return np.linalg.eigh(0.5 * (S + S.T))


def _eigh_spd(P, name="matrix"):
    w, V = _eigh_sym(P, name)
    if w.size and (w[0] <= EIG_RTOL * max(abs(w[-1]), np.finfo(float).tiny)
                   or not np.all(np.isfinite(w))):
        raise DomainError(f"{name} is not positive definite "
                          f"(smallest eigenvalue {w[0]:.3e})")
    return w, V


def _from_eig(w, V):
    out = (V * w) @ V.T
    return 0.5 * (out + out.T)


def spd_exp(S):
    """Matrix exponential of a symmetric matrix (an SPD matrix)."""
    w, V = _eigh_sym(S)
    return _from_eig(np.exp(w), V)


def spd_log(P):
    """Principal matrix logarithm of an SPD matrix."""
    w, V = _eigh_spd(P)
    return _from_eig(np.log(w), V)


def spd_sqrt(P):
    w, V = _eigh_spd(P)
    return _from_eig(np.sqrt(w), V)


def spd_sqrt_and_invsqrt(P):
    w, V = _eigh_spd(P)
    r = np.sqrt(w)
    return _from_eig(r, V), _from_eig(1.0 / r, V)


def is_spd(P):
    try:
        _eigh_spd(P)
    except (DomainError, DimensionError):
        return False
    return True


def expm_frechet_sym(S, E):
    """Fréchet derivative of the matrix exponential at symmetric ``S`` in
    the symmetric direction ``E`` (Daleckii-Krein formula)."""
    w, V = _eigh_sym(S)
    return _from_eig_frechet(w, V, E)


def _from_eig_frechet(w, V, E):
    a = w[:, None]
    b = w[None, :]
    diff = b - a
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.abs(diff) > 1e-12, np.expm1(diff) / diff, 1.0 + 0.5 * diff)
    gamma = np.exp(a) * ratio
    inner = V.T @ E @ V
    out = V @ (gamma * inner) @ V.T
    return 0.5 * (out + out.T)


def cone_affine_exp(W, xi):
    """Exponential map of the affine-invariant metric,
    ``W^(1/2) exp(W^(-1/2) xi W^(-1/2)) W^(1/2)``."""
    W = _square(W, "W")
    xi = _square(xi, "xi")
    if W.shape != xi.shape:
        raise DimensionError(f"shape mismatch {W.shape} vs {xi.shape}")
    half, ihalf = spd_sqrt_and_invsqrt(W)
    inner = ihalf @ sym(xi) @ ihalf
    out = half @ spd_exp(sym(inner)) @ half
    return 0.5 * (out + out.T)


def cone_logeuclidean_retract(W, xi, s=1.0):
    """Log-Euclidean retraction ``exp(log W + s * xi)``."""
    W = _square(W, "W")
    if s == 0:
        _eigh_spd(W, "W")
        return W.copy()
    return spd_exp(spd_log(W) + s * sym(xi))


@dataclass(frozen=True)
class PolarPoint:
    """Fixed-rank PSD matrix ``W = U R^2 U^T`` with ``U`` orthonormal (d x r)
    and ``R`` SPD (r x r)."""

    U: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if U.ndim != 2 or R.shape != (U.shape[1], U.shape[1]):
            raise DimensionError(f"incompatible polar factors {U.shape}, {R.shape}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "R", R)

    @property
    def shape(self):
        return self.U.shape

    def R2(self):
        return self.R @ self.R.T

    def matrix(self):
        UR = self.U @ self.R
        return UR @ UR.T

    def factor(self):
        return self.U @ self.R

    @classmethod
    def from_factor(cls, G):
        """Polar factorization ``G = U R`` from the thin SVD of ``G``."""
        G = np.asarray(G, dtype=float)
        Z, sigma, Vt = np.linalg.svd(G, full_matrices=False)
        if sigma[-1] <= EIG_RTOL * sigma[0]:
            raise DegenerateInputError("factor does not have full column rank")
        return cls(Z @ Vt, (Vt.T * sigma) @ Vt)


@dataclass(frozen=True)
class PolarTangent:
    """Horizontal tangent vector ``(xi_u, xi_r2)`` at a polar point."""

    xi_u: np.ndarray
    xi_r2: np.ndarray


def symmetric_polar_factor(F):
    """SPD factor ``P`` of the left polar decomposition ``F = P Q``.

    ``P P^T == F F^T``, so replacing ``F`` by ``P`` leaves ``F F^T`` intact.
    """
    Z, sigma, _ = np.linalg.svd(F)
    P = (Z * sigma) @ Z.T
    return 0.5 * (P + P.T)


def polar_retract(P, xi_u, H, s=1.0):
    """Retraction on the polar quotient geometry.

    ``U' = qf(U + s xi_u)`` and ``R' = R exp(s H / 2)`` where ``H`` is the
    exponent matrix ``R^-1 xi_R2 R^-1``. The product ``R exp(sH/2)`` is
    brought back to a symmetric positive definite factor with the same
    ``R' R'^T``.

    Raises
    ------
    StepFailureError
        If ``U + s xi_u`` loses rank.
    """
    xi_u = np.asarray(xi_u, dtype=float)
    H = np.asarray(H, dtype=float)
    if xi_u.shape != P.U.shape or H.shape != P.R.shape:
        raise DimensionError("direction does not conform to the polar point")
    if s == 0:
        return P
    try:
        U = qf(P.U + s * xi_u)
    except DegenerateInputError as exc:
        raise StepFailureError(str(exc)) from exc
    if not np.any(H):
        # frozen shape (lambda = 1): keep R bitwise
        return type(P)(U, P.R)
    R = symmetric_polar_factor(P.R @ spd_exp(0.5 * s * sym(H)))
    return type(P)(U, R)


def _weights(lam):
    if not 0.0 <= lam <= 1.0:
        raise ConfigurationError(f"lambda must lie in [0, 1], got {lam}")
    return lam, 1.0 - lam


def metric_norm(geometry, point, tangent, lam=0.5):
    """Norm of a tangent vector under the metric of ``geometry``.

    ``geometry`` is one of ``"flat"`` (tangent: d x r matrix),
    ``"cone-affine"`` (point: SPD W, tangent: symmetric matrix),
    ``"cone-logeuclidean"`` (tangent in log coordinates) or ``"polar"``
    (point: :class:`PolarPoint`, tangent: :class:`PolarTangent`). The polar
    metric is ``(1/lam) flat(xi_u) + (1/(1-lam)) affine(xi_r2)``; at the
    endpoints lam=0 / lam=1 the frozen component must be zero.
    """
    if geometry in ("flat", "cone-logeuclidean"):
        return float(np.linalg.norm(tangent))
    if geometry == "cone-affine":
        Y = np.linalg.solve(point, tangent)
        return float(np.sqrt(max(np.sum(Y * Y.T), 0.0)))
    if geometry == "polar":
        wu, wr = _weights(lam)
        u2 = float(np.sum(tangent.xi_u ** 2))
        Y = np.linalg.solve(point.R2(), tangent.xi_r2)
        r2 = max(float(np.sum(Y * Y.T)), 0.0)
        total = 0.0
        for weight, value, part in ((wu, u2, "subspace"), (wr, r2, "shape")):
            if weight == 0.0:
                if value > 0.0:
                    raise ConfigurationError(
                        f"nonzero {part} component with a frozen {part} (lambda={lam})")
                continue
            total += value / weight
        return float(np.sqrt(total))
    raise ConfigurationError(f"unknown geometry {geometry!r}")


def principal_angles(Ua, Ub):
    """Principal angles between the ranges of two orthonormal bases."""
    sigma = np.linalg.svd(np.asarray(Ua).T @ np.asarray(Ub), compute_uv=False)
    return np.arccos(np.clip(sigma, 0.0, 1.0))


def closeness(kind, a, b, lam=0.5):
    """Closeness diagnostics between two fixed-rank PSD matrices.

    ``kind="flat"`` takes two factors ``G`` and returns ``||G_a - G_b||_F^2``.
    ``kind="polar"`` takes two :class:`PolarPoint` and returns
    ``lam * sum(theta_i^2) + (1 - lam) * ||log(R_b^-1 R_a^2 R_b^-1)||_F^2``.
    """
    if kind == "flat":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != b.shape:
            raise DimensionError(f"rank/shape mismatch {a.shape} vs {b.shape}")
        return float(np.sum((a - b) ** 2))
    if kind == "polar":
        if a.U.shape != b.U.shape:
            raise DimensionError(f"rank/shape mismatch {a.U.shape} vs {b.U.shape}")
        wu, wr = _weights(lam)
        theta = principal_angles(a.U, b.U)
        mu = scipy.linalg.eigh(a.R2(), b.R2(), eigvals_only=True)
        if np.any(mu <= 0):
            raise DomainError("shape factors are not positive definite")
        return float(wu * np.sum(theta ** 2) + wr * np.sum(np.log(mu) ** 2))
    raise ConfigurationError(f"unknown closeness kind {kind!r}")


def divergence(kind, W, Wt):
    """Bregman divergences between SPD matrices: ``"logdet"`` or ``"vonNeumann"``."""
    W = _square(W, "W")
    Wt = _square(Wt, "W_t")
    if W.shape != Wt.shape:
        raise DimensionError(f"shape mismatch {W.shape} vs {Wt.shape}")
    if kind == "logdet":
        _eigh_spd(W, "W")
        _eigh_spd(Wt, "W_t")
        mu = scipy.linalg.eigh(W, Wt, eigvals_only=True)
        return float(np.sum(mu - np.log(mu) - 1.0))
    if kind == "vonNeumann":
        return float(np.trace(W @ spd_log(W) - W @ spd_log(Wt) - W + Wt))
    raise ConfigurationError(f"unknown divergence kind {kind!r}")
