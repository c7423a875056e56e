import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm, logm, sqrtm
from scipy.stats import ortho_group

from psdreg import geometry as geo
from psdreg.errors import ConfigurationError, DegenerateInputError, DimensionError, DomainError

seeds = st.integers(0, 2 ** 31 - 1)


def random_spd(rng, d, floor=0.5):
    A = rng.standard_normal((d, d))
    return A @ A.T / d + floor * np.eye(d)


# --- sym ----------------------------------------------------------------------

def test_sym_examples():
    S = np.array([[1.0, 2.0], [2.0, 5.0]])
    np.testing.assert_array_equal(geo.sym(S), S)
    np.testing.assert_array_equal(geo.sym([[0, 2], [0, 0]]), [[0, 1], [1, 0]])


def test_sym_elementwise_oracle():
    B = np.random.default_rng(0).standard_normal((8, 8))
    oracle = np.array([[(B[i, j] + B[j, i]) / 2 for j in range(8)] for i in range(8)])
    np.testing.assert_allclose(geo.sym(B), oracle, rtol=0, atol=1e-15)
    S = geo.sym(B)
    assert np.array_equal(S, S.T)


def test_sym_rejects_non_square():
    with pytest.raises(DimensionError):
        geo.sym(np.ones((2, 3)))


# --- qf -----------------------------------------------------------------------

def test_qf_fixed_points():
    Q = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 3)))[0]
    Q = Q * np.sign(np.diag(np.linalg.qr(Q)[1]))
    np.testing.assert_allclose(geo.qf(Q), Q, atol=1e-14)
    np.testing.assert_allclose(geo.qf(np.diag([2.0, 3.0])), np.eye(2), atol=1e-15)


def test_qf_reconstruction():
    A = np.random.default_rng(2).standard_normal((6, 3))
    Q, R = geo.qr_positive(A)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(Q @ R, A, atol=1e-12)
    assert np.all(np.diag(R) > 0)
    assert np.allclose(R, np.triu(R))


def test_qf_rank_deficient():
    A = np.ones((5, 2))
    with pytest.raises(DegenerateInputError):
        geo.qf(A)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_qf_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((7, 3))
    O = ortho_group.rvs(7, random_state=seed % (2 ** 32))
    np.testing.assert_allclose(geo.qf(O @ A), O @ geo.qf(A), atol=1e-12)


# --- Grassmann ------------------------------------------------------------------

def test_grassmann_project_examples():
    U = geo.qf(np.random.default_rng(3).standard_normal((5, 2)))
    np.testing.assert_allclose(geo.grassmann_project(U, U), 0.0, atol=1e-15)
    e1 = np.array([[1.0], [0.0]])
    np.testing.assert_allclose(geo.grassmann_project(e1, np.array([[3.0], [4.0]])), [[0.0], [4.0]])


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_grassmann_project_idempotent_and_horizontal(seed):
    rng = np.random.default_rng(seed)
    U = geo.qf(rng.standard_normal((8, 3)))
    D = rng.standard_normal((8, 3))
    P = geo.grassmann_project(U, D)
    np.testing.assert_allclose(geo.grassmann_project(U, P), P, atol=1e-12)
    np.testing.assert_allclose(U.T @ P, 0.0, atol=1e-12)


def test_grassmann_project_shape_mismatch():
    with pytest.raises(DimensionError):
        geo.grassmann_project(np.eye(3)[:, :2], np.ones((4, 2)))


def test_grassmann_exp_examples():
    U = geo.qf(np.random.default_rng(4).standard_normal((5, 2)))
    np.testing.assert_array_equal(geo.grassmann_exp(U, np.zeros_like(U), 1.0), U)
    theta = 0.7
    out = geo.grassmann_exp(np.array([[1.0], [0.0]]), np.array([[0.0], [theta]]), 1.0)
    np.testing.assert_allclose(out, [[np.cos(theta)], [np.sin(theta)]], atol=1e-14)


def test_grassmann_exp_vs_qf_second_order():
    rng = np.random.default_rng(5)
    U = geo.qf(rng.standard_normal((9, 3)))
    xi = geo.grassmann_project(U, rng.standard_normal((9, 3)))
    errs = []
    for s in (1e-2, 1e-3):
        E = geo.grassmann_exp(U, xi, s)
        np.testing.assert_allclose(E.T @ E, np.eye(3), atol=1e-10)
        # compare subspaces through projectors (bases differ by a rotation)
        Q = geo.grassmann_retract_qf(U, xi, s)
        errs.append(np.linalg.norm(E @ E.T - Q @ Q.T))
    # O(s^2): shrinking s by 10 shrinks the gap by about 100
    assert errs[1] < errs[0] / 50


def test_grassmann_retract_qf():
    rng = np.random.default_rng(6)
    U = geo.qf(rng.standard_normal((6, 2)))
    np.testing.assert_allclose(geo.grassmann_retract_qf(U, np.zeros_like(U), 0.0), U, atol=1e-15)
    xi = geo.grassmann_project(U, rng.standard_normal((6, 2)))
    Q = geo.grassmann_retract_qf(U, xi, 0.3)
    np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-12)
    O = ortho_group.rvs(6, random_state=6)
    np.testing.assert_allclose(geo.grassmann_retract_qf(O @ U, O @ xi, 0.3), O @ Q, atol=1e-12)


# --- SPD cone -------------------------------------------------------------------

def test_spd_exp_examples():
    np.testing.assert_allclose(geo.spd_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(geo.spd_exp(np.diag([0.5, -1.0])), np.diag(np.exp([0.5, -1.0])),
                               rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_spd_log_exp_roundtrip(seed):
    S = geo.sym(np.random.default_rng(seed).standard_normal((6, 6)))
    np.testing.assert_allclose(geo.spd_log(geo.spd_exp(S)), S, atol=1e-9)


def test_spd_exp_matches_scipy():
    S = geo.sym(np.random.default_rng(7).standard_normal((5, 5)))
    np.testing.assert_allclose(geo.spd_exp(S), expm(S), rtol=1e-12, atol=1e-12)
    P = random_spd(np.random.default_rng(8), 5)
    np.testing.assert_allclose(geo.spd_log(P), np.real(logm(P)), atol=1e-10)
    np.testing.assert_allclose(geo.spd_sqrt(P), np.real(sqrtm(P)), atol=1e-10)


def test_spd_log_domain_error():
    with pytest.raises(DomainError):
        geo.spd_log(np.diag([1.0, -1.0]))
    with pytest.raises(DomainError):
        geo.spd_log(np.diag([1.0, 0.0]))


def test_expm_frechet_matches_scipy():
    from scipy.linalg import expm_frechet
    rng = np.random.default_rng(9)
    S = geo.sym(rng.standard_normal((5, 5)))
    E = geo.sym(rng.standard_normal((5, 5)))
    np.testing.assert_allclose(geo.expm_frechet_sym(S, E), expm_frechet(S, E, compute_expm=False),
                               rtol=1e-10, atol=1e-12)


def test_cone_affine_exp():
    rng = np.random.default_rng(10)
    W = random_spd(rng, 4)
    xi = geo.sym(rng.standard_normal((4, 4)))
    np.testing.assert_allclose(geo.cone_affine_exp(W, np.zeros((4, 4))), W, atol=1e-12)
    np.testing.assert_allclose(geo.cone_affine_exp(np.eye(4), xi), geo.spd_exp(xi), atol=1e-12)
    out = geo.cone_affine_exp(W, 3.0 * xi)
    assert np.linalg.eigvalsh(out).min() > 0
    # oracle with scipy matrix functions
    h = np.real(sqrtm(W))
    hi = np.linalg.inv(h)
    np.testing.assert_allclose(geo.cone_affine_exp(W, xi), h @ expm(hi @ xi @ hi) @ h,
                               rtol=1e-9, atol=1e-10)


def test_cone_affine_exp_rejects_non_spd():
    with pytest.raises(DomainError):
        geo.cone_affine_exp(np.diag([1.0, -2.0]), np.eye(2))


def test_cone_logeuclidean_retract():
    rng = np.random.default_rng(11)
    W = random_spd(rng, 4)
    xi = geo.sym(rng.standard_normal((4, 4)))
    np.testing.assert_allclose(geo.cone_logeuclidean_retract(W, xi, 0.0), W, atol=1e-9)
    np.testing.assert_allclose(geo.cone_logeuclidean_retract(np.eye(2), np.diag([1.0, -1.0]), 1.0),
                               np.diag([np.e, 1 / np.e]), rtol=1e-14)
    assert np.linalg.eigvalsh(geo.cone_logeuclidean_retract(W, xi, 2.0)).min() > 0


def test_affine_exp_vs_logeuclidean_second_order():
    # both maps agree to first order at W = I only up to O(s^2); check at a generic W
    # through the affine retraction W + s xi + O(s^2)
    rng = np.random.default_rng(12)
    W = random_spd(rng, 4)
    xi = geo.sym(rng.standard_normal((4, 4)))
    errs = [np.linalg.norm(geo.cone_affine_exp(W, s * xi) - (W + s * xi)) for s in (1e-2, 5e-3)]
    assert errs[1] < errs[0] / 3.5


# --- polar ----------------------------------------------------------------------

def test_polar_retract_examples():
    rng = np.random.default_rng(13)
    P = geo.PolarPoint.from_factor(rng.standard_normal((5, 2)))
    assert geo.polar_retract(P, rng.standard_normal((5, 2)), np.eye(2), 0.0) is P
    P0 = geo.PolarPoint(np.eye(3)[:, :2], np.eye(2))
    out = geo.polar_retract(P0, np.zeros((3, 2)), np.diag([2 * np.log(2), 0.0]), 1.0)
    np.testing.assert_allclose(out.R, np.diag([2.0, 1.0]), atol=1e-14)
    np.testing.assert_allclose(out.U, P0.U, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_polar_retract_rank(seed):
    rng = np.random.default_rng(seed)
    P = geo.PolarPoint.from_factor(rng.standard_normal((7, 3)))
    xi = geo.grassmann_project(P.U, rng.standard_normal((7, 3)))
    H = geo.sym(rng.standard_normal((3, 3)))
    Q = geo.polar_retract(P, xi, H, 0.5)
    np.testing.assert_allclose(Q.U.T @ Q.U, np.eye(3), atol=1e-10)
    np.testing.assert_array_equal(Q.R, Q.R.T)
    assert np.linalg.eigvalsh(Q.R).min() > 0
    w = np.linalg.eigvalsh(Q.matrix())
    assert np.sum(w > 1e-10 * w.max()) == 3
    assert np.all(w[-3:] > 0)
    # the symmetrization keeps R exp(sH/2) (R exp(sH/2))^T
    F = P.R @ geo.spd_exp(0.25 * H)
    np.testing.assert_allclose(Q.R2(), F @ F.T, rtol=1e-10, atol=1e-12)


def test_polar_from_factor_reconstructs():
    G = np.random.default_rng(14).standard_normal((6, 3))
    P = geo.PolarPoint.from_factor(G)
    np.testing.assert_allclose(P.matrix(), G @ G.T, atol=1e-12)
    with pytest.raises(DegenerateInputError):
        geo.PolarPoint.from_factor(np.ones((4, 2)))


# --- metric norm ------------------------------------------------------------------

def test_metric_norm_examples():
    rng = np.random.default_rng(15)
    G = rng.standard_normal((5, 2))
    assert geo.metric_norm("flat", G, np.zeros_like(G)) == 0.0
    assert geo.metric_norm("flat", G, G) == pytest.approx(np.linalg.norm(G))
    P = geo.PolarPoint.from_factor(G)
    xi_u = geo.grassmann_project(P.U, rng.standard_normal((5, 2)))
    xi_r2 = geo.sym(rng.standard_normal((2, 2)))
    T = geo.PolarTangent(xi_u, xi_r2)
    Rinv = np.linalg.inv(P.R2())
    flat2 = np.trace(xi_u.T @ xi_u)
    aff2 = np.trace(xi_r2 @ Rinv @ xi_r2 @ Rinv)
    assert geo.metric_norm("polar", P, T, 0.5) == pytest.approx(np.sqrt(2 * flat2 + 2 * aff2), rel=1e-12)
    assert geo.metric_norm("polar", P, geo.PolarTangent(0 * xi_u, 0 * xi_r2), 0.5) == 0.0


def test_metric_norm_affine():
    rng = np.random.default_rng(16)
    W = random_spd(rng, 4)
    xi = geo.sym(rng.standard_normal((4, 4)))
    Wi = np.linalg.inv(W)
    assert geo.metric_norm("cone-affine", W, xi) == pytest.approx(np.sqrt(np.trace(xi @ Wi @ xi @ Wi)))


def test_metric_norm_frozen_components():
    P = geo.PolarPoint(np.eye(3)[:, :1], np.eye(1))
    xi_u = np.array([[0.0], [1.0], [0.0]])
    with pytest.raises(ConfigurationError):
        geo.metric_norm("polar", P, geo.PolarTangent(xi_u, np.zeros((1, 1))), 0.0)
    with pytest.raises(ConfigurationError):
        geo.metric_norm("polar", P, geo.PolarTangent(0 * xi_u, np.eye(1)), 1.0)
    assert geo.metric_norm("polar", P, geo.PolarTangent(xi_u, np.zeros((1, 1))), 1.0) == 1.0


# --- closeness / divergences ------------------------------------------------------------

def test_closeness():
    rng = np.random.default_rng(17)
    Ga, Gb = rng.standard_normal((2, 5, 2))
    assert geo.closeness("flat", Ga, Ga) == 0.0
    assert geo.closeness("flat", Ga, Gb) == pytest.approx(sum((Ga.ravel() - Gb.ravel()) ** 2))
    Pa, Pb = geo.PolarPoint.from_factor(Ga), geo.PolarPoint.from_factor(Gb)
    assert geo.closeness("polar", Pa, Pa) == pytest.approx(0.0, abs=1e-12)
    assert geo.closeness("polar", Pa, Pb) > 0
    e1 = geo.PolarPoint(np.array([[1.0], [0.0]]), np.eye(1))
    e2 = geo.PolarPoint(np.array([[0.0], [1.0]]), np.eye(1))
    assert geo.closeness("polar", e1, e2, lam=1.0) == pytest.approx(np.pi ** 2 / 4)
    with pytest.raises(DimensionError):
        geo.closeness("flat", Ga, Ga[:, :1])


def test_divergences():
    rng = np.random.default_rng(18)
    W = random_spd(rng, 4)
    assert geo.divergence("logdet", W, W) == pytest.approx(0.0, abs=1e-12)
    assert geo.divergence("vonNeumann", W, W) == pytest.approx(0.0, abs=1e-12)
    a, d = 2.5, 4
    assert geo.divergence("logdet", a * np.eye(d), np.eye(d)) == pytest.approx(d * (a - np.log(a) - 1))
    assert geo.divergence("vonNeumann", np.diag([2.0, 1.0]), np.eye(2)) == pytest.approx(2 * np.log(2) - 1)
    V = W + 0.1 * geo.sym(rng.standard_normal((4, 4)))
    assert geo.divergence("logdet", V, W) > 0
    assert geo.divergence("vonNeumann", V, W) > 0
    with pytest.raises(DomainError):
        geo.divergence("logdet", W, np.diag([1.0, 1.0, 1.0, 0.0]))
