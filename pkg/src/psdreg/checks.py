"""Finite-difference verification of the Riemannian gradients.

For a random instance and random (horizontal) directions ``xi`` the
directional derivative ``Df(W)[xi]``, estimated by central differences
through the parametrization of each geometry, is compared with the metric
pairing ``g(xi, grad f)``.
"""
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .regression import (ConeAffineModel, ConeLogModel, FlatModel, PolarModel,
                         SampleSet, empirical_cost)


@dataclass
class GradCheckResult:
    geometry: str
    lam: float
    max_violation: float      # max of |Df - g| / (1 + |Df|)
    derivatives: np.ndarray
    pairings: np.ndarray

    def passed(self, tol=1e-5):
        return self.max_violation <= tol


def _cost_full(samples, W):
    e = samples.residuals(samples.predict_full(W))
    return 0.5 * float(np.mean(e ** 2))


def random_instance(geometry, d=12, r=3, n=6, seed=0):
    """Random model and dense samples for a gradient check."""
    rng = np.random.default_rng(seed)
    if geometry.startswith("cone"):
        r = d
    Xs = rng.standard_normal((n, d, d)) / d
    G = rng.standard_normal((d, r)) / np.sqrt(r)
    W = G @ G.T
    if geometry.startswith("cone"):
        W = W + 0.5 * np.eye(d)
    # targets off the model so that residuals are O(1)
    y = np.einsum("nij,ij->n", 0.5 * (Xs + Xs.transpose(0, 2, 1)), W) + rng.standard_normal(n)
    samples = SampleSet.dense(Xs, y)
    if geometry == "flat":
        model = FlatModel(G)
    elif geometry == "polar":
        P = geo.PolarPoint.from_factor(G)
        model = PolarModel(P.U, P.R)
    elif geometry == "cone-affine":
        model = ConeAffineModel(W)
    elif geometry == "cone-logeuclidean":
        model = ConeLogModel.from_spd(W)
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    return model, samples


def gradient_check(geometry, lam=0.5, d=12, r=3, n_dirs=20, h=1e-5, seed=0):
    model, samples = random_instance(geometry, d, r, seed=seed)
    rng = np.random.default_rng(seed + 1)
    grad = model.gradient(samples, lam)
    dfs, gs = [], []
    for _ in range(n_dirs):
        if geometry == "flat":
            D = rng.standard_normal(model.G.shape)

            def f(t):
                return empirical_cost(FlatModel(model.G + t * D), samples)

            pairing = float(np.sum(D * grad))
        elif geometry == "polar":
            U, R = model.U, model.R
            P = model.R2()
            xi_u = geo.grassmann_project(U, rng.standard_normal(U.shape))
            psi = geo.sym(rng.standard_normal(R.shape))
            xi_p = R @ psi @ R

            def f(t):
                Ut = U + t * xi_u
                return _cost_full(samples, Ut @ (P + t * xi_p) @ Ut.T)

            pairing = 0.0
            if lam > 0:
                pairing += float(np.sum(xi_u * grad.xi_u)) / lam
            if lam < 1:
                pairing += float(np.sum(psi * grad.H)) / (1.0 - lam)
        elif geometry == "cone-affine":
            D = geo.sym(rng.standard_normal(model.W.shape))

            def f(t):
                return _cost_full(samples, model.W + t * D)

            Winv = np.linalg.inv(model.W)
            pairing = float(np.trace(D @ Winv @ grad @ Winv))
        else:
            D = geo.sym(rng.standard_normal(model.S.shape))

            def f(t):
                return _cost_full(samples, geo.spd_exp(model.S + t * D))

            pairing = float(np.sum(D * grad))
        dfs.append((f(h) - f(-h)) / (2.0 * h))
        gs.append(pairing)
    dfs = np.asarray(dfs)
    gs = np.asarray(gs)
    violation = float(np.max(np.abs(dfs - gs) / (1.0 + np.abs(dfs))))
    return GradCheckResult(geometry, lam, violation, dfs, gs)


DEFAULT_SUITE = (("flat", None), ("polar", 0.3), ("polar", 0.5), ("polar", 0.7),
                 ("cone-affine", None), ("cone-logeuclidean", None))


def gradient_suite(seed=0, d=12, r=3, n_dirs=20, h=1e-5):
    return [gradient_check(g, 0.5 if lam is None else lam, d, r, n_dirs, h, seed)
            for g, lam in DEFAULT_SUITE]
