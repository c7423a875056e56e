"""
Low-rank Mahalanobis distance learning
======================================

Constraints ``d_W(x_i, x_j) <= l`` for same-class pairs and ``>= u`` for
different-class pairs, with ``l`` and ``u`` the 5th and 95th percentiles of the
initial distances, drive a rank-2 metric. Half of the features share one
latent nuisance factor, so after normalization the directions of largest
variance, which PCA keeps, carry no class information.
"""
import numpy as np

from psdreg import (LabeledDataset, batch_fit, generate_mahalanobis_constraints, knn_predict,
                    model_from_factor, normalize, pca_subspace, split)
from psdreg.applications import mahalanobis_distances

rng = np.random.default_rng(3)
n, d = 240, 8
labels = rng.integers(0, 4, n)
X = rng.standard_normal((n, d))
nuisance = rng.standard_normal((n, 2))
X[:, 4:] = np.repeat(nuisance, 2, axis=1) + 0.3 * X[:, 4:]
X[:, 0] += 1.5 * labels                        # informative
X[:, 1] += 1.5 * (labels % 2)
data, _ = normalize(LabeledDataset(X, labels))

# %%
# Two-fold cross validation over a few random partitions.
acc = {"PCA": [], "learned": []}
for rep_idx, assign in enumerate(split(n, folds=2, repeats=5, seed=0)):
    for f in range(2):
        tr, te = np.flatnonzero(assign != f), np.flatnonzero(assign == f)
        train = LabeledDataset(data.features[tr], labels[tr])
        G0, _ = pca_subspace(train, 2)
        start = model_from_factor("flat", G0)
        cons = generate_mahalanobis_constraints(train, start.matrix(), count=500, rng=rep_idx)
        model, _ = batch_fit(start, cons.samples, lam=0.5)
        for name, m in (("PCA", start), ("learned", model)):
            D = mahalanobis_distances(m, data.features)
            pred = knn_predict(D[np.ix_(te, tr)], labels[tr], 5)
            acc[name].append(np.mean(pred == labels[te]))

for name, values in acc.items():
    print(f"{name:>8}: 5-NN accuracy {np.mean(values):.3f} +/- {np.std(values):.3f}")
