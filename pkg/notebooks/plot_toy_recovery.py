"""
Recovering a low-rank PSD matrix from noisy quadratic observations
==================================================================

Observations ``y = (x^T W* x)(1 + nu)`` are generated from a rank-5 matrix in
dimension 10. We fit a rank-5 model with the batch polar algorithm and compare
the final training cost with the cost of the generator itself.
"""
import numpy as np

from psdreg import SyntheticSpec, batch_fit, empirical_cost, model_from_factor, synth_regression

# %%
# Generate the problem. ``noise_std=0.1`` gives a noise variance of 0.01.
prob = synth_regression(SyntheticSpec(d=10, r=5, n_train=500, n_test=500, noise_std=0.1, seed=1))
print("oracle train cost:", empirical_cost(prob.truth, prob.train))
print("oracle test cost: ", empirical_cost(prob.truth, prob.test))

# %%
# Fit from a random factor. The model only sees the training half.
G0 = np.random.default_rng(0).standard_normal((10, 5))
model, report = batch_fit(model_from_factor("polar", G0), prob.train, lam=0.5)
print(f"{report.iterations} iterations, stopped on {report.termination}")
print("train cost:", report.cost[-1])
print("test cost: ", empirical_cost(model, prob.test))

# %%
# The fitted matrix is rank 5 and close to the generator in relative terms.
W, Wstar = model.matrix(), prob.truth.matrix()
print("rank:", np.linalg.matrix_rank(W))
print("relative error:", np.linalg.norm(W - Wstar) / np.linalg.norm(Wstar))
