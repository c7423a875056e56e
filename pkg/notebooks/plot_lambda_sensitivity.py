"""
Sensitivity of the polar algorithm to lambda
============================================

``lam`` weighs subspace against shape updates in the polar metric. It does not
change the stationary points, so at a tight tolerance the test cost barely
moves with ``lam``; the iteration count does.
"""
import numpy as np

from psdreg import (BatchConfig, SyntheticSpec, batch_fit, empirical_cost, model_from_factor,
                    synth_regression)

problems = [synth_regression(SyntheticSpec(10, 5, 500, 500, 0.1, seed)) for seed in range(3)]
inits = [np.random.default_rng(100 + s).standard_normal((10, 5)) for s in range(3)]

# %%
for eps in (1e-3, 1e-5):
    print(f"eps_tol = {eps:g}")
    for lam in (0.1, 0.3, 0.5, 0.7, 0.9):
        costs, iters = [], []
        for prob, G0 in zip(problems, inits):
            model, rep = batch_fit(model_from_factor("polar", G0), prob.train, lam,
                                   BatchConfig(eps_tol=eps))
            costs.append(empirical_cost(model, prob.test))
            iters.append(rep.iterations)
        print(f"  lam={lam:.1f}  mean test cost {np.mean(costs):8.3f}  mean iterations {np.mean(iters):6.1f}")
