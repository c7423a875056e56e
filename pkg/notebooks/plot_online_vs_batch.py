"""
Online versus batch learning
============================

With many samples, a few epochs of mini-batch stochastic descent get close to
the batch solution. The step-size scale and annealing constant are chosen by a
short grid search on a subset of the data.
"""
import time

import numpy as np

from psdreg import (FlatModel, OnlineConfig, SyntheticSpec, batch_fit, empirical_cost,
                    online_fit, synth_regression)

prob = synth_regression(SyntheticSpec(d=20, r=5, n_train=20000, n_test=5000, seed=8))
G0 = np.random.default_rng(0).standard_normal((20, 5))

# %%
t = time.perf_counter()
batch, rb = batch_fit(FlatModel(G0), prob.train)
print(f"batch : test cost {empirical_cost(batch, prob.test):8.3f}  "
      f"({rb.iterations} iterations, {time.perf_counter() - t:.2f}s)")

# %%
for p in (1, 32, 256):
    t = time.perf_counter()
    online, ro = online_fit(FlatModel(G0), prob.train, config=OnlineConfig(epochs=3, batch_size=p))
    print(f"online p={p:<3}: test cost {empirical_cost(online, prob.test):8.3f}  "
          f"(s={ro.extra['s']}, t0={ro.extra['t0']}, {time.perf_counter() - t:.2f}s)")
