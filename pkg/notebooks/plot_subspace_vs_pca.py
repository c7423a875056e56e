"""
Learning the subspace versus fixing it with PCA
===============================================

A rank-3 target with two dominant eigenvalues is approximated by a rank-2
model. Fixing the range to the top principal components of isotropic data
(``lam=0``) leaves an essentially random subspace; learning it jointly
(``lam=0.5``) finds the dominant directions of the target.
"""
import numpy as np
from scipy.stats import ortho_group

from psdreg import SampleSet, batch_fit, model_from_factor, pca_subspace
from psdreg.geometry import principal_angles

rng = np.random.default_rng(4)
O = ortho_group.rvs(3, random_state=4)
W = O @ np.diag([4.0, 3.0, 0.01]) @ O.T
X = rng.standard_normal((200, 3))
y = np.einsum("ij,jk,ik->i", X, W, X) * (1 + 0.1 * rng.standard_normal(200))
samples = SampleSet.rank_one(X, y)

# %%
# Both runs start from the PCA factor.
G0, U_pca = pca_subspace(X, 2)
start = model_from_factor("polar", G0)
fixed, rf = batch_fit(start, samples, lam=0.0)
joint, rj = batch_fit(start, samples, lam=0.5)

# %%
# Compare costs and the angles to the target's dominant subspace.
target = O[:, :2]
for name, model, rep in (("PCA-fixed", fixed, rf), ("joint", joint, rj)):
    angles = np.degrees(principal_angles(model.U, target))
    print(f"{name:>9}: train cost {rep.cost[-1]:8.4f}  angles to target {np.round(angles, 2)}")
