"""Regression on the cone of fixed-rank positive semidefinite matrices.

Riemannian batch and online gradient descent in four geometries (flat
factor ``G G^T``, polar ``U R^2 U^T``, affine-invariant and log-Euclidean
cones), with kernel learning and Mahalanobis distance learning built on top.
"""
from . import geometry
from .errors import (ConfigurationError, DataError, DegenerateInputError, DimensionError,
                     DivergenceError, DomainError, FormatError, PsdRegError,
                     StepFailureError)
from .geometry import PolarPoint, PolarTangent, qf, spd_exp, spd_log
from .regression import (ConeAffineModel, ConeLogModel, Dense, FlatModel, PairDiff,
                         PolarGradient, PolarModel, RankOne, Relation, Sample, SampleSet,
                         empirical_cost, grad_cone_affine, grad_flat, grad_logeuclidean,
                         grad_polar, loss, minibatch_gradient, model_from_factor,
                         oja_update, predict, residual)
from .optim import (BatchConfig, FitReport, OnlineConfig, StepSchedule, adaptive_step_flat,
                    armijo_search, batch_fit, estimate_grad_norm, online_fit,
                    pretrain_grid_search, step_schedule, stopping_check)
from .applications import (LabeledDataset, build_kernel, generate_kernel_constraints,
                           generate_mahalanobis_constraints, kernel_embedding, kmeans,
                           kmeans_nmi, knn_evaluate, knn_predict, mahalanobis_distance,
                           mahalanobis_distances, nmi, pca_subspace)
from .dataio import (SyntheticSpec, load_dataset, load_model, normalize, save_model, split,
                     synth_regression)
from .checks import gradient_check, gradient_suite

__version__ = "0.1.0"
