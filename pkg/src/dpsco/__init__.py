"""Multi-stage differentially private SGD for stochastic convex
optimization."""

from .core import (LabeledDataset, LossModel, PrivacyBudget, RunRecord,
                   approx_budget, empirical_risk, hinge_model, logistic_model,
                   loss_gradient, loss_value, proximal_wrapped, pure_budget,
                   squared_linear_model, tnc_model)
from .geometry import Box, FeasibleSet, Intersection, L1Ball, L2Ball, \
    membership, project
from .mechanisms import NoiseSpec, gaussian_scale, laplace_scale, sample_noise
from .algorithms import (epoch_dp_sgd, faster_dpsgd_sc, iterated_phased_sgd,
                         phased_erm, phased_sgd, phased_sgd_sc, psa, psa2)

__all__ = [
    "LabeledDataset", "LossModel", "PrivacyBudget", "RunRecord",
    "approx_budget", "pure_budget", "empirical_risk",
    "hinge_model", "logistic_model", "squared_linear_model", "tnc_model",
    "proximal_wrapped", "loss_value", "loss_gradient",
    "FeasibleSet", "L1Ball", "L2Ball", "Box", "Intersection",
    "project", "membership",
    "NoiseSpec", "gaussian_scale", "laplace_scale", "sample_noise",
    "phased_sgd", "phased_erm", "phased_sgd_sc", "psa", "psa2",
    "iterated_phased_sgd", "epoch_dp_sgd", "faster_dpsgd_sc",
]
