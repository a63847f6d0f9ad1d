"""Calibrated Gaussian and Laplace vector noise.

The Gaussian per-coordinate standard deviation is
``multiplier * Delta_2 * sqrt(ln(1/delta)) / epsilon`` with multiplier 4 by
default; all logarithms are natural.  Pure-DP vector releases convert an l2
iterate sensitivity s to the l1 sensitivity ``s * sqrt(d)`` before the
Laplace calibration ``Delta_1 / epsilon``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PrivacyBudget

GAUSS_MULTIPLIER = 4.0


@dataclass(frozen=True)
class NoiseSpec:
    family: str     # "gaussian" | "laplace"
    scale: float    # per-coordinate sigma (gaussian) or b (laplace)
    dimension: int

    def __post_init__(self):
        if self.family not in ("gaussian", "laplace"):
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")


def gaussian_scale(sensitivity2: float, budget: PrivacyBudget,
                   multiplier: float = GAUSS_MULTIPLIER) -> float:
    """Per-coordinate sigma for an l2-sensitivity-``sensitivity2`` release."""
    if budget.mode != "approximate":
        raise ValueError("gaussian_scale requires an approximate budget")
    if sensitivity2 < 0:
        raise ValueError("sensitivity must be nonnegative")
    return multiplier * sensitivity2 * math.sqrt(
        math.log(1.0 / budget.delta)) / budget.epsilon


def laplace_scale(sensitivity1: float, epsilon: float) -> float:
    """Per-coordinate Laplace scale b = Delta_1 / epsilon."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not sensitivity1 > 0:
        raise ValueError("sensitivity must be positive")
    return sensitivity1 / epsilon


def sample_noise(spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.scale == 0.0:
        return np.zeros(spec.dimension)
    if spec.family == "gaussian":
        return rng.normal(0.0, spec.scale, size=spec.dimension)
    return rng.laplace(0.0, spec.scale, size=spec.dimension)
