"""Domain types, loss families and risk evaluation.

All types here are frozen dataclasses; the loss evaluations are pure
functions, so everything is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOSS_KINDS = ("squared_linear", "logistic_l2reg", "hinge", "tnc_hard_instance",
              "proximal_wrapped")

NONSMOOTH = float("inf")


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (n x d) with a length-n label vector.

    ``meta`` carries provenance such as the row-normalization factor; it is
    not part of the value semantics.
    """

    features: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("features must be a nonempty 2d array")
        if y.shape != (X.shape[0],):
            raise ValueError("labels length must equal the number of rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite entries")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class LossModel:
    """A loss family f(w, (x, y)) with its declared constants.

    ``lipschitz``, ``smoothness`` and ``strong_convexity`` are caller-supplied
    per experiment (computed from the data normalization); they are never
    estimated from data.  ``smoothness`` may be ``NONSMOOTH`` (hinge).
    """

    kind: str
    lipschitz: float
    smoothness: float = 0.0
    strong_convexity: float = 0.0
    reg_weight: float = 0.0          # logistic_l2reg only
    tnc_theta: float = 0.0           # tnc_hard_instance only
    inner: "LossModel | None" = None  # proximal_wrapped only
    prox_center: np.ndarray | None = None
    prox_gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not self.lipschitz > 0:
            raise ValueError("lipschitz constant must be positive")
        if self.smoothness < 0:
            raise ValueError("smoothness must be nonnegative")
        if self.strong_convexity < 0:
            raise ValueError("strong_convexity must be nonnegative")
        if self.kind == "tnc_hard_instance" and not self.tnc_theta > 1:
            raise ValueError("tnc_hard_instance requires theta > 1")
        if self.kind == "proximal_wrapped":
            if self.inner is None or self.prox_center is None:
                raise ValueError("proximal_wrapped requires inner and center")
            if not self.prox_gamma > 0:
                raise ValueError("proximal_wrapped requires gamma > 0")
            object.__setattr__(self, "prox_center",
                               np.asarray(self.prox_center, dtype=float))


def squared_linear_model(lipschitz: float, smoothness: float) -> LossModel:
    return LossModel("squared_linear", lipschitz, smoothness)


def logistic_model(lipschitz: float, smoothness: float,
                   reg_weight: float) -> LossModel:
    return LossModel("logistic_l2reg", lipschitz, smoothness,
                     strong_convexity=reg_weight, reg_weight=reg_weight)


def hinge_model(lipschitz: float) -> LossModel:
    return LossModel("hinge", lipschitz, smoothness=NONSMOOTH)


def tnc_model(theta: float, lipschitz: float = 2.0,
              smoothness: float = 0.0) -> LossModel:
    return LossModel("tnc_hard_instance", lipschitz, smoothness,
                     tnc_theta=theta)


def proximal_wrapped(inner: LossModel, center: np.ndarray,
                     gamma: float) -> LossModel:
    """Add (1/2gamma)||w - center||^2 to ``inner``.

    The quadratic makes the wrapped loss (1/gamma)-strongly convex on top of
    whatever the inner loss already has.
    """
    center = np.asarray(center, dtype=float)
    if gamma <= 0.0:
        raise ValueError("proximal weight gamma must be positive")
    return LossModel(
        "proximal_wrapped",
        lipschitz=inner.lipschitz,
        smoothness=inner.smoothness + 1.0 / gamma,
        strong_convexity=inner.strong_convexity + 1.0 / gamma,
        inner=inner, prox_center=center, prox_gamma=gamma)


@dataclass(frozen=True)
class PrivacyBudget:
    """(epsilon, delta) with mode in {pure, approximate}.

    Approximate mode additionally requires epsilon <= 2 ln(1/delta), the
    validity condition of the Gaussian-mechanism calibration used here.
    """

    epsilon: float
    delta: float = 0.0
    mode: str = "pure"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.mode == "pure":
            if self.delta != 0:
                raise ValueError("pure mode requires delta = 0")
        elif self.mode == "approximate":
            if not 0 < self.delta < 1:
                raise ValueError("approximate mode requires 0 < delta < 1")
            if self.epsilon > 2.0 * math.log(1.0 / self.delta):
                raise ValueError(
                    "approximate mode requires epsilon <= 2 ln(1/delta)")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")


def pure_budget(epsilon: float) -> PrivacyBudget:
    return PrivacyBudget(epsilon, 0.0, "pure")


def approx_budget(epsilon: float, delta: float) -> PrivacyBudget:
    return PrivacyBudget(epsilon, delta, "approximate")


@dataclass
class ReleaseMeta:
    """Inputs of one noisy release, kept so audits can recompute the scale."""

    release_id: int
    family: str            # "gaussian" | "laplace" | "none"
    sensitivity2: float    # l2 sensitivity handed to the calibration
    multiplier: float
    epsilon: float
    delta: float
    dimension: int
    scale: float


@dataclass
class RunRecord:
    """One seeded algorithm execution: released iterates, noise scales and
    the sample-budget ledger needed for the parallel-composition audit."""

    seed: int
    released_iterates: list = field(default_factory=list)
    noise_scales: list = field(default_factory=list)
    release_meta: list = field(default_factory=list)
    # entries (segment label, (start, stop), release id); release id -1 marks
    # samples that were consumed (or dropped) without a release of their own
    sample_ledger: list = field(default_factory=list)
    dykstra_residuals: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    noiseless: bool = False
    final_point: np.ndarray | None = None

    def add_release(self, point: np.ndarray, meta: ReleaseMeta,
                    label: str, span: tuple[int, int]) -> int:
        rid = meta.release_id
        self.released_iterates.append(np.array(point))
        self.noise_scales.append(meta.scale)
        self.release_meta.append(meta)
        self.sample_ledger.append((label, span, rid))
        return rid

    def mark_unused(self, label: str, span: tuple[int, int]):
        if span[1] > span[0]:
            self.sample_ledger.append((label, span, -1))


def _check_dims(w: np.ndarray, x: np.ndarray):
    if w.shape != x.shape:
        raise DimensionMismatchError(
            f"w has shape {w.shape}, sample has shape {x.shape}")


def loss_value(model: LossModel, w: np.ndarray, x: np.ndarray,
               y: float = 0.0) -> float:
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_dims(w, x)
    if model.kind == "squared_linear":
        return float((w @ x - y) ** 2)
    if model.kind == "logistic_l2reg":
        z = -y * (x @ w)
        # log1p(exp(z)) evaluated stably for large |z|
        val = np.logaddexp(0.0, z)
        return float(val + 0.5 * model.reg_weight * (w @ w))
    if model.kind == "hinge":
        return float(max(0.0, 1.0 - y * (w @ x)))
    if model.kind == "tnc_hard_instance":
        th = model.tnc_theta
        return float(-(w @ x) + np.linalg.norm(w) ** th / th)
    # proximal_wrapped
    diff = w - model.prox_center
    return loss_value(model.inner, w, x, y) + \
        float(diff @ diff) / (2.0 * model.prox_gamma)


def loss_gradient(model: LossModel, w: np.ndarray, x: np.ndarray,
                  y: float = 0.0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_dims(w, x)
    if model.kind == "squared_linear":
        return 2.0 * (w @ x - y) * x
    if model.kind == "logistic_l2reg":
        z = y * (x @ w)
        s = math.exp(-np.logaddexp(0.0, z))  # sigmoid(-z), stable
        return -y * s * x + model.reg_weight * w
    if model.kind == "hinge":
        # subgradient 0 at the kink (1 - y<w,x> = 0)
        if 1.0 - y * (w @ x) > 0.0:
            return -y * x
        return np.zeros_like(w)
    if model.kind == "tnc_hard_instance":
        th = model.tnc_theta
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # theta < 2 norm-term singularity resolved to the -x limit
            return -x.copy()
        return -x + nw ** (th - 2.0) * w
    diff = w - model.prox_center
    return loss_gradient(model.inner, w, x, y) + diff / model.prox_gamma


def empirical_risk(model: LossModel, w: np.ndarray,
                   data: LabeledDataset) -> float:
    if data.n < 1:
        raise ValueError("empty dataset")
    return risk_value(model, w, data.features, data.labels)


def risk_value(model: LossModel, w: np.ndarray, X: np.ndarray,
               y: np.ndarray) -> float:
    """Mean loss over the rows of X, vectorized per kind."""
    w = np.asarray(w, dtype=float)
    if model.kind == "squared_linear":
        return float(np.mean((X @ w - y) ** 2))
    if model.kind == "logistic_l2reg":
        z = -y * (X @ w)
        return float(np.mean(np.logaddexp(0.0, z))
                     + 0.5 * model.reg_weight * (w @ w))
    if model.kind == "hinge":
        return float(np.mean(np.maximum(0.0, 1.0 - y * (X @ w))))
    if model.kind == "tnc_hard_instance":
        th = model.tnc_theta
        return float(-(w @ np.mean(X, axis=0))
                     + np.linalg.norm(w) ** th / th)
    diff = w - model.prox_center
    return risk_value(model.inner, w, X, y) + \
        float(diff @ diff) / (2.0 * model.prox_gamma)


def risk_gradient(model: LossModel, w: np.ndarray, X: np.ndarray,
                  y: np.ndarray) -> np.ndarray:
    """Gradient of the mean loss over the rows of X."""
    w = np.asarray(w, dtype=float)
    n = X.shape[0]
    if model.kind == "squared_linear":
        return 2.0 * (X.T @ (X @ w - y)) / n
    if model.kind == "logistic_l2reg":
        z = y * (X @ w)
        s = np.exp(-np.logaddexp(0.0, z))  # sigmoid(-z), stable
        return -(X.T @ (y * s)) / n + model.reg_weight * w
    if model.kind == "hinge":
        active = (1.0 - y * (X @ w)) > 0.0
        return -(X[active].T @ y[active]) / n
    if model.kind == "tnc_hard_instance":
        th = model.tnc_theta
        nw = np.linalg.norm(w)
        norm_term = np.zeros_like(w) if nw == 0.0 else nw ** (th - 2.0) * w
        return -np.mean(X, axis=0) + norm_term
    diff = w - model.prox_center
    return risk_gradient(model.inner, w, X, y) + diff / model.prox_gamma
