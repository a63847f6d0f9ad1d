"""Shared inner loop: one-pass projected SGD over a data segment with
(n_i + 1)-iterate averaging, plus data partitioning.

``sgd_pass`` is deterministic; noise is added only by its callers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import geometry
from .core import LabeledDataset, LossModel, loss_gradient


@dataclass(frozen=True)
class Segment:
    start: int
    stop: int

    def __post_init__(self):
        if self.start < 0 or self.stop <= self.start:
            raise ValueError("segment must be a nonempty range")

    @property
    def size(self) -> int:
        return self.stop - self.start


def partition(n: int, sizes, leftover_policy: str = "drop"):
    """Contiguous disjoint segments of the given sizes.

    ``append_last`` absorbs the n - sum(sizes) leftover samples into the
    final segment; ``drop`` leaves them unused.  Returns (segments, unused)
    where unused is the index range of dropped samples (empty under
    append_last).
    """
    sizes = list(sizes)
    total = sum(sizes)
    if total > n:
        raise ValueError(f"requested {total} samples but only {n} available")
    if leftover_policy not in ("drop", "append_last"):
        raise ValueError(f"unknown leftover policy {leftover_policy!r}")
    segments = []
    pos = 0
    for size in sizes:
        segments.append(Segment(pos, pos + size))
        pos += size
    if leftover_policy == "append_last" and pos < n and segments:
        last = segments[-1]
        segments[-1] = Segment(last.start, n)
        pos = n
    return segments, (pos, n)


def sgd_pass(model: LossModel, data: LabeledDataset, segment: Segment,
             w_start: np.ndarray, stepsize: float,
             fset: geometry.FeasibleSet, clip_to: float | None = None,
             residual_sink: list | None = None,
             collect_iterates: bool = False):
    """One pass of projected SGD over the segment, in stored order.

    Returns (averaged, last) where averaged is the mean of the n_i + 1
    iterates w^1 .. w^{n_i+1} (start point included).  ``clip_to`` rescales
    any per-sample gradient whose norm exceeds it (the sensitivity premise
    of the private noise calibration).  When ``fset`` is an intersection,
    Dykstra residuals are appended to ``residual_sink`` if given.
    """
    if not stepsize > 0:
        raise ValueError("stepsize must be positive")
    w = np.asarray(w_start, dtype=float)
    if not geometry.membership(fset, w, 1e-9):
        warnings.warn("infeasible start point; projecting onto the set")
        w = geometry.project(fset, w)
    else:
        w = w.copy()

    record_res = residual_sink is not None and fset.kind == "intersection"
    X = data.features
    y = data.labels
    total = w.copy()
    iterates = [w.copy()] if collect_iterates else None
    for t in range(segment.start, segment.stop):
        g = loss_gradient(model, w, X[t], y[t])
        if clip_to is not None:
            gn = np.linalg.norm(g)
            if gn > clip_to:
                g = g * (clip_to / gn)
        if record_res:
            w, res = geometry.project_with_residual(fset, w - stepsize * g)
            residual_sink.append(res)
        else:
            w = geometry.project(fset, w - stepsize * g)
        total += w
        if collect_iterates:
            iterates.append(w.copy())
    averaged = total / (segment.size + 1)
    if collect_iterates:
        return averaged, w, iterates
    return averaged, w


def stability_sensitivity(model: LossModel, segment_size: int) -> float:
    """Uniform-stability l2 sensitivity bound 2L^2/(lambda * n_i) of each
    iterate (and of the average) for strongly convex losses."""
    if not model.strong_convexity > 0:
        raise ValueError(
            "stability bound needs a strongly convex model; use the "
            "stepsize-based sensitivity otherwise")
    if segment_size < 1:
        raise ValueError("segment size must be >= 1")
    return 2.0 * model.lipschitz ** 2 / (model.strong_convexity
                                         * segment_size)
