"""Exact Euclidean projections onto the constraint sets, plus Dykstra's
alternating-projection method for intersections.

All set descriptions are immutable and the projections are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DYKSTRA_TOL = 1e-8
DYKSTRA_MAX_ITER = 10_000


class DykstraError(RuntimeError):
    """Dykstra failed to converge; carries the last iterate and residual."""

    def __init__(self, last_iterate, residual):
        super().__init__(
            f"Dykstra did not converge: residual {residual:.3e} after "
            f"{DYKSTRA_MAX_ITER} sweeps")
        self.last_iterate = last_iterate
        self.residual = residual


@dataclass(frozen=True)
class FeasibleSet:
    kind: str = "abstract"

    @property
    def diameter(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class L2Ball(FeasibleSet):
    center: np.ndarray = None
    radius: float = 1.0
    kind: str = field(default="l2_ball", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class L1Ball(FeasibleSet):
    radius: float = 1.0
    kind: str = field(default="l1_ball", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Box(FeasibleSet):
    lower: np.ndarray = None
    upper: np.ndarray = None
    kind: str = field(default="box", init=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))


@dataclass(frozen=True)
class Intersection(FeasibleSet):
    members: tuple = ()
    kind: str = field(default="intersection", init=False)

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("intersection requires at least one member set")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def diameter(self) -> float:
        # min of member diameters is a valid upper bound for the intersection
        return min(m.diameter for m in self.members)


def l1_ball_project(point: np.ndarray, radius: float) -> np.ndarray:
    """Sort-and-threshold projection onto {||u||_1 <= radius}, O(d log d)."""
    if np.sum(np.abs(point)) <= radius:
        return point.copy()
    a = np.abs(point)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, len(u) + 1)
    rho = np.nonzero(u * ks > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(point) * np.maximum(a - theta, 0.0)


def _project_basic(fset: FeasibleSet, point: np.ndarray) -> np.ndarray:
    if fset.kind == "l2_ball":
        diff = point - fset.center
        nrm = np.linalg.norm(diff)
        if nrm <= fset.radius:
            return point.copy()
        return fset.center + diff * (fset.radius / nrm)
    if fset.kind == "l1_ball":
        return l1_ball_project(point, fset.radius)
    if fset.kind == "box":
        return np.clip(point, fset.lower, fset.upper)
    raise ValueError(f"no closed-form projection for kind {fset.kind!r}")


def dykstra(members, point: np.ndarray,
            tol: float = DYKSTRA_TOL,
            max_iter: int = DYKSTRA_MAX_ITER):
    """Dykstra's method for the intersection of ``members``.

    Returns (projection, residual, sweeps).  The residual combines the
    iterate displacement over the final sweep with the change in the
    correction terms: the iterate alone can stall for a sweep while the
    corrections still move, so stopping on displacement alone can halt at a
    non-optimal point.  When both vanish, ``point - x`` equals the sum of
    the corrections, each lying in the normal cone of its set at ``x``,
    which certifies ``x`` as the exact projection.
    """
    x = np.asarray(point, dtype=float).copy()
    increments = [np.zeros_like(x) for _ in members]
    for sweep in range(max_iter):
        x_prev = x.copy()
        inner_sq = 0.0
        for j, s in enumerate(members):
            y = x + increments[j]
            x = project(s, y)
            new_inc = y - x
            inner_sq += float(np.sum((new_inc - increments[j]) ** 2))
            increments[j] = new_inc
        residual = math.sqrt(float(np.sum((x - x_prev) ** 2)) + inner_sq)
        if residual <= tol:
            return x, residual, sweep + 1
    raise DykstraError(x, residual)


def project(fset: FeasibleSet, point: np.ndarray) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if fset.kind == "intersection":
        u, _, _ = dykstra(fset.members, point)
        return u
    return _project_basic(fset, point)


def project_with_residual(fset: FeasibleSet, point: np.ndarray):
    """Like project, but also reports the Dykstra residual (0 for exact
    closed-form projections)."""
    point = np.asarray(point, dtype=float)
    if fset.kind == "intersection":
        u, residual, _ = dykstra(fset.members, point)
        return u, residual
    return _project_basic(fset, point), 0.0


def membership(fset: FeasibleSet, point: np.ndarray, tol: float) -> bool:
    point = np.asarray(point, dtype=float)
    if fset.kind == "l2_ball":
        return np.linalg.norm(point - fset.center) <= fset.radius + tol
    if fset.kind == "l1_ball":
        return np.sum(np.abs(point)) <= fset.radius + tol
    if fset.kind == "box":
        return bool(np.all(point >= fset.lower - tol)
                    and np.all(point <= fset.upper + tol))
    if fset.kind == "intersection":
        return all(membership(m, point, tol) for m in fset.members)
    raise ValueError(f"unknown set kind {fset.kind!r}")
