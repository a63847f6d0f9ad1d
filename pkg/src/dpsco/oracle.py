"""Independent reference computations, used only by tests and acceptance
runs.  Nothing here touches the private path, so no main-path component is
ever tested against itself.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry
from .core import LabeledDataset, LossModel, loss_value, loss_gradient, \
    risk_gradient, risk_value

_MAX_ITER = 1_000_000


class OracleError(RuntimeError):
    pass


def qp_project(sets, point: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Nearest point of the intersection of ``sets``, via a dense convex
    program (cvxpy) solved to high precision."""
    import cvxpy as cp

    point = np.asarray(point, dtype=float)
    d = point.shape[0]
    if d > 50:
        raise OracleError("qp_project is a small-dimension oracle (d <= 50)")
    u = cp.Variable(d)
    constraints = []
    for s in sets:
        constraints.extend(_cvx_constraints(s, u))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(u - point)), constraints)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                   tol_feas=1e-12, tol_ktratio=1e-9)
    except (cp.error.SolverError, KeyError):
        prob.status = None
    if u.value is None or prob.status != "optimal":
        # interior-point occasionally stalls short of full accuracy on
        # degenerate geometry; SCS with tight tolerances is a slow but
        # reliable fallback
        prob.solve(solver=cp.SCS, eps_abs=1e-11, eps_rel=1e-11,
                   max_iters=200_000)
    if u.value is None or prob.status not in ("optimal",
                                              "optimal_inaccurate"):
        raise OracleError(f"qp_project did not converge: {prob.status}")
    return np.asarray(u.value, dtype=float)


def _cvx_constraints(fset, u):
    import cvxpy as cp

    if fset.kind == "l2_ball":
        return [cp.norm(u - fset.center, 2) <= fset.radius]
    if fset.kind == "l1_ball":
        return [cp.norm(u, 1) <= fset.radius]
    if fset.kind == "box":
        return [u >= fset.lower, u <= fset.upper]
    if fset.kind == "intersection":
        out = []
        for m in fset.members:
            out.extend(_cvx_constraints(m, u))
        return out
    raise OracleError(f"unknown set kind {fset.kind!r}")


def erm_exact(model: LossModel, data: LabeledDataset,
              fset: geometry.FeasibleSet, tol: float = 1e-10) -> np.ndarray:
    """Deterministic full-gradient projected descent, run until the
    projected-gradient-mapping norm is <= tol.  Objective decrease is
    monotone (backtracking line search)."""
    if data.d > 200:
        raise OracleError("erm_exact is a small-dimension oracle (d <= 200)")
    X, y = data.features, data.labels
    w = geometry.project(fset, np.zeros(data.d))
    fw = risk_value(model, w, X, y)
    step = 1.0
    for _ in range(_MAX_ITER):
        g = risk_gradient(model, w, X, y)
        # backtracking on the projected step
        while True:
            w_new = geometry.project(fset, w - step * g)
            diff = w_new - w
            f_new = risk_value(model, w_new, X, y)
            if f_new <= fw + g @ diff + (diff @ diff) / (2.0 * step) + 1e-18:
                break
            step *= 0.5
            if step < 1e-18:
                raise OracleError("erm_exact line search collapsed")
        mapping_norm = np.linalg.norm(diff) / step
        w, fw = w_new, f_new
        if mapping_norm <= tol:
            return w
        step = min(step * 2.0, 1e6)
    raise OracleError(
        f"erm_exact hit the iteration cap; last mapping norm "
        f"{mapping_norm:.3e}")


def tnc_minimizer(z_bar: np.ndarray, theta: float) -> np.ndarray:
    """Interior stationary point of the hard-instance empirical risk:
    w* = Z / ||Z||^((theta-2)/(theta-1)) for mean vector Z with ||Z|| <= 1."""
    if theta <= 1:
        raise ValueError("theta must exceed 1")
    z_bar = np.asarray(z_bar, dtype=float)
    nz = np.linalg.norm(z_bar)
    if nz > 1.0 + 1e-12:
        raise OracleError("||Z|| > 1: boundary regime not modeled")
    if nz == 0.0:
        return np.zeros_like(z_bar)
    return z_bar / nz ** ((theta - 2.0) / (theta - 1.0))


def finite_diff_gradient(model: LossModel, w: np.ndarray, x: np.ndarray,
                         y: float = 0.0, h: float | None = None) -> np.ndarray:
    """Central differences per coordinate (smooth kinds)."""
    w = np.asarray(w, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(w))
    g = np.empty_like(w)
    for j in range(w.shape[0]):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (loss_value(model, w + e, x, y)
                - loss_value(model, w - e, x, y)) / (2.0 * h)
    return g
