"""Projections, Dykstra's method and the feasible-set types."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dpsco import Box, Intersection, L1Ball, L2Ball, membership, project
from dpsco.geometry import (DYKSTRA_TOL, DykstraError, dykstra,
                            l1_ball_project, project_with_residual)
from dpsco.oracle import qp_project

vectors = hnp.arrays(np.float64, st.integers(2, 6),
                     elements=st.floats(-5.0, 5.0, allow_nan=False))


def _sets_for(d):
    return [
        L2Ball(center=np.zeros(d), radius=1.0),
        L2Ball(center=0.3 * np.ones(d), radius=0.8),
        L1Ball(radius=1.0),
        Box(lower=-0.5 * np.ones(d), upper=0.5 * np.ones(d)),
        Intersection((L1Ball(radius=1.0),
                      Box(lower=-0.4 * np.ones(d), upper=0.9 * np.ones(d)))),
        Intersection((L2Ball(center=np.zeros(d), radius=1.0),
                      L2Ball(center=0.5 * np.ones(d), radius=1.0))),
    ]


# ------------------------------------------------------------ set validation

def test_set_validation():
    with pytest.raises(ValueError):
        L2Ball(center=np.zeros(2), radius=0.0)
    with pytest.raises(ValueError):
        L1Ball(radius=-1.0)
    with pytest.raises(ValueError):
        Box(lower=np.array([1.0]), upper=np.array([0.0]))
    with pytest.raises(ValueError):
        Intersection(())


def test_diameters():
    d = 3
    assert L2Ball(center=np.zeros(d), radius=2.0).diameter == 4.0
    assert L1Ball(radius=1.5).diameter == 3.0
    box = Box(lower=np.zeros(d), upper=np.ones(d))
    assert box.diameter == pytest.approx(np.sqrt(3.0))
    inter = Intersection((L2Ball(center=np.zeros(d), radius=5.0),
                          L1Ball(radius=1.0)))
    assert inter.diameter == 2.0  # min of member diameters


# ------------------------------------------------------------ l1 projection

def test_l1_interior_point_unchanged():
    p = np.array([0.2, -0.3])
    np.testing.assert_array_equal(l1_ball_project(p, 1.0), p)


def test_l1_projection_matches_qp():
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = int(rng.integers(2, 8))
        p = rng.normal(0, 2.0, d)
        ours = l1_ball_project(p, 1.0)
        ref = qp_project([L1Ball(radius=1.0)], p)
        assert np.linalg.norm(ours - ref) <= 1e-6
        assert np.sum(np.abs(ours)) <= 1.0 + 1e-12


@given(vectors)
@settings(max_examples=60, deadline=None)
def test_projection_idempotent(p):
    for fset in _sets_for(len(p)):
        q = project(fset, p)
        q2 = project(fset, q)
        assert np.linalg.norm(q - q2) <= 1e-7
        assert membership(fset, q, 1e-6)


@given(vectors, st.integers(0, 10 ** 9))
@settings(max_examples=60, deadline=None)
def test_projection_nonexpansive(p, seed):
    rng = np.random.default_rng(seed)
    q = p + rng.normal(0, 1.0, len(p))
    for fset in _sets_for(len(p)):
        # Dykstra residual adds slack at its tolerance scale
        assert (np.linalg.norm(project(fset, p) - project(fset, q))
                <= np.linalg.norm(p - q) + 1e-6)


# ------------------------------------------------------------------- Dykstra

def test_dykstra_matches_qp_on_intersection():
    d = 4
    members = (L2Ball(center=np.zeros(d), radius=1.0),
               Box(lower=-0.3 * np.ones(d), upper=0.25 * np.ones(d)))
    p = np.array([2.0, -1.5, 0.7, 0.1])
    x, residual, sweeps = dykstra(members, p)
    assert residual <= DYKSTRA_TOL
    assert sweeps >= 1
    ref = qp_project(members, p)
    assert np.linalg.norm(x - ref) <= 1e-6


def test_project_with_residual_reports_zero_for_closed_forms():
    _, res = project_with_residual(L1Ball(radius=1.0), np.array([3.0, 0.0]))
    assert res == 0.0
    _, res = project_with_residual(
        Intersection((L1Ball(radius=1.0),
                      L2Ball(center=np.zeros(2), radius=1.0))),
        np.array([3.0, 0.0]))
    assert 0.0 <= res <= DYKSTRA_TOL


def test_dykstra_error_carries_last_iterate():
    err = DykstraError(np.array([1.0, 2.0]), 0.5)
    np.testing.assert_array_equal(err.last_iterate, np.array([1.0, 2.0]))
    assert err.residual == 0.5
    assert "did not converge" in str(err)


def test_membership_tolerances():
    ball = L2Ball(center=np.zeros(2), radius=1.0)
    assert membership(ball, np.array([1.0 + 1e-10, 0.0]), 1e-9)
    assert not membership(ball, np.array([1.1, 0.0]), 1e-9)
    inter = Intersection((ball, L1Ball(radius=1.0)))
    assert membership(inter, np.array([0.5, 0.4]), 1e-9)
    assert not membership(inter, np.array([0.9, 0.9]), 1e-9)
