import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parallel_aspects.core import BranchLost, Pose, SignVector
from parallel_aspects.rr_rrr import RrRrrModel
from parallel_aspects.three_rrr import ThreeRrrModel
from parallel_aspects.trajectory import (
    Pass,
    SingularPath,
    Violation,
    Waypath,
    first_violation,
    interpolate,
    passing_modes,
    trace,
    verify_assembly_mode_change,
    verify_nonsingular,
)

MODEL = ThreeRrrModel.reference()
P1 = Pose(-15.468, 0.781, 0.073)
P2 = Pose(-15.468, -7.091, 0.500)
P3 = Pose(-9.902, -7.091, 1.081)
PATH = Waypath((P1, P2, P3), 400)
PLUS = SignVector.parse("+++")


@pytest.fixture(scope="module")
def plus_trace():
    return trace(MODEL, PATH, PLUS)


def test_interpolation_endpoints_and_count():
    pts = interpolate(Waypath((P1, P2), 200))
    assert len(pts) == 201
    assert pts[0] == P1 and pts[-1] == P2
    mid = pts[100]
    assert (mid.x, mid.y, mid.phi) == pytest.approx((-15.468, (0.781 - 7.091) / 2, (0.073 + 0.5) / 2), abs=1e-12)


def test_corners_are_shared_once():
    pts = interpolate(PATH)
    assert len(pts) == 801
    assert pts[400] == P2 and pts[-1] == P3


def test_constant_path():
    pts = interpolate(Waypath((P1, P1), 16))
    assert len(pts) == 17 and all(p == P1 for p in pts)


@pytest.mark.parametrize("args", [((P1,), 400), ((P1, P2), 8)])
def test_path_validation(args):
    with pytest.raises(ValueError):
        Waypath(*args)


@given(st.integers(16, 300))
def test_reversed_path_samples_are_mirrored(n):
    path = Waypath((P1, P2, P3), n)
    fwd = interpolate(path)
    back = interpolate(path.reversed())
    assert fwd == back[::-1]


def test_plus_mode_trace_is_regular(plus_trace):
    assert len(plus_trace) == 801
    assert isinstance(verify_nonsingular(plus_trace), Pass)
    assert str(verify_nonsingular(plus_trace)) == "PASS"
    assert np.all(np.sign(plus_trace.b_diagonal) == 1)
    assert plus_trace.series_names == ["det_a", "b11", "b22", "b33"]


def test_normalized_series_peak_at_one(plus_trace):
    peaks = np.abs(plus_trace.normalized).max(axis=0)
    assert np.allclose(peaks, 1.0)


def test_first_violation_synthetic():
    s = np.array([[1.0, 2.0], [0.5, 1.0], [-0.5, 1.0], [0.0, 0.0]])
    v = first_violation(s, ["det_a", "b11"])
    assert v == Violation(2, "det_a") and str(v) == "VIOLATION(2,det_a)"
    z = first_violation(np.zeros((5, 2)), ["det_a", "b11"])
    assert z == Violation(0, "det_a")
    tie = first_violation(np.array([[1.0, 1.0], [1e-12, -1.0]]), ["det_a", "b11"])
    assert tie == Violation(1, "det_a")
    later = first_violation(np.array([[1.0, 1.0], [2.0, -1.0]]), ["det_a", "b11"])
    assert later == Violation(1, "b11")
    assert isinstance(first_violation(np.ones((4, 2)), ["det_a", "b11"]), Pass)


def test_reversed_trace_has_mirrored_series(plus_trace):
    back = trace(MODEL, PATH.reversed(), PLUS)
    assert np.allclose(back.det_a[::-1], plus_trace.det_a, rtol=0, atol=1e-12)
    assert np.allclose(back.q[::-1], plus_trace.q, rtol=0, atol=1e-12)


def test_trace_stays_in_its_mode(plus_trace):
    for pose, q in zip(plus_trace.poses[::40], plus_trace.q[::40]):
        b = MODEL.serial_terms(pose, q)
        assert all(v > 0 for v in b)


def test_assembly_mode_change_report():
    rep = verify_assembly_mode_change(MODEL, PATH, PLUS)
    assert rep.endpoints_distinct and rep.same_aspect
    assert rep.pose_distance > 5.0
    assert rep.q_distance < 1e-3
    assert rep.start_in_fk < 1e-6
    assert rep.end_in_fk < 0.02
    assert len(rep.fk_start) == 6


def test_degenerate_path_reports_same_pose():
    rep = verify_assembly_mode_change(MODEL, Waypath((P1, P1), 16), PLUS)
    assert not rep.endpoints_distinct
    assert rep.q_distance == 0.0


def test_singular_path_is_rejected():
    with pytest.raises(SingularPath) as err:
        verify_assembly_mode_change(MODEL, PATH, SignVector.parse("++-"))
    assert err.value.verdict == Violation(429, "det_a")


def test_branch_lost_outside_workspace():
    path = Waypath((Pose(0.0, 0.0, 0.0), Pose(60.0, 0.0, 0.0)), 16)
    with pytest.raises(BranchLost) as err:
        trace(MODEL, path, PLUS)
    assert err.value.index > 0


def test_passing_modes_on_reference_path():
    out = passing_modes(MODEL, PATH)
    passing = sorted(str(m) for m, v in out.items() if isinstance(v, Pass))
    assert passing == sorted(["+++", "-+-", "---"])
    assert str(out[SignVector.parse("++-")]) == "VIOLATION(429,det_a)"


def test_five_bar_trace_in_plane():
    rr = RrRrrModel.reference()
    path = Waypath((Pose(3.0, 6.0), Pose(5.0, 7.0)), 50)
    tr = trace(rr, path, SignVector.parse("++"))
    assert tr.q.shape == (51, 2) and tr.series_names == ["det_a", "b11", "b22"]
    assert all(p.phi == 0.0 for p in tr.poses)
    assert isinstance(verify_nonsingular(tr), (Pass, Violation))
