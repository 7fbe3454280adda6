"""Straight-line platform trajectories and determinant tracking.

A trajectory is traced inside one working mode: at every sample the IK
branch of that mode gives ``q``, and the Jacobians give ``det(A)`` and the
serial terms ``B_jj``.  A trace is non-singular when none of these series
vanishes or changes sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BranchLost, KinematicsError, ManipulatorModel, Pose, SignVector, enumerate_working_modes, wrap_angles

DEFAULT_SAMPLES = 400
TRACE_ZERO_TOL = 1e-9


class SingularPath(KinematicsError):
    """The trajectory meets a singularity where a regular one is required."""

    def __init__(self, verdict: "Violation"):
        super().__init__(f"trajectory is singular: {verdict}")
        self.verdict = verdict


@dataclass(frozen=True)
class Waypath:
    waypoints: tuple[Pose, ...]
    samples_per_segment: int = DEFAULT_SAMPLES

    def __post_init__(self):
        pts = tuple(p if isinstance(p, Pose) else Pose(*p) for p in self.waypoints)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        if int(self.samples_per_segment) < 16:
            raise ValueError("samples_per_segment must be at least 16")
        object.__setattr__(self, "waypoints", pts)
        object.__setattr__(self, "samples_per_segment", int(self.samples_per_segment))

    def reversed(self) -> "Waypath":
        return Waypath(tuple(reversed(self.waypoints)), self.samples_per_segment)


def interpolate(path: Waypath, dof: int = 3) -> list[Pose]:
    """Samples along the polyline, endpoints included, shared corners once.

    Interpolation is componentwise in ``(x, y, phi)``.  Each interior point
    is ``(a*(n-j) + b*j) / n``, which gives bit-identical samples for the
    reversed path; components equal at both ends stay exactly constant.
    """
    n = path.samples_per_segment
    out: list[Pose] = []
    for k, (a, b) in enumerate(zip(path.waypoints, path.waypoints[1:])):
        va, vb = np.array((a.x, a.y, a.phi)), np.array((b.x, b.y, b.phi))
        for j in range(0 if k == 0 else 1, n + 1):
            v = va if j == 0 else vb if j == n else np.where(va == vb, va, (va * (n - j) + vb * j) / n)
            out.append(Pose(v[0], v[1], v[2] if dof > 2 else 0.0))
    return out


@dataclass(frozen=True)
class DeterminantTrace:
    """Per-sample determinant series along a path in one working mode."""

    mode: SignVector
    poses: tuple[Pose, ...]
    q: np.ndarray  # (N, n)
    det_a: np.ndarray  # (N,)
    b_diagonal: np.ndarray  # (N, n)

    @property
    def series_names(self) -> list[str]:
        n = self.b_diagonal.shape[1]
        return ["det_a"] + [f"b{j}{j}" for j in range(1, n + 1)]

    @property
    def series(self) -> np.ndarray:
        """(N, 1+n) raw values: det_a then each B_jj."""
        return np.column_stack([self.det_a, self.b_diagonal])

    @property
    def scale(self) -> np.ndarray:
        """Per-series normalization factor max |value| (1 for an all-zero series)."""
        m = np.abs(self.series).max(axis=0)
        return np.where(m > 0, m, 1.0)

    @property
    def normalized(self) -> np.ndarray:
        return self.series / self.scale

    def __len__(self) -> int:
        return len(self.poses)


def trace(model: ManipulatorModel, path: Waypath | Sequence[Pose], mode: SignVector) -> DeterminantTrace:
    """Follow ``mode`` along the path; raises :class:`BranchLost` where the branch vanishes."""
    poses = interpolate(path, model.dof) if isinstance(path, Waypath) else list(path)
    qs, dets, bs = [], [], []
    for i, pose in enumerate(poses):
        sol = model.ik_mode(pose, mode)
        if sol is None:
            raise BranchLost(i, mode)
        jac = model.jacobians(pose, sol.q)
        qs.append(sol.q.as_array())
        dets.append(jac.det_a)
        bs.append(jac.b_diagonal)
    return DeterminantTrace(mode, tuple(poses), np.array(qs), np.array(dets), np.array(bs, dtype=float))


@dataclass(frozen=True)
class Pass:
    def __str__(self) -> str:
        return "PASS"


@dataclass(frozen=True)
class Violation:
    index: int
    series: str

    def __str__(self) -> str:
        return f"VIOLATION({self.index},{self.series})"


def first_violation(series: np.ndarray, names: Sequence[str], zero_tol: float = TRACE_ZERO_TOL) -> Pass | Violation:
    """Earliest sample where a series is within ``zero_tol`` of zero or flips sign.

    Ties at one sample go to the first series in ``names`` order.
    """
    series = np.asarray(series, dtype=float).reshape(len(series), -1)
    if not len(series):
        raise ValueError("empty trace")
    small = np.abs(series) <= zero_tol
    flip = np.zeros_like(small)
    flip[1:] = np.sign(series[1:]) * np.sign(series[:-1]) < 0
    bad = small | flip
    rows = np.nonzero(bad.any(axis=1))[0]
    if not len(rows):
        return Pass()
    i = int(rows[0])
    return Violation(i, names[int(np.argmax(bad[i]))])


def verify_nonsingular(tr: DeterminantTrace, zero_tol: float = TRACE_ZERO_TOL) -> Pass | Violation:
    return first_violation(tr.series, tr.series_names, zero_tol)


@dataclass(frozen=True)
class AssemblyModeReport:
    """Endpoints of a non-singular trajectory and their actuated configurations."""

    mode: SignVector
    start: Pose
    end: Pose
    q_start: np.ndarray
    q_end: np.ndarray
    q_distance: float  # max wrapped |q_start - q_end|
    pose_distance: float
    fk_start: tuple[Pose, ...]  # all assembly modes of q_start
    start_in_fk: float  # distance from the start pose to the nearest FK solution of q_start
    end_in_fk: float  # same for the end pose

    @property
    def endpoints_distinct(self) -> bool:
        return self.pose_distance > 1e-6

    @property
    def same_aspect(self) -> bool:
        # the trace that produced this report is regular throughout, so both
        # endpoints belong to one connected singularity-free set
        return True


def verify_assembly_mode_change(
    model: ManipulatorModel, path: Waypath, mode: SignVector, zero_tol: float = TRACE_ZERO_TOL
) -> AssemblyModeReport:
    """Trace ``path`` in ``mode``, reject it if singular, then compare endpoints."""
    tr = trace(model, path, mode)
    verdict = verify_nonsingular(tr, zero_tol)
    if isinstance(verdict, Violation):
        raise SingularPath(verdict)
    start, end = tr.poses[0], tr.poses[-1]
    q0, q1 = tr.q[0], tr.q[-1]
    sols = tuple(model.fk(q0))

    def nearest(p: Pose) -> float:
        return min((p.distance(s, model.dof) for s in sols), default=float("inf"))

    return AssemblyModeReport(
        mode=mode,
        start=start,
        end=end,
        q_start=q0,
        q_end=q1,
        q_distance=float(np.abs(wrap_angles(q1 - q0)).max()),
        pose_distance=start.distance(end, model.dof),
        fk_start=sols,
        start_in_fk=nearest(start),
        end_in_fk=nearest(end),
    )


def passing_modes(
    model: ManipulatorModel, path: Waypath, zero_tol: float = TRACE_ZERO_TOL
) -> dict[SignVector, Pass | Violation | BranchLost]:
    """Outcome of tracing the path in every working mode, in mode order."""
    out: dict[SignVector, Pass | Violation | BranchLost] = {}
    for mode in enumerate_working_modes(model.dof):
        try:
            out[mode] = verify_nonsingular(trace(model, path, mode), zero_tol)
        except BranchLost as exc:
            out[mode] = exc
    return out
