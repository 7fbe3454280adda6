"""Kinematics of the planar RR-RRR five-bar mechanism.

Two actuated pivots ``A1 = (c1, 0)`` and ``A2 = (c2, 0)`` drive proximal links
of lengths ``l1`` and ``l2`` ending at passive pivots ``B1``, ``B2``; distal
links ``l3`` (from ``B1``) and ``l4`` (from ``B2``) meet at the end-effector
``C = (x, y)``.

Leg constraints are written as half squared-distance defects::

    F_i = ((x - B_ix)**2 + (y - B_iy)**2 - distal_i**2) / 2

so that the rows of ``A = dF/dX`` are the vectors ``B_iC`` and
``B_ii = dF_i/dtheta_i = l_i * (sin(theta_i)*(x - c_i) - cos(theta_i)*y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    DEFAULT_RESIDUAL_TOL,
    DEFAULT_ZERO_TOL,
    ActuatedConfig,
    BatchIk,
    JacobianPair,
    Pose,
    ResidualViolation,
    Sign,
    SignVector,
    as_config,
    classify_sign,
    enumerate_working_modes,
    solve_leg,
    solve_leg_batch,
    wrap_angle,
)


@dataclass(frozen=True)
class RrRrrModel:
    l1: float
    l2: float
    l3: float
    l4: float
    c1: float = 0.0
    c2: float = 9.0
    zero_tol: float = field(default=DEFAULT_ZERO_TOL, compare=False)
    residual_tol: float = field(default=DEFAULT_RESIDUAL_TOL, compare=False)

    dof = 2

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "l4"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive length, got {v!r}")
        if not (math.isfinite(self.c1) and math.isfinite(self.c2)) or self.c1 == self.c2:
            raise ValueError("base anchors c1 and c2 must be finite and distinct")

    @classmethod
    def reference(cls, **kw) -> "RrRrrModel":
        """The reference five-bar: L1=8, L2=5, L3=5, L4=8, c1=0, c2=9."""
        return cls(8.0, 5.0, 5.0, 8.0, 0.0, 9.0, **kw)

    # leg i -> (anchor abscissa, proximal length, distal length)
    @property
    def legs(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        return (self.c1, self.l1, self.l3), (self.c2, self.l2, self.l4)

    def passive_pivots(self, q) -> tuple[tuple[float, float], tuple[float, float]]:
        (c1, p1, _), (c2, p2, _) = self.legs
        t1, t2 = q[0], q[1]
        return (c1 + p1 * math.cos(t1), p1 * math.sin(t1)), (c2 + p2 * math.cos(t2), p2 * math.sin(t2))

    def constraints(self, pose: Pose, q) -> list[float]:
        out = []
        for (bx, by), (_, _, d) in zip(self.passive_pivots(q), self.legs):
            out.append(0.5 * ((pose.x - bx) ** 2 + (pose.y - by) ** 2 - d * d))
        return out

    def residual(self, pose: Pose, q) -> float:
        return max(abs(f) for f in self.constraints(pose, q))

    def serial_terms(self, pose: Pose, q) -> tuple[float, float]:
        return tuple(
            p * (math.sin(t) * (pose.x - c) - math.cos(t) * pose.y)
            for t, (c, p, _) in zip(q, self.legs)
        )

    # -- inverse kinematics -------------------------------------------------

    def _leg_branches(self, pose: Pose):
        per_leg = []
        for c, p, d in self.legs:
            sol = solve_leg(pose.x - c, pose.y, p, d)
            if sol is None:
                return None
            psi, hw, h = sol
            if p * h <= self.zero_tol:
                per_leg.append([(Sign.NEAR_ZERO, wrap_angle(psi + hw))])
            else:
                per_leg.append([(Sign.PLUS, wrap_angle(psi + hw)), (Sign.MINUS, wrap_angle(psi - hw))])
        return per_leg

    def _solution(self, pose: Pose, branch, angles) -> "RrRrrIkSolution":
        b1, b2 = self.passive_pivots(angles)
        return RrRrrIkSolution(angles[0], angles[1], b1, b2, tuple(branch))

    def ik(self, pose: Pose) -> list["RrRrrIkSolution"]:
        """All inverse kinematic solutions, ordered by working-mode index.

        A leg at a serial singularity contributes a single (double-root)
        branch and its solutions carry ``singular = True`` and ``mode = None``.
        """
        per_leg = self._leg_branches(pose)
        if per_leg is None:
            return []
        return [
            self._solution(pose, (s1, s2), (t1, t2))
            for s1, t1 in per_leg[0]
            for s2, t2 in per_leg[1]
        ]

    def ik_mode(self, pose: Pose, mode: SignVector) -> "RrRrrIkSolution | None":
        """The unique IK solution in working mode ``mode``, or None."""
        if len(mode) != 2:
            raise ValueError("RR-RRR working modes have 2 entries")
        angles = []
        for s, (c, p, d) in zip(mode, self.legs):
            sol = solve_leg(pose.x - c, pose.y, p, d)
            if sol is None:
                return None
            psi, hw, h = sol
            if p * h <= self.zero_tol:
                return None
            angles.append(wrap_angle(psi + int(s) * hw))
        return self._solution(pose, mode, angles)

    # -- forward kinematics -------------------------------------------------

    def fk(self, q) -> list[Pose]:
        """Assembly modes for actuated angles ``q``: 0, 1 (tangency) or 2 poses.

        With two solutions, the one with ``det_a > 0`` is listed first; the
        pair is mirror-symmetric across the line ``B1B2``.
        """
        q = as_config(q, 2)
        (b1x, b1y), (b2x, b2y) = self.passive_pivots(q)
        r1, r2 = self.l3, self.l4
        ex, ey = b2x - b1x, b2y - b1y
        d = math.hypot(ex, ey)
        if d == 0.0:
            return []
        ex, ey = ex / d, ey / d
        a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
        h2 = r1 * r1 - a * a
        tol = 1e-12 * max(r1 * r1, 1.0)
        if h2 < -tol:
            return []
        mx, my = b1x + a * ex, b1y + a * ey
        if h2 <= tol:
            return [Pose(mx, my)]
        h = math.sqrt(h2)
        return [Pose(mx - s * h * ey, my + s * h * ex) for s in (1.0, -1.0)]

    # -- Jacobians ---------------------------------------------------------

    def jacobians(self, pose: Pose, q) -> JacobianPair:
        q = as_config(q, 2)
        res = self.residual(pose, q)
        if res > self.residual_tol:
            raise ResidualViolation(res, self.residual_tol)
        rows = [(pose.x - bx, pose.y - by) for bx, by in self.passive_pivots(q)]
        return JacobianPair(np.array(rows), self.serial_terms(pose, q))

    def serial_singularity_curves(self) -> list["SingularityCircle"]:
        out = []
        for leg, (c, p, d) in enumerate(self.legs, start=1):
            out.append(SingularityCircle(leg, "extended", (c, 0.0), p + d))
            out.append(SingularityCircle(leg, "folded", (c, 0.0), abs(p - d)))
        return out

    # -- vectorized paths used by the grid sampler -------------------------

    def ik_mode_batch(self, points: np.ndarray, mode: SignVector) -> BatchIk:
        points = np.asarray(points, dtype=float).reshape(-1, points.shape[-1])
        x, y = points[:, 0], points[:, 1]
        n = len(points)
        feasible = np.ones(n, dtype=bool)
        q = np.empty((n, 2))
        for i, (s, (c, p, d)) in enumerate(zip(mode, self.legs)):
            ok, psi, hw, _ = solve_leg_batch(x - c, y, p, d)
            feasible &= ok
            q[:, i] = psi + int(s) * hw
        b = np.empty((n, 2))
        rows = []
        for i, (c, p, _) in enumerate(self.legs):
            ct, st = np.cos(q[:, i]), np.sin(q[:, i])
            b[:, i] = p * (st * (x - c) - ct * y)
            rows.append((x - c - p * ct, y - p * st))
        det_a = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
        q = np.where(feasible[:, None], np.remainder(q + math.pi, 2 * math.pi) - math.pi, np.nan)
        det_a = np.where(feasible, det_a, np.nan)
        b = np.where(feasible[:, None], b, np.nan)
        return BatchIk(feasible, q, det_a, b)

    def fk_batch(self, qs: np.ndarray) -> list[np.ndarray]:
        return [np.array([p.as_array(2) for p in self.fk(q)]).reshape(-1, 2) for q in np.asarray(qs)]


class SingularityCircle(NamedTuple):
    """Locus of the end-effector where leg ``leg`` is aligned."""

    leg: int
    kind: str  # "extended" or "folded"
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class RrRrrIkSolution:
    theta1: float
    theta2: float
    b1: tuple[float, float]
    b2: tuple[float, float]
    branch: tuple[Sign, Sign]

    @property
    def singular(self) -> bool:
        return Sign.NEAR_ZERO in self.branch

    @property
    def mode(self) -> SignVector | None:
        return None if self.singular else SignVector(self.branch)

    @property
    def q(self) -> ActuatedConfig:
        return ActuatedConfig((self.theta1, self.theta2))


def ik(model: RrRrrModel, pose: Pose) -> list[RrRrrIkSolution]:
    return model.ik(pose)


def ik_mode(model: RrRrrModel, pose: Pose, mode: SignVector) -> RrRrrIkSolution | None:
    return model.ik_mode(pose, mode)


def fk(model: RrRrrModel, q) -> list[Pose]:
    return model.fk(q)


def jacobians(model: RrRrrModel, pose: Pose, q) -> JacobianPair:
    return model.jacobians(pose, q)


def serial_singularity_curves(model: RrRrrModel) -> list[SingularityCircle]:
    return model.serial_singularity_curves()


def working_mode_of(model: RrRrrModel, pose: Pose, q) -> SignVector | None:
    """Working mode of a configuration, or None on a serial singularity."""
    signs = [classify_sign(b, model.zero_tol) for b in model.serial_terms(pose, q)]
    return None if Sign.NEAR_ZERO in signs else SignVector(signs)


MODES = enumerate_working_modes(2)
