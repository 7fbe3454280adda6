"""Kinematics of the planar 3-RRR parallel manipulator.

Leg ``i`` has an actuated pivot at base point ``A_i``, a proximal link of
length ``l_i`` to the passive pivot ``B_i`` and a distal link of length
``m_i`` to the platform point ``C_i``.  ``C_i`` has coordinates ``c_i`` in the
platform frame, so for a pose ``(x, y, phi)``::

    C_i = (x + c_ix cos(phi) - c_iy sin(phi), y + c_ix sin(phi) + c_iy cos(phi))

The leg constraints are the full squared-distance defects
``F_i = |C_i - B_i|**2 - m_i**2``.  ``A`` is the 3x3 matrix of their partials
with respect to ``(x, y, phi)`` and ``B_ii = dF_i/dalpha_i``, which works out
to ``2 l_i (sin(alpha_i) (C_ix - A_ix) - cos(alpha_i) (C_iy - A_iy))``.

Forward kinematics fixes ``B_i`` from the actuated angles; what remains is the
forward problem of a 3-RPR manipulator whose leg lengths equal ``m_i``.  It is
solved by sweeping the orientation: for fixed ``phi`` legs 1 and 2 confine the
platform reference point to the intersection of two circles, and roots of the
third leg's defect along each intersection branch are bracketed and refined.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

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
    wrap_angles,
)

FK_PHI_SAMPLES = 2048
FK_DEDUP_TOL = 1e-6
FK_RESIDUAL_TOL = 1e-8
_FK_CHUNK = 256


def _pairs(v, name: str) -> tuple[tuple[float, float], ...]:
    out = tuple((float(p[0]), float(p[1])) for p in v)
    if len(out) != 3:
        raise ValueError(f"{name} needs three 2D points")
    return out


@dataclass(frozen=True)
class ThreeRrrModel:
    a: tuple[tuple[float, float], ...]
    c: tuple[tuple[float, float], ...]
    l: tuple[float, ...]
    m: tuple[float, ...]
    zero_tol: float = field(default=DEFAULT_ZERO_TOL, compare=False)
    residual_tol: float = field(default=DEFAULT_RESIDUAL_TOL, compare=False)
    n_phi: int = field(default=FK_PHI_SAMPLES, compare=False)

    dof = 3

    def __post_init__(self):
        object.__setattr__(self, "a", _pairs(self.a, "base anchors"))
        object.__setattr__(self, "c", _pairs(self.c, "platform anchors"))
        for name in ("l", "m"):
            v = tuple(float(t) for t in getattr(self, name))
            if len(v) != 3 or not all(math.isfinite(t) and t > 0 for t in v):
                raise ValueError(f"{name} must hold three positive lengths")
            object.__setattr__(self, name, v)
        (x1, y1), (x2, y2), (x3, y3) = self.a
        if abs((x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)) <= 1e-12:
            raise ValueError("base anchors are collinear")
        if len(set(self.c)) == 1:
            raise ValueError("platform anchors are coincident")
        if self.n_phi < 16:
            raise ValueError("n_phi must be at least 16")

    @classmethod
    def reference(cls, **kw) -> "ThreeRrrModel":
        """The reference 3-RRR: unit-free dimensions with all links of length 10."""
        return cls(
            a=((-10.0, -10.0), (10.0, -10.0), (0.0, 10.0)),
            c=((0.0, 0.0), (10.0, 0.0), (10.0, 10.0)),
            l=(10.0, 10.0, 10.0),
            m=(10.0, 10.0, 10.0),
            **kw,
        )

    @property
    def _a(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def _c(self) -> np.ndarray:
        return np.array(self.c)

    def platform_points(self, pose: Pose) -> list[tuple[float, float]]:
        cp, sp = math.cos(pose.phi), math.sin(pose.phi)
        return [(pose.x + cx * cp - cy * sp, pose.y + cx * sp + cy * cp) for cx, cy in self.c]

    def passive_pivots(self, q) -> list[tuple[float, float]]:
        return [(ax + li * math.cos(t), ay + li * math.sin(t)) for (ax, ay), li, t in zip(self.a, self.l, q)]

    def constraints(self, pose: Pose, q) -> list[float]:
        return [
            (cx - bx) ** 2 + (cy - by) ** 2 - mi * mi
            for (cx, cy), (bx, by), mi in zip(self.platform_points(pose), self.passive_pivots(q), self.m)
        ]

    def residual(self, pose: Pose, q) -> float:
        return max(abs(f) for f in self.constraints(pose, q))

    def serial_terms(self, pose: Pose, q) -> tuple[float, float, float]:
        return tuple(
            2.0 * li * (math.sin(t) * (cx - ax) - math.cos(t) * (cy - ay))
            for (cx, cy), (ax, ay), li, t in zip(self.platform_points(pose), self.a, self.l, q)
        )

    # -- inverse kinematics -------------------------------------------------

    def _leg_solutions(self, pose: Pose):
        out = []
        for (cx, cy), (ax, ay), li, mi in zip(self.platform_points(pose), self.a, self.l, self.m):
            out.append(solve_leg(cx - ax, cy - ay, li, mi))
        return out

    def _solution(self, branch, alphas) -> "ThreeRrrIkSolution":
        return ThreeRrrIkSolution(tuple(alphas), tuple(self.passive_pivots(alphas)), tuple(branch))

    def ik(self, pose: Pose) -> list["ThreeRrrIkSolution"]:
        """All IK solutions (at most 8), ordered by working-mode index."""
        per_leg = []
        for sol, li in zip(self._leg_solutions(pose), self.l):
            if sol is None:
                return []
            psi, hw, h = sol
            if 2.0 * li * h <= self.zero_tol:
                per_leg.append([(Sign.NEAR_ZERO, wrap_angle(psi + hw))])
            else:
                per_leg.append([(Sign.PLUS, wrap_angle(psi + hw)), (Sign.MINUS, wrap_angle(psi - hw))])
        return [
            self._solution([s for s, _ in combo], [t for _, t in combo])
            for combo in itertools.product(*per_leg)
        ]

    def ik_mode(self, pose: Pose, mode: SignVector) -> "ThreeRrrIkSolution | None":
        if len(mode) != 3:
            raise ValueError("3-RRR working modes have 3 entries")
        alphas = []
        for s, sol, li in zip(mode, self._leg_solutions(pose), self.l):
            if sol is None:
                return None
            psi, hw, h = sol
            if 2.0 * li * h <= self.zero_tol:
                return None
            alphas.append(wrap_angle(psi + int(s) * hw))
        return self._solution(mode, alphas)

    # -- Jacobians ---------------------------------------------------------

    def jacobians(self, pose: Pose, q) -> JacobianPair:
        q = as_config(q, 3)
        res = self.residual(pose, q)
        if res > self.residual_tol:
            raise ResidualViolation(res, self.residual_tol)
        cp, sp = math.cos(pose.phi), math.sin(pose.phi)
        rows = []
        for (cx, cy), (px, py), (bx, by) in zip(self.c, self.platform_points(pose), self.passive_pivots(q)):
            dx, dy = px - bx, py - by
            rows.append((2 * dx, 2 * dy, 2 * (dx * (-cx * sp - cy * cp) + dy * (cx * cp - cy * sp))))
        return JacobianPair(np.array(rows), self.serial_terms(pose, q))

    def serial_singularity_curves(self) -> list[tuple[int, str, tuple[float, float], float]]:
        """Loci of platform point ``C_i`` (not of the pose) where leg ``i`` is aligned."""
        out = []
        for i, (a, li, mi) in enumerate(zip(self.a, self.l, self.m), start=1):
            out.append((i, "extended", a, li + mi))
            out.append((i, "folded", a, abs(li - mi)))
        return out

    # -- forward kinematics -------------------------------------------------

    def fk(self, q) -> list[Pose]:
        """Assembly modes for actuated angles ``q`` (at most 6), sorted by phi."""
        q = as_config(q, 3)
        return [Pose(*row) for row in self.fk_batch(np.array([q.angles]))[0]]

    def fk_batch(self, qs: np.ndarray) -> list[np.ndarray]:
        """Forward kinematics for a stack of actuated configurations.

        Returns one ``(k, 3)`` array of poses per row of ``qs``.
        """
        qs = np.atleast_2d(np.asarray(qs, dtype=float))
        out: list[np.ndarray] = []
        for start in range(0, len(qs), _FK_CHUNK):
            out.extend(_fk_chunk(self, qs[start:start + _FK_CHUNK]))
        return out

    # -- vectorized IK for the grid sampler --------------------------------

    def ik_mode_batch(self, points: np.ndarray, mode: SignVector) -> BatchIk:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        x, y, phi = points.T
        cp, sp = np.cos(phi), np.sin(phi)
        a, c = self._a, self._c
        cxw = x[:, None] + c[None, :, 0] * cp[:, None] - c[None, :, 1] * sp[:, None]
        cyw = y[:, None] + c[None, :, 0] * sp[:, None] + c[None, :, 1] * cp[:, None]
        l, m = np.array(self.l), np.array(self.m)
        acx, acy = cxw - a[:, 0], cyw - a[:, 1]
        ok, psi, hw, h = solve_leg_batch(acx, acy, l, m)
        feasible = ok.all(axis=1)
        alpha = psi + mode.as_array() * hw
        ca, sa = np.cos(alpha), np.sin(alpha)
        b = 2.0 * l * (sa * acx - ca * acy)
        dx, dy = acx - l * ca, acy - l * sa
        dphi = dx * (-c[:, 0] * sp[:, None] - c[:, 1] * cp[:, None]) + dy * (c[:, 0] * cp[:, None] - c[:, 1] * sp[:, None])
        amat = 2.0 * np.stack([dx, dy, dphi], axis=-1)
        det_a = np.linalg.det(amat)
        nan = np.nan
        return BatchIk(
            feasible,
            np.where(feasible[:, None], wrap_angles(alpha), nan),
            np.where(feasible, det_a, nan),
            np.where(feasible[:, None], b, nan),
        )


@dataclass(frozen=True)
class ThreeRrrIkSolution:
    alphas: tuple[float, float, float]
    b: tuple[tuple[float, float], ...]
    branch: tuple[Sign, ...]

    @property
    def singular(self) -> bool:
        return Sign.NEAR_ZERO in self.branch

    @property
    def mode(self) -> SignVector | None:
        return None if self.singular else SignVector(self.branch)

    @property
    def q(self) -> ActuatedConfig:
        return ActuatedConfig(self.alphas)


# -- 3-RPR forward kinematics by orientation sweep --------------------------


def _rotated(c: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Platform vectors ``R(phi) c_i``; shape ``phi.shape + (3, 2)``."""
    cp, sp = np.cos(phi)[..., None], np.sin(phi)[..., None]
    return np.stack([c[:, 0] * cp - c[:, 1] * sp, c[:, 0] * sp + c[:, 1] * cp], axis=-1)


def _chord(m: np.ndarray, c: np.ndarray, b: np.ndarray, phi: np.ndarray):
    """Intersection chord of the circles allowed by legs 1 and 2 at orientation ``phi``.

    ``b`` (passive pivots) has shape ``S + (3, 2)`` broadcastable against
    ``phi``.  Returns the chord midpoint, unit axis, squared half-chord
    ``h2`` and the rotated third platform vector, all as component arrays.
    """
    cp, sp = np.cos(phi), np.sin(phi)
    r = [(cx * cp - cy * sp, cx * sp + cy * cp) for cx, cy in c]
    d0x, d0y = b[..., 0, 0] - r[0][0], b[..., 0, 1] - r[0][1]
    ex = b[..., 1, 0] - r[1][0] - d0x
    ey = b[..., 1, 1] - r[1][1] - d0y
    dist = np.sqrt(ex * ex + ey * ey)
    with np.errstate(invalid="ignore", divide="ignore"):
        along = (dist * dist + (m[0] * m[0] - m[1] * m[1])) / (2.0 * dist)
        inv = 1.0 / dist
    h2 = np.where(dist > 0.0, m[0] * m[0] - along * along, -np.inf)
    ux, uy = ex * inv, ey * inv
    return d0x + along * ux, d0y + along * uy, ux, uy, h2, r[2]


def _branch_eval(m: np.ndarray, c: np.ndarray, b: np.ndarray, phi: np.ndarray):
    """Squared half-chord and third-leg defect on both branches.

    Returns ``(h2, g)`` with ``g[0]`` on the ``+`` branch (platform point on
    the left of the chord axis) and ``g[1]`` on the ``-`` branch.  Where
    ``h2 < 0`` the half-chord is clipped to zero.
    """
    mx, my, ux, uy, h2, r2 = _chord(m, c, b, phi)
    ox = mx + r2[0] - b[..., 2, 0]
    oy = my + r2[1] - b[..., 2, 1]
    hh = np.clip(h2, 0.0, None)
    base = ox * ox + oy * oy + hh - m[2] * m[2]
    cross = 2.0 * np.sqrt(hh) * (ox * uy - oy * ux)
    return h2, np.stack((base - cross, base + cross))


def _branch_points(m: np.ndarray, c: np.ndarray, b: np.ndarray, phi: np.ndarray, branch: np.ndarray) -> np.ndarray:
    mx, my, ux, uy, h2, _ = _chord(m, c, b, phi)
    sh = np.where(branch == 0, 1.0, -1.0) * np.sqrt(np.clip(h2, 0.0, None))
    return np.column_stack([mx - sh * uy, my + sh * ux])


def _bisect(pred, lo: np.ndarray, hi: np.ndarray, pred_lo: np.ndarray, iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized bisection on a boolean predicate, keeping ``pred(lo) == pred_lo``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        same = pred(mid) == pred_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return lo, hi


def _golden_min(fun, lo: np.ndarray, hi: np.ndarray, iters: int = 60) -> np.ndarray:
    """Vectorized golden-section search for a minimum of ``fun`` on [lo, hi]."""
    r = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - r * (hi - lo), lo + r * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        xn = np.where(left, hi - r * (hi - lo), lo + r * (hi - lo))
        fn = fun(xn)
        x1, x2, f1, f2 = (
            np.where(left, xn, x2),
            np.where(left, x1, xn),
            np.where(left, fn, f2),
            np.where(left, f1, fn),
        )
    return 0.5 * (lo + hi)


def _fk_chunk(model: ThreeRrrModel, qs: np.ndarray) -> list[np.ndarray]:
    m = np.array(model.m)
    c = model._c
    a = model._a
    l = np.array(model.l)
    nq = len(qs)
    bpts = a + l[:, None] * np.stack([np.cos(qs), np.sin(qs)], axis=-1)  # (nq, 3, 2)

    K = model.n_phi
    step = 2.0 * math.pi / K
    phis = -math.pi + step * np.arange(1, K + 1)
    h2, g = _branch_eval(m, c, bpts[:, None], phis)
    feas = h2 >= 0.0
    feas_next = np.roll(feas, -1, axis=1)
    pos = g > 0
    pos_next = np.roll(pos, -1, axis=2)

    # Each bracket: (config, branch, phi_a, phi_b, g(phi_a) > 0).
    bq, bs, ba, bb_, bpos = [], [], [], [], []

    def add(qi, si, pa, pb, pos):
        bq.append(np.asarray(qi)), bs.append(np.asarray(si))
        ba.append(np.asarray(pa, float)), bb_.append(np.asarray(pb, float)), bpos.append(np.asarray(pos))

    # 1. sign changes between consecutive samples on a live branch
    both = feas & feas_next
    for s in (0, 1):
        qi, ki = np.nonzero(both & (pos[s] != pos_next[s]))
        add(qi, np.full(len(qi), s), phis[ki], phis[ki] + step, pos[s][qi, ki])

    # 2. branch birth/death between samples: locate the tangency, then test
    #    each branch between the live sample and the tangency point
    qi, ki = np.nonzero(feas != feas_next)
    if len(qi):
        live_first = feas[qi, ki]
        p_live = np.where(live_first, phis[ki], phis[ki] + step)
        p_dead = np.where(live_first, phis[ki] + step, phis[ki])
        bsub = bpts[qi]

        def alive(p):
            return _branch_eval(m, c, bsub, p)[0] >= 0.0

        p_t, _ = _bisect(alive, p_live, p_dead, np.ones(len(qi), bool), 60)
        g_t = _branch_eval(m, c, bsub, p_t)[1]
        # near the tangency a branch behaves like b0 - A*sqrt(dphi), so it can
        # dip through zero and back between samples; search for the dip from
        # one step before the last live sample up to the tangency
        p_live = 2.0 * p_live - p_dead
        g_l = _branch_eval(m, c, bsub, p_live)[1]
        lo, hi = np.minimum(p_live, p_t), np.maximum(p_live, p_t)
        for s in (0, 1):
            sgn = np.where(g_l[s] > 0, 1.0, -1.0)

            def fs(p, s=s, sgn=sgn):
                return sgn * _branch_eval(m, c, bsub, p)[1][s]

            p_m = _golden_min(fs, lo, hi)
            g_m = _branch_eval(m, c, bsub, p_m)[1][s]
            hit = (g_l[s] > 0) != (g_m > 0)
            add(qi[hit], np.full(hit.sum(), s), p_live[hit], p_m[hit], g_l[s][hit] > 0)
            hit = (g_m > 0) != (g_t[s] > 0)
            add(qi[hit], np.full(hit.sum(), s), p_m[hit], p_t[hit], g_m[hit] > 0)

    # 3. near-double roots: |g| has a small local minimum without a sign change
    ag = np.abs(g)
    for s in (0, 1):
        ags = ag[s]
        qi, ki = np.nonzero((ags < np.roll(ags, 1, axis=1)) & (ags <= np.roll(ags, -1, axis=1)))
        kp, kn = (ki - 1) % K, (ki + 1) % K
        gs = g[s]
        g0, gp, gn = gs[qi, ki], gs[qi, kp], gs[qi, kn]
        ok = feas[qi, ki] & feas[qi, kp] & feas[qi, kn]
        ok &= (np.sign(g0) == np.sign(gp)) & (np.sign(g0) == np.sign(gn))
        ok &= np.abs(g0) <= 4.0 * np.maximum(np.abs(gp - g0), np.abs(gn - g0))
        qi, ki = qi[ok], ki[ok]
        if not len(qi):
            continue
        sgn = np.sign(gs[qi, ki])
        bsub = bpts[qi]
        lo, hi = phis[ki] - step, phis[ki] + step

        def fs(p):
            return sgn * _branch_eval(m, c, bsub, p)[1][s]

        pmin = _golden_min(fs, lo, hi)
        dip = fs(pmin) < 0
        if dip.any():
            qd, pm, sg = qi[dip], pmin[dip], sgn[dip] > 0
            k0 = ki[dip]
            add(qd, np.full(len(qd), s), phis[k0] - step, pm, sg)
            add(qd, np.full(len(qd), s), pm, phis[k0] + step, ~sg)

    results: list[list[np.ndarray]] = [[] for _ in range(nq)]

    # 4. near-coincident leg 1 and leg 2 circles: the chord axis flips and
    #    both branches jump, so roots at the jump are seeded directly from
    #    the intersections of the shared circle with the leg 3 circle
    gap = _center_gap(c, bpts[:, None], phis)
    qi, ki = np.nonzero((gap < np.roll(gap, 1, axis=1)) & (gap <= np.roll(gap, -1, axis=1)) & (gap < 0.05 * (m[0] + m[1])))
    if len(qi):
        bsub = bpts[qi]
        p_c = _golden_min(lambda p: _center_gap(c, bsub, p), phis[ki] - step, phis[ki] + step)
        seeds, owners = _coincidence_seeds(m, c, bsub, p_c)
        if len(seeds):
            sb = bsub[owners]
            seeds = _newton_polish(model, seeds, sb, iters=8)
            ok = np.isfinite(_residuals(model, seeds, sb)) & (_residuals(model, seeds, sb) <= FK_RESIDUAL_TOL)
            for i, p in zip(qi[owners[ok]], seeds[ok]):
                results[i].append(p)

    if bq:
        bq_a = np.concatenate(bq).astype(int)
        if len(bq_a):
            bs_a = np.concatenate(bs).astype(int)
            lo, hi = np.concatenate(ba), np.concatenate(bb_)
            pos = np.concatenate(bpos).astype(bool)
            bsub = bpts[bq_a]
            rows = np.arange(len(bq_a))

            def positive(p):
                return _branch_eval(m, c, bsub, p)[1][bs_a, rows] > 0

            lo, hi = _bisect(positive, lo, hi, pos, 52)
            root = 0.5 * (lo + hi)
            xy = _branch_points(m, c, bsub, root, bs_a)
            poses = np.column_stack([xy, root])
            poses = _newton_polish(model, poses, bsub)
            res = _residuals(model, poses, bsub)
            keep = np.isfinite(res) & (res <= FK_RESIDUAL_TOL)
            for i, p in zip(bq_a[keep], poses[keep]):
                results[i].append(p)

    return [_dedup(np.array(r).reshape(-1, 3)) for r in results]


def _center_gap(c: np.ndarray, b: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Distance between the platform-origin circle centers of legs 1 and 2."""
    cp, sp = np.cos(phi), np.sin(phi)
    ex = b[..., 1, 0] - b[..., 0, 0] - ((c[1, 0] - c[0, 0]) * cp - (c[1, 1] - c[0, 1]) * sp)
    ey = b[..., 1, 1] - b[..., 0, 1] - ((c[1, 0] - c[0, 0]) * sp + (c[1, 1] - c[0, 1]) * cp)
    return np.hypot(ex, ey)


def _coincidence_seeds(m: np.ndarray, c: np.ndarray, b: np.ndarray, phi: np.ndarray):
    """Intersections of the leg 1 and leg 3 platform-origin circles at ``phi``.

    Returns ``(poses, owner)`` with one row per intersection point.
    """
    r = _rotated(c, phi)
    o1 = b[:, 0] - r[:, 0]
    o3 = b[:, 2] - r[:, 2]
    d = o3 - o1
    dist = np.hypot(d[:, 0], d[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        along = (dist * dist + m[0] * m[0] - m[2] * m[2]) / (2.0 * dist)
        u = d / dist[:, None]
    h2 = m[0] * m[0] - along * along
    live = (dist > 0) & (h2 >= -1e-9 * m[0] * m[0])
    h = np.sqrt(np.clip(h2, 0.0, None))
    poses, owner = [], []
    for sgn in (1.0, -1.0):
        xy = o1 + along[:, None] * u + sgn * h[:, None] * np.column_stack([-u[:, 1], u[:, 0]])
        poses.append(np.column_stack([xy, phi])[live])
        owner.append(np.nonzero(live)[0])
    return np.concatenate(poses), np.concatenate(owner)


def _residuals(model: ThreeRrrModel, poses: np.ndarray, bpts: np.ndarray) -> np.ndarray:
    w = poses[:, None, :2] + _rotated(model._c, poses[:, 2]) - bpts
    f = w[..., 0] ** 2 + w[..., 1] ** 2 - np.array(model.m) ** 2
    return np.abs(f).max(axis=1)


def _newton_polish(model: ThreeRrrModel, poses: np.ndarray, bpts: np.ndarray, iters: int = 3) -> np.ndarray:
    c = model._c
    m2 = np.array(model.m) ** 2
    for _ in range(iters):
        phi = poses[:, 2]
        cp, sp = np.cos(phi)[:, None], np.sin(phi)[:, None]
        w = poses[:, None, :2] + _rotated(c, phi) - bpts
        f = w[..., 0] ** 2 + w[..., 1] ** 2 - m2
        dphi = w[..., 0] * (-c[:, 0] * sp - c[:, 1] * cp) + w[..., 1] * (c[:, 0] * cp - c[:, 1] * sp)
        jac = 2.0 * np.stack([w[..., 0], w[..., 1], dphi], axis=-1)
        det = np.linalg.det(jac)
        ok = np.abs(det) > 1e-9
        jac[~ok] = np.eye(3)
        step = np.linalg.solve(jac, f[..., None])[..., 0]
        step[~ok] = 0.0
        cand = poses - step
        better = _residuals(model, cand, bpts) <= np.abs(f).max(axis=1)
        poses = np.where(better[:, None], cand, poses)
    poses[:, 2] = wrap_angles(poses[:, 2])
    return poses


def _dedup(poses: np.ndarray, tol: float = FK_DEDUP_TOL) -> np.ndarray:
    if len(poses) == 0:
        return poses
    poses = poses[np.argsort(poses[:, 2], kind="stable")]
    kept: list[np.ndarray] = []
    for p in poses:
        if not any(_pose_gap(p, k) <= tol for k in kept):
            kept.append(p)
    return np.array(kept)


def _pose_gap(p: np.ndarray, r: np.ndarray) -> float:
    return max(abs(p[0] - r[0]), abs(p[1] - r[1]), 10.0 * abs(wrap_angle(p[2] - r[2])))


def ik3(model: ThreeRrrModel, pose: Pose) -> list[ThreeRrrIkSolution]:
    return model.ik(pose)


def ik3_mode(model: ThreeRrrModel, pose: Pose, mode: SignVector) -> ThreeRrrIkSolution | None:
    return model.ik_mode(pose, mode)


def fk3(model: ThreeRrrModel, q: Sequence[float] | ActuatedConfig) -> list[Pose]:
    return model.fk(q)


def jacobians3(model: ThreeRrrModel, pose: Pose, q) -> JacobianPair:
    return model.jacobians(pose, q)


def working_mode_of(model: ThreeRrrModel, pose: Pose, q) -> SignVector | None:
    signs = [classify_sign(b, model.zero_tol) for b in model.serial_terms(pose, q)]
    return None if Sign.NEAR_ZERO in signs else SignVector(signs)


MODES = enumerate_working_modes(3)
