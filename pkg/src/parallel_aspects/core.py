"""Shared types for fully parallel planar manipulators.

A manipulator relates a platform pose ``X`` and actuated joints ``q`` through
``n`` independent leg constraints ``F(X, q) = 0``.  Differentiating gives a
parallel Jacobian ``A`` (w.r.t. ``X``) and a diagonal serial Jacobian ``B``
(w.r.t. ``q``).  A *working mode* is a fixed sign pattern of the diagonal
entries ``B_jj``; for non-cuspidal legs each mode selects exactly one inverse
kinematic solution.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

DEFAULT_ZERO_TOL = 1e-9
DEFAULT_RESIDUAL_TOL = 1e-9


class KinematicsError(Exception):
    """Base class for errors raised by this package."""


class ResidualViolation(KinematicsError):
    """A (pose, q) pair does not satisfy the constraint equations."""

    def __init__(self, residual: float, tol: float):
        super().__init__(f"constraint residual {residual:.3e} exceeds tolerance {tol:.1e}")
        self.residual = residual
        self.tol = tol


class BranchLost(KinematicsError):
    """The requested working-mode branch does not exist at some sample."""

    def __init__(self, index: int, mode: "SignVector | None" = None):
        where = f" in mode {mode}" if mode is not None else ""
        super().__init__(f"IK branch lost at sample {index}{where}")
        self.index = index
        self.mode = mode


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    return math.pi if r <= -math.pi else r


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_angle`."""
    r = np.remainder(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(r <= -math.pi, math.pi, r)


class Sign(enum.IntEnum):
    MINUS = -1
    NEAR_ZERO = 0
    PLUS = 1

    @property
    def symbol(self) -> str:
        return {Sign.PLUS: "+", Sign.MINUS: "-", Sign.NEAR_ZERO: "0"}[self]


def classify_sign(value: float, zero_tol: float = DEFAULT_ZERO_TOL) -> Sign:
    """Three-way sign of ``value`` with a symmetric dead band of width ``zero_tol``."""
    if not zero_tol > 0:
        raise ValueError("zero_tol must be positive")
    if value > zero_tol:
        return Sign.PLUS
    if value < -zero_tol:
        return Sign.MINUS
    return Sign.NEAR_ZERO


def classify_signs(values: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    """Array version of :func:`classify_sign` returning int8 codes (-1, 0, 1)."""
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape, dtype=np.int8)
    out[values > zero_tol] = 1
    out[values < -zero_tol] = -1
    return out


class SignVector(tuple):
    """Immutable sign pattern of the diagonal serial Jacobian; never contains zero.

    ``str(SignVector.parse("+-+")) == "+-+"``.
    """

    def __new__(cls, signs: Iterable[Sign | int]):
        items = tuple(Sign(int(s)) for s in signs)
        if not items:
            raise ValueError("empty sign vector")
        if any(s is Sign.NEAR_ZERO for s in items):
            raise ValueError("a sign vector cannot contain a zero entry")
        return super().__new__(cls, items)

    @classmethod
    def parse(cls, text: str) -> "SignVector":
        table = {"+": Sign.PLUS, "-": Sign.MINUS}
        try:
            return cls(table[ch] for ch in text.strip())
        except KeyError:
            raise ValueError(f"invalid sign string {text!r}; expected only '+' and '-'") from None

    @property
    def n(self) -> int:
        return len(self)

    def flipped(self) -> "SignVector":
        return SignVector(-s for s in self)

    def as_array(self) -> np.ndarray:
        return np.array([int(s) for s in self], dtype=float)

    def __str__(self) -> str:
        return "".join(s.symbol for s in self)

    def __repr__(self) -> str:
        return f"SignVector({str(self)!r})"


def enumerate_working_modes(n: int) -> list[SignVector]:
    """All ``2**n`` sign patterns in lexicographic order with ``+`` before ``-``.

    Index ``i`` of the returned list is working mode ``Mf_{i+1}``.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 16:
        raise ValueError(f"number of legs must be in [1, 16], got {n!r}")
    return [SignVector(p) for p in itertools.product((Sign.PLUS, Sign.MINUS), repeat=int(n))]


def mode_index(mode: SignVector) -> int:
    """Zero-based position of ``mode`` in :func:`enumerate_working_modes`."""
    idx = 0
    for s in mode:
        idx = 2 * idx + (1 if s is Sign.MINUS else 0)
    return idx


@dataclass(frozen=True)
class Pose:
    """Platform configuration; ``phi`` is ignored by 2-DOF models."""

    x: float
    y: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.phi)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.phi})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "phi", wrap_angle(float(self.phi)))

    def as_array(self, dof: int = 3) -> np.ndarray:
        return np.array((self.x, self.y, self.phi)[:dof])

    @classmethod
    def from_array(cls, v: Sequence[float]) -> "Pose":
        return cls(*[float(t) for t in v])

    def distance(self, other: "Pose", dof: int = 3, angle_weight: float = 10.0) -> float:
        """max(|dx|, |dy|, angle_weight*|dphi|), with dphi wrapped."""
        d = max(abs(self.x - other.x), abs(self.y - other.y))
        if dof > 2:
            d = max(d, angle_weight * abs(wrap_angle(self.phi - other.phi)))
        return d


@dataclass(frozen=True)
class ActuatedConfig:
    """Actuated joint angles, normalized to (-pi, pi]."""

    angles: tuple[float, ...]

    def __post_init__(self):
        angles = tuple(wrap_angle(float(a)) for a in self.angles)
        if not angles or not all(math.isfinite(a) for a in angles):
            raise ValueError(f"invalid actuated configuration {self.angles!r}")
        object.__setattr__(self, "angles", angles)

    def __len__(self) -> int:
        return len(self.angles)

    def __iter__(self):
        return iter(self.angles)

    def __getitem__(self, i):
        return self.angles[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.angles)

    def distance(self, other: "ActuatedConfig | Sequence[float]") -> float:
        return max(abs(wrap_angle(a - b)) for a, b in zip(self.angles, other))


def as_config(q, dof: int) -> ActuatedConfig:
    q = q if isinstance(q, ActuatedConfig) else ActuatedConfig(tuple(q))
    if len(q) != dof:
        raise ValueError(f"expected {dof} actuated angles, got {len(q)}")
    return q


@dataclass(frozen=True)
class JacobianPair:
    """Parallel Jacobian ``A`` and the diagonal of the serial Jacobian ``B``."""

    a_matrix: np.ndarray
    b_diagonal: tuple[float, ...]

    @property
    def det_a(self) -> float:
        return float(np.linalg.det(self.a_matrix))

    @property
    def det_b(self) -> float:
        return math.prod(self.b_diagonal)


class ManipulatorModel(Protocol):
    """Contract shared by the planar mechanisms.

    The ``*_batch`` methods operate on stacked arrays and back the grid
    sampling and trajectory code; the scalar methods are the public API.
    """

    dof: int
    zero_tol: float
    residual_tol: float

    def constraints(self, pose: Pose, q: Sequence[float]) -> list[float]: ...

    def ik(self, pose: Pose) -> list: ...

    def ik_mode(self, pose: Pose, mode: SignVector): ...

    def fk(self, q) -> list[Pose]: ...

    def jacobians(self, pose: Pose, q) -> JacobianPair: ...

    def ik_mode_batch(self, points: np.ndarray, mode: SignVector) -> "BatchIk": ...

    def fk_batch(self, qs: np.ndarray) -> list[np.ndarray]: ...


@dataclass
class BatchIk:
    """Vectorized result of ``ik_mode`` over ``N`` poses.

    ``feasible`` is False where the leg circles do not meet; ``q``, ``det_a``
    and ``b_diagonal`` are NaN there.
    """

    feasible: np.ndarray  # (N,) bool
    q: np.ndarray  # (N, n)
    det_a: np.ndarray  # (N,)
    b_diagonal: np.ndarray  # (N, n)


def solve_leg(ax: float, ay: float, proximal: float, distal: float, tol: float = 1e-12):
    """Two-link reachability of one leg.

    The leg has its actuated pivot at the origin, a proximal link of length
    ``proximal`` and a distal link of length ``distal`` ending at ``(ax, ay)``.
    Returns ``(psi, half_width, h)`` where the two branches are
    ``psi + half_width`` (positive serial term) and ``psi - half_width``
    (negative), and ``h >= 0`` is the half-chord that vanishes at alignment.
    Returns None when unreachable.
    """
    r2 = ax * ax + ay * ay
    if r2 == 0.0:
        return None
    k = (r2 + proximal * proximal - distal * distal) / (2.0 * proximal)
    h2 = r2 - k * k
    if h2 < 0.0:
        if h2 < -tol * max(r2, 1.0):
            return None
        h2 = 0.0
    h = math.sqrt(h2)
    return math.atan2(ay, ax), math.atan2(h, k), h


def solve_leg_batch(ax: np.ndarray, ay: np.ndarray, proximal, distal, tol: float = 1e-12):
    """Vectorized :func:`solve_leg`; returns ``(feasible, psi, half_width, h)``."""
    r2 = ax * ax + ay * ay
    k = (r2 + proximal * proximal - distal * distal) / (2.0 * proximal)
    h2 = r2 - k * k
    feasible = (h2 >= -tol * np.maximum(r2, 1.0)) & (r2 > 0.0)
    h = np.sqrt(np.clip(h2, 0.0, None))
    return feasible, np.arctan2(ay, ax), np.arctan2(h, k), h
