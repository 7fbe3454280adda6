"""Working modes, aspects and uniqueness domains of planar parallel manipulators."""

from .core import (
    ActuatedConfig,
    BranchLost,
    JacobianPair,
    KinematicsError,
    Pose,
    ResidualViolation,
    Sign,
    SignVector,
    classify_sign,
    enumerate_working_modes,
)
from .rr_rrr import RrRrrModel
from .three_rrr import ThreeRrrModel

__all__ = [
    "ActuatedConfig",
    "BranchLost",
    "JacobianPair",
    "KinematicsError",
    "Pose",
    "ResidualViolation",
    "RrRrrModel",
    "Sign",
    "SignVector",
    "ThreeRrrModel",
    "classify_sign",
    "enumerate_working_modes",
]
