"""INI model configuration files.

Example::

    [model]
    kind = rr_rrr
    l1 = 8
    l2 = 5
    l3 = 5
    l4 = 8
    c1 = 0
    c2 = 9

    [grid]
    x = -13, 22
    y = -13, 13
    resolution = 400x400

A ``3rrr`` model takes ``a1..a3`` and ``c1..c3`` as ``x, y`` pairs and
``l1..l3``, ``m1..m3`` as lengths.  Optional sections are ``[tolerances]``
and ``[trajectory]``; unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import DEFAULT_RESIDUAL_TOL, DEFAULT_ZERO_TOL, Pose, SignVector
from .decomposition import FIELD_ZERO_TOL, GridSpec
from .rr_rrr import RrRrrModel
from .three_rrr import ThreeRrrModel
from .trajectory import DEFAULT_SAMPLES, TRACE_ZERO_TOL, Waypath


class ConfigError(ValueError):
    pass


_MODEL_KEYS = {
    "rr_rrr": {"kind", "l1", "l2", "l3", "l4", "c1", "c2"},
    "3rrr": {"kind", "a1", "a2", "a3", "c1", "c2", "c3", "l1", "l2", "l3", "m1", "m2", "m3"},
}
_SECTION_KEYS = {
    "grid": {"x", "y", "phi", "resolution", "workers"},
    "tolerances": {"zero_tol", "residual_tol", "field_zero_tol", "trace_zero_tol"},
    "trajectory": {"waypoints", "samples_per_segment", "mode"},
}


@dataclass
class Tolerances:
    zero_tol: float = DEFAULT_ZERO_TOL
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    field_zero_tol: float = FIELD_ZERO_TOL
    trace_zero_tol: float = TRACE_ZERO_TOL


@dataclass
class ModelConfig:
    kind: str
    model: RrRrrModel | ThreeRrrModel
    tolerances: Tolerances = field(default_factory=Tolerances)
    grid: GridSpec | None = None
    workers: int = 1
    path: Waypath | None = None
    trajectory_mode: SignVector | None = None


def _floats(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what}: expected {n} finite numbers, got {text!r}")
    return vals


def _float(text: str, what: str) -> float:
    return _floats(text, 1, what)[0]


def parse_resolution(text: str, ndim: int | None = None) -> tuple[int, ...]:
    """``"400"`` or ``"400x300"`` or ``"64x64x48"``."""
    try:
        res = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"invalid grid resolution {text!r}") from None
    if ndim is not None:
        if len(res) == 1:
            res = res * ndim
        if len(res) != ndim:
            raise ConfigError(f"grid resolution {text!r} needs {ndim} entries")
    return res


def parse_mode(text: str, n: int) -> SignVector:
    try:
        mode = SignVector.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if len(mode) != n:
        raise ConfigError(f"mode {text!r} needs {n} signs")
    return mode


def _check_keys(section: str, present, allowed) -> None:
    extra = sorted(set(present) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def load_config(path: str | Path) -> ModelConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return parse_config(parser)


def parse_config(parser: configparser.ConfigParser) -> ModelConfig:
    sections = set(parser.sections())
    unknown = sections - {"model"} - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    if "model" not in sections:
        raise ConfigError("missing [model] section")
    m = parser["model"]
    kind = m.get("kind", "").strip()
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"model kind must be one of {sorted(_MODEL_KEYS)}, got {kind!r}")
    _check_keys("model", m.keys(), _MODEL_KEYS[kind])
    optional = {"c1", "c2"} if kind == "rr_rrr" else set()
    missing = sorted(_MODEL_KEYS[kind] - optional - set(m.keys()))
    if missing:
        raise ConfigError(f"missing key(s) in [model]: {', '.join(missing)}")

    tol = Tolerances()
    if parser.has_section("tolerances"):
        t = parser["tolerances"]
        _check_keys("tolerances", t.keys(), _SECTION_KEYS["tolerances"])
        for key in t:
            v = _float(t[key], key)
            if v <= 0:
                raise ConfigError(f"{key} must be positive")
            setattr(tol, key, v)

    try:
        if kind == "rr_rrr":
            model = RrRrrModel(
                *(_float(m[k], k) for k in ("l1", "l2", "l3", "l4")),
                c1=_float(m.get("c1", "0"), "c1"),
                c2=_float(m.get("c2", "9"), "c2"),
                zero_tol=tol.zero_tol,
                residual_tol=tol.residual_tol,
            )
        else:
            model = ThreeRrrModel(
                a=[_floats(m[f"a{i}"], 2, f"a{i}") for i in (1, 2, 3)],
                c=[_floats(m[f"c{i}"], 2, f"c{i}") for i in (1, 2, 3)],
                l=[_float(m[f"l{i}"], f"l{i}") for i in (1, 2, 3)],
                m=[_float(m[f"m{i}"], f"m{i}") for i in (1, 2, 3)],
                zero_tol=tol.zero_tol,
                residual_tol=tol.residual_tol,
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from None

    cfg = ModelConfig(kind, model, tol)
    dof = model.dof

    if parser.has_section("grid"):
        g = parser["grid"]
        _check_keys("grid", g.keys(), _SECTION_KEYS["grid"])
        for key in ("x", "y", "resolution"):
            if key not in g:
                raise ConfigError(f"missing key in [grid]: {key}")
        bounds = [_floats(g["x"], 2, "x"), _floats(g["y"], 2, "y")]
        if dof == 3:
            bounds.append(_floats(g["phi"], 2, "phi") if "phi" in g else (-math.pi, math.pi))
        elif "phi" in g:
            raise ConfigError("phi bounds apply to 3-DOF models only")
        # the orientation axis wraps only when it spans a full turn
        periodic = (False, False) + ((abs(bounds[2][1] - bounds[2][0] - 2 * math.pi) < 1e-9,) if dof == 3 else ())
        try:
            cfg.grid = GridSpec(tuple(bounds), parse_resolution(g["resolution"], dof), periodic)
        except ValueError as exc:
            raise ConfigError(f"invalid grid: {exc}") from None
        if "workers" in g:
            cfg.workers = _positive_int(g["workers"], "workers")

    if parser.has_section("trajectory"):
        t = parser["trajectory"]
        _check_keys("trajectory", t.keys(), _SECTION_KEYS["trajectory"])
        if "waypoints" not in t:
            raise ConfigError("missing key in [trajectory]: waypoints")
        pts = [p for p in t["waypoints"].replace("\n", ";").split(";") if p.strip()]
        poses = [Pose(*_floats(p, dof, "waypoint")) for p in pts]
        samples = _positive_int(t.get("samples_per_segment", str(DEFAULT_SAMPLES)), "samples_per_segment")
        try:
            cfg.path = Waypath(tuple(poses), samples)
        except ValueError as exc:
            raise ConfigError(f"invalid trajectory: {exc}") from None
        if "mode" in t:
            cfg.trajectory_mode = parse_mode(t["mode"], dof)
    return cfg


def _positive_int(text: str, what: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {text!r}") from None
    if v < 1:
        raise ConfigError(f"{what} must be positive")
    return v
