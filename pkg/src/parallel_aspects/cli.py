"""Command-line front end.

Every subcommand reads an INI model file (``--config``) and writes CSV with
17 significant digits.  Exit codes: 0 ok, 2 configuration error, 3 numeric
failure, 4 IK branch lost along a trajectory.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .config import ConfigError, ModelConfig, load_config, parse_mode, parse_resolution
from .core import BranchLost, KinematicsError, Pose, SignVector, classify_sign, enumerate_working_modes
from .decomposition import (
    GridSpec,
    LabeledField,
    basic_components,
    decompose_regions,
    format_sign_class,
    generalized_aspects,
    merge_census,
    sample_field,
    uniqueness_domains,
)
from .trajectory import (
    Violation,
    first_violation,
    trace,
    verify_assembly_mode_change,
    verify_nonsingular,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BRANCH = 0, 2, 3, 4

PALETTE = (
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
)
SINGULAR_COLOR = "#303030"
SURFACE_COLOR = "#a00000"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_rows(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def mode_tag(mode: SignVector) -> str:
    """File-name friendly mode string: ``+-+`` -> ``pmp``."""
    return str(mode).replace("+", "p").replace("-", "m")


def sign_string(values: Iterable[float], tol: float) -> str:
    return "".join(classify_sign(v, tol).symbol for v in values)


def parse_floats(text: str, n: int, what: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"--{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"--{what}: expected {n} values for this model, got {len(vals)}")
    return vals


def angle_names(cfg: ModelConfig) -> list[str]:
    return ["alpha1", "alpha2", "alpha3"] if cfg.model.dof == 3 else ["theta1", "theta2"]


def pose_names(dof: int) -> list[str]:
    return ["x", "y", "phi"][:dof]


class Output:
    """Write to ``--out DIR/name`` when given, else to stdout."""

    def __init__(self, out: Path | None):
        self.out = out
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

    def open(self, name: str):
        if self.out is None:
            return _Borrowed(sys.stdout)
        return open(self.out / name, "w", encoding="utf-8", newline="")


class _Borrowed:
    def __init__(self, stream):
        self.stream = stream

    def __enter__(self):
        return self.stream

    def __exit__(self, *exc):
        self.stream.flush()
        return False


# -- point queries -------------------------------------------------------------


def _model(cfg: ModelConfig, args):
    return replace(cfg.model, zero_tol=args.tol) if args.tol is not None else cfg.model


def cmd_ik(args, cfg: ModelConfig) -> int:
    model = _model(cfg, args)
    pose = Pose(*parse_floats(args.pose, model.dof, "pose"))
    sols = model.ik(pose)
    if args.mode:
        mode = parse_mode(args.mode, model.dof)
        sols = [s for s in sols if s.mode == mode]
    rows = [(i, "".join(s.symbol for s in sol.branch), *sol.q, model.residual(pose, sol.q)) for i, sol in enumerate(sols)]
    with Output(args.out).open("ik.csv") as fh:
        write_rows(fh, ["index", "mode", *angle_names(cfg), "residual"], rows)
    return EXIT_OK


def cmd_fk(args, cfg: ModelConfig) -> int:
    model = _model(cfg, args)
    q = parse_floats(args.q, model.dof, "q")
    rows = []
    for i, pose in enumerate(model.fk(q)):
        mode = sign_string(model.serial_terms(pose, q), model.zero_tol)
        rows.append((i, mode, *pose.as_array(model.dof), model.residual(pose, q)))
    with Output(args.out).open("fk.csv") as fh:
        write_rows(fh, ["index", "mode", *pose_names(model.dof), "residual"], rows)
    return EXIT_OK


def cmd_jacobians(args, cfg: ModelConfig) -> int:
    model = _model(cfg, args)
    n = model.dof
    pose = Pose(*parse_floats(args.pose, n, "pose"))
    if args.q is not None:
        configs = [parse_floats(args.q, n, "q")]
    else:
        sols = model.ik(pose)
        if args.mode:
            mode = parse_mode(args.mode, n)
            sols = [s for s in sols if s.mode == mode]
        configs = [tuple(s.q) for s in sols]
    rows = []
    for i, q in enumerate(configs):
        jac = model.jacobians(pose, q)
        mode = sign_string(jac.b_diagonal, model.zero_tol)
        rows.append((i, mode, *q, jac.det_a, *jac.b_diagonal, jac.det_b, *jac.a_matrix.ravel()))
    header = ["index", "mode", *angle_names(cfg), "det_a"]
    header += [f"b{j}{j}" for j in range(1, n + 1)] + ["det_b"]
    header += [f"a{r}{c}" for r in range(1, n + 1) for c in range(1, n + 1)]
    with Output(args.out).open("jacobians.csv") as fh:
        write_rows(fh, header, rows)
    return EXIT_OK


def cmd_singularities(args, cfg: ModelConfig) -> int:
    rows = [tuple(c[:2]) + tuple(c[2]) + (c[3],) for c in cfg.model.serial_singularity_curves()]
    with Output(args.out).open("singularities.csv") as fh:
        write_rows(fh, ["leg", "kind", "center_x", "center_y", "radius"], rows)
    return EXIT_OK


# -- grid commands ---------------------------------------------------------------


def _grid(cfg: ModelConfig, args) -> GridSpec:
    if cfg.grid is None:
        raise ConfigError("this command needs a [grid] section")
    grid = cfg.grid
    if args.grid:
        try:
            grid = GridSpec(grid.bounds, parse_resolution(args.grid, grid.ndim), grid.periodic)
        except ValueError as exc:
            raise ConfigError(f"invalid --grid: {exc}") from None
    return grid


def _modes(cfg: ModelConfig, args) -> list[SignVector]:
    if args.mode:
        return [parse_mode(args.mode, cfg.model.dof)]
    return enumerate_working_modes(cfg.model.dof)


def field_rows(field: LabeledField):
    grid = field.grid
    pts = grid.points()
    aspect = field.aspect if field.aspect is not None else np.zeros(grid.shape, np.int32)
    region = field.region if field.region is not None else np.zeros(grid.shape, np.int32)
    surface = field.surface if field.surface is not None else np.zeros(grid.shape, bool)
    for flat in np.flatnonzero(field.feasible.ravel()):
        idx = np.unravel_index(flat, grid.shape)
        yield (
            *map(int, idx),
            *pts[flat],
            1,
            int(field.det_sign[idx]),
            *map(int, field.b_signs[idx]),
            int(aspect[idx]),
            int(region[idx]),
            int(surface[idx]),
        )


def field_header(dof: int) -> list[str]:
    idx = ["i", "j", "k"][:dof]
    return [*idx, *pose_names(dof), "feasible", "det_a_sign", *[f"b{j}{j}_sign" for j in range(1, dof + 1)], "aspect", "region", "surface"]


def render_svg(field: LabeledField, labels: np.ndarray, cell_px: int = 2) -> str:
    """Flat-colour raster of a 2D label array (or the phi-middle slice in 3D).

    ``labels`` > 0 are coloured from the palette; feasible unlabeled cells
    are drawn as singular; surface cells are overlaid.
    """
    feasible, surface = field.feasible, field.surface
    if labels.ndim == 3:
        k = labels.shape[2] // 2
        labels, feasible = labels[:, :, k], feasible[:, :, k]
        surface = surface[:, :, k] if surface is not None else None
    nx, ny = labels.shape
    code = np.where(feasible, np.where(labels > 0, labels, 0), -1)
    if surface is not None:
        code = np.where(surface, -2, code)
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * cell_px}" height="{ny * cell_px}" '
        f'viewBox="0 0 {nx} {ny}" shape-rendering="crispEdges">\n'
    )
    out.write(f'<rect x="0" y="0" width="{nx}" height="{ny}" fill="#ffffff"/>\n')
    for row in range(ny):
        j = ny - 1 - row  # y grows upwards
        line = code[:, j]
        start = 0
        for i in range(1, nx + 1):
            if i == nx or line[i] != line[start]:
                v = int(line[start])
                if v != -1:
                    color = SURFACE_COLOR if v == -2 else SINGULAR_COLOR if v == 0 else PALETTE[(v - 1) % len(PALETTE)]
                    out.write(f'<rect x="{start}" y="{row}" width="{i - start}" height="1" fill="{color}"/>\n')
                start = i
    out.write("</svg>\n")
    return out.getvalue()


def _run_grid(args, cfg: ModelConfig, depth: str) -> int:
    grid = _grid(cfg, args)
    model = cfg.model
    zero_tol = args.tol if args.tol is not None else cfg.tolerances.field_zero_tol
    workers = args.workers or cfg.workers
    out = Output(args.out if args.out is not None else Path("."))
    censuses = []
    region_rows, domain_rows = [], []
    for mode in _modes(cfg, args):
        field = sample_field(model, mode, grid, zero_tol=zero_tol, workers=workers)
        field, census = generalized_aspects(field)
        censuses.append(census)
        if depth in ("regions", "domains"):
            field = decompose_regions(model, field)
            images = basic_components(model, field)
            for im in images:
                region_rows.append((str(mode), im.aspect, im.region, int((field.region == im.region).sum()), im.size))
            if depth == "domains":
                for d, dom in enumerate(uniqueness_domains(field, images), start=1):
                    members = ";".join(str(r) for r in dom.regions)
                    domain_rows.append((str(mode), dom.aspect, d, members, int(dom.cells.sum())))
        with out.open(f"field_{mode_tag(mode)}.csv") as fh:
            write_rows(fh, field_header(grid.ndim), field_rows(field))
        if args.svg:
            labels = field.region if depth != "aspects" else field.aspect
            (out.out / f"field_{mode_tag(mode)}.svg").write_text(render_svg(field, labels), encoding="utf-8")
    total = merge_census(censuses)
    census_rows = [(format_sign_class(k), v) for k, v in total.items()]
    census_rows.append(("total", sum(total.values())))
    with out.open("census.csv") as fh:
        write_rows(fh, ["sign_class", "aspects"], census_rows)
    if depth in ("regions", "domains"):
        with out.open("regions.csv") as fh:
            write_rows(fh, ["mode", "aspect", "region", "cells", "image_cells"], region_rows)
    if depth == "domains":
        with out.open("domains.csv") as fh:
            write_rows(fh, ["mode", "aspect", "domain", "regions", "cells"], domain_rows)
    write_rows(sys.stdout, ["sign_class", "aspects"], census_rows)
    return EXIT_OK


def cmd_aspects(args, cfg):
    return _run_grid(args, cfg, "aspects")


def cmd_regions(args, cfg):
    return _run_grid(args, cfg, "regions")


def cmd_domains(args, cfg):
    return _run_grid(args, cfg, "domains")


# -- trajectory -------------------------------------------------------------------


def trajectory_rows(tr, cfg: ModelConfig):
    norm = tr.normalized
    for i, pose in enumerate(tr.poses):
        yield (i, *pose.as_array(cfg.model.dof), *tr.q[i], *tr.series[i], *norm[i])


def trajectory_header(tr, cfg: ModelConfig) -> list[str]:
    names = tr.series_names
    return ["index", *pose_names(cfg.model.dof), *angle_names(cfg), *names, *[f"n_{s}" for s in names]]


def cmd_trajectory(args, cfg: ModelConfig) -> int:
    if cfg.path is None:
        raise ConfigError("this command needs a [trajectory] section")
    model = cfg.model
    tol = args.tol if args.tol is not None else cfg.tolerances.trace_zero_tol
    path = cfg.path.reversed() if args.reverse else cfg.path
    mode = parse_mode(args.mode, model.dof) if args.mode else cfg.trajectory_mode
    out = Output(args.out)

    if mode is not None:
        try:
            tr = trace(model, path, mode)
        except BranchLost as exc:
            print(f"branch lost at sample {exc.index} in mode {mode}", file=sys.stderr)
            return EXIT_BRANCH
        verdict = verify_nonsingular(tr, tol)
        with out.open(f"trajectory_{mode_tag(mode)}.csv") as fh:
            write_rows(fh, trajectory_header(tr, cfg), trajectory_rows(tr, cfg))
            fh.write(f"{verdict}\n")
        return EXIT_OK

    # no mode given: try every working mode and summarize
    summary = []
    for m in enumerate_working_modes(model.dof):
        try:
            tr = trace(model, path, m)
        except BranchLost as exc:
            summary.append((str(m), f"BRANCH_LOST({exc.index})", "", "", ""))
            continue
        verdict = first_violation(tr.series, tr.series_names, tol)
        row = [str(m), str(verdict), "", "", ""]
        if not isinstance(verdict, Violation):
            rep = verify_assembly_mode_change(model, path, m, tol)
            row[2:] = [rep.q_distance, rep.pose_distance, rep.end_in_fk]
        summary.append(tuple(row))
        if args.out is not None:
            with out.open(f"trajectory_{mode_tag(m)}.csv") as fh:
                write_rows(fh, trajectory_header(tr, cfg), trajectory_rows(tr, cfg))
                fh.write(f"{verdict}\n")
    header = ["mode", "verdict", "q_distance", "pose_distance", "end_to_fk_of_q_start"]
    if args.out is not None:
        with out.open("trajectory_summary.csv") as fh:
            write_rows(fh, header, summary)
    write_rows(sys.stdout, header, summary)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parallel-aspects",
        description="Kinematics and workspace decomposition of planar parallel manipulators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=True, help="INI model file")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: stdout, or . for grid commands)")
        p.add_argument("--mode", default=None, help="working mode sign string, e.g. +-+")
        p.add_argument("--tol", type=float, default=None, help="zero tolerance override")
        p.set_defaults(func=func)
        return p

    p = add("ik", cmd_ik, "all inverse kinematic solutions of a pose")
    p.add_argument("--pose", required=True, help="x,y[,phi]")
    p = add("fk", cmd_fk, "all assembly modes of an actuated configuration")
    p.add_argument("--q", required=True, help="comma-separated actuated angles (rad)")
    p = add("jacobians", cmd_jacobians, "parallel and serial Jacobians")
    p.add_argument("--pose", required=True, help="x,y[,phi]")
    p.add_argument("--q", default=None, help="actuated angles; default: every IK solution")
    add("singularities", cmd_singularities, "serial singularity loci")
    for name, func, text in (
        ("aspects", cmd_aspects, "generalized aspects and their census"),
        ("regions", cmd_regions, "characteristic surfaces and basic regions"),
        ("domains", cmd_domains, "maximal uniqueness domains"),
    ):
        p = add(name, func, text)
        p.add_argument("--grid", default=None, help="resolution override NxM[xK]")
        p.add_argument("--svg", action="store_true", help="also write an SVG map per mode")
        p.add_argument("--workers", type=int, default=None, help="threads for grid sampling")
    p = add("trajectory", cmd_trajectory, "trace determinants along the configured path")
    p.add_argument("--reverse", action="store_true", help="run the path backwards")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BranchLost as exc:
        print(f"branch lost at sample {exc.index}", file=sys.stderr)
        return EXIT_BRANCH
    except (KinematicsError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
