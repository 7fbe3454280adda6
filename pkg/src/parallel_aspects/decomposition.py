"""Grid-sampled decomposition of the workspace of one working mode.

Pipeline, per working mode ``Mf_i``::

    sample_field -> generalized_aspects -> characteristic_surfaces
                 -> basic_regions -> basic_components -> uniqueness_domains

Cells are axis-connected (4-connectivity in 2D, 6-connectivity in 3D); the
orientation axis of 3-DOF grids wraps around.  Within a working mode the IK
map ``g_i`` is single valued, so labeling connected sets of workspace cells
labels the generalized aspects of ``W x Q`` as well.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .core import BatchIk, KinematicsError, ManipulatorModel, SignVector, classify_signs, wrap_angles

FIELD_ZERO_TOL = 1e-6
FRAGMENT_FRACTION = 5e-4
FRAGMENT_MAX_DISTANCE = math.inf
IMAGE_TOL = 0.02


class AmbiguousImages(KinematicsError):
    """Two region images are neither disjoint nor identical; refine the grid."""

    def __init__(self, first: int, second: int):
        super().__init__(f"images of regions {first} and {second} are neither disjoint nor identical; refine the grid")
        self.regions = (first, second)


@dataclass(frozen=True)
class GridSpec:
    """Regular cell grid over the workspace coordinates ``(x, y[, phi])``."""

    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    periodic: tuple[bool, ...] | None = None

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        res = tuple(int(r) for r in self.resolution)
        if len(bounds) != len(res) or len(res) not in (2, 3):
            raise ValueError("grid needs 2 or 3 axes with one resolution per axis")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid axis bounds ({lo}, {hi})")
        if any(r < 8 for r in res):
            raise ValueError("grid resolution must be at least 8 cells per axis")
        periodic = self.periodic
        if periodic is None:
            periodic = (False, False, True)[: len(res)]
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in periodic))

    @classmethod
    def planar(cls, x: tuple[float, float], y: tuple[float, float], nx: int, ny: int | None = None) -> "GridSpec":
        return cls((x, y), (nx, ny or nx))

    @classmethod
    def spatial(cls, x, y, nx: int, ny: int | None = None, nphi: int | None = None) -> "GridSpec":
        return cls((x, y, (-math.pi, math.pi)), (nx, ny or nx, nphi or nx))

    @property
    def ndim(self) -> int:
        return len(self.resolution)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return math.prod(self.resolution)

    @property
    def cell_size(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.bounds, self.resolution)])

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    def centers(self, axis: int) -> np.ndarray:
        lo, hi = self.bounds[axis]
        n = self.resolution[axis]
        return lo + (np.arange(n) + 0.5) * (hi - lo) / n

    def points(self) -> np.ndarray:
        """Cell centers in C order, shape ``(size, ndim)``."""
        mesh = np.meshgrid(*[self.centers(a) for a in range(self.ndim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def continuous_index(self, points: np.ndarray) -> np.ndarray:
        """Fractional cell coordinates; integer values are cell centers."""
        return (np.asarray(points, dtype=float) - self.lower) / self.cell_size - 0.5

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Integer cell indices ``(N, ndim)`` of points, -1 rows when outside."""
        u =np.floor((np.atleast_2d(np.asarray(points, dtype=float)) - self.lower) / self.cell_size).astype(np.int64)
        return self._fold(u)

    def _fold(self, idx: np.ndarray) -> np.ndarray:
        idx = idx.copy()
        bad = np.zeros(len(idx), dtype=bool)
        for a, (n, per) in enumerate(zip(self.resolution, self.periodic)):
            if per:
                idx[:, a] %= n
            else:
                bad |= (idx[:, a] < 0) | (idx[:, a] >= n)
        idx[bad] = -1
        return idx


@dataclass
class LabeledField:
    """Per-cell record of one working mode over a grid.

    ``aspect`` and ``region`` hold positive labels, 0 meaning unlabeled.
    Sign arrays use -1 / 0 / +1 with 0 for NearZero.
    """

    grid: GridSpec
    mode: SignVector
    zero_tol: float
    feasible: np.ndarray
    q: np.ndarray
    det_a: np.ndarray
    b_diagonal: np.ndarray
    det_sign: np.ndarray
    b_signs: np.ndarray
    aspect: np.ndarray | None = None
    region: np.ndarray | None = None
    surface: np.ndarray | None = None
    aspect_det_sign: dict[int, int] = field(default_factory=dict)
    region_aspect: dict[int, int] = field(default_factory=dict)

    @property
    def regular(self) -> np.ndarray:
        """Feasible cells with no NearZero among det_a and the serial terms."""
        return self.feasible & (self.det_sign != 0) & np.all(self.b_signs != 0, axis=-1)

    @property
    def aspect_labels(self) -> list[int]:
        return sorted(self.aspect_det_sign)

    def sign_class(self, label: int) -> tuple[int, ...]:
        """(det_a sign, B_11 sign, ..., B_nn sign) of an aspect."""
        return (self.aspect_det_sign[label],) + tuple(int(s) for s in self.mode)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index per point, -1 outside the grid."""
        idx = self.grid.cell_of(points)
        out = np.full(len(idx), -1, dtype=np.int64)
        ok = idx[:, 0] >= 0
        if ok.any():
            out[ok] = np.ravel_multi_index(tuple(idx[ok].T), self.grid.shape)
        return out


def sign_class_matches(model: ManipulatorModel, field: LabeledField, points: np.ndarray, det_sign: int) -> np.ndarray:
    """Whether each point is regular in the field's mode with the given det(A) sign."""
    res = model.ik_mode_batch(np.asarray(points, dtype=float), field.mode)
    det = classify_signs(np.nan_to_num(res.det_a), field.zero_tol)
    b = classify_signs(np.nan_to_num(res.b_diagonal), field.zero_tol)
    return res.feasible & (det == det_sign) & np.all(b == np.array([int(s) for s in field.mode]), axis=1)


def in_region(
    model: ManipulatorModel, field: LabeledField, region: int, points: np.ndarray, q: np.ndarray | None = None
) -> np.ndarray:
    """Membership of points (or of configurations ``(point, q)``) in a basic region.

    A point belongs to the region when its cell carries the region label and
    the point itself has the region's sign class; the second test keeps out
    poses that share a boundary cell with the region from across a
    singularity.  With ``q`` given, the field's working-mode branch at the
    point must also reproduce ``q``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    loc = field.locate(points)
    out = np.zeros(len(points), dtype=bool)
    ok = loc >= 0
    out[ok] = field.region.ravel()[loc[ok]] == region
    if out.any():
        sign = field.aspect_det_sign[field.region_aspect[region]]
        out[out] = sign_class_matches(model, field, points[out], sign)
    if q is not None and out.any():
        back = model.ik_mode_batch(points[out], field.mode).q
        dq = np.abs(wrap_angles(back - np.broadcast_to(np.asarray(q, dtype=float), back.shape)))
        out[out] = dq.max(axis=1) <= 1e-6
    return out


# -- sampling ---------------------------------------------------------------


def _ik_chunks(model: ManipulatorModel, points: np.ndarray, mode: SignVector, workers: int) -> BatchIk:
    if workers <= 1 or len(points) < 2 * workers:
        return model.ik_mode_batch(points, mode)
    parts = np.array_split(points, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: model.ik_mode_batch(p, mode), parts))
    return BatchIk(
        np.concatenate([r.feasible for r in results]),
        np.concatenate([r.q for r in results]),
        np.concatenate([r.det_a for r in results]),
        np.concatenate([r.b_diagonal for r in results]),
    )


def sample_field(
    model: ManipulatorModel,
    mode: SignVector,
    grid: GridSpec,
    zero_tol: float = FIELD_ZERO_TOL,
    workers: int = 1,
) -> LabeledField:
    """Evaluate ``ik_mode`` and sign classifications at every cell center."""
    if len(mode) != model.dof:
        raise ValueError(f"mode {mode} does not match a {model.dof}-DOF model")
    if grid.ndim != model.dof:
        raise ValueError(f"a {model.dof}-DOF model needs a {model.dof}-axis grid")
    res = _ik_chunks(model, grid.points(), mode, workers)
    shape = grid.shape
    n = model.dof
    feasible = res.feasible.reshape(shape)
    det_sign = np.where(feasible, classify_signs(np.nan_to_num(res.det_a), zero_tol).reshape(shape), 0)
    b_signs = classify_signs(np.nan_to_num(res.b_diagonal), zero_tol).reshape(shape + (n,))
    b_signs[~feasible] = 0
    return LabeledField(
        grid=grid,
        mode=mode,
        zero_tol=zero_tol,
        feasible=feasible,
        q=res.q.reshape(shape + (n,)),
        det_a=res.det_a.reshape(shape),
        b_diagonal=res.b_diagonal.reshape(shape + (n,)),
        det_sign=det_sign.astype(np.int8),
        b_signs=b_signs,
    )


# -- connected components ------------------------------------------------------


def label_cells(mask: np.ndarray, periodic: Sequence[bool] | None = None) -> tuple[np.ndarray, int]:
    """Axis-connected components of ``mask``, wrapping along periodic axes.

    Labels are 1..n numbered by first appearance in C scan order.
    """
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, n = ndimage.label(mask, structure)
    if n and periodic is not None and any(periodic):
        parent = np.arange(n + 1)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for axis, per in enumerate(periodic):
            if not per:
                continue
            first = np.take(labels, 0, axis=axis).ravel()
            last = np.take(labels, -1, axis=axis).ravel()
            for a, b in set(zip(first[(first > 0) & (last > 0)], last[(first > 0) & (last > 0)])):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(n + 1)])
        labels = roots[labels]
    return _renumber(labels)


def _renumber(labels: np.ndarray) -> tuple[np.ndarray, int]:
    flat = labels.ravel()
    values, first = np.unique(flat, return_index=True)
    keep = values > 0
    values, first = values[keep], first[keep]
    order = values[np.argsort(first, kind="stable")]
    lut = np.zeros(int(flat.max(initial=0)) + 1, dtype=np.int32)
    lut[order] = np.arange(1, len(order) + 1, dtype=np.int32)
    return lut[labels], len(order)


def _absorb_fragments(labels: np.ndarray, min_cells: int, max_distance: float) -> np.ndarray:
    """Merge components smaller than ``min_cells`` into the nearest large one.

    Rasterizing thin wedges (where a singular curve runs close to a workspace
    boundary) leaves isolated cells that belong to a neighbouring component in
    the continuum.  Fragments farther than ``max_distance`` cells from any
    large component are kept as they are.
    """
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    major = sizes >= min_cells
    major[0] = False
    minor = (labels > 0) & ~major[labels]
    if not minor.any() or not major.any():
        return labels
    dist, idx = ndimage.distance_transform_edt(~major[labels], return_indices=True)
    nearest = labels[tuple(idx)]
    return np.where(minor & (dist <= max_distance), nearest, labels)


def min_component_cells(grid: GridSpec, fraction: float = FRAGMENT_FRACTION) -> int:
    return max(4, math.ceil(fraction * grid.size))


def _labels_by_sign(mask_by_sign: Iterable[tuple[int, np.ndarray]], grid: GridSpec, min_cells: int):
    total = np.zeros(grid.shape, dtype=np.int64)
    sign_of: dict[int, int] = {}
    offset = 0
    for sign, mask in mask_by_sign:
        lab, n = label_cells(mask, grid.periodic)
        if min_cells > 1:
            lab = _absorb_fragments(lab, min_cells, FRAGMENT_MAX_DISTANCE)
        total = np.where(lab > 0, lab + offset, total)
        for v in np.unique(lab[lab > 0]):
            sign_of[int(v) + offset] = sign
        offset += n
    labels, _ = _renumber(total)
    remap = {}
    for old, new in zip(total.ravel()[labels.ravel() > 0], labels.ravel()[labels.ravel() > 0]):
        remap.setdefault(int(new), sign_of[int(old)])
    return labels.astype(np.int32), remap


def generalized_aspects(
    field: LabeledField, min_fraction: float = FRAGMENT_FRACTION
) -> tuple[LabeledField, dict[tuple[int, ...], int]]:
    """Label the W-aspects of one working mode and count them per sign class.

    Returns the labeled field and a census mapping
    ``(det_a sign, *mode signs)`` to the number of aspects.
    """
    regular = field.regular
    min_cells = min_component_cells(field.grid, min_fraction) if min_fraction > 0 else 1
    labels, sign_of = _labels_by_sign(
        ((d, regular & (field.det_sign == d)) for d in (1, -1)), field.grid, min_cells
    )
    out = replace(field, aspect=labels, aspect_det_sign=sign_of, region=None, surface=None, region_aspect={})
    census = {(d,) + tuple(int(s) for s in field.mode): 0 for d in (1, -1)}
    for label in sign_of:
        census[out.sign_class(label)] += 1
    return out, census


def merge_census(censuses: Iterable[dict[tuple[int, ...], int]]) -> dict[tuple[int, ...], int]:
    total: Counter = Counter()
    for c in censuses:
        total.update(c)
    return dict(total)


def format_sign_class(key: Sequence[int]) -> str:
    return "".join("+" if s > 0 else "-" for s in key)


# -- characteristic surfaces ---------------------------------------------------


def _neighbour_offsets(ndim: int, diagonal: bool) -> list[tuple[int, ...]]:
    offs = []
    for d in itertools.product((-1, 0, 1), repeat=ndim):
        if any(d) and (diagonal or sum(map(abs, d)) == 1):
            offs.append(d)
    return offs


def _shift(mask: np.ndarray, offset: Sequence[int], periodic: Sequence[bool], fill=False) -> np.ndarray:
    """``out[i] = mask[i + offset]``, wrapping periodic axes, ``fill`` elsewhere."""
    out = mask
    for axis, (o, per) in enumerate(zip(offset, periodic)):
        if o == 0:
            continue
        out = np.roll(out, -o, axis=axis)
        if not per:
            sl = [slice(None)] * mask.ndim
            sl[axis] = slice(-o, None) if o > 0 else slice(None, -o)
            out = out.copy()
            out[tuple(sl)] = fill
    return out


def boundary_cells(mask: np.ndarray, periodic: Sequence[bool]) -> np.ndarray:
    """Cells of ``mask`` with an axis neighbour outside ``mask`` (or the grid)."""
    inner = mask.copy()
    for off in _neighbour_offsets(mask.ndim, diagonal=False):
        inner &= _shift(mask, off, periodic)
    return mask & ~inner


def dilate(mask: np.ndarray, periodic: Sequence[bool]) -> np.ndarray:
    """One-cell axis dilation, wrapping periodic axes."""
    out = mask.copy()
    for off in _neighbour_offsets(mask.ndim, diagonal=False):
        out |= _shift(mask, off, periodic)
    return out


@dataclass
class BoundaryImages:
    """Images ``g_i^{-1}(g_i(X))`` of boundary cells, excluding ``X`` itself."""

    cells: np.ndarray  # (B, ndim) boundary cell indices
    owner: np.ndarray  # (M,) row into ``cells`` of each image
    points: np.ndarray  # (M, ndim) image poses
    det_a: np.ndarray  # (M,) det(A) at each image


def boundary_images(model: ManipulatorModel, field: LabeledField, aspect_label: int) -> BoundaryImages:
    grid = field.grid
    asp = field.aspect == aspect_label
    bnd = boundary_cells(asp, grid.periodic)
    cells = np.argwhere(bnd)
    if not len(cells):
        return BoundaryImages(cells, np.zeros(0, int), np.zeros((0, grid.ndim)), np.zeros(0))
    qs = field.q[bnd]
    centers = grid.lower + (cells + 0.5) * grid.cell_size
    sols = model.fk_batch(qs)
    owner = np.concatenate([np.full(len(s), i) for i, s in enumerate(sols)]).astype(int)
    pts = np.concatenate([s.reshape(-1, grid.ndim) for s in sols]) if len(owner) else np.zeros((0, grid.ndim))
    if not len(owner):
        return BoundaryImages(cells, owner, pts, np.zeros(0))
    # drop the source pose itself
    gap = np.abs(pts - centers[owner])
    if grid.ndim == 3:
        gap[:, 2] = np.abs(wrap_angles(pts[:, 2] - centers[owner, 2]))
    keep = gap.max(axis=1) > 1e-6
    # keep only poses whose IK in this working mode gives back the same q
    back = model.ik_mode_batch(pts, field.mode)
    dq = np.abs(wrap_angles(np.nan_to_num(back.q, nan=1e3) - qs[owner]))
    keep &= back.feasible & (dq.max(axis=1) <= 1e-6)
    return BoundaryImages(cells, owner[keep], pts[keep], back.det_a[keep])


def twin_counts(model: ManipulatorModel, field: LabeledField, aspect_label: int) -> np.ndarray:
    """Per cell of the aspect, how many other assembly modes of its ``q`` lie
    in the same aspect (same working mode, same det(A) sign); -1 elsewhere.
    """
    grid = field.grid
    asp = field.aspect == aspect_label
    counts = np.full(grid.shape, -1, dtype=np.int64)
    if not asp.any():
        return counts
    qs = field.q[asp]
    centers = grid.points()[asp.ravel()]
    sols = model.fk_batch(qs)
    owner = np.concatenate([np.full(len(s), i) for i, s in enumerate(sols)]).astype(int)
    pts = np.concatenate([s.reshape(-1, grid.ndim) for s in sols])
    gap = np.abs(pts - centers[owner])
    if grid.ndim == 3:
        gap[:, 2] = np.abs(wrap_angles(pts[:, 2] - centers[owner, 2]))
    loc = field.locate(pts)
    inside = np.zeros(len(pts), dtype=bool)
    inside[loc >= 0] = field.aspect.ravel()[loc[loc >= 0]] == aspect_label
    back = model.ik_mode_batch(pts, field.mode)
    dq = np.abs(wrap_angles(np.nan_to_num(back.q, nan=1e3) - qs[owner]))
    twin = inside & (gap.max(axis=1) > 1e-6) & back.feasible & (dq.max(axis=1) <= 1e-6)
    # a boundary cell can hold twins from across the singularity; keep only
    # those with the aspect's own sign class
    det = classify_signs(np.nan_to_num(back.det_a), field.zero_tol)
    b = classify_signs(np.nan_to_num(back.b_diagonal), field.zero_tol)
    mode = np.array([int(s) for s in field.mode])
    twin &= (det == field.aspect_det_sign[aspect_label]) & np.all(b == mode, axis=1)
    per_cell = np.bincount(owner[twin], minlength=len(qs))
    counts[asp] = per_cell
    return counts


def characteristic_surfaces(model: ManipulatorModel, field: LabeledField, aspect_label: int) -> np.ndarray:
    """Cells of the aspect lying on an image of the aspect's boundary.

    A pose crosses such an image exactly when one of its twins (another
    assembly mode of the same ``q`` in the same aspect) crosses the aspect
    boundary, so the surfaces are the interfaces where :func:`twin_counts`
    changes.  Of each differing neighbour pair the cell with more twins is
    marked, which keeps the marked set free of gaps.
    """
    counts = twin_counts(model, field, aspect_label)
    inside = counts >= 0
    marked = np.zeros(field.grid.shape, dtype=bool)
    for off in _neighbour_offsets(field.grid.ndim, diagonal=False):
        nb = _shift(counts, off, field.grid.periodic, fill=-1)
        marked |= inside & (nb >= 0) & (nb < counts)
    return marked


# -- basic regions ---------------------------------------------------------------


def basic_regions(
    field: LabeledField,
    aspect_label: int,
    surfaces: np.ndarray,
    min_fraction: float = FRAGMENT_FRACTION,
) -> tuple[np.ndarray, int]:
    """Connected components of an aspect minus its characteristic surfaces.

    Returns local region labels (1..k, scan order) over the grid and k.
    """
    asp = field.aspect == aspect_label
    mask = asp & ~surfaces
    lab, _ = label_cells(mask, field.grid.periodic)
    if min_fraction > 0:
        lab = _absorb_fragments(lab, min_component_cells(field.grid, min_fraction), FRAGMENT_MAX_DISTANCE)
    return _renumber(lab)


def decompose_regions(model: ManipulatorModel, field: LabeledField, min_fraction: float = FRAGMENT_FRACTION) -> LabeledField:
    """Characteristic surfaces and basic regions of every aspect of a labeled field.

    Region labels are global across the field, numbered aspect by aspect.
    """
    if field.aspect is None:
        raise ValueError("field has no aspect labels; run generalized_aspects first")
    region = np.zeros(field.grid.shape, dtype=np.int32)
    surface = np.zeros(field.grid.shape, dtype=bool)
    region_aspect: dict[int, int] = {}
    next_label = 1
    for label in field.aspect_labels:
        surf = characteristic_surfaces(model, field, label)
        local, k = basic_regions(field, label, surf, min_fraction)
        region = np.where(local > 0, local + (next_label - 1), region)
        surface |= surf
        for r in range(next_label, next_label + k):
            region_aspect[r] = label
        next_label += k
    return replace(field, region=region, surface=surface, region_aspect=region_aspect)


# -- basic components ------------------------------------------------------------


@dataclass(frozen=True)
class RegionImage:
    """Rasterized image ``g_i(region)`` on the actuated-space torus grid."""

    region: int
    aspect: int
    cells: np.ndarray  # bool mask over the actuated grid

    @property
    def size(self) -> int:
        return int(self.cells.sum())


def actuated_grid(field: LabeledField) -> GridSpec:
    n = field.grid.ndim
    return GridSpec(((-math.pi, math.pi),) * n, field.grid.resolution, (True,) * n)


def rasterize_actuated(field: LabeledField, mask: np.ndarray) -> np.ndarray:
    qgrid = actuated_grid(field)
    out = np.zeros(qgrid.shape, dtype=bool)
    qs = field.q[mask]
    if len(qs):
        idx = qgrid.cell_of(qs)
        out[tuple(idx.T)] = True
    return out


def basic_components(model: ManipulatorModel, field: LabeledField, regions: Sequence[int] | None = None) -> list[RegionImage]:
    """One actuated-space image per basic region (``model`` kept for symmetry with the other steps)."""
    if field.region is None:
        raise ValueError("field has no region labels; run decompose_regions first")
    labels = sorted(field.region_aspect) if regions is None else list(regions)
    return [RegionImage(r, field.region_aspect[r], rasterize_actuated(field, field.region == r)) for r in labels]


def classify_images(a: np.ndarray, b: np.ndarray, periodic: Sequence[bool] | None = None, tol: float = IMAGE_TOL) -> str:
    """'disjoint', 'identical' or 'ambiguous' for two rasterized images.

    Images count as disjoint when their raw overlap is at most ``tol`` of the
    smaller one (adjacent images share a rasterized boundary), and identical
    when each lies inside the other's one-cell dilation up to ``tol`` of their
    union.
    """
    periodic = periodic if periodic is not None else (True,) * a.ndim
    na, nb = int(a.sum()), int(b.sum())
    if na == 0 or nb == 0:
        return "disjoint"
    overlap = int((a & b).sum())
    if overlap <= tol * min(na, nb):
        return "disjoint"
    da, db = dilate(a, periodic), dilate(b, periodic)
    stray = int((a & ~db).sum()) + int((b & ~da).sum())
    if stray <= tol * int((a | b).sum()):
        return "identical"
    return "ambiguous"


# -- uniqueness domains ----------------------------------------------------------


@dataclass(frozen=True)
class UniquenessDomain:
    aspect: int
    regions: tuple[int, ...]
    cells: np.ndarray  # bool mask: regions plus separating surface cells


def grow_domains(
    nodes: Sequence[int],
    size: dict[int, int],
    rank: dict[int, int],
    adjacent: dict[int, set[int]],
    disjoint,
) -> list[tuple[int, ...]]:
    """Greedy maximal unions of adjacent nodes with pairwise disjoint images.

    Seeds are taken largest first among nodes not yet covered; each domain
    grows by the largest admissible neighbour until none is left.  Ties are
    broken by ``rank``, so the result does not depend on label values.
    """
    order = sorted(nodes, key=lambda r: (-size[r], rank[r]))
    covered: set[int] = set()
    domains: list[tuple[int, ...]] = []
    for seed in order:
        if seed in covered:
            continue
        members = [seed]
        while True:
            frontier = {n for m in members for n in adjacent.get(m, ()) if n not in members}
            ok = [n for n in frontier if all(disjoint(n, m) for m in members)]
            if not ok:
                break
            members.append(min(ok, key=lambda r: (-size[r], rank[r])))
        covered.update(members)
        domains.append(tuple(sorted(members, key=lambda r: rank[r])))
    return domains


def uniqueness_domains(
    field: LabeledField, images: Sequence[RegionImage], tol: float = IMAGE_TOL
) -> list[UniquenessDomain]:
    """Maximal uniqueness domains of every aspect of a region-labeled field.

    Raises :class:`AmbiguousImages` when two adjacent regions have images
    that the grid cannot resolve as disjoint or identical.
    """
    if field.region is None or field.surface is None:
        raise ValueError("field has no region labels; run decompose_regions first")
    grid = field.grid
    by_region = {im.region: im for im in images}
    qper = (True,) * grid.ndim
    surf_lab, _ = label_cells(field.surface, grid.periodic)
    flat_region = field.region.ravel()
    domains: list[UniquenessDomain] = []
    for aspect in field.aspect_labels:
        regs = [r for r, a in sorted(field.region_aspect.items()) if a == aspect]
        if not regs:
            continue
        size = {r: int((field.region == r).sum()) for r in regs}
        rank = {r: int(np.argmax(flat_region == r)) for r in regs}
        # regions touching each surface component
        touching: dict[int, set[int]] = {}
        for r in regs:
            near = dilate(field.region == r, grid.periodic) & (surf_lab > 0)
            for s in np.unique(surf_lab[near]):
                touching.setdefault(int(s), set()).add(r)
        adjacent: dict[int, set[int]] = {r: set() for r in regs}
        for rs in touching.values():
            for a, b in itertools.permutations(rs, 2):
                adjacent[a].add(b)

        cache: dict[frozenset, bool] = {}

        def disjoint(a: int, b: int) -> bool:
            key = frozenset((a, b))
            if key not in cache:
                verdict = classify_images(by_region[a].cells, by_region[b].cells, qper, tol)
                if verdict == "ambiguous":
                    raise AmbiguousImages(min(a, b), max(a, b))
                cache[key] = verdict == "disjoint"
            return cache[key]

        for members in grow_domains(regs, size, rank, adjacent, disjoint):
            cells = np.isin(field.region, members)
            mset = set(members)
            for s, rs in touching.items():
                if len(rs & mset) >= 2:
                    cells |= surf_lab == s
            domains.append(UniquenessDomain(aspect, members, cells))
    return domains
