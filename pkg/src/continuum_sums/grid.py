"""Uniform occupancy grids and exact Minkowski-sum arithmetic on them.

A grid cell is addressed by an integer index tuple; index ``i`` stands for the
lattice point ``origin + spacing * i`` and, for measure purposes, for the
closed box ``origin + spacing * [i, i + 1]`` along each axis.  Grid sums add
index sets (and therefore origins), so no resampling ever happens inside a
dilation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import fft as _fft
from scipy import ndimage as _ndimage

Point = tuple[float, ...]

# Distances at or above this sentinel mean "no occupied cell exists".
DIST_INF = np.int32(2**30)

# Product of occupied-cell counts must stay below 2**52 so every convolution
# coefficient is an exact float64 integer with slack for FFT roundoff.
_FFT_EXACT_LIMIT = 2**52

# Auto dilation switches to the FFT route only when the plain shift-OR route
# would move more bytes than a transform of the output array, with this margin.
_FFT_ADVANTAGE = 4.0

# scipy's chamfer transform materializes an int64 staging copy of the mask,
# so past this cell count the in-place int32 engine wins on memory.
_SCIPY_DT_LIMIT = 2**27


class DilationPrecisionError(ValueError):
    """FFT dilation would exceed the exact-integer range of float64."""


class Semantics(Enum):
    """What the occupied cells of a :class:`GridSet` promise about the set.

    SAMPLE_COVER: every occupied cell contains at least one exact point of the
    underlying set; ``slack`` records the sup-norm sample density.
    OUTER: the underlying set is contained in the union of occupied cells
    dilated by ``slack`` (length units).
    INNER: the union of occupied cells is contained in the underlying set
    (up to the documented erosion contract); produced only by :func:`erode`.
    """

    SAMPLE_COVER = "sample_cover"
    OUTER = "outer"
    INNER = "inner"


@dataclass(frozen=True)
class GridGeometry:
    """Axis-aligned uniform grid: ``origin``, cell ``spacing`` and cell counts."""

    origin: Point
    spacing: float
    extents: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.spacing <= 0 or not math.isfinite(self.spacing):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing}")
        if len(self.origin) != len(self.extents):
            raise ValueError("origin and extents must have the same dimension")
        if not self.extents or any(m <= 0 for m in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "extents", tuple(int(m) for m in self.extents))

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def upper(self) -> Point:
        """Upper corner of the covered box (cells are closed unit boxes)."""
        return tuple(o + self.spacing * m for o, m in zip(self.origin, self.extents))

    def lattice_point(self, index: Sequence[int]) -> Point:
        return tuple(o + self.spacing * i for o, i in zip(self.origin, index))

    def cell_center(self, index: Sequence[int]) -> Point:
        return tuple(o + self.spacing * (i + 0.5) for o, i in zip(self.origin, index))

    def contains_point(self, p: Sequence[float]) -> bool:
        return all(o <= x <= u for o, x, u in zip(self.origin, p, self.upper))


def auto_geometry(points: NDArray[np.float64], h: float, pad_cells: int = 0) -> GridGeometry:
    """Smallest grid at spacing ``h`` whose box covers ``points``, plus padding."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (m, n) array")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    origin = tuple(float(x - pad_cells * h) for x in lo)
    extents = tuple(int(np.floor((b - a) / h)) + 1 + 2 * pad_cells for a, b in zip(lo, hi))
    return GridGeometry(origin=origin, spacing=float(h), extents=extents)


@dataclass(frozen=True)
class SampledSet:
    """Finite list of exact sample points with a sup-norm density bound.

    ``density`` is the promised eps: every point of the underlying set lies
    within sup-norm ``eps`` of some sample.  ``exact`` records that the samples
    themselves lie on the set (all built-in generators produce exact samples).
    An empty point list is allowed but must still be shaped (0, n).
    """

    points: NDArray[np.float64]
    density: float
    exact: bool = True

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] == 0:
            raise ValueError("points must be an (m, n) array with n >= 1")
        if not np.isfinite(pts).all():
            raise ValueError("sample points must be finite")
        if not (self.density >= 0 and math.isfinite(self.density)):
            raise ValueError(f"density must be finite and >= 0, got {self.density}")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def translated(self, shift: Sequence[float]) -> "SampledSet":
        vec = np.asarray(shift, dtype=np.float64)
        return SampledSet(self.points + vec, self.density, self.exact)

    def linear_image(self, matrix: NDArray[np.float64]) -> "SampledSet":
        """Image under ``x -> matrix @ x``; density scales by the sup operator norm."""
        mat = np.asarray(matrix, dtype=np.float64)
        op_norm = float(np.abs(mat).sum(axis=1).max())
        return SampledSet(self.points @ mat.T, self.density * op_norm, self.exact)

    def sup_radius(self) -> float:
        """Largest sup-norm of any sample (0.0 for an empty list)."""
        if self.points.shape[0] == 0:
            return 0.0
        return float(np.abs(self.points).max())


@dataclass(frozen=True)
class GridSet:
    """Occupancy bitmap over a :class:`GridGeometry` with tagged semantics.

    ``slack`` means: sample density (SAMPLE_COVER), covering radius (OUTER),
    or 0.0 (INNER).  All length units, not cell counts.
    """

    geometry: GridGeometry
    occupancy: NDArray[np.bool_] = field(repr=False)
    semantics: Semantics
    slack: float = 0.0

    def __post_init__(self) -> None:
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != self.geometry.extents:
            raise ValueError(
                f"occupancy shape {occ.shape} does not match extents {self.geometry.extents}"
            )
        if self.slack < 0 or not math.isfinite(self.slack):
            raise ValueError(f"slack must be finite and >= 0, got {self.slack}")
        object.__setattr__(self, "occupancy", occ)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def spacing(self) -> float:
        return self.geometry.spacing

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def occupied_indices(self) -> NDArray[np.int64]:
        return np.argwhere(self.occupancy)


def rasterize(
    samples: SampledSet,
    geometry: GridGeometry,
    semantics: Semantics = Semantics.SAMPLE_COVER,
) -> GridSet:
    """Mark the cells holding samples; OUTER additionally dilates by ceil(eps/h).

    Every sample must lie inside the geometry's box; the error names the first
    offender.  INNER cannot be rasterized directly (it is produced by erosion).
    """
    if samples.dim != geometry.dim:
        raise ValueError(f"sample dim {samples.dim} != grid dim {geometry.dim}")
    if semantics is Semantics.INNER:
        raise ValueError("INNER semantics is produced only by erode()")
    if semantics is Semantics.OUTER and not samples.exact:
        raise ValueError("OUTER rasterization requires exact samples")

    pts = samples.points
    origin = np.asarray(geometry.origin)
    upper = np.asarray(geometry.upper)
    inside = (pts >= origin).all(axis=1) & (pts <= upper).all(axis=1)
    if not inside.all():
        bad = tuple(float(x) for x in pts[np.argmin(inside)])
        raise ValueError(f"sample {bad} lies outside the grid box {geometry.origin}..{geometry.upper}")

    h = geometry.spacing
    idx = np.floor((pts - origin) / h).astype(np.int64)
    # A sample exactly on the upper face belongs to the last (closed) cell.
    np.minimum(idx, np.asarray(geometry.extents) - 1, out=idx)

    occ = np.zeros(geometry.extents, dtype=bool)
    occ[tuple(idx.T)] = True

    if semantics is Semantics.SAMPLE_COVER:
        return GridSet(geometry, occ, Semantics.SAMPLE_COVER, slack=samples.density)

    grow = int(math.ceil(samples.density / h))
    fat = _box_dilate(occ, grow)
    out_geom = GridGeometry(
        origin=tuple(o - grow * h for o in geometry.origin),
        spacing=h,
        extents=tuple(m + 2 * grow for m in geometry.extents),
    )
    return GridSet(out_geom, fat, Semantics.OUTER, slack=samples.density)


def _box_dilate(occ: NDArray[np.bool_], r: int) -> NDArray[np.bool_]:
    """Dilate by the (2r+1)^n sup-norm box, growing the array by r per side."""
    if r < 0:
        raise ValueError("dilation radius must be >= 0")
    if r == 0:
        return occ.copy()
    out = np.pad(occ, r)
    for axis in range(occ.ndim):
        acc = out.copy()
        for shift in range(1, r + 1):
            acc |= _shifted(out, axis, shift)
            acc |= _shifted(out, axis, -shift)
        out = acc
    return out


def _shifted(arr: NDArray, axis: int, shift: int) -> NDArray:
    """Array shifted along ``axis`` with False/identity fill, same shape."""
    out = np.zeros_like(arr)
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if shift > 0:
        src[axis] = slice(0, arr.shape[axis] - shift)
        dst[axis] = slice(shift, None)
    else:
        src[axis] = slice(-shift, None)
        dst[axis] = slice(0, arr.shape[axis] + shift)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _combined_semantics(a: GridSet, b: GridSet) -> tuple[Semantics, float]:
    if a.semantics is not b.semantics:
        raise ValueError(
            f"cannot sum grids with mixed semantics {a.semantics.value} + {b.semantics.value}"
        )
    if a.semantics is Semantics.INNER:
        return Semantics.INNER, 0.0
    # One cell of slack accounts for the lattice-point snap inside each box.
    return a.semantics, a.slack + b.slack + a.spacing


def _sum_geometry(a: GridSet, b: GridSet) -> GridGeometry:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch {a.dim} != {b.dim}")
    if a.spacing != b.spacing:
        raise ValueError(f"grids must share spacing exactly, got {a.spacing} and {b.spacing}")
    return GridGeometry(
        origin=tuple(x + y for x, y in zip(a.geometry.origin, b.geometry.origin)),
        spacing=a.spacing,
        extents=tuple(p + q - 1 for p, q in zip(a.geometry.extents, b.geometry.extents)),
    )


def dilate_naive(a: GridSet, b: GridSet) -> GridSet:
    """Grid Minkowski sum by definition: occupied index sums, origins added.

    Shift-ORs the larger occupancy once per occupied cell of the smaller one,
    which is the direct reading of {i + j} and serves as the exact reference
    for the FFT route.
    """
    geom = _sum_geometry(a, b)
    semantics, slack = _combined_semantics(a, b)
    shifts, body = (a, b) if a.occupied_count <= b.occupied_count else (b, a)
    out = np.zeros(geom.extents, dtype=bool)
    src = body.occupancy
    for cell in shifts.occupied_indices():
        window = tuple(slice(int(c), int(c) + m) for c, m in zip(cell, src.shape))
        out[window] |= src
    return GridSet(geom, out, semantics, slack)


def dilate_fft(a: GridSet, b: GridSet) -> GridSet:
    """FFT-convolution route; bit-identical to :func:`dilate_naive`.

    Convolution counts are integers bounded by the occupied-count product, so
    they are exact in float64 below 2**52; beyond that the call refuses with
    :class:`DilationPrecisionError` and the caller must fall back to the naive
    route.
    """
    geom = _sum_geometry(a, b)
    semantics, slack = _combined_semantics(a, b)
    if a.occupied_count * b.occupied_count >= _FFT_EXACT_LIMIT:
        raise DilationPrecisionError(
            "occupied-cell product exceeds the exact float64 range; use dilate_naive"
        )
    out_shape = geom.extents
    fast = [_fft.next_fast_len(m) for m in out_shape]
    workers = thread_count()
    fa = _fft.rfftn(a.occupancy.astype(np.float64), fast, workers=workers)
    fb = _fft.rfftn(b.occupancy.astype(np.float64), fast, workers=workers)
    conv = _fft.irfftn(fa * fb, fast, workers=workers)
    counts = np.rint(conv[tuple(slice(0, m) for m in out_shape)])
    return GridSet(geom, counts >= 1.0, semantics, slack)


def dilate(a: GridSet, b: GridSet) -> GridSet:
    """Minkowski sum choosing the cheaper exact route (FFT or shift-OR)."""
    small = min(a.occupied_count, b.occupied_count)
    if small == 0:
        return dilate_naive(a, b)
    out_cells = 1
    for p, q in zip(a.geometry.extents, b.geometry.extents):
        out_cells *= p + q - 1
    body_cells = max(int(np.prod(a.geometry.extents)), int(np.prod(b.geometry.extents)))
    naive_traffic = small * body_cells
    fft_traffic = out_cells * math.log2(max(out_cells, 2)) * 2
    if naive_traffic > _FFT_ADVANTAGE * fft_traffic:
        try:
            return dilate_fft(a, b)
        except DilationPrecisionError:
            pass
    return dilate_naive(a, b)


def nfold_sum(a: GridSet, n: int) -> GridSet:
    """n-fold grid sum via square-and-multiply; equals n-1 chained dilations."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    acc: GridSet | None = None
    base = a
    while True:
        if n & 1:
            acc = base if acc is None else dilate(acc, base)
        n >>= 1
        if n == 0:
            return acc  # type: ignore[return-value]
        base = dilate(base, base)


def negate(a: GridSet) -> GridSet:
    """Reflection through 0 of the occupied lattice points."""
    occ = a.occupancy[tuple(slice(None, None, -1) for _ in range(a.dim))].copy()
    origin = tuple(
        -(o + a.spacing * (m - 1)) for o, m in zip(a.geometry.origin, a.geometry.extents)
    )
    geom = GridGeometry(origin=origin, spacing=a.spacing, extents=a.geometry.extents)
    return GridSet(geom, occ, a.semantics, a.slack)


def erode(a: GridSet, r: int) -> GridSet:
    """Keep cells whose full r-cell sup-norm neighborhood is occupied.

    Requires OUTER input.  The result is tagged INNER exactly when
    ``r * h >= outer radius + h`` (the erosion outruns the outer slack);
    otherwise the semantics stays OUTER-derived, which callers must treat as
    "no inner guarantee".
    """
    if a.semantics is not Semantics.OUTER:
        raise ValueError("erode requires OUTER semantics")
    if r < 1:
        raise ValueError(f"erosion radius must be >= 1, got {r}")
    out = a.occupancy.copy()
    for axis in range(a.dim):
        acc = out.copy()
        for shift in range(1, r + 1):
            acc &= _shifted_true_fill(out, axis, shift, fill=False)
            acc &= _shifted_true_fill(out, axis, -shift, fill=False)
        out = acc
    guaranteed = r * a.spacing >= (a.slack + a.spacing) * (1.0 - 1e-9)
    if guaranteed:
        return GridSet(a.geometry, out, Semantics.INNER, slack=0.0)
    return GridSet(a.geometry, out, Semantics.OUTER, slack=a.slack)


def _shifted_true_fill(arr: NDArray, axis: int, shift: int, fill: bool) -> NDArray:
    out = np.full_like(arr, fill)
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if shift > 0:
        src[axis] = slice(0, arr.shape[axis] - shift)
        dst[axis] = slice(shift, None)
    else:
        src[axis] = slice(-shift, None)
        dst[axis] = slice(0, arr.shape[axis] + shift)
    out[tuple(dst)] = arr[tuple(src)]
    return out


_ADJACENCY_STRUCTURES = {
    "face": lambda n: _ndimage.generate_binary_structure(n, 1),
    "chessboard": lambda n: np.ones((3,) * n, dtype=bool),
}


def connected_components(a: GridSet, adjacency: str = "face") -> list[set[tuple[int, ...]]]:
    """Occupied-cell components, in first-cell scan order.

    ``face`` adjacency (2n neighbors) is the default; ``chessboard`` also links
    diagonal cells, which is the right notion for rasters of eps-dense samples
    of connected sets whenever 2*eps <= h.
    """
    if adjacency not in _ADJACENCY_STRUCTURES:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    labels, count = _ndimage.label(a.occupancy, structure=_ADJACENCY_STRUCTURES[adjacency](a.dim))
    comps: list[set[tuple[int, ...]]] = [set() for _ in range(count)]
    for cell in np.argwhere(labels):
        comps[labels[tuple(cell)] - 1].add(tuple(int(c) for c in cell))
    return comps


def component_count(a: GridSet, adjacency: str = "face") -> int:
    if adjacency not in _ADJACENCY_STRUCTURES:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    _, count = _ndimage.label(a.occupancy, structure=_ADJACENCY_STRUCTURES[adjacency](a.dim))
    return int(count)


def is_grid_continuum(a: GridSet, adjacency: str = "face") -> bool:
    """True iff the occupied cells form exactly one non-empty component."""
    return component_count(a, adjacency) == 1


def measure_estimate(a: GridSet) -> float:
    """Occupied volume: cell count times h^n, interpreted per the semantics tag."""
    return float(a.occupancy.sum()) * a.spacing**a.dim


def chessboard_distance_transform(mask: NDArray[np.bool_], engine: str | None = None) -> NDArray[np.int32]:
    """Exact sup-norm (chessboard) cell distance to the nearest True cell.

    Two-pass chamfer with the full half-neighborhood, which is exact for the
    chessboard metric.  Cells of an all-False mask get :data:`DIST_INF`.  The
    scipy engine (used automatically for large arrays) computes the same exact
    metric, so both engines return identical arrays.
    """
    mask = np.asarray(mask, dtype=bool)
    if engine not in (None, "numpy", "scipy"):
        raise ValueError(f"unknown engine {engine!r}")
    if not mask.any():
        return np.full(mask.shape, DIST_INF, dtype=np.int32)
    if engine is None:
        engine = "scipy" if 4096 < mask.size <= _SCIPY_DT_LIMIT else "numpy"
    if engine == "scipy":
        out = _ndimage.distance_transform_cdt(~mask, metric="chessboard")
        return out.astype(np.int32, copy=False)
    dist = np.where(mask, np.int32(0), DIST_INF)
    _chamfer_forward(dist)
    _chamfer_forward(dist[tuple(slice(None, None, -1) for _ in range(mask.ndim))])
    return dist


def _chamfer_forward(dist: NDArray[np.int32]) -> None:
    """One raster-order chamfer pass, in place (half-neighborhood, weight 1)."""
    if dist.ndim == 1:
        idx = np.arange(dist.shape[0], dtype=np.int32)
        np.copyto(dist, np.minimum.accumulate(dist - idx) + idx)
        return
    for i in range(dist.shape[0]):
        if i > 0:
            best = _box3_min(dist[i - 1])
            np.minimum(dist[i], best + 1, out=dist[i])
        _chamfer_forward(dist[i])


def _box3_min(arr: NDArray[np.int32]) -> NDArray[np.int32]:
    """Min over the full 3^k shift box (includes the cell itself)."""
    out = arr.copy()
    for axis in range(arr.ndim):
        shifted_fwd = np.full_like(out, DIST_INF)
        shifted_bwd = np.full_like(out, DIST_INF)
        sl_all = [slice(None)] * out.ndim
        sl_fwd_dst, sl_fwd_src = sl_all.copy(), sl_all.copy()
        sl_fwd_dst[axis], sl_fwd_src[axis] = slice(1, None), slice(0, -1)
        shifted_fwd[tuple(sl_fwd_dst)] = out[tuple(sl_fwd_src)]
        sl_bwd_dst, sl_bwd_src = sl_all.copy(), sl_all.copy()
        sl_bwd_dst[axis], sl_bwd_src[axis] = slice(0, -1), slice(1, None)
        shifted_bwd[tuple(sl_bwd_dst)] = out[tuple(sl_bwd_src)]
        out = np.minimum(out, np.minimum(shifted_fwd, shifted_bwd))
    return out


def _cube_cell_range(geometry: GridGeometry, center: Sequence[float], side: float) -> tuple[tuple[int, int], ...]:
    """Index range (inclusive) of cells whose interior meets the cube's interior."""
    if side <= 0:
        raise ValueError(f"cube side must be positive, got {side}")
    h = geometry.spacing
    ranges = []
    for k, (o, m) in enumerate(zip(geometry.origin, geometry.extents)):
        lo = center[k] - side / 2.0
        hi = center[k] + side / 2.0
        if lo < o - 1e-9 * h or hi > o + m * h + 1e-9 * h:
            raise ValueError(
                f"cube [{lo}, {hi}] exceeds grid box [{o}, {o + m * h}] on axis {k}"
            )
        i_min = int(math.floor((lo - o) / h + 1e-9))
        i_max = int(math.ceil((hi - o) / h - 1e-9)) - 1
        i_min = max(i_min, 0)
        i_max = min(i_max, m - 1)
        if i_max < i_min:
            raise ValueError(f"cube is thinner than one cell on axis {k}")
        ranges.append((i_min, i_max))
    return tuple(ranges)


def cube_coverage(a: GridSet, center: Sequence[float], side: float) -> bool:
    """True iff every cell meeting the cube is occupied."""
    window = tuple(slice(lo, hi + 1) for lo, hi in _cube_cell_range(a.geometry, center, side))
    return bool(a.occupancy[window].all())


def eps_density_margin(a: GridSet, center: Sequence[float], side: float) -> float:
    """Max over cube cells of the sup-norm distance (length units) to an occupied cell.

    0 means the cube is fully covered; ``inf`` means the grid is empty.
    """
    window = tuple(slice(lo, hi + 1) for lo, hi in _cube_cell_range(a.geometry, center, side))
    dist = chessboard_distance_transform(a.occupancy)
    worst = int(dist[window].max())
    if worst >= int(DIST_INF):
        return math.inf
    return worst * a.spacing


def thread_count() -> int:
    """Worker count from CONTINUUM_SUMS_THREADS (0 = auto, unset = 1)."""
    import os

    raw = os.environ.get("CONTINUUM_SUMS_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"CONTINUUM_SUMS_THREADS must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ValueError(f"CONTINUUM_SUMS_THREADS must be >= 0, got {value}")
    if value == 0:
        return os.cpu_count() or 1
    return value
