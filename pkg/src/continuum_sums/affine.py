"""Affine rank certificates for sampled sets.

Everything here runs through one greedy row-elimination routine so that rank
decisions, independent-direction bases and parallelotope volumes can never
disagree with each other at a given tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .grid import SampledSet

#: Relative factor for the default rank tolerance (times the sup-norm scale).
DEFAULT_RANK_RTOL = 1e-9

#: Projection widths below this multiple of the rank tolerance count as flat.
#: Elimination can amplify a sup-norm residual by a small dimension-dependent
#: factor, so the duality threshold carries slack.
PROJECTION_SLACK = 8.0


def as_points(samples: SampledSet | NDArray[np.float64]) -> NDArray[np.float64]:
    if isinstance(samples, SampledSet):
        pts = samples.points
    else:
        pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("expected a non-empty (m, n) point array")
    return pts


def default_rank_tol(points: NDArray[np.float64]) -> float:
    return DEFAULT_RANK_RTOL * float(np.abs(points).max())


@dataclass(frozen=True)
class EliminationResult:
    """Accepted rows of a greedy elimination, in acceptance order."""

    rank: int
    accepted: tuple[int, ...]
    pivot_columns: tuple[int, ...]
    pivot_values: tuple[float, ...]
    basis: NDArray[np.float64]


def greedy_row_elimination(
    vectors: NDArray[np.float64], tol: float, order: str = "input"
) -> EliminationResult:
    """Select independent rows by Gaussian elimination with sup-norm tests.

    ``order="input"`` scans rows once in the given order, accepting a row when
    its residual against the rows accepted so far exceeds ``tol`` in sup norm
    (pivot column: largest residual entry, first on ties).  ``order="pivot"``
    instead repeatedly accepts the row with the globally largest residual.
    Both return the accepted rows as originally given.
    """
    if order not in ("input", "pivot"):
        raise ValueError(f"unknown order {order!r}")
    original = np.asarray(vectors, dtype=np.float64)
    if original.ndim != 2:
        raise ValueError("vectors must be a (k, n) array")
    if not np.isfinite(original).all():
        raise ValueError("vectors must be finite")
    k, n = original.shape
    work = original.copy()
    alive = np.ones(k, dtype=bool)
    accepted: list[int] = []
    pivot_cols: list[int] = []
    pivot_vals: list[float] = []
    while len(accepted) < n and alive.any():
        mags = np.abs(work).max(axis=1, initial=0.0)
        mags[~alive] = -1.0
        if order == "pivot":
            cand = int(np.argmax(mags))
            if mags[cand] <= tol:
                break
        else:
            above = mags > tol
            if not above.any():
                break
            cand = int(np.argmax(above))
            # Rows at or before the accepted one were already tested once.
            alive[: cand + 1] = False
        row = work[cand].copy()
        col = int(np.argmax(np.abs(row)))
        accepted.append(cand)
        pivot_cols.append(col)
        pivot_vals.append(float(row[col]))
        alive[cand] = False
        factors = work[:, col] / row[col]
        work -= np.outer(factors, row)
        work[:, col] = 0.0
        work[cand] = 0.0
    return EliminationResult(
        rank=len(accepted),
        accepted=tuple(accepted),
        pivot_columns=tuple(pivot_cols),
        pivot_values=tuple(pivot_vals),
        basis=original[accepted].copy() if accepted else np.empty((0, n)),
    )


def affine_dimension(
    points: SampledSet | NDArray[np.float64], tol: float | None = None
) -> tuple[int, NDArray[np.float64], NDArray[np.float64]]:
    """Rank of the differences to the first point: (dim, basis, base point)."""
    pts = as_points(points)
    if tol is None:
        tol = default_rank_tol(pts)
    result = greedy_row_elimination(pts[1:] - pts[0], tol, order="input")
    return result.rank, result.basis, pts[0].copy()


def parallelotope_volume(vectors: NDArray[np.float64], tol: float | None = None) -> float:
    """|det| of n edge vectors in n-space; exactly 0.0 when rank-deficient.

    The volume is the product of elimination pivots, which equals |det| because
    row reduction is unimodular and the reduced matrix is a column permutation
    of a triangular one.
    """
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square (n, n) edge matrix, got {mat.shape}")
    if tol is None:
        tol = default_rank_tol(mat)
    result = greedy_row_elimination(mat, tol, order="pivot")
    if result.rank < mat.shape[1]:
        return 0.0
    prod = 1.0
    for p in result.pivot_values:
        prod *= abs(p)
    return prod


@dataclass(frozen=True)
class FlatnessReport:
    """Affine rank of a sampled set around its first point.

    ``det_abs`` is present (not None) exactly when the set has full affine
    dimension; it is then the volume of the parallelotope spanned by the
    basis.  ``complement`` holds orthonormal directions orthogonal to the
    basis span (the witness normals when flat).
    """

    affine_dim: int
    dim: int
    basis: NDArray[np.float64]
    det_abs: float | None
    tol: float
    base_point: NDArray[np.float64]
    complement: NDArray[np.float64]

    @property
    def flat(self) -> bool:
        return self.affine_dim < self.dim


def nonflat_certificate(
    samples: SampledSet | NDArray[np.float64],
    tol: float | None = None,
    order: str = "input",
) -> FlatnessReport:
    """Greedy maximal independent difference vectors from the first sample.

    The default scan order follows the input (reproducible, matches the
    documented greedy); ``order="pivot"`` picks globally largest residuals,
    which favors long chords and is what the verification pipelines use for
    well-conditioned bases.
    """
    pts = as_points(samples)
    n = pts.shape[1]
    if tol is None:
        tol = default_rank_tol(pts)
    diffs = pts[1:] - pts[0]
    result = greedy_row_elimination(diffs, tol, order=order)
    det_abs: float | None = None
    if result.rank == n:
        det_abs = 1.0
        for p in result.pivot_values:
            det_abs *= abs(p)
    if result.rank == 0:
        complement = np.eye(n)
    elif result.rank == n:
        complement = np.empty((0, n))
    else:
        _, _, vh = np.linalg.svd(result.basis, full_matrices=True)
        complement = vh[result.rank :]
    return FlatnessReport(
        affine_dim=result.rank,
        dim=n,
        basis=result.basis,
        det_abs=det_abs,
        tol=tol,
        base_point=pts[0].copy(),
        complement=complement,
    )


def projection_range(
    samples: SampledSet | NDArray[np.float64], direction: Sequence[float]
) -> tuple[float, float]:
    """Min and max of the dot product with a unit ``direction``."""
    pts = as_points(samples)
    u = np.asarray(direction, dtype=np.float64)
    if u.shape != (pts.shape[1],):
        raise ValueError(f"direction must have shape ({pts.shape[1]},)")
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        raise ValueError("direction must be non-zero")
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"direction must be unit length, got norm {norm}")
    dots = pts @ u
    return float(dots.min()), float(dots.max())


@dataclass(frozen=True)
class ProjectionFlatnessReport:
    """Thin-direction search: the dual description of flatness."""

    flat: bool
    width: float
    direction: NDArray[np.float64]
    tol: float
    threshold: float


def flatness_by_projection(
    samples: SampledSet | NDArray[np.float64],
    tol: float | None = None,
    seed: int = 0,
    n_random: int = 100,
    extra_directions: NDArray[np.float64] | None = None,
) -> ProjectionFlatnessReport:
    """Search unit directions for one along which the samples are thin.

    A set is flat exactly when some direction sees a projection width of
    essentially zero.  Random directions almost never hit an exact normal, so
    callers cross-checking a rank certificate should pass its ``complement``
    rows via ``extra_directions``.
    """
    pts = as_points(samples)
    n = pts.shape[1]
    if tol is None:
        tol = default_rank_tol(pts)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_random, n))
    norms = np.linalg.norm(dirs, axis=1)
    dirs = dirs[norms > 1e-12] / norms[norms > 1e-12, None]
    if extra_directions is not None and len(extra_directions):
        extra = np.asarray(extra_directions, dtype=np.float64)
        extra_norms = np.linalg.norm(extra, axis=1)
        extra = extra[extra_norms > 1e-12] / extra_norms[extra_norms > 1e-12, None]
        dirs = np.vstack([extra, dirs])
    centered = pts - pts[0]
    widths = np.ptp(centered @ dirs.T, axis=0)
    best = int(np.argmin(widths))
    threshold = PROJECTION_SLACK * n * tol
    return ProjectionFlatnessReport(
        flat=bool(widths[best] <= threshold),
        width=float(widths[best]),
        direction=dirs[best].copy(),
        tol=tol,
        threshold=threshold,
    )


def _patch_rows(pts: NDArray[np.float64], center: int, rho: float) -> NDArray[np.float64]:
    """Difference vectors of the samples within sup-norm rho of sample ``center``."""
    base = pts[center]
    near = np.abs(pts - base).max(axis=1) <= rho
    return pts[near] - base


def _check_patch_radius(rho: float, samples: SampledSet | NDArray[np.float64]) -> None:
    if rho <= 0:
        raise ValueError(f"patch radius must be positive, got {rho}")
    if isinstance(samples, SampledSet) and rho <= 2 * samples.density:
        raise ValueError(
            f"patch radius {rho} must exceed twice the sample density {samples.density}"
        )


@dataclass(frozen=True)
class NowhereFlatReport:
    nowhere_flat: bool
    flat_centers: tuple[int, ...]
    rho: float
    tol: float


def is_nowhere_flat(
    samples: SampledSet | NDArray[np.float64], rho: float, tol: float | None = None
) -> NowhereFlatReport:
    """Check that no rho-patch of the samples is affinely rank-deficient.

    Flat patches are reported by the index of their center sample (first one
    first).  A patch too sparse to span full rank counts as flat; the radius
    must exceed twice the sample density so patches hold genuine geometry.
    """
    _check_patch_radius(rho, samples)
    pts = as_points(samples)
    n = pts.shape[1]
    if tol is None:
        tol = default_rank_tol(pts)
    flat_centers = []
    for center in range(pts.shape[0]):
        rows = _patch_rows(pts, center, rho)
        if greedy_row_elimination(rows, tol, order="pivot").rank < n:
            flat_centers.append(center)
    return NowhereFlatReport(
        nowhere_flat=not flat_centers,
        flat_centers=tuple(flat_centers),
        rho=rho,
        tol=tol,
    )


@dataclass(frozen=True)
class CollectiveCertificate:
    """One-vector-per-set basis search over patch tuples.

    ``verdict`` True means every examined patch tuple admits difference
    vectors, one drawn from each set's patch, forming a basis; ``pairs``,
    ``basis`` and ``det_abs`` demonstrate such a choice on a representative
    tuple.  A failing tuple is returned in ``witness_centers`` (one sample
    index per set) and is a proof regardless of ``exhaustive``.
    """

    verdict: bool
    exhaustive: bool
    tuples_checked: int
    witness_centers: tuple[int, ...] | None
    demo_centers: tuple[int, ...] | None
    pairs: tuple[tuple[int, int], ...] | None
    basis: NDArray[np.float64] | None
    det_abs: float | None
    rho: float
    tol: float


def _rado_feasible(bases: Sequence[NDArray[np.float64]], tol: float) -> bool:
    """Independent-transversal existence over span bases (Rado's condition)."""
    for size in range(1, len(bases) + 1):
        for combo in combinations(range(len(bases)), size):
            stacked = np.vstack([bases[i] for i in combo])
            if greedy_row_elimination(stacked, tol, order="pivot").rank < size:
                return False
    return True


def _transversal_pairs(
    candidate_lists: Sequence[NDArray[np.float64]],
    tol: float,
    step_cap: int = 100_000,
) -> tuple[int, ...] | None:
    """Pick one row per list, jointly independent at tol.

    Depth-first greedy: candidates are tried in decreasing residual order
    (ties by lower index) with backtracking, capped at ``step_cap`` visits.
    Returns the per-list row indices, or None if no basis was found.
    """
    n = candidate_lists[0].shape[1]
    budget = step_cap

    def descend(level: int, pivots: list[tuple[NDArray[np.float64], int]]) -> tuple[int, ...] | None:
        nonlocal budget
        if level == len(candidate_lists):
            return ()
        cands = candidate_lists[level].copy()
        for prow, pcol in pivots:
            cands -= np.outer(cands[:, pcol] / prow[pcol], prow)
            cands[:, pcol] = 0.0
        mags = np.abs(cands).max(axis=1, initial=0.0)
        order = np.argsort(-mags, kind="stable")
        for idx in order:
            if mags[idx] <= tol:
                break
            if budget <= 0:
                return None
            budget -= 1
            row = cands[idx]
            col = int(np.argmax(np.abs(row)))
            rest = descend(level + 1, pivots + [(row, col)])
            if rest is not None:
                return (int(idx),) + rest
        return None

    if n < len(candidate_lists):
        return None
    return descend(0, [])


def collectively_nowhere_flat(
    sets: Sequence[SampledSet | NDArray[np.float64]],
    rho: float,
    tol: float | None = None,
    tuple_limit: int = 10_000,
    seed: int = 0,
) -> CollectiveCertificate:
    """Certify that every patch tuple spans a basis with one vector per set.

    Only rank-deficient patches can break the property (a failing Rado subset
    cannot contain a full-rank patch), so tuples are enumerated over deficient
    patch centers grouped by which sets contribute them.  Groups larger than
    ``tuple_limit`` are sampled with the given seed and flagged non-exhaustive;
    any failing tuple found is a standalone proof of failure.
    """
    if not sets:
        raise ValueError("need at least one sampled set")
    for s in sets:
        _check_patch_radius(rho, s)
    pts_list = [as_points(s) for s in sets]
    n = pts_list[0].shape[1]
    if any(p.shape[1] != n for p in pts_list):
        raise ValueError("all sets must share one ambient dimension")
    if len(sets) != n:
        raise ValueError(f"need exactly {n} sets in dimension {n}, got {len(sets)}")
    if tol is None:
        tol = max(default_rank_tol(p) for p in pts_list)

    # Deficient patches per set: center index plus a span basis of its diffs.
    deficient: list[list[tuple[int, NDArray[np.float64]]]] = []
    for pts in pts_list:
        entries = []
        for center in range(pts.shape[0]):
            res = greedy_row_elimination(_patch_rows(pts, center, rho), tol, order="pivot")
            if res.rank < n:
                entries.append((center, res.basis))
        deficient.append(entries)

    rng = np.random.default_rng(seed)
    exhaustive = True
    tuples_checked = 0
    witness: tuple[int, ...] | None = None

    for size in range(1, n + 1):
        if witness:
            break
        for combo in combinations(range(n), size):
            if witness:
                break
            counts = [len(deficient[i]) for i in combo]
            if any(c == 0 for c in counts):
                continue
            total = math.prod(counts)
            if total <= tuple_limit:
                picks = product(*(range(c) for c in counts))
            else:
                exhaustive = False
                draws = rng.integers(0, counts, size=(tuple_limit, size))
                picks = (tuple(int(x) for x in row) for row in draws)
            for pick in picks:
                tuples_checked += 1
                bases = [deficient[i][j][1] for i, j in zip(combo, pick)]
                if not _rado_feasible(bases, tol):
                    centers = [0] * n
                    for i, j in zip(combo, pick):
                        centers[i] = deficient[i][j][0]
                    witness = tuple(centers)
                    break

    if witness is not None:
        return CollectiveCertificate(
            verdict=False,
            exhaustive=exhaustive,
            tuples_checked=tuples_checked,
            witness_centers=witness,
            demo_centers=None,
            pairs=None,
            basis=None,
            det_abs=None,
            rho=rho,
            tol=tol,
        )

    # Demonstration pairs on the first-sample tuple: one difference per set,
    # anchored at the patch center (a_i = center sample).
    demo_centers = tuple(0 for _ in range(n))
    cand_lists = []
    cand_index_maps = []
    for pts in pts_list:
        base = pts[0]
        near = np.flatnonzero(np.abs(pts - base).max(axis=1) <= rho)
        cand_lists.append(pts[near] - base)
        cand_index_maps.append(near)
    picks = _transversal_pairs(cand_lists, tol)
    pairs = None
    basis = None
    det_abs = None
    if picks is not None:
        pairs = tuple((0, int(cand_index_maps[i][p])) for i, p in enumerate(picks))
        basis = np.vstack([cand_lists[i][p] for i, p in enumerate(picks)])
        det_abs = parallelotope_volume(basis, tol)
    return CollectiveCertificate(
        verdict=True,
        exhaustive=exhaustive,
        tuples_checked=tuples_checked,
        witness_centers=None,
        demo_centers=demo_centers,
        pairs=pairs,
        basis=basis,
        det_abs=det_abs,
        rho=rho,
        tol=tol,
    )
