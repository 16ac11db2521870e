"""Deterministic sample generators for the standard test continua.

Every generator emits a SampledSet whose points lie exactly on the target set
(up to one float rounding) together with an honest covering density: every set
point is within sup-norm ``density`` of some sample.  Cantor-style sets are
built in exact rational arithmetic and rounded once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .grid import SampledSet

KINDS = (
    "segment",
    "l_shape",
    "circle",
    "moment_curve",
    "polyline",
    "cantor_set",
    "cantor_graph",
    "ladder_steps",
)

#: Hard cap on Cantor recursion level; 2^20 corner samples is already absurd.
_MAX_DEPTH = 20


def segment(start: Sequence[float], end: Sequence[float], budget: int = 11) -> SampledSet:
    """Equally spaced samples of the closed segment from start to end."""
    a = np.asarray(start, dtype=np.float64)
    b = np.asarray(end, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("start and end must be equal-length coordinate vectors")
    if budget < 2:
        raise ValueError(f"sample budget must be at least 2, got {budget}")
    t = np.arange(budget, dtype=np.float64) / (budget - 1)
    pts = a + t[:, None] * (b - a)
    density = float(np.abs(b - a).max()) / (2 * (budget - 1))
    return SampledSet(points=pts, density=density)


def l_shape(dim: int = 2, budget: int = 40) -> SampledSet:
    """Unit segments from the origin along each coordinate axis.

    The origin is the first sample; each arm then contributes its remaining
    equally spaced points in axis order.
    """
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    if budget < 2 * dim:
        raise ValueError(f"budget {budget} too small for {dim} arms")
    per_arm = max(2, budget // dim)
    t = np.arange(1, per_arm, dtype=np.float64) / (per_arm - 1)
    rows = [np.zeros((1, dim))]
    for axis in range(dim):
        arm = np.zeros((per_arm - 1, dim))
        arm[:, axis] = t
        rows.append(arm)
    return SampledSet(points=np.vstack(rows), density=1.0 / (2 * (per_arm - 1)))


def circle(
    budget: int = 360,
    center: Sequence[float] = (0.0, 0.0),
    radius: float = 1.0,
    phase: float = 0.0,
) -> SampledSet:
    """Equally spaced samples of a planar circle, starting at ``phase``."""
    if budget < 3:
        raise ValueError(f"need at least 3 circle samples, got {budget}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=np.float64)
    if c.shape != (2,):
        raise ValueError("center must be a 2-vector")
    theta = phase + np.arange(budget) * (2 * np.pi / budget)
    pts = c + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # Arc length between samples bounds the sup-norm gap from above.
    return SampledSet(points=pts, density=math.pi * radius / budget)


def moment_curve(dim: int = 2, budget: int = 41) -> SampledSet:
    """Samples (t, t^2, ..., t^dim) for t equally spaced in [0, 1].

    Each coordinate is k-Lipschitz on [0, 1], so half the parameter step
    times ``dim`` covers the curve in sup norm.
    """
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    if budget < 2:
        raise ValueError(f"sample budget must be at least 2, got {budget}")
    t = np.arange(budget, dtype=np.float64) / (budget - 1)
    pts = np.stack([t ** (k + 1) for k in range(dim)], axis=1)
    return SampledSet(points=pts, density=dim / (2 * (budget - 1)))


def polyline(vertices: Sequence[Sequence[float]], budget: int = 64) -> SampledSet:
    """Samples along a vertex chain, allocated proportionally to edge length."""
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[0] < 2:
        raise ValueError("need at least two vertices")
    if budget < verts.shape[0]:
        raise ValueError(f"budget {budget} below vertex count {verts.shape[0]}")
    lengths = np.abs(np.diff(verts, axis=0)).max(axis=1)
    if (lengths == 0).any():
        raise ValueError("repeated consecutive vertices")
    total = float(lengths.sum())
    rows = [verts[:1]]
    density = 0.0
    for e, length in enumerate(lengths):
        intervals = max(1, round((budget - 1) * float(length) / total))
        t = np.arange(1, intervals + 1, dtype=np.float64) / intervals
        rows.append(verts[e] + t[:, None] * (verts[e + 1] - verts[e]))
        density = max(density, float(length) / (2 * intervals))
    return SampledSet(points=np.vstack(rows), density=density)


def _cantor_intervals(depth: int) -> list[tuple[Fraction, Fraction]]:
    """The 2^depth level-``depth`` middle-thirds intervals, ascending."""
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(depth):
        third = [
            piece
            for a, b in intervals
            for piece in ((a, a + (b - a) / 3), (b - (b - a) / 3, b))
        ]
        intervals = third
    return intervals


def cantor_set(depth: int) -> SampledSet:
    """Left endpoints of the level-``depth`` middle-thirds intervals.

    Every point of the set lies in one such interval of width 3^-depth, so
    the left endpoints cover it at density 3^-depth.
    """
    if not 0 <= depth <= _MAX_DEPTH:
        raise ValueError(f"depth must be in [0, {_MAX_DEPTH}], got {depth}")
    lefts = [float(a) for a, _ in _cantor_intervals(depth)]
    return SampledSet(points=np.array(lefts)[:, None], density=3.0 ** -depth)


def cantor_value(x: float | Fraction) -> float:
    """The Cantor ladder function on [0, 1].

    Ternary digits 0 and 2 map to binary digits 0 and 1; the first ternary
    digit 1 contributes a final binary 1 and stops (the value is constant
    across each removed gap).  Exact rational arithmetic throughout.
    """
    fr = Fraction(x)
    if not 0 <= fr <= 1:
        raise ValueError(f"argument must lie in [0, 1], got {x}")
    if fr == 1:
        return 1.0
    value = Fraction(0)
    for i in range(1, 65):
        fr *= 3
        digit = math.floor(fr)
        fr -= digit
        if digit >= 1:
            value += Fraction(1, 2**i)
            if digit == 1:
                break
        if fr == 0:
            break
    return float(value)


@dataclass(frozen=True)
class _GraphPieces:
    """Exact level-k structure of the ladder graph."""

    level: int
    corners: list[tuple[Fraction, Fraction]]
    plateaus: list[tuple[Fraction, Fraction, Fraction]]  # (left, right, height)


def _graph_pieces(level: int) -> _GraphPieces:
    intervals = _cantor_intervals(level)
    corners = []
    for j, (a, b) in enumerate(intervals):
        corners.append((a, Fraction(j, 2**level)))
        corners.append((b, Fraction(j + 1, 2**level)))
    plateaus = []
    for j in range(len(intervals) - 1):
        left = intervals[j][1]
        right = intervals[j + 1][0]
        plateaus.append((left, right, Fraction(j + 1, 2**level)))
    return _GraphPieces(level=level, corners=corners, plateaus=plateaus)


def cantor_graph(depth: int, budget: int = 0) -> SampledSet:
    """Samples of the full Cantor ladder graph over [0, 1].

    Sampling resolves the graph to level k >= depth (deeper when the budget
    asks for more points): interval corners carry exact dyadic heights, the
    gap plateaus are filled at spacing <= 2^(1-k), and each level-k interval
    also contributes the interior point with ternary tail 0202... whose height
    j/2^k + 1/(3*2^k) is NOT dyadic (the graph is not a union of dyadic
    lines).  A graph point above a level-k interval sits within 3^-k
    horizontally and 2^-k vertically of a corner, so the density is 2^-k.
    All samples lie exactly on the graph up to one float rounding.
    """
    if not 0 <= depth <= _MAX_DEPTH:
        raise ValueError(f"depth must be in [0, {_MAX_DEPTH}], got {depth}")
    level = max(depth, 1)
    if budget:
        level = max(level, int(math.log2(max(budget, 4) / 3.5)))
        level = min(level, _MAX_DEPTH)
    pieces = _graph_pieces(level)
    spacing_cap = 2.0 ** (1 - level)
    xs: list[float] = []
    ys: list[float] = []
    plateau_by_left = {p[0]: p for p in pieces.plateaus}
    interval_width = Fraction(1, 3**level)
    interior_dx = interval_width / 4
    interior_dy = Fraction(1, 3 * 2**level)
    left_corner = True
    for cx, cy in pieces.corners:
        xs.append(float(cx))
        ys.append(float(cy))
        if left_corner:
            xs.append(float(cx + interior_dx))
            ys.append(float(cy + interior_dy))
            left_corner = False
            continue
        left_corner = True
        plateau = plateau_by_left.get(cx)
        if plateau is None:
            continue
        left, right, height = plateau
        width = float(right - left)
        inner = max(2, math.ceil(width / spacing_cap) + 1)
        fill = np.linspace(float(left), float(right), inner + 1)[1:-1]
        xs.extend(fill.tolist())
        ys.extend([float(height)] * len(fill))
    pts = np.stack([np.array(xs), np.array(ys)], axis=1)
    return SampledSet(points=pts, density=2.0 ** -level)


def ladder_steps(depth: int, budget: int = 64) -> SampledSet:
    """Open plateau interiors of the ladder graph, truncated at ``depth``.

    Returns 2-D samples (x, height) on the 2^depth - 1 removed-gap plateaus,
    inset by 10% of each plateau's length so no sample touches the graph of
    the restriction to the Cantor set itself.  Heights are exact dyadics
    k/2^q with q <= depth.
    """
    if not 1 <= depth <= _MAX_DEPTH:
        raise ValueError(f"depth must be in [1, {_MAX_DEPTH}], got {depth}")
    plateaus = _graph_pieces(depth).plateaus
    per_plateau = max(2, budget // len(plateaus))
    xs: list[float] = []
    ys: list[float] = []
    density = 0.0
    for left, right, height in plateaus:
        length = float(right - left)
        lo = float(left) + 0.1 * length
        hi = float(right) - 0.1 * length
        fill = np.linspace(lo, hi, per_plateau)
        xs.extend(fill.tolist())
        ys.extend([float(height)] * per_plateau)
        spacing = (hi - lo) / (per_plateau - 1)
        density = max(density, 0.1 * length, spacing / 2)
    pts = np.stack([np.array(xs), np.array(ys)], axis=1)
    return SampledSet(points=pts, density=density)


def sampled_sum(a: SampledSet, b: SampledSet) -> SampledSet:
    """All pairwise sums; covering densities add."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    pts = (a.points[:, None, :] + b.points[None, :, :]).reshape(-1, a.dim)
    return SampledSet(
        points=pts, density=a.density + b.density, exact=a.exact and b.exact
    )


def dyadic_lines_check(
    sum_samples: SampledSet, max_denominator_exponent: int
) -> tuple[bool, int]:
    """Do all heights lie on lines y = p / 2^q with q bounded?

    Returns (verdict, number of distinct heights).  Scaling by 2^q is exact
    in floating point, so integrality of y * 2^q is an exact test.  Empty
    input passes vacuously with zero lines.
    """
    if max_denominator_exponent < 0:
        raise ValueError("denominator exponent must be non-negative")
    if sum_samples.count == 0:
        return True, 0
    if sum_samples.dim != 2:
        raise ValueError(f"expected planar samples, got dim {sum_samples.dim}")
    heights = sum_samples.points[:, 1]
    scaled = heights * 2.0**max_denominator_exponent
    all_dyadic = bool(np.all(scaled == np.floor(scaled)))
    return all_dyadic, len(np.unique(heights))


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative recipe for one generated set (CLI-constructible)."""

    kind: str
    parameters: dict = field(default_factory=dict)
    sample_budget: int = 64
    seed: int = 0


@dataclass(frozen=True)
class Generated:
    samples: SampledSet
    kind: str
    detail: dict


_ALLOWED_PARAMS = {
    "segment": {"start", "end"},
    "l_shape": {"dim"},
    "circle": {"center", "radius", "phase"},
    "moment_curve": {"dim"},
    "polyline": {"vertices"},
    "cantor_set": {"depth"},
    "cantor_graph": {"depth"},
    "ladder_steps": {"depth"},
}


def _check_finite(value: object, path: str) -> None:
    if isinstance(value, bool):
        raise ValueError(f"parameter {path} must be numeric, got a boolean")
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise ValueError(f"parameter {path} must be finite, got {value}")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_finite(item, f"{path}[{i}]")
        return
    raise ValueError(f"parameter {path} has unsupported type {type(value).__name__}")


def generate(spec: GeneratorSpec) -> Generated:
    """Build the sampled set a GeneratorSpec describes."""
    if spec.kind not in KINDS:
        raise ValueError(f"unknown generator kind {spec.kind!r}")
    if spec.sample_budget < 2:
        raise ValueError(f"sample_budget must be at least 2, got {spec.sample_budget}")
    allowed = _ALLOWED_PARAMS[spec.kind]
    unknown = set(spec.parameters) - allowed
    if unknown:
        raise ValueError(
            f"unknown parameter(s) for {spec.kind}: {', '.join(sorted(unknown))}"
        )
    for key, value in spec.parameters.items():
        _check_finite(value, key)
    p = spec.parameters
    detail: dict = {}
    if spec.kind == "segment":
        if "start" not in p or "end" not in p:
            raise ValueError("segment needs start and end")
        out = segment(p["start"], p["end"], spec.sample_budget)
    elif spec.kind == "l_shape":
        out = l_shape(int(p.get("dim", 2)), spec.sample_budget)
    elif spec.kind == "circle":
        out = circle(
            spec.sample_budget,
            center=p.get("center", (0.0, 0.0)),
            radius=float(p.get("radius", 1.0)),
            phase=float(p.get("phase", 0.0)),
        )
    elif spec.kind == "moment_curve":
        out = moment_curve(int(p.get("dim", 2)), spec.sample_budget)
    elif spec.kind == "polyline":
        if "vertices" not in p:
            raise ValueError("polyline needs vertices")
        out = polyline(p["vertices"], spec.sample_budget)
    elif spec.kind == "cantor_set":
        if "depth" not in p:
            raise ValueError("cantor_set needs depth")
        out = cantor_set(int(p["depth"]))
    elif spec.kind == "cantor_graph":
        if "depth" not in p:
            raise ValueError("cantor_graph needs depth")
        out = cantor_graph(int(p["depth"]), spec.sample_budget)
        detail["effective_level"] = round(-math.log2(out.density))
    else:
        if "depth" not in p:
            raise ValueError("ladder_steps needs depth")
        out = ladder_steps(int(p["depth"]), spec.sample_budget)
    detail["count"] = out.count
    detail["density"] = out.density
    return Generated(samples=out, kind=spec.kind, detail=detail)
