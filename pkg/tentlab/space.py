"""Finite metric measure spaces.

A space is a distance table plus positive point masses. Balls are strict,
``B(x, r) = {y : d(x, y) < r}``, and every sup over balls is taken over the finite
family of distinct balls, so maximal functions and ball constants are exact.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
from pydantic import ValidationError
from scipy.spatial.distance import cdist

from tentlab.errors import InputError
from tentlab.models import DoublingReport, MetricKind, SpaceDocument

logger = logging.getLogger(__name__)

MetricFn = Callable[[np.ndarray], np.ndarray]

TRIANGLE_EXHAUSTIVE_LIMIT = 500
TRIANGLE_SAMPLES = 200_000
_BALL_CHUNK = 4096


def _metric_euclidean(coords: np.ndarray) -> np.ndarray:
    return cdist(coords, coords, "euclidean")


def _metric_manhattan(coords: np.ndarray) -> np.ndarray:
    return cdist(coords, coords, "cityblock")


def _metric_chebyshev(coords: np.ndarray) -> np.ndarray:
    return cdist(coords, coords, "chebyshev")


# Strategy registry mapping metric names to distance builders
METRICS: Dict[MetricKind, MetricFn] = {
    MetricKind.EUCLIDEAN: _metric_euclidean,
    MetricKind.MANHATTAN: _metric_manhattan,
    MetricKind.CHEBYSHEV: _metric_chebyshev,
}


def hash_arrays(label: str, *arrays: np.ndarray) -> str:
    """SHA-256 over a label and the little-endian float64 bytes of each array."""
    digest = hashlib.sha256(label.encode())
    for array in arrays:
        data = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
        digest.update(str(data.shape).encode())
        digest.update(data.tobytes())
    return digest.hexdigest()


def _tolerance(dist: np.ndarray) -> float:
    scale = float(dist.max()) if dist.size else 0.0
    return 1e-12 * max(1.0, scale)


def _check_triangle(dist: np.ndarray, tol: float) -> None:
    """Raise InputError naming the first violating triple."""
    n = dist.shape[0]
    if n <= TRIANGLE_EXHAUSTIVE_LIMIT:
        for k in range(n):
            bound = dist[:, k][:, None] + dist[k][None, :] + tol
            bad = np.argwhere(dist > bound)
            if bad.size:
                i, j = (int(v) for v in bad[0])
                raise InputError(
                    f"Triangle inequality fails for ({i}, {k}, {j}): "
                    f"d({i},{j}) = {dist[i, j]!r} > d({i},{k}) + d({k},{j}) = "
                    f"{dist[i, k] + dist[k, j]!r}"
                )
        return
    rng = np.random.default_rng(0)
    i, k, j = rng.integers(0, n, size=(3, TRIANGLE_SAMPLES))
    bad = np.flatnonzero(dist[i, j] > dist[i, k] + dist[k, j] + tol)
    if bad.size:
        a, b, c = int(i[bad[0]]), int(k[bad[0]]), int(j[bad[0]])
        raise InputError(f"Triangle inequality fails for ({a}, {b}, {c})")
    logger.debug("Triangle inequality sampled on %d triples.", TRIANGLE_SAMPLES)


def _validate(dist: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Validate a distance table and masses; returns the (exactly symmetric) table."""
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise InputError(f"Distance table must be square, got shape {dist.shape}")
    n = dist.shape[0]
    if n == 0:
        raise InputError("Space must contain at least one point")
    if mass.shape != (n,):
        raise InputError(f"Measure must have {n} entries, got {mass.shape[0]}")
    if not np.all(np.isfinite(dist)):
        raise InputError("Distance table contains non-finite values")
    if not np.all(np.isfinite(mass)) or np.any(mass <= 0):
        bad = int(np.flatnonzero(~(mass > 0))[0]) if np.any(~(mass > 0)) else 0
        raise InputError(f"Point masses must be positive and finite (point {bad})")
    if np.any(np.diag(dist) != 0):
        i = int(np.flatnonzero(np.diag(dist) != 0)[0])
        raise InputError(f"Distance table must have zero diagonal (d({i},{i}) != 0)")
    if np.any(dist < 0):
        i, j = (int(v) for v in np.argwhere(dist < 0)[0])
        raise InputError(f"Distances must be nonnegative (d({i},{j}) < 0)")
    tol = _tolerance(dist)
    asym = np.abs(dist - dist.T)
    if np.any(asym > tol):
        i, j = (int(v) for v in np.argwhere(asym > tol)[0])
        raise InputError(f"Distance table is not symmetric: d({i},{j}) != d({j},{i})")
    dist = 0.5 * (dist + dist.T)
    off = dist + np.eye(n)
    if np.any(off <= 0):
        i, j = (int(v) for v in np.argwhere(off <= 0)[0])
        raise InputError(f"Distinct points {i} and {j} are at distance 0")
    _check_triangle(dist, tol)
    return dist


@dataclass(frozen=True)
class Ball:
    """A strict ball ``{y : d(center, y) < radius}``."""

    center: int
    radius: float

    def mask(self, space: "MetricMeasureSpace") -> np.ndarray:
        return space.dist[self.center] < self.radius

    def volume(self, space: "MetricMeasureSpace") -> float:
        return float(space.mass[self.mask(space)].sum())

    def dilate(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


@dataclass(frozen=True, eq=False)
class BallFamily:
    """
    The distinct balls of a finite space.

    Every ball is a prefix of some center's distance order, cut at a distinct distance.

    Attributes:
        members: Boolean membership matrix, one row per distinct ball
        centers: A center realizing each ball
        radii: A radius realizing each ball (midpoint to the next distance)
        volumes: Measure of each ball
    """

    members: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    volumes: np.ndarray

    @property
    def size(self) -> int:
        return int(self.members.shape[0])

    @cached_property
    def indicator(self) -> np.ndarray:
        return self.members.astype(float)

    def integrals(self, density: np.ndarray) -> np.ndarray:
        """Sum of ``density`` over each ball; pass values already multiplied by the mass."""
        return self.indicator @ density

    def averages(self, values: np.ndarray, mass: np.ndarray) -> np.ndarray:
        """Mass-weighted average of ``values`` over each ball."""
        return self.integrals(values * mass) / self.volumes

    def max_over_containing(self, per_ball: np.ndarray) -> np.ndarray:
        """For each point, the max of ``per_ball`` over the balls containing it."""
        n = self.members.shape[1]
        out = np.full(n, -np.inf)
        for start in range(0, self.size, _BALL_CHUNK):
            rows = self.members[start : start + _BALL_CHUNK]
            vals = per_ball[start : start + _BALL_CHUNK]
            out = np.maximum(out, np.where(rows, vals[:, None], -np.inf).max(axis=0))
        return out

    def min_over_members(self, values: np.ndarray) -> np.ndarray:
        """For each ball, the min of ``values`` over its members."""
        out = np.empty(self.size)
        for start in range(0, self.size, _BALL_CHUNK):
            rows = self.members[start : start + _BALL_CHUNK]
            out[start : start + _BALL_CHUNK] = np.where(rows, values[None, :], np.inf).min(axis=1)
        return out


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """
    Finite metric measure space.

    Construction validates the table: square, finite, zero diagonal, symmetric, positive
    between distinct points, triangle inequality (exhaustive up to 500 points, sampled
    beyond) and positive masses. Instances are immutable; derived tables are cached.

    Attributes:
        dist: N x N distance table
        mass: Point masses
        coords: Optional coordinate vectors
        metric: How ``dist`` was obtained
    """

    dist: np.ndarray
    mass: np.ndarray
    coords: Optional[np.ndarray] = None
    metric: MetricKind = MetricKind.EXPLICIT

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        mass = np.array(self.mass, dtype=float)
        dist = _validate(dist, mass)
        dist.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "mass", mass)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def n_points(self) -> int:
        return int(self.dist.shape[0])

    @cached_property
    def diam(self) -> float:
        return float(self.dist.max())

    @cached_property
    def min_distance(self) -> float:
        """Smallest positive distance; 1.0 on a single point so grids keep a scale."""
        if self.n_points == 1:
            return 1.0
        return float(self.dist[self.dist > 0].min())

    def nearest_distance(self, center: int) -> float:
        """Smallest positive distance from ``center``; ``min_distance`` on a single point."""
        row = self.dist[center]
        positive = row[row > 0]
        return float(positive.min()) if positive.size else self.min_distance

    @cached_property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @cached_property
    def space_hash(self) -> str:
        return hash_arrays("tentlab-space", self.dist, self.mass)

    @cached_property
    def order(self) -> np.ndarray:
        """Per-center stable distance order."""
        return np.argsort(self.dist, axis=1, kind="stable")

    @cached_property
    def sorted_dist(self) -> np.ndarray:
        return np.take_along_axis(self.dist, self.order, axis=1)

    @cached_property
    def cumulative_mass(self) -> np.ndarray:
        """``cumulative_mass[x, i]`` is the mass of the ``i`` nearest points to ``x``."""
        masses = self.mass[self.order]
        return np.concatenate([np.zeros((self.n_points, 1)), np.cumsum(masses, axis=1)], axis=1)

    @cached_property
    def balls(self) -> BallFamily:
        return ball_family(self)

    def volume_table(self, radii: np.ndarray) -> np.ndarray:
        """
        Volumes ``V(x, r)`` for every point and every radius.

        Args:
            radii: One-dimensional array of positive radii

        Returns:
            np.ndarray: Table of shape ``(N, len(radii))``
        """
        radii = np.asarray(radii, dtype=float)
        out = np.empty((self.n_points, radii.size))
        for x in range(self.n_points):
            out[x] = self.volumes_from(x, radii)
        return out

    def volumes_from(self, x: int, radii: np.ndarray) -> np.ndarray:
        """Volumes ``V(x, r)`` of one center for every radius."""
        idx = np.searchsorted(self.sorted_dist[x], np.asarray(radii, dtype=float), side="left")
        return self.cumulative_mass[x, idx]


def ball(space: MetricMeasureSpace, x: int, r: float) -> np.ndarray:
    """
    Indices of the strict ball ``B(x, r)``.

    Raises:
        InputError: If r is not positive
    """
    if r <= 0:
        raise InputError(f"Ball radius must be > 0, got {r}")
    return np.flatnonzero(space.dist[x] < r)


def volume(space: MetricMeasureSpace, x: int, r: float) -> float:
    """Measure of ``B(x, r)``; always at least the mass of ``x``."""
    return float(space.mass[ball(space, x, r)].sum())


def distance_to_set(space: MetricMeasureSpace, mask: np.ndarray) -> np.ndarray:
    """``d(y, S)`` for every point; ``+inf`` when ``S`` is empty."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.full(space.n_points, np.inf)
    return space.dist[:, mask].min(axis=1)


def ball_family(space: MetricMeasureSpace) -> BallFamily:
    """
    Enumerate the distinct balls of a space.

    For each center, the balls are the closed prefixes of its stable distance order cut
    after each distinct distance. Duplicates across centers are removed, keeping the first
    occurrence, so the family and its order are deterministic.

    Args:
        space: The space

    Returns:
        BallFamily: Deduplicated family with membership matrix
    """
    n = space.n_points
    ranks = np.empty_like(space.order)
    rows = np.arange(n)[:, None]
    ranks[rows, space.order] = np.arange(n)[None, :]

    member_blocks, centers, radii = [], [], []
    for c in range(n):
        sd = space.sorted_dist[c]
        ends = np.append(np.flatnonzero(np.diff(sd) > 0), n - 1)
        member_blocks.append(ranks[c][None, :] <= ends[:, None])
        nxt = np.append(sd[ends[:-1] + 1], sd[ends[-1]] + 2.0 * space.min_distance)
        radii.append(0.5 * (sd[ends] + nxt))
        centers.append(np.full(ends.size, c))

    members = np.concatenate(member_blocks)
    _, first = np.unique(np.packbits(members, axis=1), axis=0, return_index=True)
    keep = np.sort(first)
    members = members[keep]
    family = BallFamily(
        members=members,
        centers=np.concatenate(centers)[keep],
        radii=np.concatenate(radii)[keep],
        volumes=members.astype(float) @ space.mass,
    )
    logger.debug("Enumerated %d distinct balls on %d points.", family.size, n)
    return family


def maximal_function(
    space: MetricMeasureSpace, f: np.ndarray, centered: bool = False
) -> np.ndarray:
    """
    Hardy-Littlewood maximal function, computed exactly.

    Args:
        space: The space
        f: Nonnegative per-point values
        centered: Only use balls centered at the evaluation point

    Returns:
        np.ndarray: ``Mf`` at every point

    Raises:
        InputError: If f has the wrong shape or negative entries
    """
    f = _point_values(space, f, "f")
    if np.any(f < 0):
        raise InputError("maximal_function expects nonnegative values")
    if not centered:
        family = space.balls
        return family.max_over_containing(family.averages(f, space.mass))

    out = np.empty(space.n_points)
    for x in range(space.n_points):
        sd = space.sorted_dist[x]
        ends = np.append(np.flatnonzero(np.diff(sd) > 0), space.n_points - 1)
        sums = np.cumsum((f * space.mass)[space.order[x]])[ends]
        out[x] = np.max(sums / space.cumulative_mass[x, ends + 1])
    return out


def _point_values(space: MetricMeasureSpace, values: Any, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != (space.n_points,):
        raise InputError(f"{name} must have {space.n_points} entries, got shape {arr.shape}")
    return arr


def weight_values(space: MetricMeasureSpace, w: Any) -> np.ndarray:
    """Per-point weight values from a WeightFunction, an array or None (w = 1)."""
    if w is None:
        return np.ones(space.n_points)
    return _point_values(space, getattr(w, "values", w), "w").astype(float)


def lp_norm_weighted(
    space: MetricMeasureSpace, f: np.ndarray, w: Any = None, p: float = 2.0
) -> float:
    """
    Weighted Lebesgue (quasi-)norm ``(sum |f|^p w mu)^(1/p)``.

    Args:
        space: The space
        f: Real or complex per-point values
        w: WeightFunction, per-point array or None for w = 1
        p: Exponent, p > 0

    Returns:
        float: The norm

    Raises:
        InputError: If p is not positive
    """
    if p <= 0:
        raise InputError(f"p must be > 0, got {p}")
    values = np.abs(_point_values(space, f, "f"))
    total = float(np.sum(values**p * weight_values(space, w) * space.mass))
    return total ** (1.0 / p)


def greedy_net(
    space: MetricMeasureSpace, r: float, seeds: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Greedy r-net in index order.

    Centers are pairwise at least ``r`` apart and every point lies at distance ``< r`` from
    some center. ``seeds`` are kept as centers and extended.

    Args:
        space: The space
        r: Separation scale, r > 0
        seeds: Existing centers to extend (must already be r-separated)

    Returns:
        np.ndarray: Sorted center indices
    """
    if r <= 0:
        raise InputError(f"Net scale must be > 0, got {r}")
    chosen = [] if seeds is None else [int(s) for s in seeds]
    nearest = np.full(space.n_points, np.inf)
    for c in chosen:
        nearest = np.minimum(nearest, space.dist[c])
    for i in range(space.n_points):
        if nearest[i] >= r:
            chosen.append(i)
            nearest = np.minimum(nearest, space.dist[i])
    return np.array(sorted(chosen), dtype=int)


def _sample_radii(low: float, high: float, count: int = 24) -> np.ndarray:
    return np.geomspace(low, high, count)


def doubling_report(space: MetricMeasureSpace) -> DoublingReport:
    """
    Measured doubling constants.

    ``c_doubling`` is the exact sup of ``V(x, 2r) / V(x, r)``: both volumes are constant
    between consecutive points of ``{d(x, y)} U {d(x, y) / 2}``, so midpoints suffice.
    ``n_exp`` is a pooled least-squares slope of ``log V(x, r)`` against ``log r`` with a
    per-center intercept over ``[4 min_distance, diam / 3]`` (the full range when empty).
    ``d_exp`` is the sup of ``log(V(x, r) / V(y, r)) / log(1 + d(x, y) / r)``.

    Args:
        space: The space

    Returns:
        DoublingReport: Measured constants
    """
    n = space.n_points
    if n == 1:
        return DoublingReport(
            c_doubling=1.0, n_exp=0.0, d_exp=0.0, n_points=1, diam=0.0, min_distance=1.0
        )

    c_doubling = 1.0
    for x in range(n):
        positive = space.sorted_dist[x][1:]
        breaks = np.unique(np.concatenate([positive, positive / 2.0]))
        radii = np.concatenate([[breaks[0] / 2.0], 0.5 * (breaks[:-1] + breaks[1:])])
        row = space.volumes_from(x, radii)
        doubled = space.volumes_from(x, 2.0 * radii)
        c_doubling = max(c_doubling, float(np.max(doubled / row)))

    low, high = 4.0 * space.min_distance, space.diam / 3.0
    if low >= high:
        low, high = space.min_distance, space.diam
    radii = _sample_radii(low, high)
    log_r = np.log(radii) - np.log(radii).mean()
    log_v = np.log(space.volume_table(radii))
    log_v -= log_v.mean(axis=1, keepdims=True)
    n_exp = float(np.sum(log_v * log_r[None, :]) / (n * np.sum(log_r**2)))

    d_exp = 0.0
    off = ~np.eye(n, dtype=bool)
    for r in _sample_radii(space.min_distance / 2.0, 2.0 * space.diam):
        v = space.volume_table(np.array([r]))[:, 0]
        ratio = np.log(v[:, None] / v[None, :])
        growth = np.log1p(space.dist / r)
        d_exp = max(d_exp, float(np.max(ratio[off] / growth[off])))

    return DoublingReport(
        c_doubling=c_doubling,
        n_exp=max(0.0, n_exp),
        d_exp=d_exp,
        n_points=n,
        diam=space.diam,
        min_distance=space.min_distance,
    )


def space_from_document(document: SpaceDocument) -> MetricMeasureSpace:
    """
    Build a validated space from a document.

    Raises:
        InputError: On any missing field or invariant violation
    """
    coords = None
    if document.metric == MetricKind.EXPLICIT or document.points is None:
        if document.distances is None:
            raise InputError("Space document needs 'distances' or 'points'")
        dist = np.asarray(document.distances, dtype=float)
        metric = MetricKind.EXPLICIT
    else:
        coords = np.asarray(document.points, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2 or coords.shape[0] == 0:
            raise InputError("'points' must be a non-empty array of coordinate arrays")
        dist = METRICS[document.metric](coords)
        metric = document.metric
    n = dist.shape[0] if dist.ndim == 2 else 0
    mass = np.ones(n) if document.measure is None else np.asarray(document.measure, dtype=float)
    space = MetricMeasureSpace(dist=dist, mass=mass, coords=coords, metric=metric)
    logger.info("Loaded space with %d points (diam %.6g).", space.n_points, space.diam)
    return space


def load_space(source: Union[SpaceDocument, Dict[str, Any], str, Path]) -> MetricMeasureSpace:
    """
    Load a space from a document, a mapping, a JSON string or a file path.

    Raises:
        InputError: On a missing file, malformed JSON or invalid space
    """
    if isinstance(source, SpaceDocument):
        return space_from_document(source)
    try:
        if isinstance(source, dict):
            document = SpaceDocument.model_validate(source)
        elif isinstance(source, Path) or not source.lstrip().startswith("{"):
            document = SpaceDocument.model_validate_json(read_text(source))
        else:
            document = SpaceDocument.model_validate_json(source)
    except ValidationError as e:
        raise InputError(f"Invalid space document: {e}") from e
    return space_from_document(document)


def space_to_document(space: MetricMeasureSpace) -> SpaceDocument:
    if space.coords is not None and space.metric != MetricKind.EXPLICIT:
        return SpaceDocument(
            points=space.coords.tolist(), measure=space.mass.tolist(), metric=space.metric
        )
    return SpaceDocument(
        distances=space.dist.tolist(), measure=space.mass.tolist(), metric=MetricKind.EXPLICIT
    )


def read_text(path: Union[str, Path]) -> str:
    """Read a UTF-8 file, mapping a missing file to InputError."""
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e.strerror or e}") from e


def read_json(path: Union[str, Path]) -> Any:
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise InputError(f"Malformed JSON in {path}: {e}") from e
