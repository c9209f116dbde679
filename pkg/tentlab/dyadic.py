"""Dyadic cube systems built from nested greedy nets, and dyadic Whitney covers."""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from tentlab import __version__
from tentlab.concurrency import parallel_map
from tentlab.config import DEFAULT_DELTA, MAX_DELTA
from tentlab.errors import InputError
from tentlab.models import (
    DyadicCubeDocument,
    DyadicGenerationDocument,
    DyadicReport,
    DyadicSystemDocument,
    PropertyCheck,
    WhitneyMode,
    WhitneyReport,
)
from tentlab.space import MetricMeasureSpace, distance_to_set, greedy_net

logger = logging.getLogger(__name__)

# Net constants: greedy nets at scale delta^k are delta^k-separated and delta^k-covering.
C0_NET = 1.0
C0_COVER = 1.0
WHITNEY_SHELL = 8.0


@dataclass(frozen=True, eq=False)
class DyadicCube:
    """
    Cube ``Q_beta^k``.

    Attributes:
        k: Generation
        index: Position ``beta`` within the generation
        center: Center point ``x_beta^k``
        members: Sorted point indices
        parent: Index of the parent cube in generation ``k - 1`` (None on the coarsest)
    """

    k: int
    index: int
    center: int
    members: np.ndarray
    parent: Optional[int] = None

    @property
    def size(self) -> int:
        return int(self.members.size)


def set_diameter(space: MetricMeasureSpace, members: np.ndarray) -> float:
    """Diameter of a point set (0 for singletons and the empty set)."""
    if members.size <= 1:
        return 0.0
    return float(space.dist[np.ix_(members, members)].max())


@dataclass(frozen=True, eq=False)
class DyadicCubeSystem:
    """
    Nested partitions of a space, one per generation ``k_min .. k_max``.

    Attributes:
        space: The space
        delta: Scale ratio between generations
        k_min: Coarsest generation
        generations: Cubes per generation, coarsest first
        c0: Separation constant of the center nets
        C0: Covering constant of the center nets
    """

    space: MetricMeasureSpace
    delta: float
    k_min: int
    generations: Tuple[Tuple[DyadicCube, ...], ...]
    c0: float = C0_NET
    C0: float = C0_COVER

    @property
    def k_max(self) -> int:
        return self.k_min + len(self.generations) - 1

    def scale(self, k: int) -> float:
        return self.delta**k

    def cubes(self, k: int) -> Tuple[DyadicCube, ...]:
        if not self.k_min <= k <= self.k_max:
            raise InputError(f"Generation {k} outside [{self.k_min}, {self.k_max}]")
        return self.generations[k - self.k_min]

    @cached_property
    def masks(self) -> Tuple[np.ndarray, ...]:
        """Per generation, a cubes x points membership matrix."""
        out = []
        for cubes in self.generations:
            mask = np.zeros((len(cubes), self.space.n_points), dtype=bool)
            for cube in cubes:
                mask[cube.index, cube.members] = True
            out.append(mask)
        return tuple(out)

    @cached_property
    def labels(self) -> np.ndarray:
        """``labels[g, x]``: index of the cube of generation ``k_min + g`` holding ``x``."""
        labels = np.full((len(self.generations), self.space.n_points), -1, dtype=int)
        for g, cubes in enumerate(self.generations):
            for cube in cubes:
                labels[g, cube.members] = cube.index
        return labels

    @cached_property
    def max_children(self) -> int:
        counts = [0]
        for g in range(1, len(self.generations)):
            parents = [c.parent for c in self.generations[g] if c.parent is not None]
            counts.append(max(np.bincount(parents).tolist()) if parents else 0)
        return int(max(counts))


def _generation_range(space: MetricMeasureSpace, delta: float) -> Tuple[int, int]:
    """Coarsest k with delta^k >= diam, finest k with 8 C0 delta^k <= min distance."""
    if space.n_points == 1:
        return 0, 0
    k_min = math.floor(math.log(space.diam) / math.log(delta))
    while delta**k_min < space.diam:
        k_min -= 1
    while delta ** (k_min + 1) >= space.diam:
        k_min += 1
    limit = space.min_distance / (WHITNEY_SHELL * C0_COVER)
    k_max = math.ceil(math.log(limit) / math.log(delta))
    while delta**k_max > limit:
        k_max += 1
    while delta ** (k_max - 1) <= limit:
        k_max -= 1
    return k_min, max(k_min, k_max)


def _nearest(space: MetricMeasureSpace, points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index into ``centers`` of the nearest center for each point; ties by smallest index."""
    return np.argmin(space.dist[np.ix_(points, centers)], axis=1)


def build_dyadic_system(
    space: MetricMeasureSpace,
    delta: float = DEFAULT_DELTA,
    k_range: Optional[Tuple[int, int]] = None,
) -> DyadicCubeSystem:
    """
    Build a dyadic cube system coarsest to finest.

    Generation ``k`` is indexed by a greedy net at scale ``delta^k`` that extends the net of
    generation ``k - 1``. Each center adopts the nearest coarser center as parent (ties by
    smallest index); each point joins its nearest finest center, and cubes are the unions
    of descendant assignments.

    Args:
        space: The space
        delta: Scale ratio, at most 1/12
        k_range: ``(k_min, k_max)``; resolved from diam and min distance when None

    Returns:
        DyadicCubeSystem: The built system

    Raises:
        InputError: If delta is out of range or k_range is reversed
    """
    if not 0 < delta <= MAX_DELTA:
        raise InputError(f"delta must be in (0, 1/12] so that 12 C0 delta <= c0, got {delta}")
    k_min, k_max = k_range if k_range is not None else _generation_range(space, delta)
    if k_max < k_min:
        raise InputError(f"k_max ({k_max}) cannot be below k_min ({k_min})")

    nets: List[np.ndarray] = []
    for k in range(k_min, k_max + 1):
        seeds = nets[-1] if nets else None
        nets.append(greedy_net(space, C0_NET * delta**k, seeds=seeds))

    parents: List[Optional[np.ndarray]] = [None]
    for g in range(1, len(nets)):
        parents.append(_nearest(space, nets[g], nets[g - 1]))

    labels = np.empty((len(nets), space.n_points), dtype=int)
    labels[-1] = _nearest(space, np.arange(space.n_points), nets[-1])
    for g in range(len(nets) - 2, -1, -1):
        labels[g] = parents[g + 1][labels[g + 1]]

    generations = []
    for g, centers in enumerate(nets):
        cubes = tuple(
            DyadicCube(
                k=k_min + g,
                index=beta,
                center=int(center),
                members=np.flatnonzero(labels[g] == beta),
                parent=None if parents[g] is None else int(parents[g][beta]),
            )
            for beta, center in enumerate(centers)
        )
        generations.append(cubes)
        logger.debug("Generation %d: %d cubes.", k_min + g, len(cubes))

    system = DyadicCubeSystem(space=space, delta=delta, k_min=k_min, generations=tuple(generations))
    logger.info(
        "Built dyadic system: generations %d..%d, delta %.6g.", k_min, k_max, delta
    )
    return system


def cube_of(system: DyadicCubeSystem, k: int, x: int) -> DyadicCube:
    """The cube of generation ``k`` containing ``x``."""
    g = k - system.k_min
    system.cubes(k)
    return system.generations[g][int(system.labels[g, x])]


def children(system: DyadicCubeSystem, k: int, beta: int) -> List[DyadicCube]:
    """Cubes of generation ``k + 1`` whose parent is ``Q_beta^k``."""
    if k >= system.k_max:
        return []
    return [c for c in system.cubes(k + 1) if c.parent == beta]


# --- Verification ---

PropertyFn = Callable[[DyadicCubeSystem], PropertyCheck]


def _check_partition(system: DyadicCubeSystem) -> PropertyCheck:
    for g, mask in enumerate(system.masks):
        counts = mask.sum(axis=0)
        bad = np.flatnonzero(counts != 1)
        if bad.size:
            x = int(bad[0])
            return PropertyCheck(
                name="partition",
                passed=False,
                detail=f"point {x} lies in {int(counts[x])} cubes of generation "
                f"{system.k_min + g}",
                witness={"k": system.k_min + g, "point": x, "count": int(counts[x])},
            )
        empty = np.flatnonzero(mask.sum(axis=1) == 0)
        if empty.size:
            return PropertyCheck(
                name="partition",
                passed=False,
                detail="empty cube",
                witness={"k": system.k_min + g, "cube": int(empty[0])},
            )
    return PropertyCheck(name="partition", passed=True)


def _intersections(system: DyadicCubeSystem, fine: int, coarse: int) -> np.ndarray:
    """``out[a, b] = |Q_a^fine ∩ Q_b^coarse|``."""
    return system.masks[fine].astype(np.int64) @ system.masks[coarse].T.astype(np.int64)


def _check_nesting(system: DyadicCubeSystem) -> PropertyCheck:
    for fine in range(len(system.generations)):
        sizes = system.masks[fine].sum(axis=1)
        for coarse in range(fine):
            inter = _intersections(system, fine, coarse)
            split = np.argwhere((inter > 0) & (inter < sizes[:, None]))
            if split.size:
                a, b = (int(v) for v in split[0])
                return PropertyCheck(
                    name="nesting",
                    passed=False,
                    detail="a finer cube meets a coarser cube without being contained in it",
                    witness={
                        "l": system.k_min + fine,
                        "cube_l": a,
                        "k": system.k_min + coarse,
                        "cube_k": b,
                    },
                )
    return PropertyCheck(name="nesting", passed=True)


def _check_unique_ancestor(system: DyadicCubeSystem) -> PropertyCheck:
    for fine in range(len(system.generations)):
        sizes = system.masks[fine].sum(axis=1)
        for coarse in range(fine + 1):
            inter = _intersections(system, fine, coarse)
            holders = (inter == sizes[:, None]).sum(axis=1)
            bad = np.flatnonzero(holders != 1)
            if bad.size:
                a = int(bad[0])
                return PropertyCheck(
                    name="unique_ancestor",
                    passed=False,
                    detail=f"{int(holders[a])} cubes of generation {system.k_min + coarse} "
                    "contain the cube",
                    witness={"k": system.k_min + fine, "cube": a, "l": system.k_min + coarse},
                )
    return PropertyCheck(name="unique_ancestor", passed=True)


def _check_children(system: DyadicCubeSystem) -> PropertyCheck:
    for coarse in range(len(system.generations) - 1):
        fine = coarse + 1
        sizes = system.masks[fine].sum(axis=1)
        contained = _intersections(system, fine, coarse) == sizes[:, None]
        for beta, cube in enumerate(system.generations[coarse]):
            kids = np.flatnonzero(contained[:, beta])
            union = system.masks[fine][kids].any(axis=0)
            if kids.size == 0 or not np.array_equal(union, system.masks[coarse][beta]):
                return PropertyCheck(
                    name="children",
                    passed=False,
                    detail=f"cube has {kids.size} children whose union differs from it",
                    witness={"k": cube.k, "cube": beta},
                )
    return PropertyCheck(
        name="children", passed=True, detail=f"max children {system.max_children}"
    )


def _check_containment(system: DyadicCubeSystem) -> PropertyCheck:
    dist = system.space.dist
    for g, cubes in enumerate(system.generations):
        k = system.k_min + g
        inner, outer = system.c0 * system.scale(k) / 3.0, 2.0 * system.C0 * system.scale(k)
        for cube in cubes:
            row = system.masks[g][cube.index]
            if not row[cube.center]:
                return PropertyCheck(
                    name="containment",
                    passed=False,
                    detail="center outside its cube",
                    witness={"k": k, "cube": cube.index, "point": cube.center},
                )
            missing = np.flatnonzero((dist[cube.center] < inner) & ~row)
            outside = np.flatnonzero(row & (dist[cube.center] >= outer))
            if missing.size or outside.size:
                x = int(missing[0]) if missing.size else int(outside[0])
                return PropertyCheck(
                    name="containment",
                    passed=False,
                    detail="inner ball not contained" if missing.size else "cube leaves B(Q)",
                    witness={"k": k, "cube": cube.index, "point": x},
                )
    return PropertyCheck(name="containment", passed=True)


def _check_ball_nesting(system: DyadicCubeSystem) -> PropertyCheck:
    dist = system.space.dist
    for fine in range(1, len(system.generations)):
        sizes = system.masks[fine].sum(axis=1)
        r_fine = 2.0 * system.C0 * system.scale(system.k_min + fine)
        for coarse in range(fine):
            r_coarse = 2.0 * system.C0 * system.scale(system.k_min + coarse)
            contained = np.argwhere(_intersections(system, fine, coarse) == sizes[:, None])
            for a, b in contained:
                child = system.generations[fine][a].center
                parent = system.generations[coarse][b].center
                escaped = np.flatnonzero((dist[child] < r_fine) & (dist[parent] >= r_coarse))
                if escaped.size:
                    return PropertyCheck(
                        name="ball_nesting",
                        passed=False,
                        detail="B(Q_child) not inside B(Q_parent)",
                        witness={
                            "l": system.k_min + fine,
                            "cube_l": int(a),
                            "k": system.k_min + coarse,
                            "cube_k": int(b),
                            "point": int(escaped[0]),
                        },
                    )
    return PropertyCheck(name="ball_nesting", passed=True)


# Strategy registry: property name -> check, in the order they are reported
DYADIC_CHECKS: Dict[str, PropertyFn] = {
    "partition": _check_partition,
    "nesting": _check_nesting,
    "unique_ancestor": _check_unique_ancestor,
    "children": _check_children,
    "containment": _check_containment,
    "ball_nesting": _check_ball_nesting,
}


def verify_dyadic(system: DyadicCubeSystem, threads: Optional[int] = None) -> DyadicReport:
    """
    Check the six dyadic cube axioms.

    Partition of every generation; nesting across generations; a unique ancestor in every
    coarser generation; 1 <= children and their union is the parent; the center ball
    ``B(x, c0 delta^k / 3)`` inside the cube inside ``B(x, 2 C0 delta^k)``; and
    ``B(Q_child)`` inside ``B(Q_parent)`` for every contained pair.

    Args:
        system: System to verify
        threads: Worker cap (None resolves from the environment)

    Returns:
        DyadicReport: Per-property results with witnesses
    """
    checks = parallel_map(lambda fn: fn(system), list(DYADIC_CHECKS.values()), threads)
    return DyadicReport(
        delta=system.delta,
        c0=system.c0,
        C0=system.C0,
        k_min=system.k_min,
        k_max=system.k_max,
        max_children=system.max_children,
        cube_counts=[len(cubes) for cubes in system.generations],
        properties=checks,
        passed=all(c.passed for c in checks),
    )


def system_to_document(system: DyadicCubeSystem) -> DyadicSystemDocument:
    return DyadicSystemDocument(
        version=__version__,
        space_hash=system.space.space_hash,
        delta=system.delta,
        c0=system.c0,
        C0=system.C0,
        generations=[
            DyadicGenerationDocument(
                k=system.k_min + g,
                cubes=[
                    DyadicCubeDocument(
                        center=c.center, members=c.members.tolist(), parent=c.parent
                    )
                    for c in cubes
                ],
            )
            for g, cubes in enumerate(system.generations)
        ],
    )


def system_from_document(
    space: MetricMeasureSpace, document: DyadicSystemDocument
) -> DyadicCubeSystem:
    """
    Rebuild a system from its document without re-deriving it, so it can be verified.

    Raises:
        InputError: If the document belongs to another space or has no generations
    """
    if document.space_hash != space.space_hash:
        raise InputError("Dyadic system document was built for a different space")
    if not document.generations:
        raise InputError("Dyadic system document has no generations")
    ks = [gen.k for gen in document.generations]
    if ks != list(range(ks[0], ks[0] + len(ks))):
        raise InputError(f"Generations must be consecutive, got {ks}")
    generations = tuple(
        tuple(
            DyadicCube(
                k=gen.k,
                index=beta,
                center=cube.center,
                members=np.array(sorted(cube.members), dtype=int),
                parent=cube.parent,
            )
            for beta, cube in enumerate(gen.cubes)
        )
        for gen in document.generations
    )
    return DyadicCubeSystem(
        space=space,
        delta=document.delta,
        k_min=ks[0],
        generations=generations,
        c0=document.c0,
        C0=document.C0,
    )


# --- Whitney covers ---


@dataclass(frozen=True, eq=False)
class WhitneyCube:
    """
    A selected Whitney cube.

    Attributes:
        k: Generation of the cube
        index: Cube index within its generation
        members: Points of the cube (intersected with the open set when repaired)
        shell: Largest shell generation among the points that selected it
        repaired: Whether the cube was cut down to the open set
    """

    k: int
    index: int
    members: np.ndarray
    shell: int
    repaired: bool = False


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    """Whitney cubes of an open set, ordered by (generation, index)."""

    system: DyadicCubeSystem
    omega: np.ndarray
    cubes: Tuple[WhitneyCube, ...]
    mode: WhitneyMode

    @property
    def repaired(self) -> int:
        return sum(1 for c in self.cubes if c.repaired)

    def cube_index(self) -> np.ndarray:
        """``out[x]``: position in ``cubes`` of the cube holding ``x``, -1 outside."""
        out = np.full(self.system.space.n_points, -1, dtype=int)
        for i, cube in enumerate(self.cubes):
            out[cube.members] = i
        return out


def _shell(system: DyadicCubeSystem, distance: float) -> int:
    """Smallest k with 8 C0 delta^k <= distance, clamped to the system's generations."""
    k = system.k_min
    while k < system.k_max and WHITNEY_SHELL * system.C0 * system.scale(k) > distance:
        k += 1
    return k


def whitney_cover(
    system: DyadicCubeSystem,
    omega: np.ndarray,
    mode: WhitneyMode = WhitneyMode.STRICT,
) -> WhitneyCover:
    """
    Dyadic Whitney cover of a proper nonempty subset.

    Points are sorted into shells ``8 C0 delta^k <= d(x, Omega^c) < 8 C0 delta^(k-1)``; the
    cube of generation ``k`` holding ``x`` is a candidate and the maximal candidates are kept.
    In strict mode a candidate that leaves ``Omega`` is replaced by finer cubes holding ``x``
    until it does not; at the finest generation, or in repair mode, it is intersected with
    ``Omega`` and flagged.

    Args:
        system: Dyadic system of the space
        omega: Boolean mask of the open set
        mode: Strict descent or repair

    Returns:
        WhitneyCover: Disjoint cubes whose union is ``Omega``

    Raises:
        InputError: If omega is empty or the whole space
    """
    space = system.space
    omega = np.asarray(omega, dtype=bool)
    if omega.shape != (space.n_points,):
        raise InputError(f"omega must be a mask of {space.n_points} points")
    if not omega.any():
        raise InputError("Whitney cover needs a nonempty set")
    if omega.all():
        raise InputError("Whitney cover needs a set with nonempty complement")

    to_complement = distance_to_set(space, ~omega)
    candidates: Dict[Tuple[int, int], int] = {}
    for x in np.flatnonzero(omega):
        shell = _shell(system, float(to_complement[x]))
        k = shell
        cube = cube_of(system, k, int(x))
        if mode == WhitneyMode.STRICT:
            while not omega[cube.members].all() and k < system.k_max:
                k += 1
                cube = cube_of(system, k, int(x))
        key = (k, cube.index)
        candidates[key] = max(candidates.get(key, shell), shell)

    kept = []
    for (k, beta), shell in sorted(candidates.items()):
        center = system.cubes(k)[beta].center
        covered = any(
            (j, int(system.labels[j - system.k_min, center])) in candidates
            for j in range(system.k_min, k)
        )
        if covered:
            continue
        members = system.cubes(k)[beta].members
        inside = omega[members]
        repaired = not inside.all()
        if repaired:
            members = members[inside]
            logger.warning("Whitney cube (%d, %d) straddles the boundary; repaired.", k, beta)
        kept.append(WhitneyCube(k=k, index=beta, members=members, shell=shell, repaired=repaired))

    logger.debug("Whitney cover of %d points: %d cubes.", int(omega.sum()), len(kept))
    return WhitneyCover(system=system, omega=omega, cubes=tuple(kept), mode=mode)


def verify_whitney(cover: WhitneyCover) -> WhitneyReport:
    """
    Check a Whitney cover.

    (i) cubes are pairwise disjoint; (ii) their union is the open set; (iii) the lower bound
    ``diam Q <= d(Q, Omega^c)`` together with the shell bound
    ``d(Q, Omega^c) < 8 C0 delta^(shell - 1)``. The diameter form
    ``d(Q, Omega^c) <= delta^-2 diam Q`` is measured; singletons count as degenerate.

    Args:
        cover: Cover to verify

    Returns:
        WhitneyReport: Results with witnesses
    """
    system = cover.system
    space = system.space
    n = space.n_points
    checks: List[PropertyCheck] = []

    counts = np.zeros(n, dtype=int)
    owner = np.full(n, -1, dtype=int)
    overlap: Optional[Dict[str, float]] = None
    for i, cube in enumerate(cover.cubes):
        hit = cube.members[owner[cube.members] >= 0]
        if hit.size and overlap is None:
            overlap = {"cube_a": int(owner[hit[0]]), "cube_b": i, "point": int(hit[0])}
        owner[cube.members] = i
        counts[cube.members] += 1
    checks.append(
        PropertyCheck(name="disjoint", passed=overlap is None, witness=overlap)
    )

    union = counts > 0
    diff = np.flatnonzero(union != cover.omega)
    checks.append(
        PropertyCheck(
            name="union",
            passed=diff.size == 0,
            witness=None if diff.size == 0 else {"point": int(diff[0])},
            detail="" if diff.size == 0 else "union differs from the open set",
        )
    )

    to_complement = distance_to_set(space, ~cover.omega)
    lower_fail: Optional[Dict[str, float]] = None
    upper_fail: Optional[Dict[str, float]] = None
    min_slack, max_ratio, degenerate = None, None, 0
    for i, cube in enumerate(cover.cubes):
        if cube.members.size == 0:
            continue
        diam = set_diameter(space, cube.members)
        gap = float(to_complement[cube.members].min())
        upper = WHITNEY_SHELL * system.C0 * system.scale(cube.shell - 1)
        if diam > gap and lower_fail is None:
            lower_fail = {"cube": i, "diam": diam, "distance": gap}
        if not gap < upper and upper_fail is None:
            upper_fail = {"cube": i, "distance": gap, "bound": upper}
        slack = (upper - gap) / upper
        min_slack = slack if min_slack is None else min(min_slack, slack)
        if diam == 0:
            degenerate += 1
        else:
            ratio = gap / diam
            max_ratio = ratio if max_ratio is None else max(max_ratio, ratio)
    checks.append(
        PropertyCheck(
            name="whitney_bounds",
            passed=lower_fail is None and upper_fail is None,
            degenerate=degenerate > 0,
            witness=lower_fail or upper_fail,
            detail=""
            if lower_fail is None and upper_fail is None
            else ("diam(Q) > d(Q, complement)" if lower_fail else "shell bound exceeded"),
        )
    )
    diameter_form = max_ratio is None or max_ratio <= system.delta**-2
    checks.append(
        PropertyCheck(
            name="diameter_form",
            passed=True,
            degenerate=degenerate > 0,
            detail=f"max d(Q, complement)/diam(Q) = {max_ratio!r}; "
            f"within delta^-2: {diameter_form}; singletons: {degenerate}",
        )
    )
    return WhitneyReport(
        mode=cover.mode,
        cubes=len(cover.cubes),
        repaired=cover.repaired,
        degenerate=degenerate,
        min_upper_slack=min_slack,
        max_diameter_ratio=max_ratio,
        properties=checks,
        passed=all(c.passed for c in checks),
    )
