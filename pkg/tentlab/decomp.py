"""Atomic decomposition of weighted tent spaces, reconstruction and coefficient reports."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from tentlab import __version__
from tentlab.concurrency import parallel_map
from tentlab.config import DecompositionConfig
from tentlab.dyadic import (
    DyadicCubeSystem,
    WhitneyCover,
    WhitneyCube,
    build_dyadic_system,
    set_diameter,
    whitney_cover,
)
from tentlab.errors import DecompositionError, InputError
from tentlab.models import (
    CoefficientReport,
    DecompositionDocument,
    DecompositionEntryDocument,
    DecompositionMode,
    LevelReport,
)
from tentlab.space import Ball, MetricMeasureSpace, read_text, weight_values
from tentlab.tent import (
    TentFunction,
    TGrid,
    UpperHalfSpaceRegion,
    area_functional,
    density_sets,
    l2_norm,
    tent_norm,
    tent_of_ball,
    tent_over,
    validate_q_atom,
)

logger = logging.getLogger(__name__)

UNIT_WEIGHT_HASH = "unit"
_RECONSTRUCTION_TOL = 1e-12
_CONVERSE_TOL = 1e-9
_MAX_REPORTED_SAMPLES = 10


@dataclass(frozen=True, eq=False)
class LevelSet:
    """
    One level of the area functional.

    Attributes:
        k: Level index
        omega: ``{A(F) > 2^k / kappa}``
        omega_star: Points of global gamma-density of ``omega``
    """

    k: int
    omega: np.ndarray
    omega_star: np.ndarray


@dataclass(frozen=True, eq=False)
class DecompositionEntry:
    """
    One term ``lambda a`` of a decomposition.

    Attributes:
        level: Level k
        index: Position of the Whitney cube within the level
        generation: Dyadic generation of the cube
        cube: Dyadic index of the cube
        center: Center of the ball
        radius: Radius of the ball
        coefficient: lambda, positive
        region: Samples owned by this term
        atom: ``F chi_region / lambda``
        radius_extended: Whether the radius was grown past ``C1 diam Q``
    """

    level: int
    index: int
    generation: int
    cube: int
    center: int
    radius: float
    coefficient: float
    region: UpperHalfSpaceRegion
    atom: TentFunction
    radius_extended: bool = False

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.radius)


@dataclass(frozen=True, eq=False)
class AtomicDecomposition:
    """A finite atomic decomposition with its parameters and provenance."""

    space: MetricMeasureSpace
    grid: TGrid
    entries: Tuple[DecompositionEntry, ...]
    p: float
    q: float
    gamma: float
    kappa: float
    c1: float
    delta: float
    mode: DecompositionMode
    weight: Optional[object] = None
    seed: Optional[int] = None
    levels: Tuple[LevelReport, ...] = ()

    @property
    def weight_hash(self) -> str:
        return weight_hash_of(self.weight)

    @property
    def lambda_p_sum(self) -> float:
        return float(sum(e.coefficient**self.p for e in self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def weight_hash_of(w) -> str:
    if w is None:
        return UNIT_WEIGHT_HASH
    return getattr(w, "weight_hash", UNIT_WEIGHT_HASH)


def _level_range(area: np.ndarray, kappa: float) -> Tuple[int, int]:
    positive = area[area > 0]
    low = math.floor(math.log2(kappa * float(positive.min()))) - 1
    high = math.ceil(math.log2(kappa * float(positive.max())))
    return low, high


def level_sets(
    space: MetricMeasureSpace,
    grid: TGrid,
    F: TentFunction,
    kappa: float = 1.0,
    gamma: float = 0.5,
) -> List[LevelSet]:
    """
    Level sets ``Omega_k = {A(F) > 2^k / kappa}`` and their density envelopes.

    ``k`` runs over the levels where ``Omega_k`` is nonempty, from the first level equal to
    the support of ``A(F)``.

    Args:
        space: The space
        grid: The t-grid of F
        F: Tent function
        kappa: Threshold scale, kappa > 0
        gamma: Density parameter

    Returns:
        List[LevelSet]: Increasing in k; empty when F is zero

    Raises:
        InputError: If kappa is not positive
    """
    if kappa <= 0:
        raise InputError(f"kappa must be > 0, got {kappa}")
    area = area_functional(space, grid, F)
    if not np.any(area > 0):
        return []
    low, high = _level_range(area, kappa)
    levels = []
    for k in range(low, high + 1):
        omega = area > 2.0**k / kappa
        if not omega.any():
            break
        _, omega_star, _ = density_sets(space, gamma, ~omega)
        levels.append(LevelSet(k=k, omega=omega, omega_star=omega_star))
    return levels


def _cover(system: DyadicCubeSystem, omega_star: np.ndarray, config: DecompositionConfig):
    if omega_star.all():
        top = system.cubes(system.k_min)
        cubes = tuple(
            WhitneyCube(k=system.k_min, index=c.index, members=c.members, shell=system.k_min)
            for c in top
        )
        return WhitneyCover(system=system, omega=omega_star, cubes=cubes, mode=config.whitney_mode)
    return whitney_cover(system, omega_star, config.whitney_mode)


def _required_radius(
    space: MetricMeasureSpace, grid: TGrid, center: int, samples: np.ndarray
) -> float:
    """Largest ``d(center, z)`` over ``d(y, z) < t`` for the samples ``(y, m)``."""
    required = 0.0
    for m in np.unique(samples[:, 1]):
        ys = samples[samples[:, 1] == m, 0]
        near = space.dist[ys] < grid.samples[m]
        reach = np.where(near, space.dist[center][None, :], 0.0).max()
        required = max(required, float(reach))
    return required


def _radius_above(space: MetricMeasureSpace, center: int, required: float) -> float:
    distances = space.sorted_dist[center]
    above = distances[distances > required]
    return float(above[0]) if above.size else required + space.nearest_distance(center)


def decompose(
    space: MetricMeasureSpace,
    grid: TGrid,
    F: TentFunction,
    w=None,
    config: Optional[DecompositionConfig] = None,
    system: Optional[DyadicCubeSystem] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> AtomicDecomposition:
    """
    Decompose a tent function into q-atoms.

    Each nonzero sample ``(y, t)`` goes to the largest level ``k`` whose hat
    ``T_{1/2}(Omega_k*)`` holds it and to the Whitney cube of ``Omega_k*`` holding ``y``.
    The ball of a cube has radius ``C1 diam Q`` (at least the minimum distance); when a
    sample still falls outside its tent the radius grows to the smallest one that holds it,
    which is only allowed at the default dilation or above. Faithful coefficients are
    ``2^k w(B)^(1/p)``; strict coefficients are ``||F chi||_{T^q_{2,w}} w(B)^(1/p - 1/q)``
    so every atom meets the size condition with equality. Terms without support are
    dropped.

    Args:
        space: The space
        grid: The t-grid of F
        F: Tent function
        w: Weight (None for w = 1)
        config: Decomposition parameters (default: DecompositionConfig())
        system: Dyadic system (built from ``config.delta`` when None)
        seed: Recorded in the provenance
        threads: Worker cap for the per-level work

    Returns:
        AtomicDecomposition: Terms ordered by (level, cube position)

    Raises:
        DecompositionError: If a sample lies in no hat, or in no tent with a reduced
            dilation
    """
    config = config or DecompositionConfig()
    weights = weight_values(space, w)
    c1 = config.resolved_c1
    levels = level_sets(space, grid, F, config.kappa, config.gamma)
    result = dict(
        space=space,
        grid=grid,
        p=config.p,
        q=config.q,
        gamma=config.gamma,
        kappa=config.kappa,
        c1=c1,
        delta=config.delta,
        mode=config.mode,
        weight=w,
        seed=seed,
    )
    if not levels:
        logger.info("Zero tent function; empty decomposition.")
        return AtomicDecomposition(entries=(), **result)

    if system is None:
        system = build_dyadic_system(space, config.delta)

    def prepare(level: LevelSet):
        hat = tent_over(space, grid, level.omega_star, alpha=0.5).mask
        return hat, _cover(system, level.omega_star, config)

    prepared = parallel_map(prepare, levels, threads)

    support = F.values != 0
    owner = np.full(support.shape, -1, dtype=int)
    for g, (hat, _) in enumerate(prepared):
        owner[hat] = g
    stray = np.argwhere(support & (owner < 0))
    if stray.size:
        samples = [(int(i), int(m)) for i, m in stray[:_MAX_REPORTED_SAMPLES]]
        raise DecompositionError(
            f"{len(stray)} samples of F lie outside every hat; check the grid and kappa",
            samples=samples,
        )

    density = weights * space.mass
    entries: List[DecompositionEntry] = []
    level_reports: List[LevelReport] = []
    for g, (level, (hat, cover)) in enumerate(zip(levels, prepared)):
        next_hat = prepared[g + 1][0] if g + 1 < len(prepared) else np.zeros_like(hat)
        band = hat & ~next_hat
        position = cover.cube_index()
        level_entries = []
        for j, cube in enumerate(cover.cubes):
            rows = position == j
            mine = np.argwhere(support & (owner == g) & rows[:, None])
            if mine.size == 0:
                continue
            center = system.cubes(cube.k)[cube.index].center
            diam = set_diameter(space, cube.members)
            radius = max(c1 * diam, space.nearest_distance(center))
            required = _required_radius(space, grid, center, mine)
            extended = not radius > required
            if extended:
                if not config.allows_radius_extension:
                    raise DecompositionError(
                        f"C1 = {c1:g} leaves samples of level {level.k} outside the tent of "
                        f"their ball",
                        samples=[(int(i), int(m)) for i, m in mine[:_MAX_REPORTED_SAMPLES]],
                    )
                radius = _radius_above(space, center, required)
                logger.debug(
                    "Level %d cube %d: radius extended to %.6g.", level.k, j, radius
                )
            ball_ = Ball(center, radius)
            region = tent_of_ball(space, grid, ball_).mask & rows[:, None] & band
            piece = np.where(region, F.values, 0)
            w_ball = float(density[ball_.mask(space)].sum())
            if config.mode == DecompositionMode.FAITHFUL:
                coefficient = 2.0**level.k * w_ball ** (1.0 / config.p)
            else:
                norm = tent_norm(space, grid, TentFunction(grid, piece), config.q, weights)
                coefficient = norm * w_ball ** (1.0 / config.p - 1.0 / config.q)
            if coefficient == 0:
                continue
            level_entries.append(
                DecompositionEntry(
                    level=level.k,
                    index=j,
                    generation=cube.k,
                    cube=cube.index,
                    center=center,
                    radius=radius,
                    coefficient=coefficient,
                    region=UpperHalfSpaceRegion(region),
                    atom=TentFunction(grid, piece / coefficient),
                    radius_extended=extended,
                )
            )
        w_omega = float(density[level.omega].sum())
        level_reports.append(
            LevelReport(
                k=level.k,
                omega_size=int(level.omega.sum()),
                omega_star_size=int(level.omega_star.sum()),
                weight_ratio=float(density[level.omega_star].sum()) / w_omega,
                cubes=len(cover.cubes),
                atoms=len(level_entries),
                lambda_p_sum=float(sum(e.coefficient**config.p for e in level_entries)),
            )
        )
        entries.extend(level_entries)

    logger.info(
        "Decomposed into %d atoms over %d levels (%s mode).",
        len(entries),
        len(levels),
        config.mode,
    )
    return AtomicDecomposition(entries=tuple(entries), levels=tuple(level_reports), **result)


def reconstruct(decomposition: AtomicDecomposition) -> TentFunction:
    """``sum lambda a`` over the terms of a decomposition."""
    grid = decomposition.grid
    total = np.zeros((decomposition.space.n_points, grid.count))
    for entry in decomposition.entries:
        if np.iscomplexobj(entry.atom.values) and not np.iscomplexobj(total):
            total = total.astype(complex)
        total = total + entry.coefficient * entry.atom.values
    return TentFunction(grid, total)


def coefficient_report(
    decomposition: AtomicDecomposition, F: TentFunction, check_atoms: bool = True
) -> CoefficientReport:
    """
    Measured constants of a decomposition of ``F``.

    Reports ``sum lambda^p`` against ``||F||^p_{T^p_{2,w}}``, the converse bound
    ``||sum lambda a||^p <= sum lambda^p`` (constant 1 for size-saturated atoms),
    per-atom relative slack ``(bound - norm) / bound`` and the reconstruction error in the
    sup, ``T^2_2`` and ``T^p_{2,w}`` norms.

    Args:
        decomposition: The decomposition
        F: The decomposed tent function
        check_atoms: Run the per-atom q-atom validation

    Returns:
        CoefficientReport: Measurements; ``passed`` requires exact reconstruction, the
            converse bound and, in strict mode, no atom violations
    """
    space, grid, w = decomposition.space, decomposition.grid, decomposition.weight
    p, q = decomposition.p, decomposition.q
    rebuilt = reconstruct(decomposition)
    difference = TentFunction(grid, rebuilt.values - F.values)
    lambda_p_sum = decomposition.lambda_p_sum
    tent_norm_p = tent_norm(space, grid, F, p, w) ** p
    converse_norm_p = tent_norm(space, grid, rebuilt, p, w) ** p

    violations = 0
    slacks: List[float] = []
    if check_atoms:
        for entry in decomposition.entries:
            report = validate_q_atom(space, grid, entry.atom, entry.ball, p, q, w)
            check = report.norms[0]
            slacks.append(check.slack / check.bound if check.bound > 0 else 0.0)
            if not report.passed:
                violations += 1

    scale = float(np.abs(F.values).max()) if F.values.size else 0.0
    max_error = float(np.abs(difference.values).max()) if F.values.size else 0.0
    converse_ok = converse_norm_p <= lambda_p_sum * (1 + _CONVERSE_TOL) + _CONVERSE_TOL
    exact = max_error <= _RECONSTRUCTION_TOL * max(scale, 1e-300)
    strict = decomposition.mode == DecompositionMode.STRICT
    passed = exact and (not strict or (converse_ok and violations == 0))
    if not passed:
        logger.warning(
            "Decomposition check failed: error %.3g, converse %s, %d atom violations.",
            max_error,
            converse_ok,
            violations,
        )
    return CoefficientReport(
        version=__version__,
        space_hash=space.space_hash,
        mode=decomposition.mode,
        atoms=len(decomposition.entries),
        radius_extended=sum(1 for e in decomposition.entries if e.radius_extended),
        lambda_p_sum=lambda_p_sum,
        tent_norm_p=tent_norm_p,
        ratio=lambda_p_sum / tent_norm_p if tent_norm_p > 0 else None,
        converse_norm_p=converse_norm_p,
        converse_ok=converse_ok,
        atom_violations=violations,
        max_relative_slack=max(slacks) if slacks else None,
        min_relative_slack=min(slacks) if slacks else None,
        reconstruction_max_error=max_error,
        reconstruction_t22_error=l2_norm(space, grid, difference),
        reconstruction_tp_error=tent_norm(space, grid, difference, p, w),
        levels=list(decomposition.levels),
        passed=passed,
    )


# --- Documents ---


def decomposition_to_document(decomposition: AtomicDecomposition) -> DecompositionDocument:
    entries = []
    for e in decomposition.entries:
        samples = e.region.samples()
        values = np.array([e.atom.values[i, m] for i, m in samples])
        complex_atom = np.iscomplexobj(values)
        entries.append(
            DecompositionEntryDocument(
                level=e.level,
                index=e.index,
                generation=e.generation,
                cube=e.cube,
                center=e.center,
                radius=e.radius,
                coefficient=e.coefficient,
                radius_extended=e.radius_extended,
                region=samples,
                atom=(values.real if complex_atom else values).tolist(),
                atom_imag=values.imag.tolist() if complex_atom else None,
            )
        )
    return DecompositionDocument(
        version=__version__,
        space_hash=decomposition.space.space_hash,
        weight_hash=decomposition.weight_hash,
        grid=decomposition.grid.to_document(),
        n_points=decomposition.space.n_points,
        p=decomposition.p,
        q=decomposition.q,
        gamma=decomposition.gamma,
        kappa=decomposition.kappa,
        c1=decomposition.c1,
        delta=decomposition.delta,
        mode=decomposition.mode,
        seed=decomposition.seed,
        entries=entries,
    )


def load_decomposition(
    source: Union[DecompositionDocument, str, Path], space: MetricMeasureSpace, w=None
) -> AtomicDecomposition:
    """
    Rebuild a decomposition from its document.

    Raises:
        InputError: On a malformed document or a space/weight hash mismatch
    """
    if isinstance(source, DecompositionDocument):
        document = source
    else:
        try:
            document = DecompositionDocument.model_validate_json(read_text(source))
        except ValidationError as e:
            raise InputError(f"Invalid decomposition document: {e}") from e
    if document.space_hash != space.space_hash:
        raise InputError("Decomposition was built on a different space")
    if document.weight_hash != weight_hash_of(w):
        raise InputError("Decomposition was built with a different weight")
    grid = TGrid.from_document(document.grid)
    shape = (space.n_points, grid.count)
    entries = []
    for e in document.entries:
        region = np.zeros(shape, dtype=bool)
        values = np.asarray(e.atom, dtype=float)
        if e.atom_imag is not None:
            values = values + 1j * np.asarray(e.atom_imag, dtype=float)
        atom = np.zeros(shape, dtype=values.dtype)
        if e.region:
            rows, cols = np.asarray(e.region, dtype=int).T
            region[rows, cols] = True
            atom[rows, cols] = values
        entries.append(
            DecompositionEntry(
                level=e.level,
                index=e.index,
                generation=e.generation,
                cube=e.cube,
                center=e.center,
                radius=e.radius,
                coefficient=e.coefficient,
                region=UpperHalfSpaceRegion(region),
                atom=TentFunction(grid, atom),
                radius_extended=e.radius_extended,
            )
        )
    return AtomicDecomposition(
        space=space,
        grid=grid,
        entries=tuple(entries),
        p=document.p,
        q=document.q,
        gamma=document.gamma,
        kappa=document.kappa,
        c1=document.c1,
        delta=document.delta,
        mode=document.mode,
        weight=w,
        seed=document.seed,
    )
