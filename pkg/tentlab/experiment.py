"""Batch experiments: one config, a fixed stage order, atomic artifacts."""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from tentlab import __version__
from tentlab.config import DecompositionConfig, GridConfig, HardyConfig
from tentlab.decomp import coefficient_report, decompose, decomposition_to_document
from tentlab.dyadic import DyadicCubeSystem, build_dyadic_system, verify_dyadic
from tentlab.errors import InputError, InvariantViolation
from tentlab.hardy import hardy_atoms_to_document, hardy_decompose, heat_tent_function
from tentlab.models import (
    CoefficientReport,
    DoublingReport,
    DyadicReport,
    ExperimentConfig,
    ExperimentReport,
    HardyReport,
    PipelineStage,
    PlotKind,
    PlotSeries,
    SpaceDocument,
    TentSourceKind,
    WeightLemmaReport,
)
from tentlab.plots import (
    area_profile_series,
    calderon_series,
    constant_sweep_series,
    emit_plot_data,
    lambda_spectrum_series,
    level_atoms_series,
    write_atomic,
)
from tentlab.space import Ball, MetricMeasureSpace, doubling_report, load_space, read_text
from tentlab.spectral import (
    SpectralOperator,
    build_operator,
    calderon_grid,
    load_function,
    load_graph,
    null_complement,
)
from tentlab.tent import (
    TentFunction,
    TGrid,
    area_functional,
    l2_norm,
    load_tent_function,
    saturated_atom,
    tent_norm,
)
from tentlab.weights import (
    WeightFunction,
    generate_weight,
    load_weight,
    unit_weight,
    verify_weight_lemma,
)

logger = logging.getLogger(__name__)

STAGE_ORDER: Tuple[PipelineStage, ...] = tuple(PipelineStage)

# Independent random streams per generator
_TENT_STREAM = 1
_HARDY_STREAM = 2


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate an experiment config.

    Raises:
        InputError: On a missing file or an invalid config
    """
    try:
        return ExperimentConfig.model_validate_json(read_text(path))
    except ValidationError as e:
        raise InputError(f"Invalid experiment config {path}: {e}") from e


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()


@dataclass
class ExperimentContext:
    """Mutable state threaded through the stages of one run."""

    config: ExperimentConfig
    base_dir: Path
    threads: Optional[int] = None
    space: Optional[MetricMeasureSpace] = None
    weight: Optional[WeightFunction] = None
    grid: Optional[TGrid] = None
    tent: Optional[TentFunction] = None
    system: Optional[DyadicCubeSystem] = None
    _operator: Optional[SpectralOperator] = None
    doubling: Optional[DoublingReport] = None
    dyadic: Optional[DyadicReport] = None
    weights: Optional[WeightLemmaReport] = None
    tent_norms: Dict[str, float] = field(default_factory=dict)
    decomposition: Optional[CoefficientReport] = None
    hardy: Optional[HardyReport] = None
    series: Dict[PlotKind, PlotSeries] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def resolve(self, path: str) -> Path:
        candidate = Path(path)
        return candidate if candidate.is_absolute() else self.base_dir / candidate

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.config.outputs.directory)

    @property
    def operator(self) -> SpectralOperator:
        if self._operator is None:
            graph = self.config.graph
            if graph is None:
                raise InputError("This experiment needs a graph")
            source = self.resolve(graph) if isinstance(graph, str) else graph
            self._operator = build_operator(self.space, load_graph(source))
        return self._operator

    def wants(self, kind: PlotKind) -> bool:
        return kind in self.config.outputs.plots

    def decomposition_config(self) -> DecompositionConfig:
        params = self.config.params
        try:
            return DecompositionConfig(
                p=params.p,
                q=params.q,
                gamma=params.gamma,
                kappa=params.kappa,
                delta=params.delta,
                c1=params.c1,
                mode=params.mode,
                whitney_mode=params.whitney_mode,
            )
        except ValueError as e:
            raise InputError(f"Invalid decomposition parameters: {e}") from e

    def hardy_config(self) -> HardyConfig:
        params = self.config.params
        try:
            return HardyConfig(
                p=params.p,
                q=params.q,
                M=params.M,
                nu=params.nu,
                n_exp=params.n_exp,
                dimension=params.dimension,
                mode=params.hardy_mode,
                gamma=params.gamma,
                kappa=params.kappa,
                delta=params.delta,
                c1=params.c1,
            )
        except ValueError as e:
            raise InputError(f"Invalid Hardy parameters: {e}") from e


# --- Sources ---


def _load_inputs(ctx: ExperimentContext) -> None:
    config = ctx.config
    source = config.space
    ctx.space = load_space(source if isinstance(source, SpaceDocument) else ctx.resolve(source))

    ws = config.weight
    if ws is None:
        ctx.weight = None
    elif ws.path is not None:
        ctx.weight = load_weight(ctx.resolve(ws.path), ctx.space)
    elif ws.values is not None:
        ctx.weight = load_weight(ws.values, ctx.space)
    elif ws.kind is not None:
        ctx.weight = generate_weight(ctx.space, ws.kind, ws.params, config.seed)
    else:
        raise InputError("Weight source needs 'path', 'values' or 'kind'")

    grid_params = config.params.grid
    if grid_params.spectral:
        ctx.grid = calderon_grid(ctx.operator, ratio=grid_params.ratio)
    else:
        try:
            grid_config = GridConfig(
                t_min=grid_params.t_min,
                ratio=grid_params.ratio,
                count=grid_params.count,
                t_max=grid_params.t_max,
            )
        except ValueError as e:
            raise InputError(f"Invalid grid parameters: {e}") from e
        ctx.grid = TGrid.from_space(ctx.space, grid_config)
    ctx.tent = _load_tent(ctx)


def _hardy_f(ctx: ExperimentContext) -> np.ndarray:
    if ctx.config.hardy_f is not None:
        return load_function(ctx.resolve(ctx.config.hardy_f), ctx.space)
    rng = np.random.default_rng([ctx.config.seed, _HARDY_STREAM])
    return rng.standard_normal(ctx.space.n_points)


TentGeneratorFn = Callable[["ExperimentContext", Dict[str, float]], TentFunction]


def _tent_zero(ctx: ExperimentContext, params: Dict[str, float]) -> TentFunction:
    return TentFunction.zeros(ctx.space.n_points, ctx.grid)


def _tent_random(ctx: ExperimentContext, params: Dict[str, float]) -> TentFunction:
    rng = np.random.default_rng([ctx.config.seed, _TENT_STREAM])
    shape = (ctx.space.n_points, ctx.grid.count)
    density = params.get("density", 0.5)
    values = rng.standard_normal(shape) * (rng.random(shape) < density)
    return TentFunction(ctx.grid, values * params.get("scale", 1.0))


def _tent_atom(ctx: ExperimentContext, params: Dict[str, float]) -> TentFunction:
    center = int(params.get("center", 0))
    if not 0 <= center < ctx.space.n_points:
        raise InputError(f"Atom center {center} outside the space")
    radius = params.get("radius", ctx.space.diam)
    return saturated_atom(
        ctx.space, ctx.grid, Ball(center, radius), ctx.config.params.p, ctx.config.params.q,
        ctx.weight,
    )


def _tent_hardy(ctx: ExperimentContext, params: Dict[str, float]) -> TentFunction:
    f = null_complement(ctx.operator, _hardy_f(ctx))
    return heat_tent_function(ctx.operator, ctx.grid, f)


# Strategy registry: tent source kind -> generator
TENT_GENERATORS: Dict[TentSourceKind, TentGeneratorFn] = {
    TentSourceKind.ZERO: _tent_zero,
    TentSourceKind.RANDOM: _tent_random,
    TentSourceKind.ATOM: _tent_atom,
    TentSourceKind.HARDY: _tent_hardy,
}


def _load_tent(ctx: ExperimentContext) -> TentFunction:
    source = ctx.config.tent
    if source.path is not None:
        tent = load_tent_function(ctx.resolve(source.path), ctx.space)
        ctx.grid = tent.grid
        return tent
    return TENT_GENERATORS[source.kind](ctx, dict(source.params))


# --- Stages ---


def _stage_space_check(ctx: ExperimentContext) -> None:
    ctx.doubling = doubling_report(ctx.space)


def _stage_dyadic(ctx: ExperimentContext) -> None:
    ctx.system = build_dyadic_system(ctx.space, ctx.config.params.delta)
    ctx.dyadic = verify_dyadic(ctx.system, ctx.threads)
    if not ctx.dyadic.passed:
        failed = [c.name for c in ctx.dyadic.properties if not c.passed]
        ctx.failures.append(f"dyadic: {', '.join(failed)}")


def _stage_weights(ctx: ExperimentContext) -> None:
    params = ctx.config.params
    w = ctx.weight if ctx.weight is not None else unit_weight(ctx.space)
    ctx.weights = verify_weight_lemma(
        ctx.space, w, params.weight_p, params.weight_q, seed=ctx.config.seed or 0
    )
    if not ctx.weights.passed:
        failed = [c.name for c in ctx.weights.properties if not c.passed]
        ctx.failures.append(f"weights: {', '.join(failed)}")
    if ctx.wants(PlotKind.CONSTANT_SWEEP):
        ctx.series[PlotKind.CONSTANT_SWEEP] = constant_sweep_series(ctx.weights.ap_map)


def _stage_tent_norms(ctx: ExperimentContext) -> None:
    params = ctx.config.params
    ctx.tent_norms = {
        "tent_p": tent_norm(ctx.space, ctx.grid, ctx.tent, params.p, ctx.weight),
        "tent_q": tent_norm(ctx.space, ctx.grid, ctx.tent, params.q, ctx.weight),
        "l2": l2_norm(ctx.space, ctx.grid, ctx.tent),
    }


def _stage_decompose(ctx: ExperimentContext) -> None:
    config = ctx.decomposition_config()
    decomposition = decompose(
        ctx.space,
        ctx.grid,
        ctx.tent,
        ctx.weight,
        config,
        system=ctx.system,
        seed=ctx.config.seed,
        threads=ctx.threads,
    )
    ctx.decomposition = coefficient_report(decomposition, ctx.tent)
    document = decomposition_to_document(decomposition)
    write_atomic(
        ctx.output_dir / ctx.config.outputs.decomposition, document.model_dump_json(indent=2)
    )
    if not ctx.decomposition.passed:
        ctx.failures.append("decompose: coefficient report failed")
    if ctx.wants(PlotKind.LEVEL_ATOMS):
        ctx.series[PlotKind.LEVEL_ATOMS] = level_atoms_series(decomposition.levels)
    if ctx.wants(PlotKind.LAMBDA_SPECTRUM):
        ctx.series[PlotKind.LAMBDA_SPECTRUM] = lambda_spectrum_series(decomposition.entries)


def _stage_hardy(ctx: ExperimentContext) -> None:
    config = ctx.hardy_config()
    atoms, ctx.hardy = hardy_decompose(
        ctx.operator,
        ctx.grid,
        _hardy_f(ctx),
        ctx.weight,
        config,
        system=ctx.system,
        threads=ctx.threads,
    )
    document = hardy_atoms_to_document(ctx.operator, atoms, config, ctx.weight)
    write_atomic(
        ctx.output_dir / ctx.config.outputs.hardy_atoms, document.model_dump_json(indent=2)
    )
    if not ctx.hardy.passed:
        ctx.failures.append("hardy: pipeline report failed")
    if ctx.wants(PlotKind.CALDERON_DEFECTS):
        ctx.series[PlotKind.CALDERON_DEFECTS] = calderon_series(ctx.hardy.calderon)


# Strategy registry: pipeline stage -> runner
STAGE_RUNNERS: Dict[PipelineStage, Callable[[ExperimentContext], None]] = {
    PipelineStage.SPACE_CHECK: _stage_space_check,
    PipelineStage.DYADIC: _stage_dyadic,
    PipelineStage.WEIGHTS: _stage_weights,
    PipelineStage.TENT_NORMS: _stage_tent_norms,
    PipelineStage.DECOMPOSE: _stage_decompose,
    PipelineStage.HARDY: _stage_hardy,
}


def run_experiment(
    config: ExperimentConfig, base_dir: Union[str, Path] = ".", threads: Optional[int] = None
) -> Tuple[int, ExperimentReport]:
    """
    Run the declared stages in their canonical order and write every artifact.

    Invariant violations inside a stage are recorded as failures and the remaining stages
    still run; the report is written in every case.

    Args:
        config: Validated experiment config
        base_dir: Directory relative paths resolve against
        threads: Worker cap (default: TENTLAB_THREADS)

    Returns:
        Tuple: ``(exit_status, report)``; 0 iff every hard assertion passed

    Raises:
        InputError: On invalid inputs, before any artifact is written
    """
    ctx = ExperimentContext(config=config, base_dir=Path(base_dir), threads=threads)
    _load_inputs(ctx)
    stages = [stage for stage in STAGE_ORDER if stage in config.stages]
    for stage in stages:
        logger.info("Running stage %s.", stage)
        try:
            STAGE_RUNNERS[stage](ctx)
        except InvariantViolation as e:
            logger.error("Stage %s failed: %s", stage, e.detail)
            ctx.failures.append(f"{stage}: {e.detail}")

    if ctx.wants(PlotKind.AREA_PROFILE):
        ctx.series[PlotKind.AREA_PROFILE] = area_profile_series(
            area_functional(ctx.space, ctx.grid, ctx.tent)
        )
    report = ExperimentReport(
        version=__version__,
        config_hash=config_hash(config),
        space_hash=ctx.space.space_hash,
        stages=stages,
        doubling=ctx.doubling,
        dyadic=ctx.dyadic,
        weights=ctx.weights,
        tent_norms=ctx.tent_norms,
        decomposition=ctx.decomposition,
        hardy=ctx.hardy,
        series=ctx.series,
        failures=ctx.failures,
        passed=not ctx.failures,
    )
    write_atomic(ctx.output_dir / config.outputs.report, report.model_dump_json(indent=2))
    for kind in config.outputs.plots:
        if kind in ctx.series:
            emit_plot_data(ctx.series, kind, ctx.output_dir / f"{kind}.csv")
        else:
            logger.warning("No data for plot %s; skipped.", kind)
    status = 0 if report.passed else 1
    logger.info("Experiment finished with status %d (%d failures).", status, len(ctx.failures))
    return status, report
