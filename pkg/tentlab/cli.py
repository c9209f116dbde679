"""Command line entry point: ``tentlab <command> ...``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

from pydantic import BaseModel

from tentlab.browse import browse_entries, parse_sort
from tentlab.builder import FilterBuilder
from tentlab.config import DEFAULT_DELTA, DEFAULT_RATIO, DecompositionConfig, HardyConfig
from tentlab.decomp import coefficient_report, decompose, decomposition_to_document
from tentlab.dyadic import (
    build_dyadic_system,
    system_from_document,
    system_to_document,
    verify_dyadic,
)
from tentlab.errors import InputError, TentlabError
from tentlab.experiment import load_experiment_config, run_experiment
from tentlab.hardy import calderon_reconstruct, hardy_atoms_to_document, hardy_decompose
from tentlab.models import (
    AtomKind,
    DecompositionDocument,
    DecompositionMode,
    DyadicSystemDocument,
    HardyMode,
    PaginationQuery,
    PlotKind,
    WhitneyMode,
)
from tentlab.plots import (
    area_profile_series,
    calderon_series,
    emit_plot_data,
    lambda_spectrum_series,
    level_atoms_series,
    write_atomic,
)
from tentlab.space import Ball, doubling_report, load_space, read_text
from tentlab.spectral import (
    DENSE_LIMIT,
    build_operator,
    bump_calculus,
    calderon_grid,
    load_function,
    load_graph,
)
from tentlab.tent import area_functional, load_tent_function, tent_norm, validate_q_atom
from tentlab.weights import load_weight, weight_constants

logger = logging.getLogger("tentlab")

NO_WEIGHT = "unit"


def _emit(model: BaseModel, out: Optional[str] = None) -> None:
    text = model.model_dump_json(indent=2)
    if out:
        write_atomic(out, text)
        logger.info("Wrote %s.", out)
    else:
        sys.stdout.write(text + "\n")


def _weight(source: str, space):
    return None if source == NO_WEIGHT else load_weight(source, space)


def _value_error(fn: Callable, **kwargs):
    try:
        return fn(**kwargs)
    except ValueError as e:
        raise InputError(str(e)) from e


def _operator(args: argparse.Namespace):
    space = load_space(args.space)
    if space.n_points > DENSE_LIMIT:
        logger.warning("%d points exceed the dense limit of %d.", space.n_points, DENSE_LIMIT)
    return space, build_operator(space, load_graph(args.graph))


# --- Commands ---


def cmd_space_check(args: argparse.Namespace) -> int:
    _emit(doubling_report(load_space(args.space)), args.out)
    return 0


def cmd_dyadic_build(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    system = build_dyadic_system(space, args.delta)
    _emit(system_to_document(system), args.out)
    return 0


def cmd_dyadic_verify(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    try:
        document = DyadicSystemDocument.model_validate_json(read_text(args.system))
    except ValueError as e:
        raise InputError(f"Invalid dyadic system document: {e}") from e
    report = verify_dyadic(system_from_document(space, document))
    _emit(report, args.out)
    return 0 if report.passed else 1


def cmd_weights_ap(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    _emit(weight_constants(space, load_weight(args.weight, space), args.p), args.out)
    return 0


def cmd_tent_norm(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    F = load_tent_function(args.tent, space)
    norm = tent_norm(space, F.grid, F, args.p, _weight(args.weight, space))
    sys.stdout.write(f"{norm!r}\n")
    return 0


def cmd_tent_atom_check(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    F = load_tent_function(args.tent, space)
    if not 0 <= args.center < space.n_points:
        raise InputError(f"Center {args.center} outside the space")
    report = validate_q_atom(
        space,
        F.grid,
        F,
        Ball(args.center, args.radius),
        args.p,
        args.q,
        _weight(args.weight, space),
        kind=args.kind,
    )
    _emit(report, args.out)
    return 0 if report.passed else 1


def cmd_decompose(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    w = _weight(args.weight, space)
    F = load_tent_function(args.tent, space)
    config = _value_error(
        DecompositionConfig,
        p=args.p,
        q=args.q,
        gamma=args.gamma,
        kappa=args.kappa,
        delta=args.delta,
        c1=args.c1,
        mode=args.mode,
        whitney_mode=args.whitney_mode,
    )
    decomposition = decompose(space, F.grid, F, w, config, seed=args.seed)
    report = coefficient_report(decomposition, F)
    _emit(decomposition_to_document(decomposition), args.out)
    _emit(report, args.report)
    if args.emit_plots:
        directory = Path(args.emit_plots)
        series = {
            PlotKind.AREA_PROFILE: area_profile_series(area_functional(space, F.grid, F)),
            PlotKind.LEVEL_ATOMS: level_atoms_series(decomposition.levels),
            PlotKind.LAMBDA_SPECTRUM: lambda_spectrum_series(decomposition.entries),
        }
        for kind in series:
            emit_plot_data(series, kind, directory / f"{kind}.csv")
    return 0 if report.passed else 1


def _hardy_config(args: argparse.Namespace) -> HardyConfig:
    return _value_error(
        HardyConfig,
        p=args.p,
        q=args.q,
        M=args.M,
        nu=args.nu,
        dimension=args.dimension,
        mode=args.mode,
        delta=args.delta,
    )


def cmd_hardy_decompose(args: argparse.Namespace) -> int:
    space, op = _operator(args)
    w = _weight(args.weight, space)
    config = _hardy_config(args)
    grid = calderon_grid(op, ratio=args.ratio)
    atoms, report = hardy_decompose(op, grid, load_function(args.f, space), w, config)
    _emit(hardy_atoms_to_document(op, atoms, config, w), args.out)
    _emit(report, args.report)
    return 0 if report.passed else 1


def cmd_hardy_calderon(args: argparse.Namespace) -> int:
    space, op = _operator(args)
    config = _hardy_config(args)
    calc = bump_calculus(config.c0, config.alpha, config.M, config.quadrature_nodes)
    grid = calderon_grid(op, ratio=args.ratio, low=args.low, high=args.high)
    if args.f is not None:
        f = load_function(args.f, space)
    else:
        # every positive eigenvalue carries unit weight
        f = op.synthesize((~op.null_mask).astype(float))
    _, report = calderon_reconstruct(op, grid, f, calc)
    _emit(report, args.out)
    if args.sweep_grid:
        series = {PlotKind.CALDERON_DEFECTS: calderon_series(report)}
        emit_plot_data(series, PlotKind.CALDERON_DEFECTS, args.sweep_grid)
    return 0


def cmd_atoms(args: argparse.Namespace) -> int:
    try:
        document = DecompositionDocument.model_validate_json(read_text(args.decomposition))
    except ValueError as e:
        raise InputError(f"Invalid decomposition document: {e}") from e
    builder = FilterBuilder()
    for field, operator, value in args.where or []:
        builder.add_expression(field, operator, value)
    page = browse_entries(
        document,
        filters=builder.build(),
        sorting=parse_sort(args.sort) if args.sort else None,
        pagination=PaginationQuery(page=args.page, per_page=args.per_page),
    )
    _emit(page)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    status, _ = run_experiment(config, base_dir=Path(args.config).parent)
    return status


# --- Parser ---


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="Write JSON here instead of stdout")


def _add_decomposition_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=float, default=0.5)
    parser.add_argument("--q", type=float, default=2.0)
    parser.add_argument("--gamma", type=float, default=0.5)
    parser.add_argument("--kappa", type=float, default=1.0)
    parser.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    parser.add_argument("--c1", type=float, default=None)
    parser.add_argument("--mode", type=DecompositionMode, default=DecompositionMode.STRICT)
    parser.add_argument("--whitney-mode", type=WhitneyMode, default=WhitneyMode.STRICT)
    parser.add_argument("--seed", type=int, default=None)


def _add_hardy_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=float, default=1.0)
    parser.add_argument("--q", type=float, default=2.0)
    parser.add_argument("--M", type=int, default=1)
    parser.add_argument("--nu", type=float, default=4.0)
    parser.add_argument("--dimension", type=int, default=1)
    parser.add_argument("--mode", type=HardyMode, default=HardyMode.LEAK)
    parser.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    parser.add_argument("--ratio", type=float, default=DEFAULT_RATIO)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tentlab", description="Tent space and Hardy space atomic decompositions"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    space = commands.add_parser("space").add_subparsers(dest="action", required=True)
    check = space.add_parser("check", help="Doubling report of a space")
    check.add_argument("space")
    _add_out(check)
    check.set_defaults(handler=cmd_space_check)

    dyadic = commands.add_parser("dyadic").add_subparsers(dest="action", required=True)
    build = dyadic.add_parser("build", help="Build a dyadic cube system")
    build.add_argument("space")
    build.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    _add_out(build)
    build.set_defaults(handler=cmd_dyadic_build)
    verify = dyadic.add_parser("verify", help="Check the dyadic axioms of a system")
    verify.add_argument("system")
    verify.add_argument("--space", required=True)
    _add_out(verify)
    verify.set_defaults(handler=cmd_dyadic_verify)

    weights = commands.add_parser("weights").add_subparsers(dest="action", required=True)
    ap = weights.add_parser("ap", help="A_p and reverse Hoelder constants of a weight")
    ap.add_argument("space")
    ap.add_argument("weight")
    ap.add_argument("--p", type=float, default=2.0)
    _add_out(ap)
    ap.set_defaults(handler=cmd_weights_ap)

    tent = commands.add_parser("tent").add_subparsers(dest="action", required=True)
    norm = tent.add_parser("norm", help="Weighted tent norm of a tent function")
    norm.add_argument("space")
    norm.add_argument("weight", help=f"Weight file, or '{NO_WEIGHT}'")
    norm.add_argument("tent")
    norm.add_argument("--p", type=float, default=0.5)
    norm.set_defaults(handler=cmd_tent_norm)
    atom = tent.add_parser("atom-check", help="Validate a tent function as an atom")
    atom.add_argument("space")
    atom.add_argument("weight", help=f"Weight file, or '{NO_WEIGHT}'")
    atom.add_argument("tent")
    atom.add_argument("--center", type=int, required=True)
    atom.add_argument("--radius", type=float, required=True)
    atom.add_argument("--p", type=float, default=0.5)
    atom.add_argument("--q", type=float, default=2.0)
    atom.add_argument("--kind", type=AtomKind, default=AtomKind.Q_ATOM)
    _add_out(atom)
    atom.set_defaults(handler=cmd_tent_atom_check)

    dec = commands.add_parser("decompose", help="Atomic decomposition of a tent function")
    dec.add_argument("space")
    dec.add_argument("weight", help=f"Weight file, or '{NO_WEIGHT}'")
    dec.add_argument("tent")
    _add_decomposition_options(dec)
    dec.add_argument("--out", required=True, help="Decomposition JSON")
    dec.add_argument("--report", help="Report JSON (default: stdout)")
    dec.add_argument("--emit-plots", metavar="DIR", help="Write CSV plot data here")
    dec.set_defaults(handler=cmd_decompose)

    hardy = commands.add_parser("hardy").add_subparsers(dest="action", required=True)
    hdec = hardy.add_parser("decompose", help="Hardy atoms of a function")
    hdec.add_argument("space")
    hdec.add_argument("graph")
    hdec.add_argument("weight", help=f"Weight file, or '{NO_WEIGHT}'")
    hdec.add_argument("f")
    _add_hardy_options(hdec)
    hdec.add_argument("--out", required=True, help="Hardy atoms JSON")
    hdec.add_argument("--report", help="Report JSON (default: stdout)")
    hdec.set_defaults(handler=cmd_hardy_decompose)
    cal = hardy.add_parser("calderon", help="Calderon reproducing defects")
    cal.add_argument("space")
    cal.add_argument("graph")
    cal.add_argument("--f", help="Function JSON (default: every eigenvector once)")
    _add_hardy_options(cal)
    cal.add_argument("--low", type=float, default=1e-2)
    cal.add_argument("--high", type=float, default=8.0)
    cal.add_argument("--sweep-grid", metavar="CSV", help="Write (eigenvalue, defect) rows")
    _add_out(cal)
    cal.set_defaults(handler=cmd_hardy_calderon)

    atoms = commands.add_parser("atoms", help="Filter, sort and page decomposition entries")
    atoms.add_argument("decomposition")
    atoms.add_argument("--where", nargs=3, action="append", metavar=("FIELD", "OP", "VALUE"))
    atoms.add_argument("--sort", help="field or field:asc|desc")
    atoms.add_argument("--page", type=int, default=1)
    atoms.add_argument("--per-page", type=int, default=20)
    atoms.set_defaults(handler=cmd_atoms)

    run = commands.add_parser("run", help="Run an experiment config")
    run.add_argument("config")
    run.set_defaults(handler=cmd_run)
    return parser


def configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI.

    Returns:
        int: 0 on success, 1 on a failed hard assertion, 2 on invalid input
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except TentlabError as e:
        logger.error("%s", e.detail)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
