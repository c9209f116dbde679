"""Benchmark internal kernels of tentlab to identify bottlenecks."""

import time

import numpy as np

from tentlab.browse import FilterEngine, SortEngine, _coerce_value, entry_rows
from tentlab.builder import FilterBuilder
from tentlab.decomp import decompose
from tentlab.dyadic import build_dyadic_system, whitney_cover
from tentlab.models import SortingOrder, SortingQuery
from tentlab.presets import CommonGraphs, CommonSpaces
from tentlab.space import ball_family, greedy_net, load_space, maximal_function
from tentlab.spectral import build_operator, heat_multiplier, spectral_apply
from tentlab.tent import TentFunction, TGrid
from tentlab.weights import ap_constant, generate_weight


def time_function(func, iterations: int = 100):
    """Time a function execution."""
    # Warmup
    for _ in range(3):
        func()

    timings = []
    for _ in range(iterations):
        start = time.perf_counter()
        func()
        end = time.perf_counter()
        timings.append(end - start)

    timings.sort()
    avg = sum(timings) / len(timings)
    p50 = timings[int(len(timings) * 0.5)]
    p95 = timings[int(len(timings) * 0.95)]
    return {"avg": avg * 1000, "p50": p50 * 1000, "p95": p95 * 1000}


def _print(name: str, result) -> None:
    print(
        f"  {name:30s} - Avg: {result['avg']:8.3f}ms, "
        f"P50: {result['p50']:8.3f}ms, P95: {result['p95']:8.3f}ms"
    )


def setup_space(n_points: int = 64):
    """A seeded cloud with random masses."""
    return load_space(CommonSpaces.random_cloud(n_points, seed=0, random_measure=True))


def benchmark_geometry():
    """Benchmark ball families, nets and the maximal function."""
    print("\n=== Benchmark: geometry ===")
    for n_points in (32, 128):
        space = setup_space(n_points)
        f = np.abs(np.random.default_rng(1).standard_normal(n_points))
        tests = {
            f"ball_family ({n_points})": lambda: ball_family(space),
            f"greedy_net ({n_points})": lambda: greedy_net(space, space.diam / 8),
            f"maximal_function ({n_points})": lambda: maximal_function(space, f),
        }
        for name, func in tests.items():
            _print(name, time_function(func, iterations=20))


def benchmark_whitney_cover():
    """Benchmark Whitney covers of a half space."""
    print("\n=== Benchmark: whitney_cover ===")
    space = setup_space(96)
    system = build_dyadic_system(space)
    omega = space.coords[:, 0] < np.median(space.coords[:, 0])
    _print("whitney_cover (96)", time_function(lambda: whitney_cover(system, omega), 20))


def benchmark_ap_constant():
    """Benchmark exact A_p constants over every ball."""
    print("\n=== Benchmark: ap_constant ===")
    space = setup_space(64)
    w = generate_weight(space, "power", {"a": 0.75})
    for p in (1.0, 2.0, 4.0):
        _print(f"ap_constant (p={p})", time_function(lambda: ap_constant(space, w, p), 20))


def benchmark_spectral_apply():
    """Benchmark heat semigroup application."""
    print("\n=== Benchmark: spectral_apply ===")
    space = load_space(CommonSpaces.grid_2d(12, 12))
    op = build_operator(space, CommonGraphs.grid2d(12, 12))
    f = np.random.default_rng(2).standard_normal(space.n_points)
    heat = heat_multiplier(1.0)
    _print("heat semigroup (144)", time_function(lambda: spectral_apply(op, heat, f)))


def benchmark_browse():
    """Benchmark filtering and sorting decomposition entries."""
    print("\n=== Benchmark: browse ===")
    space = load_space(CommonSpaces.grid_1d(64))
    grid = TGrid.from_space(space)
    rng = np.random.default_rng(3)
    tent = TentFunction(grid, rng.standard_normal((64, grid.count)))
    rows = entry_rows(decompose(space, grid, tent))
    filters = FilterBuilder().where("level").gte(0).where("coefficient").gt(0.1).build()
    sorting = SortingQuery(sort_by="coefficient", order=SortingOrder.DESC)
    filter_engine = FilterEngine()
    sort_engine = SortEngine()

    tests = {
        "Float coercion": lambda: _coerce_value("0.25", float),
        "Bool coercion": lambda: _coerce_value("true", bool),
        f"Filter {len(rows)} rows": lambda: filter_engine.apply_filters(rows, filters),
        f"Sort {len(rows)} rows": lambda: sort_engine.apply_sort(rows, sorting),
    }
    for name, func in tests.items():
        _print(name, time_function(func, iterations=200))


def main():
    """Run all internal benchmarks."""
    print("=" * 80)
    print("TENTLAB INTERNAL BENCHMARKS")
    print("=" * 80)

    benchmark_geometry()
    benchmark_whitney_cover()
    benchmark_ap_constant()
    benchmark_spectral_apply()
    benchmark_browse()

    print("\n" + "=" * 80)
    print("BENCHMARKS COMPLETE")
    print("=" * 80)


if __name__ == "__main__":
    main()
