"""End-to-end benchmark suite for the tentlab pipelines."""

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from tentlab.config import DecompositionConfig, HardyConfig
from tentlab.decomp import AtomicDecomposition, decompose, level_sets
from tentlab.dyadic import build_dyadic_system, verify_dyadic
from tentlab.hardy import hardy_decompose
from tentlab.presets import CommonGraphs, CommonSpaces
from tentlab.space import doubling_report, load_space
from tentlab.spectral import build_operator, bump_calculus, calderon_grid
from tentlab.tent import TentFunction, TGrid, area_functional
from tentlab.weights import generate_weight, verify_weight_lemma


@dataclass
class StageResult:
    """Timings of one pipeline stage plus what its last run produced."""

    stage: str
    seconds: List[float] = field(default_factory=list)
    atoms: Optional[int] = None
    level_atoms: List[int] = field(default_factory=list)
    passed: Optional[bool] = None

    def record(self, output: Any) -> None:
        """Pull atom counts and the pass flag out of a stage's return value."""
        if isinstance(output, AtomicDecomposition):
            self.atoms = len(output)
            self.level_atoms = [level.atoms for level in output.levels]
        elif isinstance(output, tuple) and len(output) == 2 and hasattr(output[1], "atoms"):
            atoms, report = output
            self.atoms = len(atoms)
            self.passed = report.passed
        if hasattr(output, "passed"):
            self.passed = output.passed

    @property
    def median(self) -> float:
        return float(np.median(self.seconds)) if self.seconds else 0.0

    @property
    def worst(self) -> float:
        return max(self.seconds, default=0.0)

    def __str__(self) -> str:
        lines = [
            f"{self.stage}: median {self.median * 1000:.2f}ms, "
            f"worst {self.worst * 1000:.2f}ms over {len(self.seconds)} runs"
        ]
        if self.atoms is not None:
            lines.append(f"  atoms: {self.atoms}")
        if self.level_atoms:
            lines.append(f"  per level: {self.level_atoms}")
        if self.passed is not None:
            lines.append(f"  passed: {self.passed}")
        return "\n".join(lines)


class BenchmarkSuite:
    """Pipeline benchmarks on a one-dimensional grid of ``n_points`` points."""

    def __init__(self, n_points: int = 64, iterations: int = 10, threads: int = 1):
        """
        Initialize benchmark suite.

        Args:
            n_points: Size of the benchmark space
            iterations: Number of iterations per benchmark
            threads: Worker cap passed to the threaded stages
        """
        self.n_points = n_points
        self.iterations = iterations
        self.threads = threads
        self.results: Dict[str, StageResult] = {}

    def setup(self):
        """Build the space, weight, tent function and operator shared by the benchmarks."""
        self.space = load_space(CommonSpaces.grid_1d(self.n_points))
        self.weight = generate_weight(self.space, "power", {"a": 0.5})
        self.grid = TGrid.from_space(self.space)
        rng = np.random.default_rng(0)
        shape = (self.n_points, self.grid.count)
        self.tent = TentFunction(self.grid, rng.standard_normal(shape) * (rng.random(shape) < 0.4))
        self.system = build_dyadic_system(self.space)
        self.operator = build_operator(self.space, CommonGraphs.path())
        self.spectral_grid = calderon_grid(self.operator)
        self.f = rng.standard_normal(self.n_points)

    def _run_benchmark(self, name: str, func: Callable[[], Any]) -> StageResult:
        result = StageResult(name)
        output = func()
        for _ in range(self.iterations):
            start = time.perf_counter()
            output = func()
            result.seconds.append(time.perf_counter() - start)
        result.record(output)
        self.results[name] = result
        return result

    def benchmark_doubling_report(self):
        return self._run_benchmark("Doubling report", lambda: doubling_report(self.space))

    def benchmark_dyadic_build(self):
        return self._run_benchmark("Dyadic build", lambda: build_dyadic_system(self.space))

    def benchmark_dyadic_verify(self):
        return self._run_benchmark(
            "Dyadic verify", lambda: verify_dyadic(self.system, self.threads)
        )

    def benchmark_weight_lemma(self):
        return self._run_benchmark(
            "Weight property suite",
            lambda: verify_weight_lemma(self.space, self.weight, 2.0, 3.0, max_pairs=4_000),
        )

    def benchmark_area_functional(self):
        return self._run_benchmark(
            "Area functional", lambda: area_functional(self.space, self.grid, self.tent)
        )

    def benchmark_level_sets(self):
        return self._run_benchmark(
            "Level sets", lambda: level_sets(self.space, self.grid, self.tent)
        )

    def benchmark_decompose(self):
        """Benchmark the strict weighted decomposition."""
        config = DecompositionConfig()
        return self._run_benchmark(
            "Decompose (strict, weighted)",
            lambda: decompose(
                self.space,
                self.grid,
                self.tent,
                self.weight,
                config,
                system=self.system,
                threads=self.threads,
            ),
        )

    def benchmark_operator(self):
        return self._run_benchmark(
            "Path Laplacian eigendecomposition",
            lambda: build_operator(self.space, CommonGraphs.path()),
        )

    def benchmark_bump_calculus(self):
        return self._run_benchmark("Bump calculus", bump_calculus)

    def benchmark_hardy_decompose(self):
        """Benchmark the Hardy pipeline in leak mode."""
        config = HardyConfig()
        return self._run_benchmark(
            "Hardy decompose (leak)",
            lambda: hardy_decompose(
                self.operator,
                self.spectral_grid,
                self.f,
                config=config,
                system=self.system,
                threads=self.threads,
            ),
        )

    def run_all_benchmarks(self) -> Dict[str, StageResult]:
        """Run all benchmarks and return results."""
        print(
            f"Running benchmarks with {self.n_points} points, "
            f"{self.iterations} iterations each..."
        )
        print("=" * 80)

        benchmarks = [
            self.benchmark_doubling_report,
            self.benchmark_dyadic_build,
            self.benchmark_dyadic_verify,
            self.benchmark_weight_lemma,
            self.benchmark_area_functional,
            self.benchmark_level_sets,
            self.benchmark_decompose,
            self.benchmark_operator,
            self.benchmark_bump_calculus,
            self.benchmark_hardy_decompose,
        ]

        for benchmark in benchmarks:
            result = benchmark()
            print(result)
            print("-" * 80)

        return self.results

    def print_summary(self):
        """Print summary of all benchmarks."""
        print("\n" + "=" * 80)
        print("BENCHMARK SUMMARY")
        print("=" * 80)

        sorted_results = sorted(self.results.values(), key=lambda r: r.median)

        print("\nFastest to slowest (by median time):")
        for i, result in enumerate(sorted_results, 1):
            atoms = f", {result.atoms} atoms" if result.atoms is not None else ""
            print(f"{i}. {result.stage}: {result.median * 1000:.2f}ms median{atoms}")


def main():
    """Run benchmark suite."""
    for n_points in [32, 64, 128]:
        print(f"\n\n{'=' * 80}")
        print(f"TESTING WITH {n_points} POINTS")
        print(f"{'=' * 80}\n")

        suite = BenchmarkSuite(n_points=n_points, iterations=5)
        suite.setup()
        suite.run_all_benchmarks()
        suite.print_summary()


if __name__ == "__main__":
    main()
