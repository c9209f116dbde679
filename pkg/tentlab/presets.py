"""Common space and graph presets."""

from typing import Optional

import numpy as np

from tentlab.models import GraphKind, GraphSpec, MetricKind, SpaceDocument


class CommonSpaces:
    """
    Pre-defined space documents for frequently used test geometries.

    Example usage:
        from tentlab.presets import CommonSpaces
        from tentlab.space import load_space

        line = load_space(CommonSpaces.grid_1d(10))
        plane = load_space(CommonSpaces.grid_2d(8, 8))
    """

    @staticmethod
    def grid_1d(n: int, spacing: float = 1.0, measure: Optional[list] = None) -> SpaceDocument:
        """
        Points ``0, spacing, ..., (n - 1) spacing`` on the line.

        Args:
            n: Number of points
            spacing: Distance between neighbours (default: 1.0)
            measure: Point masses (default: all 1)

        Returns:
            SpaceDocument: Euclidean grid document
        """
        return SpaceDocument(
            points=[[i * spacing] for i in range(n)],
            measure=measure,
            metric=MetricKind.EUCLIDEAN,
        )

    @staticmethod
    def grid_2d(
        rows: int, cols: int, spacing: float = 1.0, metric: MetricKind = MetricKind.EUCLIDEAN
    ) -> SpaceDocument:
        """
        Row-major ``rows x cols`` lattice.

        Args:
            rows: Number of rows
            cols: Number of columns
            spacing: Lattice spacing (default: 1.0)
            metric: Metric on the coordinates (default: euclidean)
        """
        return SpaceDocument(
            points=[[r * spacing, c * spacing] for r in range(rows) for c in range(cols)],
            metric=metric,
        )

    @staticmethod
    def random_cloud(
        n: int, dim: int = 2, seed: int = 0, random_measure: bool = False
    ) -> SpaceDocument:
        """
        Seeded uniform points in the unit cube.

        Args:
            n: Number of points
            dim: Ambient dimension (default: 2)
            seed: Generator seed
            random_measure: Draw masses uniformly from [0.5, 2) instead of 1
        """
        rng = np.random.default_rng(seed)
        points = rng.random((n, dim))
        measure = rng.uniform(0.5, 2.0, n).tolist() if random_measure else None
        return SpaceDocument(points=points.tolist(), measure=measure, metric=MetricKind.EUCLIDEAN)

    @staticmethod
    def single_point(mass: float = 1.0) -> SpaceDocument:
        """The one-point space."""
        return SpaceDocument(distances=[[0.0]], measure=[mass], metric=MetricKind.EXPLICIT)


class CommonGraphs:
    """Pre-defined graph specs for spectral operators."""

    @staticmethod
    def path(weight: float = 1.0) -> GraphSpec:
        """Consecutive points joined with a constant edge weight."""
        return GraphSpec(kind=GraphKind.PATH, weight=weight)

    @staticmethod
    def grid2d(rows: int, cols: int, weight: float = 1.0) -> GraphSpec:
        """Nearest-neighbour graph of a row-major lattice."""
        return GraphSpec(kind=GraphKind.GRID2D, rows=rows, cols=cols, weight=weight)
