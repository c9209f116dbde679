import logging

import numpy as np

from tentlab import CommonSpaces, TentFunction, TGrid, decompose, generate_weight, load_space
from tentlab.decomp import coefficient_report


def main():
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    space = load_space(CommonSpaces.grid_1d(32))
    w = generate_weight(space, "power", {"a": 0.5})
    grid = TGrid.from_space(space)
    rng = np.random.default_rng(0)
    shape = (space.n_points, grid.count)
    F = TentFunction(grid, rng.standard_normal(shape) * (rng.random(shape) < 0.4))

    decomposition = decompose(space, grid, F, w)
    print(coefficient_report(decomposition, F).model_dump_json(indent=2))


if __name__ == "__main__":
    main()
