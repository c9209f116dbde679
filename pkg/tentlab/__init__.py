"""tentlab: atomic decompositions of weighted tent and Hardy spaces on finite metric spaces."""

__version__ = "0.1.0"

from . import models as models  # noqa: E402, F401
from .browse import (  # noqa: E402, F401
    FILTER_STRATEGIES,
    FilterEngine,
    PaginationEngine,
    SortEngine,
)
from .builder import ExperimentBuilder, FieldBuilder, FilterBuilder  # noqa: E402, F401
from .config import (  # noqa: E402, F401
    DecompositionConfig,
    DyadicConfig,
    GridConfig,
    HardyConfig,
    TentlabPresets,
)
from .decomp import (  # noqa: E402, F401
    AtomicDecomposition,
    coefficient_report,
    decompose,
    reconstruct,
)
from .dyadic import (  # noqa: E402, F401
    build_dyadic_system,
    verify_dyadic,
    verify_whitney,
    whitney_cover,
)
from .errors import (  # noqa: E402, F401
    ConvergenceError,
    DecompositionError,
    InputError,
    InvariantViolation,
    TentlabError,
)
from .experiment import run_experiment  # noqa: E402, F401
from .hardy import hardy_decompose, validate_hardy_atom  # noqa: E402, F401
from .plots import emit_plot_data  # noqa: E402, F401
from .presets import CommonGraphs, CommonSpaces  # noqa: E402, F401
from .space import MetricMeasureSpace, load_space  # noqa: E402, F401
from .spectral import build_operator, bump_calculus  # noqa: E402, F401
from .tent import TentFunction, TGrid, tent_norm  # noqa: E402, F401
from .weights import WeightFunction, ap_constant, generate_weight  # noqa: E402, F401

__all__ = [
    "__version__",
    # Pipelines
    "decompose",
    "reconstruct",
    "coefficient_report",
    "hardy_decompose",
    "validate_hardy_atom",
    "run_experiment",
    # Geometry
    "MetricMeasureSpace",
    "load_space",
    "build_dyadic_system",
    "verify_dyadic",
    "whitney_cover",
    "verify_whitney",
    # Weights and tents
    "WeightFunction",
    "ap_constant",
    "generate_weight",
    "TGrid",
    "TentFunction",
    "tent_norm",
    "AtomicDecomposition",
    # Spectral
    "build_operator",
    "bump_calculus",
    # Engines
    "FilterEngine",
    "SortEngine",
    "PaginationEngine",
    # Strategy registry
    "FILTER_STRATEGIES",
    # Builders
    "FilterBuilder",
    "FieldBuilder",
    "ExperimentBuilder",
    # Configuration
    "GridConfig",
    "DyadicConfig",
    "DecompositionConfig",
    "HardyConfig",
    "TentlabPresets",
    # Presets
    "CommonSpaces",
    "CommonGraphs",
    # Errors
    "TentlabError",
    "InputError",
    "InvariantViolation",
    "ConvergenceError",
    "DecompositionError",
    "emit_plot_data",
    # Module
    "models",
]
