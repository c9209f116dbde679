"""tentlab enums, documents and reports"""

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

from typing import Any, Dict, Generic, List, Optional, Tuple, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MetricKind(StrEnum):
    """Metrics a space document may declare"""

    EUCLIDEAN = "euclidean"  # l2 distance between coordinate vectors
    MANHATTAN = "manhattan"  # l1 distance
    CHEBYSHEV = "chebyshev"  # l-infinity distance
    EXPLICIT = "explicit"  # distance table given verbatim


class WhitneyMode(StrEnum):
    """Whitney cover selection modes"""

    STRICT = "strict"  # descend to finer generations until cubes lie inside the open set
    REPAIR = "repair"  # intersect boundary cubes with the open set and flag them


class DecompositionMode(StrEnum):
    """Tent decomposition coefficient modes"""

    STRICT = "strict"  # coefficients saturate the atom size condition exactly
    FAITHFUL = "faithful"  # lambda = 2^k w(B)^{1/p}


class HardyMode(StrEnum):
    """Support handling for Hardy atoms"""

    STRICT = "strict"  # truncate b to the atom ball and revalidate
    LEAK = "leak"  # keep b, measure the mass outside the ball


class WeightKind(StrEnum):
    """Weight generators"""

    CONSTANT = "constant"
    POWER = "power"  # (1 + d(x, center))^a
    CHECKERBOARD = "checkerboard"  # alternating lo/hi values
    RANDOM_AP = "random-Ap-targeted"  # log-normal candidates with [w]_{A_p} <= target


class AtomKind(StrEnum):
    """Tent atom flavours checked by validate_q_atom"""

    Q_ATOM = "q-atom"  # weighted q-atom
    UNWEIGHTED = "unweighted-2"  # 2-atom of the unweighted tent space
    TYPE_I = "type-i"  # weighted 2-atom measured against w(B(y,t))
    TYPE_II = "type-ii"  # infinity-atom checked over a list of q


class GraphKind(StrEnum):
    """Graph builders for spectral operators"""

    PATH = "path"  # consecutive points joined
    GRID2D = "grid2d"  # row-major rectangular grid
    EDGES = "edges"  # explicit weighted edge list


class TentSourceKind(StrEnum):
    """Generators for the tent function of an experiment"""

    ZERO = "zero"
    RANDOM = "random"  # seeded Gaussian samples on a random support
    ATOM = "atom"  # strict-saturated q-atom on a ball
    HARDY = "hardy"  # t^2 L e^{-t^2 L} f for a seeded f


class PipelineStage(StrEnum):
    """Stages run_experiment can execute"""

    SPACE_CHECK = "space-check"
    DYADIC = "dyadic"
    WEIGHTS = "weights"
    TENT_NORMS = "tent-norms"
    DECOMPOSE = "decompose"
    HARDY = "hardy"


class PlotKind(StrEnum):
    """CSV series emit_plot_data can write"""

    AREA_PROFILE = "area-profile"  # (x, A(F)(x))
    LEVEL_ATOMS = "level-atoms"  # (k, atoms, sum |lambda|^p)
    LAMBDA_SPECTRUM = "lambda-spectrum"  # (index, k, lambda)
    CALDERON_DEFECTS = "calderon-defects"  # (lambda_i, defect)
    CONSTANT_SWEEP = "constant-sweep"  # (p, [w]_{A_p})


class FilterOperator(StrEnum):
    """Filter operators for browsing decomposition entries"""

    EQ = "eq"  # equals (=)
    NE = "ne"  # not equals (!=)
    GT = "gt"  # greater than (>)
    GTE = "gte"  # greater than or equal (>=)
    LT = "lt"  # less than (<)
    LTE = "lte"  # less than or equal (<=)

    IN = "in"  # IN (...)
    NOT_IN = "not_in"  # NOT IN (...)

    BETWEEN = "between"  # low <= x <= high


class SortingOrder(StrEnum):
    """Sorting orders"""

    ASC = "asc"  # ascending order
    DESC = "desc"  # descending order


T = TypeVar("T")


class ReportModel(BaseModel):
    """Base for every persisted model; non-finite floats serialize as strings."""

    model_config = ConfigDict(ser_json_inf_nan="strings")


# --- Documents ---


class SpaceDocument(ReportModel):
    """Space description: coordinates with a named metric, or an explicit table"""

    points: Optional[List[List[float]]] = None
    distances: Optional[List[List[float]]] = None
    measure: Optional[List[float]] = None
    metric: MetricKind = MetricKind.EUCLIDEAN


class TGridDocument(ReportModel):
    """Geometric t-grid"""

    t_min: float
    ratio: float
    count: int


class TentFunctionDocument(ReportModel):
    """Tent function samples, row-major N x M"""

    grid: TGridDocument
    values: List[List[float]]
    imag: Optional[List[List[float]]] = None


class GraphSpec(ReportModel):
    """Graph used to build a spectral operator"""

    kind: GraphKind
    rows: Optional[int] = None
    cols: Optional[int] = None
    edges: Optional[List[Tuple[int, int, float]]] = None
    weight: float = 1.0


class DyadicCubeDocument(ReportModel):
    """One cube of a generation"""

    center: int
    members: List[int]
    parent: Optional[int] = None


class DyadicGenerationDocument(ReportModel):
    """All cubes of generation k"""

    k: int
    cubes: List[DyadicCubeDocument]


class DyadicSystemDocument(ReportModel):
    """Serialized dyadic cube system"""

    version: str
    space_hash: str
    delta: float
    c0: float = 1.0
    C0: float = 1.0
    generations: List[DyadicGenerationDocument]


class DecompositionEntryDocument(ReportModel):
    """One (k, j) entry of an atomic decomposition"""

    level: int
    index: int
    generation: int
    cube: int
    center: int
    radius: float
    coefficient: float
    radius_extended: bool = False
    region: List[Tuple[int, int]]
    atom: List[float]
    atom_imag: Optional[List[float]] = None


class DecompositionDocument(ReportModel):
    """Serialized atomic decomposition"""

    version: str
    space_hash: str
    weight_hash: str
    grid: TGridDocument
    n_points: int
    p: float
    q: float
    gamma: float
    kappa: float
    c1: float
    delta: float
    mode: DecompositionMode
    seed: Optional[int] = None
    entries: List[DecompositionEntryDocument] = Field(default_factory=list)


class HardyAtomDocument(ReportModel):
    """One Hardy atom with its coefficient"""

    coefficient: float
    level: int
    index: int
    center: int
    radius: float
    a: List[float]
    b: List[float]


class HardyAtomsDocument(ReportModel):
    """Serialized Hardy decomposition"""

    version: str
    space_hash: str
    weight_hash: str
    p: float
    q: float
    M: int
    mode: HardyMode
    atoms: List[HardyAtomDocument] = Field(default_factory=list)


# --- Reports ---


class PropertyCheck(ReportModel):
    """Outcome of one verified property"""

    name: str
    passed: bool
    degenerate: bool = False
    detail: str = ""
    witness: Optional[Dict[str, float]] = None


class DoublingReport(ReportModel):
    """Measured doubling constants of a space"""

    c_doubling: float
    n_exp: float
    d_exp: float
    n_points: int
    diam: float
    min_distance: float


class DyadicReport(ReportModel):
    """Verification of the dyadic cube axioms"""

    delta: float
    c0: float
    C0: float
    k_min: int
    k_max: int
    max_children: int
    cube_counts: List[int]
    properties: List[PropertyCheck]
    passed: bool


class WhitneyReport(ReportModel):
    """Verification of a Whitney cover"""

    mode: WhitneyMode
    cubes: int
    repaired: int
    degenerate: int
    min_upper_slack: Optional[float] = None
    max_diameter_ratio: Optional[float] = None
    properties: List[PropertyCheck]
    passed: bool


class WeightConstantsReport(ReportModel):
    """A_p and reverse Hölder constants of a weight"""

    p: float
    ap_constant: float
    rh_constants: List[Tuple[float, float]] = Field(default_factory=list)
    ap_map: List[Tuple[float, float]] = Field(default_factory=list)


class WeightLemmaReport(ReportModel):
    """Measured A_p property suite"""

    p: float
    q: float
    ap_p: float
    ap_q: float
    ap_map: List[Tuple[float, float]]
    dual_exponent: Optional[float] = None
    dual_constant: Optional[float] = None
    pairs_checked: int
    worst_ratio: float
    properties: List[PropertyCheck]
    passed: bool


class AtomNormCheck(ReportModel):
    """Size condition of an atom at one exponent"""

    q: float
    norm: float
    bound: float
    slack: float
    passed: bool


class AtomReport(ReportModel):
    """Tent atom validation"""

    kind: AtomKind
    support_ok: bool
    outside_witness: Optional[Tuple[int, int]] = None
    norms: List[AtomNormCheck]
    passed: bool


class DensityReport(ReportModel):
    """Global density sets of a closed set"""

    gamma: float
    f_size: int
    f_star_size: int
    o_size: int
    o_star_size: int
    measure_ratio: Optional[float] = None


class DensityRatioReport(ReportModel):
    """Both sides of the cone-to-tent density estimate"""

    gamma: float
    eta: float
    lhs: float
    rhs: float
    ratio: float
    degenerate: bool


class HolderChainReport(ReportModel):
    """Quantities of the tent duality chain for one pair (F, G)"""

    q: float
    pairing: float
    cone_integral: float
    holder_bound: float
    holder_ok: bool
    measured_cn: Optional[float] = None
    overlap_bound: float
    c_doubling: float


class LevelReport(ReportModel):
    """One level of a tent decomposition"""

    k: int
    omega_size: int
    omega_star_size: int
    weight_ratio: Optional[float] = None
    cubes: int
    atoms: int
    lambda_p_sum: float


class CoefficientReport(ReportModel):
    """Coefficient bounds, atom slack and reconstruction of a decomposition"""

    version: str
    space_hash: str
    mode: DecompositionMode
    atoms: int
    radius_extended: int
    lambda_p_sum: float
    tent_norm_p: float
    ratio: Optional[float] = None
    converse_norm_p: float
    converse_ok: bool
    atom_violations: int
    max_relative_slack: Optional[float] = None
    min_relative_slack: Optional[float] = None
    reconstruction_max_error: float
    reconstruction_t22_error: float
    reconstruction_tp_error: float
    levels: List[LevelReport] = Field(default_factory=list)
    passed: bool


class HeatOrderReport(ReportModel):
    """Gaussian bound fit for the kernel of (t^2 L)^k e^{-t^2 L}"""

    order: int
    c_fit: Optional[float] = None
    C_fit: float
    C_onsite: float
    table: List[Tuple[float, float]]


class HeatReport(ReportModel):
    """Heat kernel diagnostics"""

    orders: List[HeatOrderReport]
    conservation_error: float
    projection_error: float


class SquareFunctionReport(ReportModel):
    """Norms of the heat square function"""

    s: float
    weighted_ratio: Optional[float] = None
    l2_ratio: Optional[float] = None
    l2_bound: float
    quadratic_ratio: Optional[float] = None


class CalderonEigen(ReportModel):
    """Quadrature defect at one eigenvalue"""

    eigenvalue: float
    defect: float
    covered: bool


class CalderonReport(ReportModel):
    """Calderón reproducing formula residuals"""

    residual: float
    worst_defect: float
    worst_covered_defect: Optional[float] = None
    eigen: List[CalderonEigen]


class HardyAtomReport(ReportModel):
    """Validation of one Hardy atom"""

    identity_error: float
    identity_ok: bool
    leaks: List[float]
    a_leak: float
    support_ok: bool
    ratios: List[float]
    size_ok: bool
    downgrade_q: Optional[float] = None
    downgrade_ratios: Optional[List[float]] = None
    downgrade_ok: Optional[bool] = None
    passed: bool


class HardyReport(ReportModel):
    """Hardy decomposition pipeline report"""

    version: str
    space_hash: str
    mode: HardyMode
    atoms: int
    c_psi: float
    residual: float
    truncation_residual: Optional[float] = None
    calderon_residual: float
    lambda_p_sum: float
    sl_norm_p: float
    ratio: Optional[float] = None
    max_leak: float
    max_slack: Optional[float] = None
    max_ball_growth: float = 1.0
    atom_failures: int
    tent: CoefficientReport
    calderon: CalderonReport
    passed: bool


class AnnulusTerm(ReportModel):
    """Far-field contribution of one dyadic annulus"""

    k: int
    value: float
    envelope: float


class SLAtomReport(ReportModel):
    """Square function of a Hardy atom split near/far"""

    p: float
    s: float
    q: float
    n_exp: float
    total: float
    near: float
    near_bound: float
    near_ok: bool
    lemma_constant: Optional[float] = None
    atom_norm: float
    far: float
    far_constant: Optional[float] = None
    annuli: List[AnnulusTerm] = Field(default_factory=list)
    j1: float
    j2: float


class PlotSeries(ReportModel):
    """A CSV-ready table"""

    columns: List[str]
    rows: List[List[float]] = Field(default_factory=list)


# --- Experiment configuration ---


class GridParams(ReportModel):
    """t-grid of an experiment; ``spectral`` sizes it from the operator's spectrum"""

    t_min: Optional[float] = None
    ratio: float = 2.0**0.25
    count: Optional[int] = None
    t_max: Optional[float] = None
    spectral: bool = False


class WeightSource(ReportModel):
    """A weight file, inline values or a generator"""

    path: Optional[str] = None
    values: Optional[List[float]] = None
    kind: Optional[WeightKind] = None
    params: Dict[str, Any] = Field(default_factory=dict)


class TentSource(ReportModel):
    """A tent function file or a generator"""

    path: Optional[str] = None
    kind: TentSourceKind = TentSourceKind.ZERO
    params: Dict[str, float] = Field(default_factory=dict)


class ExperimentParams(ReportModel):
    """Numerical parameters shared by the stages"""

    p: float = 0.5
    q: float = 2.0
    gamma: float = 0.5
    kappa: float = 1.0
    delta: float = 1.0 / 16.0
    c1: Optional[float] = None
    mode: DecompositionMode = DecompositionMode.STRICT
    whitney_mode: WhitneyMode = WhitneyMode.STRICT
    weight_p: float = 2.0
    weight_q: float = 3.0
    M: int = 1
    nu: float = 4.0
    n_exp: Optional[float] = None
    dimension: int = 1
    hardy_mode: HardyMode = HardyMode.LEAK
    grid: GridParams = Field(default_factory=GridParams)


class OutputPaths(ReportModel):
    """Artifact locations, relative to ``directory``"""

    directory: str = "out"
    report: str = "report.json"
    decomposition: str = "decomposition.json"
    hardy_atoms: str = "hardy_atoms.json"
    plots: List[PlotKind] = Field(default_factory=list)


class ExperimentConfig(ReportModel):
    """A single batch experiment"""

    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="strings")

    space: Union[str, SpaceDocument]
    weight: Optional[WeightSource] = None
    tent: TentSource = Field(default_factory=TentSource)
    graph: Optional[Union[str, GraphSpec]] = None
    hardy_f: Optional[str] = None
    stages: List[PipelineStage] = Field(
        default_factory=lambda: [PipelineStage.SPACE_CHECK, PipelineStage.DECOMPOSE]
    )
    params: ExperimentParams = Field(default_factory=ExperimentParams)
    outputs: OutputPaths = Field(default_factory=OutputPaths)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_sources(self) -> "ExperimentConfig":
        randomized = (
            (self.weight is not None and self.weight.kind == WeightKind.RANDOM_AP)
            or self.tent.kind in (TentSourceKind.RANDOM, TentSourceKind.HARDY)
            or (PipelineStage.HARDY in self.stages and self.hardy_f is None)
        )
        if randomized and self.seed is None:
            raise ValueError("seed is required for randomized generators")
        needs_graph = PipelineStage.HARDY in self.stages or self.tent.kind == TentSourceKind.HARDY
        if needs_graph and self.graph is None:
            raise ValueError("graph is required for the hardy stage and hardy tent sources")
        return self


class ExperimentReport(ReportModel):
    """Report of a full experiment run"""

    version: str
    config_hash: str
    space_hash: str
    stages: List[PipelineStage]
    doubling: Optional[DoublingReport] = None
    dyadic: Optional[DyadicReport] = None
    weights: Optional[WeightLemmaReport] = None
    tent_norms: Dict[str, float] = Field(default_factory=dict)
    decomposition: Optional[CoefficientReport] = None
    hardy: Optional[HardyReport] = None
    series: Dict[PlotKind, PlotSeries] = Field(default_factory=dict)
    failures: List[str] = Field(default_factory=list)
    passed: bool


# --- Browsing ---


class EntryFilter(BaseModel):
    """Filter over decomposition entry fields"""

    field: str
    operator: FilterOperator
    value: str


class SortingQuery(BaseModel):
    """Sorting query model"""

    sort_by: str
    order: SortingOrder


class PaginationQuery(BaseModel):
    """Pagination query model"""

    page: int
    per_page: int


class Pagination(BaseModel):
    """Pagination model"""

    total_items: int
    per_page: int
    current_page: int
    total_pages: int


class Meta(BaseModel):
    """Meta model"""

    pagination: Pagination
    filters: Optional[List[EntryFilter]] = None
    sort: Optional[SortingQuery] = None


class EntryRow(BaseModel):
    """Browsable summary of a decomposition entry"""

    level: int
    index: int
    generation: int
    cube: int
    center: int
    radius: float
    coefficient: float
    support: int
    radius_extended: bool


class Page(BaseModel, Generic[T]):
    """Paginated result"""

    data: List[T]
    meta: Meta
