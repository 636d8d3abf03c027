"""Reflected-diffusion simulation and series criteria for narrowing domains."""

from .blocks import (
    Block,
    BlockDecomposition,
    BlockRun,
    Cut,
    DecompositionError,
    QuadratureError,
    UnsupportedAnchorError,
    band_runs,
    block_measures,
    decompose,
)
from .geometry import (
    BStar,
    Cusp,
    Disk,
    DomainSpec,
    FractalChannels2D,
    FractalChannelsD,
    GeometryError,
    InvalidSpecError,
    SnowflakeCubes,
    UnitBox,
    anchor_point,
    ball_volume,
    boundary_area_total,
    contains,
    contains_many,
    clearance_many,
    distance_to_boundary,
    project_many,
    project_to_closure,
    spec_from_json,
    spec_to_json,
    sphere_area,
)
from .criteria import (
    ACTIVE,
    CONVERGES,
    CRITERION_IDS,
    CriterionError,
    CriterionReport,
    DIVERGES,
    INCONCLUSIVE,
    NEARLY_INACTIVE,
    NON_TRAP,
    NoThresholdError,
    TRAP,
    classify_activity,
    classify_trap,
    closed_form_threshold,
    hitting_bound_ratio,
    resistance_series,
    series_terms,
)
from .sim import (
    CriterionOnlyFamilyError,
    EstimateCI,
    GreenCells,
    GreenResult,
    HarmonicResult,
    PathOutcome,
    PathStream,
    SimConfig,
    SimulationError,
    estimate_green,
    estimate_hitting_prob,
    estimate_mean_exit,
    estimate_u,
    estimate_u_multi,
    harmonic_measure,
    local_time_profile,
    run_ensemble,
    run_path,
    step,
)
from .stats import BatchAccumulator, geometric_rate, log_slope, merge, merge_many

__version__ = "0.1.0"
