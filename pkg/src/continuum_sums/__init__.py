"""Grid-based evidence tooling for Minkowski sums of connected compact sets."""

__version__ = "0.1.0"

from .affine import (
    FlatnessReport,
    NowhereFlatReport,
    ProjectionFlatnessReport,
    affine_dimension,
    collectively_nowhere_flat,
    flatness_by_projection,
    is_nowhere_flat,
    nonflat_certificate,
    parallelotope_volume,
    projection_range,
)
from .gallery import (
    KINDS,
    Generated,
    GeneratorSpec,
    cantor_graph,
    cantor_set,
    circle,
    dyadic_lines_check,
    generate,
    l_shape,
    ladder_steps,
    moment_curve,
    polyline,
    sampled_sum,
    segment,
)
from .grid import (
    DilationPrecisionError,
    GridGeometry,
    GridSet,
    SampledSet,
    Semantics,
    auto_geometry,
    chessboard_distance_transform,
    connected_components,
    cube_coverage,
    dilate,
    dilate_fft,
    dilate_naive,
    eps_density_margin,
    erode,
    is_grid_continuum,
    measure_estimate,
    negate,
    nfold_sum,
    rasterize,
)
from .sums import (
    ClaimReport,
    MeasureBoundReport,
    MeasureChainReport,
    MidpointChain,
    SeparatorInstance,
    SeparatorValidation,
    ShiftConstruction,
    build_sum_separators,
    claim_measure_chain,
    hl_discrete_check,
    measure_lower_bound_check,
    midpoint_iterate,
    random_separator_instance,
    separation_by_search,
    shift_construction,
    validate_separators,
    verify_claim,
)
from .verify import (
    DEFAULT_RESOLUTIONS,
    CheckResult,
    ResolutionEvidence,
    SumEvidence,
    VerificationReport,
    normalized_sum_raster,
    verify_corollary_c1,
    verify_example_cantor,
    verify_hl_suite,
    verify_theorem_main,
)

__all__ = [
    "DEFAULT_RESOLUTIONS",
    "CheckResult",
    "ClaimReport",
    "DilationPrecisionError",
    "FlatnessReport",
    "Generated",
    "GeneratorSpec",
    "GridGeometry",
    "GridSet",
    "KINDS",
    "MeasureBoundReport",
    "MeasureChainReport",
    "MidpointChain",
    "NowhereFlatReport",
    "ProjectionFlatnessReport",
    "ResolutionEvidence",
    "SampledSet",
    "Semantics",
    "SeparatorInstance",
    "SeparatorValidation",
    "ShiftConstruction",
    "SumEvidence",
    "VerificationReport",
    "affine_dimension",
    "auto_geometry",
    "build_sum_separators",
    "cantor_graph",
    "cantor_set",
    "chessboard_distance_transform",
    "circle",
    "claim_measure_chain",
    "collectively_nowhere_flat",
    "connected_components",
    "cube_coverage",
    "dilate",
    "dilate_fft",
    "dilate_naive",
    "dyadic_lines_check",
    "eps_density_margin",
    "erode",
    "flatness_by_projection",
    "generate",
    "hl_discrete_check",
    "is_grid_continuum",
    "is_nowhere_flat",
    "l_shape",
    "ladder_steps",
    "measure_estimate",
    "measure_lower_bound_check",
    "midpoint_iterate",
    "moment_curve",
    "negate",
    "nfold_sum",
    "nonflat_certificate",
    "normalized_sum_raster",
    "parallelotope_volume",
    "polyline",
    "projection_range",
    "random_separator_instance",
    "rasterize",
    "segment",
    "separation_by_search",
    "shift_construction",
    "validate_separators",
    "verify_claim",
    "verify_corollary_c1",
    "verify_example_cantor",
    "verify_hl_suite",
    "verify_theorem_main",
    "__version__",
]
