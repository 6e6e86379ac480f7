"""Numerical laboratory for the Borell-Brascamp-Lieb and Prekopa-Leindler
inequalities: sup-convolutions, deficits, p-concave hulls, 1-D transports,
and quantitative stability certificates on uniform grids."""

from .gridfn import (
    GeometryMismatchError,
    GridFunction,
    LevelSet,
    ZeroMassError,
    cap,
    dump_gfn,
    integral,
    l1_distance,
    layer_cake_integral,
    level_set,
    load_gfn,
    normalize,
    restrict,
    translate,
)
from .hull import (
    HullResult,
    PPlane,
    convex_hull_set,
    hull_deficit,
    is_p_concave,
    p_concave_hull,
    p_plane_eval,
    tail_lower_bound,
    tail_ratio,
)
from .lab import (
    SweepRow,
    fit_loglog_slope,
    gen_dented,
    gen_sharpness_pair,
    gen_two_bump,
    sweep,
)
from .means import (
    MeanParams,
    check_holder_derivative,
    check_pq_switch,
    exponent_map,
    p_mean,
    p_mean_arr,
)
from .stability import (
    Cone2D,
    EquipartitionResult,
    StabilityReport,
    certify_linear,
    certify_main,
    certify_symmetric_difference,
    cone_equipartition_2d,
    fiber_project,
    fiber_reduction_check,
    shave,
)
from .supconv import DeficitReport, deficit, minkowski_combination, sup_convolution, verify_bbl_hypothesis
from .transport import (
    DiagnosticsReport,
    MassMismatchError,
    TransportMap1D,
    height_transport,
    level_diagnostics,
    pushforward_check,
    spatial_transport,
)

__version__ = "0.1.0"
