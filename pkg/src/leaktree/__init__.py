"""Leak localization in tree-shaped water distribution networks from leaf readings."""

from .errors import (
    AmbiguousSubtreeError,
    CoverageError,
    DegenerateDenominatorError,
    InfeasiblePressureError,
    InvalidNetworkError,
    LeakTreeError,
    NoLeakDetectedError,
    OutOfRangeError,
    PreconditionError,
    ScenarioError,
)
from .forward import (
    BoundaryConditions,
    HydraulicState,
    LeakSpec,
    MeasurementSet,
    add_noise,
    add_offset,
    measurements_of,
    solve_no_leak,
    solve_with_leak,
)
from .hydraulics import WATER, PhysicalConstants, PipeGeometry, d_resistance_dq, head_loss, resistance_term
from .localization import (
    LocalizationResult,
    apparent_head,
    detect_leak,
    estimate_leak_params,
    localize_single_pipe,
    localize_tree,
    propagate,
)
from .network import Network, Pipe
from .uncertainty import (
    NoiseSpec,
    OffsetSpec,
    confidence_interval,
    first_order_offset,
    mc_experiment,
    variance_x,
)

__version__ = "0.1.0"
