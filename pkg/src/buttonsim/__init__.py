"""buttonsim: velocity-aware push-button modeling, compensation, rendering,
and design optimization."""

from .actuation import (
    ActuationCurve,
    ActuationTable,
    finalize_actuation,
    interpolate_at,
    interpolate_velocities,
    parse_table,
    serialize_table,
)
from .capture import (
    CaptureMeta,
    CaptureSession,
    GRID_STEP_MM,
    PressSegment,
    SyncedTrace,
    average_presses,
    filter_trace,
    grid_displacements,
    parse_capture,
    segment_and_grid,
    serialize_capture,
    synchronize,
)
from .compensation import (
    CompensationState,
    GainSchedule,
    compensate_model,
    error_metric,
    run_compensation,
    update_signals,
)
from .errors import (
    ButtonSimError,
    DivergenceError,
    DomainError,
    FeatureError,
    FitError,
    ParseError,
    SyncError,
    ValidationError,
)
from .model import FdvvModel, build_model, model_from_dict, model_to_dict, parse_model, serialize_model
from .plant import VirtualPlant, calibrate, identity_plant, parse_plant, serialize_plant
from .render import (
    MovingAverage,
    PressTrajectory,
    RenderTrace,
    SimConfig,
    VelocityEstimator,
    constant_velocity_press,
    minimum_jerk_press,
    run_press,
    select_actuation,
    trajectory_from_dict,
)
from .spline import BSplineCurve, FitReport, bic_star, fit_curve, select_order
from .vibration import (
    VibrationDescriptor,
    WaveTemplate,
    detect_onset,
    extract_features,
    generate_templates,
    synthesize,
    write_wav,
)

__version__ = "0.1.0"
