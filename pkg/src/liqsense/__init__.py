"""Touchscreen liquid sensing toolkit.

Processes mutual-capacitance heatmap sessions end to end: a
deterministic virtual touch controller, sensitivity calibration,
droplet detection, capacitance physics models, and frame-wise
classifiers.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend
from .calibration import (
    CalibrationPoint,
    CompensationMap,
    SensitivityMap,
    apply_compensation,
    build_sensitivity_map,
    compensation_map,
    noise_reduction_curve,
    tps_evaluate,
    tps_fit,
)
from .detection import (
    ContainerFeatures,
    DetectionParams,
    DropRegion,
    TriggerParams,
    container_features,
    detect_deposit_events,
    detect_droplets,
    extract_patch,
    region_magnitude,
)
from .heatmap import (
    DeviceProfile,
    Frame,
    Session,
    per_pixel_std,
    reconstruct_measured,
    sample_delta,
    temporal_average,
)
from .physics import (
    CellGeometry,
    FilmLayer,
    LiquidProperties,
    PhysicsFit,
    QuadraticFit,
    c_eff,
    c_epsilon,
    c_sigma,
    fit_physics_model,
    fit_quadratic_model,
    predict_physics,
    predict_quadratic,
    r_squared,
    series_capacitance,
)
from .session_io import load_session_json, save_session_json
from .simulator import (
    ClassSpec,
    PlacedSample,
    SimConfig,
    VirtualController,
    VirtualLiquid,
    generate_dataset,
    run_scenario,
)

__all__ = [
    "CalibrationPoint",
    "CellGeometry",
    "ClassSpec",
    "CompensationMap",
    "ContainerFeatures",
    "DetectionParams",
    "DeviceProfile",
    "DropRegion",
    "FilmLayer",
    "Frame",
    "LiquidProperties",
    "PhysicsFit",
    "PlacedSample",
    "QuadraticFit",
    "SensitivityMap",
    "Session",
    "SimConfig",
    "TriggerParams",
    "VirtualController",
    "VirtualLiquid",
    "__version__",
    "apply_compensation",
    "build_sensitivity_map",
    "c_eff",
    "c_epsilon",
    "c_sigma",
    "compensation_map",
    "container_features",
    "detect_deposit_events",
    "detect_droplets",
    "extract_patch",
    "fit_physics_model",
    "fit_quadratic_model",
    "generate_dataset",
    "kernel_backend",
    "load_session_json",
    "noise_reduction_curve",
    "per_pixel_std",
    "predict_physics",
    "predict_quadratic",
    "r_squared",
    "reconstruct_measured",
    "region_magnitude",
    "run_scenario",
    "sample_delta",
    "save_session_json",
    "series_capacitance",
    "temporal_average",
    "tps_evaluate",
    "tps_fit",
]
