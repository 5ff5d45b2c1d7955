"""bogwatch: sky-camera irradiance nowcasting, berry counting, and crop
heat-risk reporting."""

__version__ = "0.1.0"

from .berries import connected_components, count, density_map, selective_watershed
from .camera import FisheyeCamera, load_camera, pixel_to_ray, ray_to_pixel
from .clouds import binarize, cloud_probability
from .flow import (
    GlobalMotion,
    MotionWeights,
    consistency_check,
    global_motion,
    lucas_kanade_flow,
    mask_flow,
)
from .forecast import (
    IrradianceSeries,
    OcclusionProfile,
    PredictionZone,
    build_prediction_zone,
    forecast_irradiance,
    occlusion_profile,
)
from .forest import ForestConfig, predict_forest, rank_features, train_random_forest
from .metrics import frechet, mape, mean_iou, normalize_minmax, r_squared
from .mlp import MlpConfig, predict_mlp, train_mlp
from .pipeline import PipelineConfig, RiskReport, load_config, run_pipeline
from .raster import FlowField, Raster, warp
from .solar import (
    ClearSkyModel,
    SunPosition,
    clear_sky_irradiance,
    fit_clear_sky,
    sun_pixel,
    sun_position,
)

__all__ = [
    "ClearSkyModel",
    "FisheyeCamera",
    "FlowField",
    "ForestConfig",
    "GlobalMotion",
    "IrradianceSeries",
    "MlpConfig",
    "MotionWeights",
    "OcclusionProfile",
    "PipelineConfig",
    "PredictionZone",
    "Raster",
    "RiskReport",
    "SunPosition",
    "__version__",
    "binarize",
    "build_prediction_zone",
    "clear_sky_irradiance",
    "cloud_probability",
    "connected_components",
    "consistency_check",
    "count",
    "density_map",
    "fit_clear_sky",
    "forecast_irradiance",
    "frechet",
    "global_motion",
    "load_camera",
    "load_config",
    "lucas_kanade_flow",
    "mape",
    "mask_flow",
    "mean_iou",
    "normalize_minmax",
    "occlusion_profile",
    "pixel_to_ray",
    "predict_forest",
    "predict_mlp",
    "r_squared",
    "rank_features",
    "ray_to_pixel",
    "run_pipeline",
    "selective_watershed",
    "sun_pixel",
    "sun_position",
    "train_mlp",
    "train_random_forest",
    "warp",
]
