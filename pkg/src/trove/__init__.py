"""trove: 6-DoF ego-state estimation from three-rays-one-vertex corner
features observed by a stereo camera, with closed-form attitude recovery,
gyro/image fusion, and a built-in synthetic benchmark."""

from .attitude import (AlphaSolution, AttitudeEstimate, attitude_candidates,
                       compose_attitude, disambiguate_consistency,
                       disambiguate_pitch, recover_beta, solve_alpha)
from .errors import TroveError
from .features import (FeatureCase, Ray2, TroveFeature, build_feature,
                       case_of, classify_and_flip, standardize,
                       validate_properties)
from .geometry import (CameraModel, preset_camera, project_point,
                       reproject_inclination, rodrigues_rotate,
                       standardization_rotation)
from .pipeline import (Frame, LineH, PipelineConfig, VertexEstimate,
                       detect_feature, extract_edge_candidates, ransac_line,
                       segment_colors, solve_vertex)
from .stereo import (PositionEstimate, StereoObservation,
                     position_in_object_frame, predict_depth_sigma,
                     triangulate_vertex)
from .fusion import (FusionState, ImuSample, complementary_step, fuse_image,
                     inclination_error, sweep_weights)
from .simulate import (NoiseSpec, SceneSpec, TrajectorySpec, generate_dataset,
                       render_frame, synthesize_imu)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
