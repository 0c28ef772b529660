"""Stereo localization: vertex disparity to camera position in the object
frame, plus the first-order depth error model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnreliableDepthError
from .geometry import CameraModel
from .pipeline import VertexEstimate


@dataclass
class StereoObservation:
    """Matched vertex estimates from a rectified stereo pair.

    Vertex coordinates are principal-point-centered, left camera first.
    """

    v_left: VertexEstimate
    v_right: VertexEstimate
    timestamp: float = 0.0


@dataclass
class PositionEstimate:
    p_c: np.ndarray            # camera position in the object frame, m
    depth: float               # vertex depth in the left camera, m
    predicted_sigma: float     # one-pixel depth error at this depth, m


def triangulate_vertex(obs: StereoObservation, cam: CameraModel,
                       d_min: float = 1.0,
                       vertical_tol: float = 2.0) -> np.ndarray:
    """Vertex position in the left camera frame from horizontal disparity.

    Z = B f / d with d = u_left - u_right; X and Y follow from the left
    vertex. Rejects non-positive or sub-threshold disparity and a vertical
    disparity above `vertical_tol` (miscalibrated pair).
    """
    u_l, v_l = obs.v_left.uv
    u_r, v_r = obs.v_right.uv
    d = u_l - u_r
    if d <= 0 or d < d_min:
        raise UnreliableDepthError(f"disparity {d:.3f} px below {d_min} px")
    if abs(v_l - v_r) > vertical_tol:
        raise UnreliableDepthError(
            f"vertical disparity {abs(v_l - v_r):.2f} px exceeds {vertical_tol}")
    z = cam.baseline_m * cam.f_px / d
    return np.array([u_l * z / cam.f_px, v_l * z / cam.f_px, z])


def position_in_object_frame(p_v_cam, r_a) -> np.ndarray:
    """Camera position in the object frame: P_c = -R_a P_v."""
    return -(np.asarray(r_a, float) @ np.asarray(p_v_cam, float))


def predict_depth_sigma(depth: float, e_d: float, cam: CameraModel) -> float:
    """First-order depth error for a disparity error of e_d pixels:
    e_Z = e_d * L^2 / (B f)."""
    if depth <= 0:
        raise InvalidArgumentError("depth must be positive")
    return e_d * depth * depth / (cam.baseline_m * cam.f_px)


def predict_position_sigma(depth: float, e_d: float, cam: CameraModel,
                           u: float = 0.0, v: float = 0.0) -> np.ndarray:
    """(e_X, e_Y, e_Z) from the same disparity error, using
    dX/dd = -u L^2/(B f^2) and dY/dd = -v L^2/(B f^2)."""
    e_z = predict_depth_sigma(depth, e_d, cam)
    scale = e_d * depth * depth / (cam.baseline_m * cam.f_px ** 2)
    return np.array([abs(u) * scale, abs(v) * scale, e_z])
