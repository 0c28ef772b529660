"""Representation and normalization of three-rays-one-vertex (TROVE) features.

A feature is three directed rays leaving a common image vertex: the
projections of one vertical and two horizontal structure edges. After the
vertex-centering rotation the three included angles (theta, phi, psi) sum to
2*pi for a directly visible corner ("standard type"); when one face of the
corner is occluded the sum falls short and exactly one ray must be rotated by
pi to restore a consistent configuration.

Roles: y_ray is the projected vertical edge; of the two horizontal rays,
x_ray is the one at negative signed offset from y_ray (this matches a
right-handed object frame in the y-down camera convention used throughout).
theta is the angle between x_ray and z_ray, phi between z_ray and y_ray,
psi between x_ray and y_ray.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, InvalidFeatureError
from .geometry import (CameraModel, included_angle, reproject_inclination,
                       signed_offset, standardization_rotation, wrap_2pi)

ANGLE_SUM_TOL_SYNTHETIC = 1e-6
ANGLE_SUM_TOL_DETECTED = 2e-3


class FeatureCase(enum.Enum):
    ALL_AWAY = "all_away"
    ONE_PERPENDICULAR = "one_perpendicular"
    ONE_TOWARDS = "one_towards"


@dataclass(frozen=True)
class Ray2:
    """Directed image ray: origin plus outward inclination in [0, 2*pi)."""

    origin: tuple
    inclination: float

    def __post_init__(self):
        object.__setattr__(self, "inclination", float(wrap_2pi(self.inclination)))


@dataclass(frozen=True)
class TroveFeature:
    """Three labeled rays and the vertex they share.

    vertex is the current ray origin; raw_vertex keeps the detected image
    position (needed to rebuild the centering rotation after standardization,
    when vertex becomes (0, 0)).
    """

    vertex: tuple
    x_ray: Ray2
    y_ray: Ray2
    z_ray: Ray2
    theta: float
    phi: float
    psi: float
    standardized: bool = False
    flipped_ray: Optional[str] = None
    raw_vertex: Optional[tuple] = None
    gamma: float = 0.0

    @property
    def rays(self):
        return self.x_ray, self.y_ray, self.z_ray

    @property
    def angle_sum(self):
        return self.theta + self.phi + self.psi


def _angles(incl_x, incl_y, incl_z):
    theta = float(included_angle(incl_x, incl_z))
    phi = float(included_angle(incl_z, incl_y))
    psi = float(included_angle(incl_x, incl_y))
    return theta, phi, psi


def feature_from_inclinations(vertex, incl_x, incl_y, incl_z,
                              standardized=False, raw_vertex=None,
                              flipped_ray=None, gamma=0.0) -> TroveFeature:
    vertex = (float(vertex[0]), float(vertex[1]))
    theta, phi, psi = _angles(incl_x, incl_y, incl_z)
    mk = lambda a: Ray2(vertex, a)
    return TroveFeature(vertex=vertex, x_ray=mk(incl_x), y_ray=mk(incl_y),
                        z_ray=mk(incl_z), theta=theta, phi=phi, psi=psi,
                        standardized=standardized, flipped_ray=flipped_ray,
                        raw_vertex=raw_vertex if raw_vertex is not None else vertex,
                        gamma=gamma)


def assign_horizontal_roles(incl_y, incl_a, incl_b):
    """Order the two horizontal inclinations as (x, z).

    x_ray sits at negative signed offset from the vertical ray; for a
    standard-type feature the offsets are -psi and +phi.
    """
    da = signed_offset(incl_a, incl_y)
    db = signed_offset(incl_b, incl_y)
    if da < 0 <= db:
        return incl_a, incl_b
    if db < 0 <= da:
        return incl_b, incl_a
    # Both on one side: the configuration is not a standard type; order so the
    # flip in classify_and_flip can still reason about it.
    return (incl_a, incl_b) if da <= db else (incl_b, incl_a)


def standardize(feature: TroveFeature, cam: CameraModel) -> TroveFeature:
    """Rotate the feature so its vertex projects onto the principal point.

    Ray inclinations are re-projected through the centering rotation; the
    ray side (direction from the vertex) is preserved.
    """
    if feature.standardized:
        return feature
    u, v = feature.vertex
    _, gamma, _ = standardization_rotation(u, v, cam)
    new = [float(reproject_inclination(r.inclination, u, v, gamma, directed=True))
           for r in feature.rays]
    return feature_from_inclinations(
        (0.0, 0.0), new[0], new[1], new[2], standardized=True,
        raw_vertex=feature.vertex, flipped_ray=feature.flipped_ray, gamma=gamma)


def classify_and_flip(feature: TroveFeature,
                      tol: float = ANGLE_SUM_TOL_SYNTHETIC) -> TroveFeature:
    """Normalize a standardized feature to the standard type.

    If the angle sum is already 2*pi the feature is returned unchanged (up to
    a consistent x/z role reassignment). If it falls short, the largest
    included angle must equal the sum of the other two; the ray that is not a
    side of that largest angle is rotated by pi and the roles are rebuilt.
    A sum exceeding 2*pi, or a tie for the largest angle, is rejected.
    """
    if not feature.standardized:
        raise InvalidArgumentError("classify_and_flip expects a standardized feature")
    s = feature.angle_sum
    if s > 2 * np.pi + tol:
        raise InvalidFeatureError(
            f"included angles sum to {s:.6f} > 2*pi: geometrically impossible")

    incl = {"x_ray": feature.x_ray.inclination,
            "y_ray": feature.y_ray.inclination,
            "z_ray": feature.z_ray.inclination}
    flipped = feature.flipped_ray

    if s < 2 * np.pi - tol:
        angles = {"theta": feature.theta, "phi": feature.phi, "psi": feature.psi}
        ordered = sorted(angles.items(), key=lambda kv: kv[1], reverse=True)
        if ordered[0][1] - ordered[1][1] <= tol:
            raise InvalidFeatureError("largest included angle is ambiguous")
        if abs(s - 2 * ordered[0][1]) > 3 * tol:
            raise InvalidFeatureError(
                "angle deficit inconsistent with a single occluded face")
        # the ray not bounding the largest angle
        opposite = {"theta": "y_ray", "phi": "x_ray", "psi": "z_ray"}
        flip_name = opposite[ordered[0][0]]
        incl[flip_name] = wrap_2pi(incl[flip_name] + np.pi)
        flipped = flip_name

    x_incl, z_incl = assign_horizontal_roles(incl["y_ray"], incl["x_ray"], incl["z_ray"])
    out = feature_from_inclinations(feature.vertex, x_incl, incl["y_ray"], z_incl,
                                    standardized=True, raw_vertex=feature.raw_vertex,
                                    flipped_ray=flipped, gamma=feature.gamma)
    if abs(out.angle_sum - 2 * np.pi) > 3 * tol:
        raise InvalidFeatureError(
            f"angle sum {out.angle_sum:.6f} not restored to 2*pi by flipping")
    return out


def case_of(feature: TroveFeature, beta: float,
            right_angle_tol: float = 1e-4) -> FeatureCase:
    """Classify the configuration of the horizontal edges.

    ALL_AWAY when both phi and psi are obtuse, ONE_PERPENDICULAR when either
    equals pi/2 within tolerance, ONE_TOWARDS when exactly one is acute. The
    latter two require an obtuse beta; with beta <= pi/2 both projected
    angles are strictly obtuse, so near-right measurements classify ALL_AWAY
    and an acute one is rejected.
    """
    if not (0 < beta < np.pi):
        raise InvalidArgumentError("beta must lie in (0, pi)")
    phi, psi = feature.phi, feature.psi
    half = np.pi / 2
    if (phi < half) and (psi < half):
        raise InvalidFeatureError("both phi and psi acute: impossible projection")
    if beta <= half:
        if min(phi, psi) < half - right_angle_tol:
            raise InvalidFeatureError(
                "acute projected angle contradicts a non-obtuse beta")
        return FeatureCase.ALL_AWAY
    if abs(phi - half) <= right_angle_tol or abs(psi - half) <= right_angle_tol:
        return FeatureCase.ONE_PERPENDICULAR
    if phi > half and psi > half:
        return FeatureCase.ALL_AWAY
    return FeatureCase.ONE_TOWARDS


@dataclass(frozen=True)
class PropertyReport:
    """Per-property screening result for a standardized standard-type feature."""

    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def validate_properties(feature: TroveFeature, beta: float) -> PropertyReport:
    """Screen a feature against the projective range properties.

    The projected horizontal angle theta exceeds beta whenever both
    horizontal edges point away from (or one is perpendicular to) the optical
    axis, i.e. whenever phi and psi are not acute; with one edge pointing
    toward the camera the difference takes either sign, so no inequality is
    enforced there. When beta <= pi/2 both phi and psi are obtuse; when beta
    is obtuse at most one of them is not.
    """
    theta, phi, psi = feature.theta, feature.phi, feature.psi
    half = np.pi / 2
    checks = {
        "theta_below_pi": theta < np.pi,
        "angles_in_range": all(0 < a < np.pi for a in (theta, phi, psi)),
        "angle_sum_2pi": abs(feature.angle_sum - 2 * np.pi) < ANGLE_SUM_TOL_DETECTED,
    }
    if min(phi, psi) >= half - 1e-9:
        checks["theta_exceeds_beta"] = theta > beta
    if beta <= half:
        checks["phi_psi_obtuse"] = phi > half and psi > half
    else:
        checks["at_most_one_acute"] = not (phi < half and psi < half)
    return PropertyReport(checks=checks)


def build_feature(vertex, inclinations, vertical_index, cam: CameraModel,
                  tol: float = ANGLE_SUM_TOL_SYNTHETIC) -> TroveFeature:
    """Full normalization chain for three detected rays.

    inclinations are directed image inclinations at `vertex` (centered
    coordinates); vertical_index says which of the three is the projected
    vertical edge. Standardizes, flips if needed, and assigns x/z roles.
    """
    incl = list(inclinations)
    if len(incl) != 3:
        raise InvalidArgumentError("exactly three rays are required")
    y = incl.pop(vertical_index)
    # provisional roles; classify_and_flip rebuilds them after normalization
    raw = feature_from_inclinations(vertex, incl[0], y, incl[1])
    return classify_and_flip(standardize(raw, cam), tol=tol)


def label_free_feature(vertex, inclinations, beta, cam: CameraModel,
                       tol: float = ANGLE_SUM_TOL_SYNTHETIC) -> TroveFeature:
    """Build a feature when no ray is tagged as vertical.

    Tries each ray as the vertical edge and keeps the unique labeling that
    passes the property screen; rejects if none or several do.
    """
    survivors = []
    for k in range(3):
        try:
            f = build_feature(vertex, inclinations, k, cam, tol=tol)
        except InvalidFeatureError:
            continue
        if validate_properties(f, beta).passed:
            survivors.append((k, f))
    if not survivors:
        raise InvalidFeatureError("no vertical-ray labeling passes the property screen")
    if len(survivors) > 1:
        raise InvalidFeatureError("vertical-ray labeling is ambiguous")
    return survivors[0][1]
