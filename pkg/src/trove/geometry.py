"""Rotations, quaternions, the pinhole camera model, and ray re-projection.

Conventions (used by every module in this package):
  * Camera frame is right-handed with +x right, +y down, +z along the optical
    axis into the scene.
  * Image coordinates (u, v) are centered on the principal point, u to the
    right and v down, so projection is sign-free: u = f*X/Z, v = f*Y/Z.
  * Line inclinations live in [0, pi); directed ray inclinations in [0, 2*pi).
  * Quaternions are (w, x, y, z), unit norm, and q / -q are the same rotation.

Most functions broadcast over leading axes so batched evaluation (used heavily
by the property and acceptance suites) shares one code path with scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BehindCameraError, InvalidArgumentError

TWO_PI = 2.0 * np.pi


# --- angle helpers ---

def wrap_2pi(a):
    """Wrap angle(s) to [0, 2*pi)."""
    return np.mod(a, TWO_PI)


def wrap_line(a):
    """Wrap line inclination(s) to [0, pi)."""
    return np.mod(a, np.pi)


def included_angle(a1, a2):
    """Included angle between two directed rays, in [0, pi]."""
    d = np.abs(np.mod(a1 - a2, TWO_PI))
    return np.minimum(d, TWO_PI - d)


def signed_offset(a, ref):
    """Signed angle from ray `ref` to ray `a`, in (-pi, pi]."""
    d = np.mod(a - ref, TWO_PI)
    return np.where(d > np.pi, d - TWO_PI, d)


# --- rotation matrices ---

def rot_x(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([
        np.stack([o, z, z], -1),
        np.stack([z, c, -s], -1),
        np.stack([z, s, c], -1),
    ], -2)


def rot_y(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([
        np.stack([c, z, s], -1),
        np.stack([z, o, z], -1),
        np.stack([-s, z, c], -1),
    ], -2)


def rot_z(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([
        np.stack([c, -s, z], -1),
        np.stack([s, c, z], -1),
        np.stack([z, z, o], -1),
    ], -2)


def axis_angle_matrix(axis, angle):
    """Right-handed rotation matrix about a unit axis; broadcasts."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.stack([
        np.stack([c + x * x * C, x * y * C - z * s, x * z * C + y * s], -1),
        np.stack([y * x * C + z * s, c + y * y * C, y * z * C - x * s], -1),
        np.stack([z * x * C - y * s, z * y * C + x * s, c + z * z * C], -1),
    ], -2)


def rodrigues_rotate(v, axis, angle):
    """Rotate vector(s) v about unit axis by angle (right-handed).

    Raises InvalidArgumentError if the axis is not unit length within 1e-9.
    """
    v = np.asarray(v, dtype=float)
    axis = np.asarray(axis, dtype=float)
    norms = np.linalg.norm(axis, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= 1e-9):
        raise InvalidArgumentError("rotation axis must be unit length")
    angle = np.asarray(angle, dtype=float)[..., None]
    c, s = np.cos(angle), np.sin(angle)
    k_dot_v = np.sum(axis * v, axis=-1, keepdims=True)
    return v * c + np.cross(axis, v) * s + axis * k_dot_v * (1.0 - c)


def geodesic_angle(r1, r2):
    """Rotation angle between two rotation matrices, stable near zero.

    Uses ||R1 - R2||_F = 2*sqrt(2)*sin(theta/2).
    """
    d = np.linalg.norm(np.asarray(r1) - np.asarray(r2), axis=(-2, -1))
    return 2.0 * np.arcsin(np.clip(d / (2.0 * np.sqrt(2.0)), 0.0, 1.0))


def is_rotation(r, tol=1e-9):
    r = np.asarray(r)
    ortho = np.linalg.norm(r @ r.T - np.eye(3)) <= tol * 10
    return bool(ortho and abs(np.linalg.det(r) - 1.0) <= tol * 10)


# --- quaternions (w, x, y, z) ---

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_multiply(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], -1)


def quat_rotate(q, v):
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_rotvec(r):
    r = np.asarray(r, dtype=float)
    ang = np.linalg.norm(r, axis=-1, keepdims=True)
    half = 0.5 * ang
    small = ang < 1e-12
    # sin(x)/x -> 1 as x -> 0
    k = np.where(small, 0.5, np.sin(half) / np.where(small, 1.0, ang))
    return np.concatenate([np.cos(half), r * k], axis=-1)


def quat_to_rotvec(q):
    q = quat_normalize(q)
    q = np.where(q[..., :1] < 0, -q, q)
    u = q[..., 1:]
    s = np.linalg.norm(u, axis=-1, keepdims=True)
    ang = 2.0 * np.arctan2(s, q[..., :1])
    small = s < 1e-12
    return u * np.where(small, 2.0, ang / np.where(small, 1.0, s))


def quat_pow(q, t):
    """Geodesic power q**t for a unit quaternion."""
    return quat_from_rotvec(quat_to_rotvec(q) * t)


def quat_slerp(q0, q1, t):
    """Spherical linear interpolation along the shorter arc."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.sum(q0 * q1) < 0:
        q1 = -q1
    rel = quat_multiply(quat_conjugate(q0), q1)
    return quat_multiply(q0, quat_pow(rel, t))


def quat_angle(q0, q1):
    """Geodesic rotation angle between two unit quaternions, stable near 0.

    Uses ||q0 -/+ q1|| = 2 sin(theta/4) with the sign chosen for the short arc.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if float(np.sum(q0 * q1)) < 0:
        q1 = -q1
    d = float(np.linalg.norm(q0 - q1))
    return 4.0 * np.arcsin(min(1.0, d / 2.0))


def quat_to_matrix(q):
    q = quat_normalize(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def matrix_to_quat(r):
    """Rotation matrix to quaternion (w, x, y, z), w >= 0.

    Branches on the largest of trace and the diagonal terms so the divisor
    never degenerates.
    """
    r = np.asarray(r, dtype=float)
    m00, m01, m02 = r[..., 0, 0], r[..., 0, 1], r[..., 0, 2]
    m10, m11, m12 = r[..., 1, 0], r[..., 1, 1], r[..., 1, 2]
    m20, m21, m22 = r[..., 2, 0], r[..., 2, 1], r[..., 2, 2]
    tr = m00 + m11 + m22

    qw = np.stack([1.0 + tr, m21 - m12, m02 - m20, m10 - m01], -1)
    qx = np.stack([m21 - m12, 1.0 + m00 - m11 - m22, m01 + m10, m02 + m20], -1)
    qy = np.stack([m02 - m20, m01 + m10, 1.0 - m00 + m11 - m22, m12 + m21], -1)
    qz = np.stack([m10 - m01, m02 + m20, m12 + m21, 1.0 - m00 - m11 + m22], -1)

    choices = np.stack([qw, qx, qy, qz], -2)
    scores = np.stack([tr, m00, m11, m22], -1)
    idx = np.argmax(scores, axis=-1)
    q = np.take_along_axis(choices, idx[..., None, None].repeat(4, -1), -2)[..., 0, :]
    q = quat_normalize(q)
    return np.where(q[..., :1] < 0, -q, q)


def random_quat(rng, n=None):
    """Uniform random unit quaternion(s)."""
    shape = (4,) if n is None else (n, 4)
    q = rng.normal(size=shape)
    return quat_normalize(q)


# --- camera model ---

@dataclass
class CameraModel:
    """Pinhole stereo camera with square pixels and one focal length.

    f_px is the focal length in pixels; (u0, v0) the principal point in raw
    pixel coordinates; baseline_m the stereo baseline along camera +x.
    rect_map, when present, is an (H, W, 2) float32 array of per-pixel
    (du, dv) corrections applied to detected edge coordinates only.
    """

    f_px: float
    width: int
    height: int
    u0: Optional[float] = None
    v0: Optional[float] = None
    baseline_m: float = 0.12
    rect_map: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.u0 is None:
            self.u0 = (self.width - 1) / 2.0
        if self.v0 is None:
            self.v0 = (self.height - 1) / 2.0
        if not (self.f_px > 0):
            raise InvalidArgumentError("focal length must be positive")
        if not (self.baseline_m > 0):
            raise InvalidArgumentError("baseline must be positive")
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise InvalidArgumentError("principal point must lie inside the image")
        if self.rect_map is not None:
            expected = (self.height, self.width, 2)
            if self.rect_map.shape != expected:
                raise InvalidArgumentError(
                    f"rect_map shape {self.rect_map.shape} != {expected}")

    def centered(self, x_px, y_px):
        """Raw pixel coordinates -> principal-point-centered (u, v)."""
        return np.asarray(x_px, float) - self.u0, np.asarray(y_px, float) - self.v0

    def to_pixels(self, u, v):
        """Centered (u, v) -> raw pixel coordinates."""
        return np.asarray(u, float) + self.u0, np.asarray(v, float) + self.v0


def preset_camera(resolution: str) -> CameraModel:
    """Stereo cameras used throughout the tests: '720p' or '1080p'."""
    if resolution == "720p":
        return CameraModel(f_px=702.0, width=1280, height=720, baseline_m=0.12)
    if resolution == "1080p":
        return CameraModel(f_px=1049.0, width=1920, height=1080, baseline_m=0.12)
    raise InvalidArgumentError(f"unknown camera preset {resolution!r}")


def project_point(p, cam: CameraModel):
    """Project camera-frame point(s) to centered image coordinates.

    Raises BehindCameraError if any point has Z <= 0.
    """
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError("point is not in front of the camera")
    return np.stack([cam.f_px * p[..., 0] / z, cam.f_px * p[..., 1] / z], -1)


# --- vertex-centering rotation and ray re-projection ---

def standardization_rotation(u, v, cam: CameraModel):
    """Rotation about the focal point that carries the vertex ray onto the
    optical axis.

    Returns (axis, gamma, R). For a vertex at the principal point the axis is
    undefined and the identity is returned with gamma = 0.

    axis = (v, -u, 0)/hypot(u, v), gamma = arctan(hypot(u, v)/f).
    """
    u = float(u)
    v = float(v)
    if not (np.isfinite(u) and np.isfinite(v)):
        raise InvalidArgumentError("vertex coordinates must be finite")
    s = np.hypot(u, v)
    if s < 1e-12:
        return np.array([0.0, 0.0, 1.0]), 0.0, np.eye(3)
    axis = np.array([v, -u, 0.0]) / s
    gamma = np.arctan2(s, cam.f_px)
    return axis, gamma, axis_angle_matrix(axis, gamma)


def standardization_rotation_batch(uv, f_px):
    """Batched version: uv is (..., 2); returns (..., 3, 3) matrices."""
    uv = np.asarray(uv, dtype=float)
    u, v = uv[..., 0], uv[..., 1]
    s = np.hypot(u, v)
    safe = np.where(s < 1e-12, 1.0, s)
    axis = np.stack([v / safe, -u / safe, np.zeros_like(u)], -1)
    gamma = np.arctan2(s, f_px)
    r = axis_angle_matrix(axis, gamma)
    eye = np.broadcast_to(np.eye(3), r.shape)
    return np.where((s < 1e-12)[..., None, None], eye, r)


def reproject_inclination(alpha, u, v, gamma, directed=False):
    """Inclination of a ray through vertex (u, v) after the centering rotation.

    alpha' = psi + arctan(tan(alpha - psi) / cos(gamma)), psi = atan2(v, u).
    With directed=False the result is a line inclination in [0, pi); with
    directed=True the ray side is preserved and the result lies in [0, 2*pi).
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0) or np.any(gamma >= np.pi / 2):
        raise InvalidArgumentError("gamma must lie in [0, pi/2)")
    psi = np.arctan2(v, u)
    d = np.asarray(alpha, dtype=float) - psi
    out = psi + np.arctan2(np.sin(d), np.cos(d) * np.cos(gamma))
    return wrap_2pi(out) if directed else wrap_line(out)
