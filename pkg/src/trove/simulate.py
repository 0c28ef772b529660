"""Synthetic scene oracle: analytic projection of a colored parallelepiped,
flat-shaded stereo rendering, scripted trajectories, and IMU synthesis.

The object frame sits at the structure vertex: y along the vertical edge,
x along one horizontal edge, z = x cross y; the second horizontal edge lies
at (cos beta, 0, sin beta). The default scene mirrors the benchmark fixture:
a right-angled corner whose vertical edge hangs below the vertex, with the
top/left/right faces colored red/green/blue.

Poses are camera poses in the object frame: (position, quaternion) where the
quaternion (and R_a) map camera-frame coordinates to object-frame coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import dataio
from .errors import InvalidArgumentError, PoseInvalidError
from .features import FeatureCase, TroveFeature, build_feature
from .geometry import (CameraModel, quat_conjugate, quat_from_rotvec,
                       quat_multiply, quat_normalize, quat_rotate, quat_slerp,
                       quat_to_matrix, matrix_to_quat, quat_to_rotvec,
                       random_quat, standardization_rotation_batch, wrap_2pi)

GRAVITY = 9.80665

LABEL_NONE, LABEL_TOP, LABEL_LEFT, LABEL_RIGHT = 0, 1, 2, 3


# --- scene and trajectory specifications ---

@dataclass
class SceneSpec:
    """Colored corner structure with a known horizontal included angle."""

    beta: float = np.pi / 2
    edge_lengths: Tuple[float, float, float] = (0.5, 0.5, 0.5)  # x, y, z edges, m
    color_top: Tuple[int, int, int] = (255, 115, 0)
    color_left: Tuple[int, int, int] = (0, 250, 80)
    color_right: Tuple[int, int, int] = (0, 100, 215)
    background: Tuple[int, int, int] = (0, 0, 0)
    # gravity in object coordinates; the default scene's vertical edge points
    # down in the world, so gravity lies along +y
    gravity_obj: Tuple[float, float, float] = (0.0, GRAVITY, 0.0)

    def __post_init__(self):
        if not (0 < self.beta < np.pi):
            raise InvalidArgumentError("beta must lie in (0, pi)")

    def edges_obj(self):
        ex = np.array([1.0, 0.0, 0.0])
        ey = np.array([0.0, 1.0, 0.0])
        ez = np.array([np.cos(self.beta), 0.0, np.sin(self.beta)])
        return ex, ey, ez


@dataclass
class NoiseSpec:
    pixel_sigma: float = 0.0          # boundary jitter, px
    gyro_sigma: float = 0.0           # rad/s per axis
    gyro_bias: Tuple[float, float, float] = (0.0, 0.0, 0.0)  # rad/s
    accel_sigma: float = 0.0          # m/s^2 per axis


@dataclass
class TrajectorySpec:
    """Keyframed camera trajectory in the object frame.

    keyframes: list of (timestamp, position(3,), quaternion(4,)).
    Position interpolates with a piecewise cubic (Catmull-Rom); attitude with
    a spherical quadrangle blend.
    """

    keyframes: List[Tuple[float, np.ndarray, np.ndarray]]
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        ts = [k[0] for k in self.keyframes]
        if len(ts) < 2 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidArgumentError("keyframe timestamps must be strictly increasing")

    @property
    def t0(self):
        return self.keyframes[0][0]

    @property
    def t1(self):
        return self.keyframes[-1][0]

    def sample(self, t: float):
        """Interpolated (position, quaternion) at time t (clamped to range)."""
        keys = self.keyframes
        t = min(max(t, keys[0][0]), keys[-1][0])
        idx = 0
        for i in range(len(keys) - 1):
            if keys[i][0] <= t <= keys[i + 1][0]:
                idx = i
                break
        t0, p0, q0 = keys[idx]
        t1, p1, q1 = keys[idx + 1]
        h = (t - t0) / (t1 - t0)
        pm = keys[idx - 1][1] if idx > 0 else p0 - (p1 - p0)
        pp = keys[idx + 2][1] if idx + 2 < len(keys) else p1 + (p1 - p0)
        pos = _catmull_rom(pm, p0, p1, pp, h)
        qm = keys[idx - 1][2] if idx > 0 else _geodesic_extrapolate(q1, q0)
        qp = keys[idx + 2][2] if idx + 2 < len(keys) else \
            _geodesic_extrapolate(q0, q1)
        quat = _squad(qm, q0, q1, qp, h)
        return pos, quat


def _catmull_rom(pm, p0, p1, pp, h):
    m0 = 0.5 * (p1 - pm)
    m1 = 0.5 * (pp - p0)
    h2, h3 = h * h, h * h * h
    return ((2 * h3 - 3 * h2 + 1) * p0 + (h3 - 2 * h2 + h) * m0
            + (-2 * h3 + 3 * h2) * p1 + (h3 - h2) * m1)


def _align(q, ref):
    return -q if float(np.dot(q, ref)) < 0 else q


def _geodesic_extrapolate(q_from, q_to):
    """Phantom keyframe mirroring q_from through q_to along the geodesic."""
    q_from = _align(q_from, q_to)
    rel = quat_to_rotvec(quat_multiply(quat_conjugate(q_to), q_from))
    return quat_multiply(q_to, quat_from_rotvec(-rel))


def _squad_inner(q_prev, q, q_next):
    q_prev = _align(q_prev, q)
    q_next = _align(q_next, q)
    qc = quat_conjugate(q)
    log1 = quat_to_rotvec(quat_multiply(qc, q_next))
    log2 = quat_to_rotvec(quat_multiply(qc, q_prev))
    return quat_multiply(q, quat_from_rotvec(-(log1 + log2) / 8.0))


def _squad(qm, q0, q1, qp, h):
    q1 = _align(q1, q0)
    a = _squad_inner(qm, q0, q1)
    b = _squad_inner(q0, q1, qp)
    s1 = quat_slerp(q0, q1, h)
    s2 = quat_slerp(a, b, h)
    return quat_normalize(quat_slerp(s1, s2, 2 * h * (1 - h)))


# --- analytic projection (the oracle used by tests and the renderer) ---

def project_structure(r_a, p_v, beta, f_px):
    """Project the three structure edges analytically; fully batched.

    r_a: (..., 3, 3) camera->object rotations; p_v: (..., 3) vertex position
    in the camera frame. Returns (vertex_uv (..., 2), incl (..., 3) directed
    inclinations for the x, y, z edges, dirs (..., 3, 3) edge directions in
    camera coordinates, rows indexed x/y/z).
    """
    r_a = np.asarray(r_a, float)
    p_v = np.asarray(p_v, float)
    beta = np.asarray(beta, float)
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    ez = np.stack([np.cos(beta), np.zeros_like(beta), np.sin(beta)], -1)
    # edge directions in camera coords are R_a^T e
    rt = np.swapaxes(r_a, -1, -2)
    d_x = np.einsum("...ij,j->...i", rt, ex)
    d_y = np.einsum("...ij,j->...i", rt, ey)
    d_z = np.einsum("...ij,...j->...i", rt,
                    np.broadcast_to(ez, rt.shape[:-2] + (3,)))
    dirs = np.stack([d_x, d_y, d_z], -2)
    z = p_v[..., 2]
    uv = f_px * p_v[..., :2] / z[..., None]
    du = dirs[..., 0] * z[..., None] - p_v[..., None, 0] * dirs[..., 2]
    dv = dirs[..., 1] * z[..., None] - p_v[..., None, 1] * dirs[..., 2]
    incl = wrap_2pi(np.arctan2(dv, du))
    return uv, incl, dirs


def face_normals(dirs):
    """Outward normals of the three visible faces, batched.

    dirs rows are the x/y/z edge directions (a, b, c) in camera coordinates;
    returns rows (n_left, n_top, n_right) = (c x b, a x c, b x a).
    """
    a, b, c = dirs[..., 0, :], dirs[..., 1, :], dirs[..., 2, :]
    return np.stack([np.cross(c, b), np.cross(a, c), np.cross(b, a)], -2)


def pose_visible(r_a, p_v, beta, margin=1e-6):
    """True where all three faces are visible from the camera, batched."""
    _, _, dirs = project_structure(r_a, p_v, beta, 1.0)
    normals = face_normals(dirs)
    dots = np.sum(normals * np.asarray(p_v, float)[..., None, :], -1)
    front = np.asarray(p_v, float)[..., 2] > 0
    return np.all(dots < -margin, axis=-1) & front


def standardized_axis_components(r_a, p_v, beta, f_px):
    """Optical-axis components (a3, b3, c3) of the edge directions after the
    vertex-centering rotation; signs classify the configuration."""
    uv, _, dirs = project_structure(r_a, p_v, beta, f_px)
    rg = standardization_rotation_batch(uv, f_px)
    rotated = dirs @ np.swapaxes(rg, -1, -2)
    return rotated[..., 0, 2], rotated[..., 1, 2], rotated[..., 2, 2]


def analytic_feature(r_a, p_v, scene: SceneSpec, cam: CameraModel) -> TroveFeature:
    """Ground-truth standardized feature for a pose (the oracle path)."""
    uv, incl, _ = project_structure(r_a, p_v, scene.beta, cam.f_px)
    return build_feature(tuple(np.asarray(uv)), list(np.asarray(incl)), 1, cam)


# --- pose sampling for the property and acceptance suites ---

def _vertex_batch(n, cam, rng, depth_range):
    u = rng.uniform(-0.9 * cam.u0, 0.9 * (cam.width - 1 - cam.u0), n)
    v = rng.uniform(-0.9 * cam.v0, 0.9 * (cam.height - 1 - cam.v0), n)
    depth = rng.uniform(depth_range[0], depth_range[1], n)
    ray = np.stack([u, v, np.full(n, cam.f_px)], -1)
    ray /= np.linalg.norm(ray, axis=-1, keepdims=True)
    return ray * depth[:, None]


def sample_poses(case: FeatureCase, beta, n, cam: CameraModel, rng,
                 depth_range=(0.8, 2.2), min_component=1e-3):
    """Ground-truth poses whose projections fall in the requested case.

    Returns (r_a (n,3,3), p_v (n,3)). ALL_AWAY / ONE_TOWARDS are rejection
    sampled; ONE_PERPENDICULAR is constructed (measure-zero set) by placing
    one horizontal edge in the image plane of the standardized view.
    """
    if case is FeatureCase.ONE_TOWARDS and beta <= np.pi / 2:
        raise InvalidArgumentError("one-towards requires an obtuse beta")
    out_r, out_p = [], []
    have = 0
    while have < n:
        m = max(2 * (n - have), 256)
        if case is FeatureCase.ONE_PERPENDICULAR:
            r_a, p_v = _construct_perpendicular(beta, m, cam, rng, depth_range)
        else:
            r_a = quat_to_matrix(random_quat(rng, m))
            p_v = _vertex_batch(m, cam, rng, depth_range)
        ok = pose_visible(r_a, p_v, beta)
        a3, b3, c3 = standardized_axis_components(r_a, p_v, beta, cam.f_px)
        ok &= b3 > min_component
        if case is FeatureCase.ALL_AWAY:
            ok &= (a3 > min_component) & (c3 > min_component)
        elif case is FeatureCase.ONE_TOWARDS:
            ok &= ((a3 < -min_component) & (c3 > min_component)) | \
                  ((c3 < -min_component) & (a3 > min_component))
        else:
            ok &= (np.minimum(np.abs(a3), np.abs(c3)) < 1e-9) & \
                  (np.maximum(a3, c3) > min_component)
        idx = np.nonzero(ok)[0]
        out_r.append(r_a[idx])
        out_p.append(p_v[idx])
        have += idx.size
    r = np.concatenate(out_r)[:n]
    p = np.concatenate(out_p)[:n]
    return r, p


def _construct_perpendicular(beta, m, cam, rng, depth_range):
    """Standardized configurations with one horizontal edge in the image plane,
    then de-standardized onto random vertices."""
    alpha = rng.uniform(0.05, np.pi / 2 - 0.05, m)
    lam = rng.uniform(0, 2 * np.pi, m)
    sa, ca = np.sin(alpha), np.cos(alpha)
    d_y = np.stack([np.cos(lam) * sa, np.sin(lam) * sa, ca], -1)
    h1 = np.cross(d_y, np.array([0.0, 0.0, 1.0]))
    h1 /= np.linalg.norm(h1, axis=-1, keepdims=True)
    sign = np.where(rng.random(m) < 0.5, 1.0, -1.0)[:, None]
    perp = sign * h1
    perp_is_z = rng.random(m) < 0.5
    other = _rodrigues_batch(perp, d_y, np.where(perp_is_z, beta, -beta))
    d_x = np.where(perp_is_z[:, None], other, perp)
    d_z = np.where(perp_is_z[:, None], perp, other)
    del d_z  # implied by (d_x, d_y) and beta; only the frame matters below
    zc = np.cross(d_x, d_y)
    r_std = np.stack([d_x, d_y, zc], -1)  # columns: object axes in camera coords
    r_std = np.swapaxes(r_std, -1, -2)    # camera -> object
    p_v = _vertex_batch(m, cam, rng, depth_range)
    uv = cam.f_px * p_v[..., :2] / p_v[..., 2:3]
    rg = standardization_rotation_batch(uv, cam.f_px)
    return r_std @ rg, p_v


def _rodrigues_batch(v, axis, angle):
    angle = np.asarray(angle, float)[..., None]
    c, s = np.cos(angle), np.sin(angle)
    k_dot_v = np.sum(axis * v, -1, keepdims=True)
    return v * c + np.cross(axis, v) * s + axis * k_dot_v * (1 - c)


# --- rendering ---

@dataclass
class RenderResult:
    frame: "np.ndarray"          # (H, W, 3) uint8
    label_mask: "np.ndarray"     # (H, W) uint8, LABEL_* constants
    vertex_uv: Tuple[float, float]
    inclinations: Tuple[float, float, float]   # x, y, z edge rays, directed
    feature: TroveFeature


def _face_quads(scene: SceneSpec):
    ex, ey, ez = scene.edges_obj()
    lx, ly, lz = scene.edge_lengths
    top = np.array([np.zeros(3), lx * ex, lx * ex + lz * ez, lz * ez])
    right = np.array([np.zeros(3), ly * ey, ly * ey + lx * ex, lx * ex])
    left = np.array([np.zeros(3), lz * ez, lz * ez + ly * ey, ly * ey])
    return [(LABEL_TOP, scene.color_top, top),
            (LABEL_LEFT, scene.color_left, left),
            (LABEL_RIGHT, scene.color_right, right)]


def _quad_mask(poly_px, xs, ys):
    """Point-in-convex-quad test on pixel sample coordinates."""
    inside = np.ones(xs.shape, dtype=bool)
    # enforce counter-clockwise winding in pixel coordinates
    area = 0.0
    for i in range(4):
        x0, y0 = poly_px[i]
        x1, y1 = poly_px[(i + 1) % 4]
        area += x0 * y1 - x1 * y0
    poly = poly_px if area >= 0 else poly_px[::-1]
    for i in range(4):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % 4]
        inside &= (x1 - x0) * (ys - y0) - (y1 - y0) * (xs - x0) >= 0
    return inside


def render_frame(scene: SceneSpec, position, quat, cam: CameraModel,
                 supersample: int = 1, pixel_sigma: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> RenderResult:
    """Flat-shaded rasterization of the three visible faces.

    Raises PoseInvalidError when the vertex leaves the frame or any of the
    three faces turns away from the camera. pixel_sigma jitters the sample
    position per pixel, modeling boundary noise; supersample > 1 averages a
    subpixel grid which blends edge pixels (they then segment to None).
    """
    position = np.asarray(position, float)
    quat = quat_normalize(np.asarray(quat, float))
    r_a = quat_to_matrix(quat)
    p_v = r_a.T @ (-position)  # vertex (object origin) in camera coords
    if not pose_visible(r_a, p_v, scene.beta):
        raise PoseInvalidError("structure faces not all visible from this pose")
    uv, incl, _ = project_structure(r_a, p_v, scene.beta, cam.f_px)
    x_px, y_px = cam.to_pixels(uv[0], uv[1])
    if not (0 <= x_px < cam.width and 0 <= y_px < cam.height):
        raise PoseInvalidError("vertex projects outside the image")

    h, w = cam.height, cam.width
    frame = np.empty((h, w, 3), dtype=np.uint8)
    frame[:] = np.asarray(scene.background, dtype=np.uint8)
    label = np.zeros((h, w), dtype=np.uint8)

    quads = []
    for lab, color, corners_obj in _face_quads(scene):
        corners_cam = (r_a.T @ (corners_obj - position).T).T
        if np.any(corners_cam[:, 2] <= 1e-6):
            raise PoseInvalidError("face corner behind the camera")
        proj = cam.f_px * corners_cam[:, :2] / corners_cam[:, 2:3]
        px = np.stack(cam.to_pixels(proj[:, 0], proj[:, 1]), -1)
        quads.append((float(np.mean(corners_cam[:, 2])), lab, color, px))
    quads.sort(key=lambda q: -q[0])  # painter's order: far faces first

    def bbox(px):
        x0 = max(int(np.floor(px[:, 0].min())) - 2, 0)
        x1 = min(int(np.ceil(px[:, 0].max())) + 3, w)
        y0 = max(int(np.floor(px[:, 1].min())) - 2, 0)
        y1 = min(int(np.ceil(px[:, 1].max())) + 3, h)
        return x0, x1, y0, y1

    xs_base, ys_base = np.meshgrid(np.arange(w, dtype=float),
                                   np.arange(h, dtype=float))
    jitter = None
    if pixel_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        jitter = rng.normal(0.0, pixel_sigma, size=(2, h, w))

    ss = max(1, int(supersample))
    offs = (np.arange(ss) + 0.5) / ss - 0.5 if ss > 1 else np.array([0.0])
    acc = np.zeros((h, w, 3), dtype=np.float32) if ss > 1 else None
    for oy in offs:
        for ox in offs:
            sample = np.empty((h, w, 3), dtype=np.uint8)
            sample[:] = np.asarray(scene.background, dtype=np.uint8)
            for _, lab, color, px in quads:
                x0, x1, y0, y1 = bbox(px)
                if x0 >= x1 or y0 >= y1:
                    continue
                xs = xs_base[y0:y1, x0:x1] + ox
                ys = ys_base[y0:y1, x0:x1] + oy
                if jitter is not None:
                    xs = xs + jitter[0, y0:y1, x0:x1]
                    ys = ys + jitter[1, y0:y1, x0:x1]
                sub = _quad_mask(px, xs, ys)
                sample[y0:y1, x0:x1][sub] = color
            if ss > 1:
                acc += sample
            else:
                frame = sample
    if ss > 1:
        frame = np.clip(acc / (ss * ss) + 0.5, 0, 255).astype(np.uint8)

    # ground-truth labels always from unjittered pixel centers
    for _, lab, color, px in quads:
        x0, x1, y0, y1 = bbox(px)
        if x0 >= x1 or y0 >= y1:
            continue
        sub = _quad_mask(px, xs_base[y0:y1, x0:x1], ys_base[y0:y1, x0:x1])
        label[y0:y1, x0:x1][sub] = lab

    feature = build_feature(tuple(uv), list(incl), 1, cam)
    return RenderResult(frame=frame, label_mask=label, vertex_uv=tuple(uv),
                        inclinations=tuple(incl), feature=feature)


def stereo_positions(position, quat, cam: CameraModel):
    """Left and right camera centers for a parallel rig (baseline along +x)."""
    r_a = quat_to_matrix(np.asarray(quat, float))
    right = np.asarray(position, float) + cam.baseline_m * r_a[:, 0]
    return np.asarray(position, float), right


# --- IMU synthesis ---

def synthesize_imu(traj: TrajectorySpec, rate: float, gravity_obj,
                   rng: Optional[np.random.Generator] = None,
                   noise: Optional[NoiseSpec] = None):
    """Sample gyro/accel streams along the trajectory.

    The gyro sample at t_k is the mean body rate over (t_{k-1}, t_k], so exact
    per-interval integration reconstructs the attitude. The accelerometer
    reports gravity minus linear acceleration, in body coordinates.
    """
    noise = noise or traj.noise
    if rng is None:
        rng = np.random.default_rng(0)
    g_vec = np.asarray(gravity_obj, float)
    dt = 1.0 / rate
    times = np.arange(traj.t0 + dt, traj.t1 + dt / 2, dt)
    samples = []
    q_prev = traj.sample(traj.t0)[1]
    for t in times:
        pos, q = traj.sample(t)
        q_prev_al = _align(q_prev, q)
        gyro = quat_to_rotvec(quat_multiply(quat_conjugate(q_prev_al), q)) / dt
        h = 1e-3
        p0 = traj.sample(max(t - h, traj.t0))[0]
        p1 = traj.sample(min(t + h, traj.t1))[0]
        acc_w = (p0 - 2 * pos + p1) / (h * h)
        accel = quat_rotate(quat_conjugate(q), g_vec - acc_w)
        gyro = gyro + np.asarray(noise.gyro_bias, float)
        if noise.gyro_sigma > 0:
            gyro = gyro + rng.normal(0, noise.gyro_sigma, 3)
        if noise.accel_sigma > 0:
            accel = accel + rng.normal(0, noise.accel_sigma, 3)
        samples.append((float(t), gyro.astype(float), accel.astype(float)))
        q_prev = q
    return samples


# --- dataset generation ---

def default_scene(beta=np.pi / 2) -> SceneSpec:
    return SceneSpec(beta=beta)


def look_at_attitude(position, up_obj=(0.0, 1.0, 0.0)):
    """Attitude looking at the object-frame origin with +v roughly along up_obj."""
    c = np.asarray(position, float)
    fwd = -c / np.linalg.norm(c)
    up = np.asarray(up_obj, float)
    y = up - np.dot(up, fwd) * fwd
    ny = np.linalg.norm(y)
    if ny < 1e-9:
        raise InvalidArgumentError("viewing direction parallel to the up axis")
    y /= ny
    x = np.cross(y, fwd)
    r_a = np.stack([x, y, fwd], -1)
    return matrix_to_quat(r_a)


def orbit_trajectory(duration=8.0, keyframe_dt=0.8, radius=(1.0, 2.0),
                     seed=0, noise: Optional[NoiseSpec] = None,
                     wobble_deg=6.0) -> TrajectorySpec:
    """Smooth wandering trajectory that keeps the corner visible.

    The camera stays in the all-negative octant of the object frame (the
    region from which all three faces of the default scene are visible) and
    sweeps the requested radius range.
    """
    rng = np.random.default_rng(seed)
    times = np.arange(0.0, duration + keyframe_dt / 2, keyframe_dt)
    keys = []
    az0 = rng.uniform(0.6, 0.9)
    el0 = rng.uniform(0.6, 0.9)
    for i, t in enumerate(times):
        frac = t / max(duration, 1e-9)
        r = radius[0] + (radius[1] - radius[0]) * 0.5 * (1 - np.cos(2 * np.pi * frac))
        az = az0 + 0.25 * np.sin(2 * np.pi * frac + rng.normal(0, 0.05))
        el = el0 + 0.2 * np.sin(4 * np.pi * frac + rng.normal(0, 0.05))
        pos = -r * np.array([np.cos(el) * np.sin(az),
                             np.sin(el),
                             np.cos(el) * np.cos(az)])
        q = look_at_attitude(pos)
        wob = np.deg2rad(wobble_deg) * rng.normal(0, 1, 3) * np.array([1, 1, 1.5])
        q = quat_multiply(q, quat_from_rotvec(wob * np.sin(2 * np.pi * frac + i)))
        keys.append((float(t), pos, quat_normalize(q)))
    return TrajectorySpec(keyframes=keys, noise=noise or NoiseSpec())


def generate_dataset(scene: SceneSpec, traj: TrajectorySpec, cam: CameraModel,
                     out_dir, frame_rate=60.0, imu_rate=240.0, seed=0,
                     noise: Optional[NoiseSpec] = None,
                     supersample: int = 1) -> Path:
    """Render a stereo dataset to disk; deterministic for a fixed seed.

    Layout: frames/left_%06d.ppm, frames/right_%06d.ppm, imu.csv, truth.csv,
    scene.cfg, seed.txt. Frame count over [t0, t1] at rate r is
    round((t1-t0)*r) + 1 (both endpoints included).
    """
    noise = noise or traj.noise
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    n_frames = int(round((traj.t1 - traj.t0) * frame_rate)) + 1
    times = traj.t0 + np.arange(n_frames) / frame_rate

    truth_rows = []
    for i, t in enumerate(times):
        pos, q = traj.sample(float(t))
        left_pos, right_pos = stereo_positions(pos, q, cam)
        for name, p in (("left", left_pos), ("right", right_pos)):
            res = render_frame(scene, p, q, cam, supersample=supersample,
                               pixel_sigma=noise.pixel_sigma,
                               rng=np.random.default_rng(rng.integers(2 ** 63)))
            dataio.write_ppm(out / "frames" / f"{name}_{i:06d}.ppm", res.frame)
        truth_rows.append((float(t), q, pos))

    imu = synthesize_imu(traj, imu_rate, scene.gravity_obj,
                         rng=np.random.default_rng(seed + 1), noise=noise)
    dataio.write_imu_csv(out / "imu.csv", imu)

    # truth at IMU timestamps as well as the frame instants
    dense = {float(t): traj.sample(float(t)) for t, _, _ in imu}
    for t, q, pos in truth_rows:
        dense[t] = (pos, q)
    rows = [(t, dense[t][1], dense[t][0]) for t in sorted(dense)]
    dataio.write_truth_csv(out / "truth.csv", rows)

    cfg = {
        "beta_deg": np.rad2deg(scene.beta),
        "edge_x_m": scene.edge_lengths[0],
        "edge_y_m": scene.edge_lengths[1],
        "edge_z_m": scene.edge_lengths[2],
        "color_top": ",".join(str(c) for c in scene.color_top),
        "color_left": ",".join(str(c) for c in scene.color_left),
        "color_right": ",".join(str(c) for c in scene.color_right),
        "gravity_obj": ",".join(f"{g:.6f}" for g in scene.gravity_obj),
        "f_px": cam.f_px, "width": cam.width, "height": cam.height,
        "u0": cam.u0, "v0": cam.v0, "baseline_m": cam.baseline_m,
        "frame_rate_hz": frame_rate, "imu_rate_hz": imu_rate,
        "latency_s": 0.0,
        "pixel_sigma": noise.pixel_sigma,
        "gyro_sigma": noise.gyro_sigma,
        "gyro_bias": ",".join(f"{b:.9f}" for b in noise.gyro_bias),
        "accel_sigma": noise.accel_sigma,
    }
    dataio.write_kv_config(out / "scene.cfg", cfg)
    (out / "seed.txt").write_text(f"{seed}\n")
    return out
