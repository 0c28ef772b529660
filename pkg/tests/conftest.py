"""Shared fixtures and the independent forward-projection oracle.

The oracle lives here, written against the raw definitions (homogeneous
projection of edge points, explicit axis-angle rotation) rather than the
library's batched code paths, so solver tests check two separate routes.
"""

import numpy as np
import pytest

from trove.geometry import CameraModel, preset_camera


@pytest.fixture
def cam720() -> CameraModel:
    return preset_camera("720p")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def oracle_axis_angle(axis, angle):
    """Rotation matrix via quaternion conjugation, independent of the
    library's matrix construction."""
    axis = np.asarray(axis, float)
    w = np.cos(angle / 2.0)
    x, y, z = axis * np.sin(angle / 2.0)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def oracle_centering(u, v, f):
    """Explicit vertex-centering rotation for the oracle path."""
    s = np.hypot(u, v)
    if s < 1e-12:
        return np.eye(3)
    return oracle_axis_angle(np.array([v, -u, 0.0]) / s, np.arctan2(s, f))


def oracle_project_structure(r_a, p_v, beta, f):
    """Vertex pixel and directed ray inclinations by projecting edge points.

    Walks a short distance along each 3D edge, projects both endpoints
    through the pinhole, and reads the image-space direction; no reuse of the
    library's derivative shortcut.
    """
    r_a = np.asarray(r_a, float)
    p_v = np.asarray(p_v, float)
    edges_obj = {
        "x": np.array([1.0, 0.0, 0.0]),
        "y": np.array([0.0, 1.0, 0.0]),
        "z": np.array([np.cos(beta), 0.0, np.sin(beta)]),
    }

    def proj(p):
        return np.array([f * p[0] / p[2], f * p[1] / p[2]])

    uv = proj(p_v)
    incl = {}
    for k, e in edges_obj.items():
        d = r_a.T @ e
        t = 1e-7
        tip = proj(p_v + t * d)
        g = tip - uv
        incl[k] = np.arctan2(g[1], g[0]) % (2 * np.pi)
    return uv, incl


def oracle_true_alpha(r_a, p_v, f):
    """Angle between the vertical edge and the optical axis after centering."""
    uv = np.array([f * p_v[0] / p_v[2], f * p_v[1] / p_v[2]])
    rg = oracle_centering(uv[0], uv[1], f)
    b_std = rg @ (np.asarray(r_a).T @ np.array([0.0, 1.0, 0.0]))
    return float(np.arccos(np.clip(b_std[2], -1, 1)))


def grid_search_vertex(lines, span=2048.0, levels=14, n=101):
    """Independent zooming grid search for the minimum-SSE vertex.

    The window keeps a 6-grid-step margin around each level's argmin so that
    elongated valleys (nearly parallel line pairs) cannot escape it.
    """
    cos_t = np.array([np.cos(l.theta) for l in lines])
    sin_t = np.array([np.sin(l.theta) for l in lines])
    rho = np.array([l.rho for l in lines])
    cx = cy = 0.0
    for _ in range(levels):
        xs = np.linspace(cx - span, cx + span, n)
        ys = np.linspace(cy - span, cy + span, n)
        gx, gy = np.meshgrid(xs, ys)
        e = rho[:, None, None] - cos_t[:, None, None] * gx \
            - sin_t[:, None, None] * gy
        k = np.unravel_index(np.argmin((e * e).sum(axis=0)), gx.shape)
        cx, cy = float(gx[k]), float(gy[k])
        step = 2 * span / (n - 1)
        span = 6 * step
    return cx, cy
