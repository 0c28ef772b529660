import numpy as np
import pytest

from trove.errors import BehindCameraError, InvalidArgumentError
from trove.geometry import (CameraModel, axis_angle_matrix, geodesic_angle,
                            included_angle, matrix_to_quat, preset_camera,
                            project_point, quat_multiply, quat_pow,
                            quat_rotate, quat_slerp, quat_to_matrix,
                            random_quat, reproject_inclination,
                            rodrigues_rotate, standardization_rotation,
                            standardization_rotation_batch, wrap_line)
from conftest import oracle_axis_angle


class TestRodrigues:
    def test_quarter_turn_about_z(self):
        out = rodrigues_rotate((1, 0, 0), (0, 0, 1), np.pi / 2)
        assert np.allclose(out, (0, 1, 0), atol=1e-12)

    def test_zero_angle_identity(self):
        v = np.array([0.3, -1.2, 2.0])
        out = rodrigues_rotate(v, (0, 1, 0), 0.0)
        assert np.allclose(out, v, atol=0)

    def test_against_independent_oracle(self):
        axis = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
        got = rodrigues_rotate((1, 2, 3), axis, 0.7)
        expect = oracle_axis_angle(axis, 0.7) @ np.array([1.0, 2.0, 3.0])
        # frozen from the oracle above
        assert np.allclose(expect, [1.60709707, 1.25612149, 3.13678144], atol=1e-6)
        assert np.allclose(got, expect, atol=1e-12)

    def test_non_unit_axis_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rodrigues_rotate((1, 0, 0), (0, 0, 2), 0.5)

    def test_norm_preserved_and_composes(self, rng):
        axes = rng.normal(size=(200, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        v = rng.normal(size=(200, 3))
        a = rng.uniform(-np.pi, np.pi, 200)
        b = rng.uniform(-np.pi, np.pi, 200)
        once = rodrigues_rotate(rodrigues_rotate(v, axes, a), axes, b)
        direct = rodrigues_rotate(v, axes, a + b)
        assert np.allclose(np.linalg.norm(once, axis=1),
                           np.linalg.norm(v, axis=1), atol=1e-9)
        assert np.allclose(once, direct, atol=1e-9)


class TestStandardizationRotation:
    def test_principal_point_degenerate(self, cam720):
        axis, gamma, r = standardization_rotation(0.0, 0.0, cam720)
        assert gamma == 0.0
        assert np.allclose(r, np.eye(3))

    def test_45_degrees_on_x(self, cam720):
        axis, gamma, _ = standardization_rotation(cam720.f_px, 0.0, cam720)
        assert np.isclose(gamma, np.pi / 4)
        assert np.allclose(axis, (0, -1, 0))

    def test_maps_vertex_ray_to_axis(self, cam720):
        u, v = 300.0, -200.0
        _, _, r = standardization_rotation(u, v, cam720)
        ray = np.array([u, v, cam720.f_px])
        out = r @ ray
        assert abs(out[0]) < 1e-9 and abs(out[1]) < 1e-9 and out[2] > 0

    def test_batch_property_vertex_to_origin(self, cam720, rng):
        n = 100_000
        uv = np.stack([rng.uniform(-639, 639, n), rng.uniform(-359, 359, n)], -1)
        r = standardization_rotation_batch(uv, cam720.f_px)
        rays = np.concatenate([uv, np.full((n, 1), cam720.f_px)], -1)
        rotated = np.einsum("nij,nj->ni", r, rays)
        px = cam720.f_px * rotated[:, :2] / rotated[:, 2:3]
        assert np.max(np.abs(px)) < 1e-7


class TestReprojectInclination:
    def test_ray_through_vertex_direction_unchanged(self):
        psi = np.arctan2(-200.0, 300.0)
        assert np.isclose(reproject_inclination(psi, 300, -200, 0.4),
                          wrap_line(psi), atol=1e-12)

    def test_zero_gamma_identity(self):
        assert np.isclose(reproject_inclination(1.234, 50, 60, 0.0), 1.234)

    def test_pole_maps_to_itself(self):
        psi = np.arctan2(4.0, 3.0)
        a = psi + np.pi / 2
        out = reproject_inclination(a, 3.0, 4.0, 0.9)
        assert np.isclose(out, wrap_line(a), atol=1e-12)

    def test_matches_3d_rotation(self, cam720, rng):
        # the formula must equal rotating the in-plane direction vector by
        # the centering rotation and reading its image components
        for _ in range(200):
            u = rng.uniform(-600, 600)
            v = rng.uniform(-350, 350)
            alpha = rng.uniform(0, 2 * np.pi)
            _, gamma, r = standardization_rotation(u, v, cam720)
            m = r @ np.array([np.cos(alpha), np.sin(alpha), 0.0])
            expect = np.arctan2(m[1], m[0]) % (2 * np.pi)
            got = reproject_inclination(alpha, u, v, gamma, directed=True)
            assert np.isclose(got, expect, atol=1e-9)

    def test_gamma_range_enforced(self):
        with pytest.raises(InvalidArgumentError):
            reproject_inclination(0.3, 1, 1, np.pi / 2)


class TestProjectPoint:
    def test_optical_axis(self, cam720):
        assert np.allclose(project_point((0, 0, 1.0), cam720), (0, 0))

    def test_similar_triangles(self, cam720):
        assert np.allclose(project_point((0.1, 0, 1.0), cam720), (70.2, 0))

    def test_1080p_example(self):
        cam = preset_camera("1080p")
        out = project_point((0.2, -0.1, 2.5), cam)
        assert np.allclose(out, (83.92, -41.96))

    def test_behind_camera(self, cam720):
        with pytest.raises(BehindCameraError):
            project_point((0, 0, -0.5), cam720)


class TestQuaternions:
    def test_matrix_round_trip(self, rng):
        q = random_quat(rng, 500)
        back = matrix_to_quat(quat_to_matrix(q))
        flip = np.sign(q[:, :1])
        assert np.allclose(back, q * flip, atol=1e-9)

    def test_rotate_matches_matrix(self, rng):
        q = random_quat(rng, 100)
        v = rng.normal(size=(100, 3))
        assert np.allclose(quat_rotate(q, v),
                           np.einsum("nij,nj->ni", quat_to_matrix(q), v),
                           atol=1e-12)

    def test_slerp_endpoints_and_midpoint(self, rng):
        q0 = random_quat(rng)
        q1 = random_quat(rng)
        assert np.allclose(quat_slerp(q0, q1, 0.0), q0, atol=1e-12)
        mid = quat_slerp(q0, q1, 0.5)
        d0 = abs(float(mid @ q0))
        d1 = abs(float(mid @ q1))
        assert np.isclose(d0, d1, atol=1e-12)

    def test_pow_halves_angle(self, rng):
        q = random_quat(rng)
        if q[0] < 0:
            q = -q
        h = quat_pow(q, 0.5)
        assert np.allclose(quat_multiply(h, h), q, atol=1e-12)


class TestCameraModel:
    def test_default_principal_point_centered(self):
        cam = CameraModel(f_px=702, width=1280, height=720)
        assert cam.u0 == (1280 - 1) / 2 and cam.v0 == (720 - 1) / 2

    def test_invalid_focal(self):
        with pytest.raises(InvalidArgumentError):
            CameraModel(f_px=0, width=10, height=10)

    def test_pixel_round_trip(self, cam720):
        u, v = cam720.centered(100.0, 200.0)
        x, y = cam720.to_pixels(u, v)
        assert np.isclose(x, 100) and np.isclose(y, 200)


def test_geodesic_angle_small_angles(rng):
    axis = np.array([0.0, 1.0, 0.0])
    for ang in (1e-8, 1e-6, 0.1, 2.0):
        r1 = axis_angle_matrix(axis, 0.3)
        r2 = axis_angle_matrix(axis, 0.3 + ang)
        assert np.isclose(geodesic_angle(r1, r2), ang, rtol=1e-6)


def test_included_angle_symmetry():
    assert np.isclose(included_angle(0.1, 2 * np.pi - 0.1), 0.2)
    assert np.isclose(included_angle(1.0, 1.0 + np.pi), np.pi)
