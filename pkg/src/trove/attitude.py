"""Closed-form attitude recovery from a standardized feature.

With m = cos(theta), n = cos(beta), p = cos(phi), q = cos(psi) and
x = tan(alpha), the projection geometry reduces to a quadratic in y = 1/x^2:

    (m^2 - n^2) y^2 + (2 m p q - n^2 p^2 - n^2 q^2) y + (1 - n^2) p^2 q^2 = 0

solved with the stable (citardauq) pairing to avoid cancellation near the
tangent configuration. Root feasibility depends on the edge configuration:
when all edges point away from the focal point exactly one root satisfies
n * (1 + m y / (p q)) > 0; when one horizontal edge points toward the focal
point both roots satisfy 1 + m y / (p q) > 0 and the measurement is genuinely
two-fold ambiguous. When one horizontal edge is perpendicular to the optical
axis the solution collapses to alpha = arccos(tan(theta) / tan(beta)).

The full attitude is composed from four stages applied about the focal point:
center the vertex (R_gamma), rotate the vertical-edge ray onto the image
+v axis (R_phi, about the optical axis), tilt the vertical edge onto the
camera y axis (R_alpha = Rx(alpha - pi/2)), and finally align the x edge
(R_beta = Ry(beta'), tan(beta') = -cos(psi)/(cos(alpha) sin(psi))).
R_a = R_beta R_alpha R_phi R_gamma maps camera-frame coordinates to
object-frame coordinates. Every detection admits a second interpretation
R_beta R_alpha R_phi R_{z,pi} R_gamma with the imaginary box on the opposite
side of the rays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import (AmbiguousHintError, InconsistentAnglesError,
                     InconsistentAttitudeError, InvalidArgumentError,
                     NoConsistentInterpretationError)
from .features import FeatureCase, TroveFeature, case_of
from .geometry import (CameraModel, axis_angle_matrix, geodesic_angle,
                       quat_slerp, quat_to_matrix, matrix_to_quat, rot_x,
                       rot_y, rot_z, standardization_rotation_batch)

DELTA_CLAMP = 1e-12
N_ZERO_EPS = 1e-12
DEFAULT_CONSISTENCY_THRESHOLD = np.deg2rad(2.0)
DEFAULT_PITCH_MARGIN = np.deg2rad(1.0)


@dataclass(frozen=True)
class AlphaSolution:
    """Vertical-edge elevation angle(s) recovered from the included angles."""

    alpha: float
    case: FeatureCase
    alternate: Optional[float] = None
    tangent: bool = False


@dataclass
class AttitudeEstimate:
    """Camera attitude in the object frame, with its mirror interpretation."""

    r_a: np.ndarray
    alternate_r: Optional[np.ndarray] = None
    quality: dict = field(default_factory=dict)

    @property
    def quaternion(self):
        return matrix_to_quat(self.r_a)

    @property
    def pitch(self) -> float:
        """Elevation of the optical axis toward -y of the object frame.

        Negative when the camera looks along the structure's vertical edge
        (downward for the standard scene whose vertical edge hangs below the
        vertex).
        """
        return pitch_of(self.r_a)


def pitch_of(r_a: np.ndarray) -> float:
    return float(np.arcsin(np.clip(-np.asarray(r_a)[1, 2], -1.0, 1.0)))


def _quadratic_roots(m, n, p, q):
    """Positive roots y = 1/tan(alpha)^2 of the attitude quadratic, batched.

    Returns (y1, y2, tangent) with NaN marking absent roots. Raises through
    the caller when the discriminant is negative beyond DELTA_CLAMP.
    """
    m, n, p, q = np.broadcast_arrays(*(np.asarray(a, float) for a in (m, n, p, q)))
    A = m * m - n * n
    B = 2 * m * p * q - n * n * (p * p + q * q)
    C = (1 - n * n) * p * p * q * q
    delta = B * B - 4 * A * C
    # the tangency/clamp threshold scales with the coefficients: edge-on
    # views shrink the whole quadratic, not just its discriminant
    scale = B * B + np.abs(4 * A * C)
    bad = delta < -DELTA_CLAMP * scale
    delta = np.where(delta < 0, 0.0, delta)
    tangent = delta <= DELTA_CLAMP * scale

    # n == 0 makes the quadratic a perfect square; use the exact double root
    # instead of letting the clamped discriminant eat half the precision.
    n_zero = np.abs(n) <= N_ZERO_EPS
    lin = np.abs(A) <= 1e-300  # theta == pi - beta collapses to a linear equation

    sqrt_d = np.sqrt(delta)
    qq = -0.5 * (B + np.where(B >= 0, sqrt_d, -sqrt_d))
    with np.errstate(divide="ignore", invalid="ignore"):
        y1 = np.where(lin, -C / B, qq / np.where(A == 0, 1.0, A))
        y2 = np.where(lin, np.nan, C / np.where(qq == 0, np.nan, qq))
        y_sq = -p * q / np.where(m == 0, np.nan, m)
    y1 = np.where(n_zero, y_sq, y1)
    y2 = np.where(n_zero, np.nan, y2)

    # collapse numerically identical roots
    dup = np.isfinite(y1) & np.isfinite(y2) & (
        np.abs(y1 - y2) <= 1e-9 * np.maximum(np.abs(y1), np.abs(y2)))
    y2 = np.where(dup | tangent, np.nan, y2)

    y1 = np.where(y1 > 0, y1, np.nan)
    y2 = np.where(y2 > 0, y2, np.nan)
    return y1, y2, tangent, bad


def _feasibility(y, m, n, p, q, towards: bool):
    """Root feasibility margin; feasible where the margin is positive."""
    with np.errstate(invalid="ignore"):
        base = 1 + m * y / (p * q)
    if towards:
        return base
    return np.where(np.abs(n) <= N_ZERO_EPS, -np.abs(base), n * base)


def solve_alpha_batch(theta, phi, psi, beta, towards=False):
    """Vectorized solve. Returns (alpha, alternate, tangent) arrays.

    For the all-away/perpendicular family exactly one root is feasible and
    `alternate` is NaN; with `towards=True` both positive roots are returned,
    primary = smaller alpha.
    """
    theta, phi, psi, beta = np.broadcast_arrays(
        *(np.asarray(a, float) for a in (theta, phi, psi, beta)))
    m, n, p, q = np.cos(theta), np.cos(beta), np.cos(phi), np.cos(psi)
    y1, y2, tangent, bad = _quadratic_roots(m, n, p, q)
    if np.any(bad):
        raise InconsistentAnglesError("discriminant negative beyond tolerance")

    if towards:
        f1 = _feasibility(y1, m, n, p, q, True) > 0
        f2 = _feasibility(y2, m, n, p, q, True) > 0
        y1 = np.where(f1, y1, np.nan)
        y2 = np.where(f2, y2, np.nan)
        a1 = np.arctan(1 / np.sqrt(y1))
        a2 = np.arctan(1 / np.sqrt(y2))
        lo = np.fmin(a1, a2)
        hi = np.fmax(a1, a2)
        alt = np.where(np.isfinite(a1) & np.isfinite(a2), hi, np.nan)
        return lo, alt, tangent

    m1 = _feasibility(y1, m, n, p, q, False)
    m2 = _feasibility(y2, m, n, p, q, False)
    # n == 0: the double root is the solution (criterion degenerates to 0)
    m1 = np.where((np.abs(n) <= N_ZERO_EPS) & np.isfinite(y1), 1.0, m1)
    pick = np.where(np.nan_to_num(m1, nan=-np.inf) >=
                    np.nan_to_num(m2, nan=-np.inf), y1, y2)
    feasible = np.fmax(np.nan_to_num(m1, nan=-np.inf),
                       np.nan_to_num(m2, nan=-np.inf)) > -1e-12
    pick = np.where(feasible, pick, np.nan)
    alpha = np.arctan(1 / np.sqrt(pick))
    return alpha, np.full_like(alpha, np.nan), tangent


def feasible_root_count(theta, phi, psi, beta):
    """Number of roots satisfying the all-away feasibility criterion, batched."""
    m, n, p, q = (np.cos(np.asarray(a, float))
                  for a in (theta, beta, phi, psi))
    y1, y2, _, _ = _quadratic_roots(m, n, p, q)
    n_zero = np.abs(n) <= N_ZERO_EPS
    c1 = np.where(n_zero, np.isfinite(y1),
                  _feasibility(y1, m, n, p, q, False) > 0)
    c2 = np.where(n_zero, np.isfinite(y2),
                  _feasibility(y2, m, n, p, q, False) > 0)
    return (np.nan_to_num(c1) > 0).astype(int) + (np.nan_to_num(c2) > 0).astype(int)


def solve_alpha(theta, phi, psi, beta, case: FeatureCase) -> AlphaSolution:
    """Recover the vertical-edge elevation angle from the included angles.

    theta, phi, psi are the standardized included angles; beta the known
    horizontal included angle of the structure. `case` must match the angle
    configuration (see features.case_of).
    """
    for name, a in (("theta", theta), ("phi", phi), ("psi", psi)):
        if not (0 < a < np.pi):
            raise InvalidArgumentError(f"{name} must lie in (0, pi)")
    if case is FeatureCase.ONE_PERPENDICULAR:
        ratio = np.tan(theta) / np.tan(beta)
        if not (-1e-9 <= ratio <= 1 + 1e-9):
            raise InconsistentAnglesError(
                f"tan(theta)/tan(beta) = {ratio:.6f} outside [0, 1]")
        return AlphaSolution(alpha=float(np.arccos(np.clip(ratio, 0.0, 1.0))),
                             case=case)

    towards = case is FeatureCase.ONE_TOWARDS
    alpha, alt, tangent = solve_alpha_batch(theta, phi, psi, beta, towards=towards)
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise InconsistentAnglesError("no feasible root for the measured angles")
    alt = float(alt) if np.isfinite(alt) else None
    return AlphaSolution(alpha=alpha, case=case, alternate=alt,
                         tangent=bool(tangent) and towards)


# --- attitude composition ---

def beta_prime(alpha, psi):
    """Final yaw-alignment stage angle: tan(beta') = -cos(psi)/(cos(alpha) sin(psi))."""
    return np.arctan2(-np.cos(psi), np.cos(alpha) * np.sin(psi))


def compose_attitude_batch(alpha, vertex_uv, y_incl, psi, f_px, mirrored=False):
    """Batched R_a = R_beta R_alpha R_phi [R_z(pi)] R_gamma."""
    alpha = np.asarray(alpha, float)
    y_incl = np.asarray(y_incl, float)
    psi = np.asarray(psi, float)
    r_gamma = standardization_rotation_batch(vertex_uv, f_px)
    phi_angle = np.pi / 2 - y_incl + (np.pi if mirrored else 0.0)
    r = rot_z(phi_angle) @ r_gamma
    r = rot_x(alpha - np.pi / 2) @ r
    return rot_y(beta_prime(alpha, psi)) @ r


def compose_attitude(sol: AlphaSolution, feature: TroveFeature,
                     cam: CameraModel) -> AttitudeEstimate:
    """Compose the attitude for a solved alpha and a standardized feature.

    alternate_r holds the mirror interpretation (imaginary box on the
    opposite side of the rays). The second quadratic root, when present,
    needs its own compose_attitude call.
    """
    if not feature.standardized:
        raise InvalidArgumentError("compose_attitude expects a standardized feature")
    uv = np.asarray(feature.raw_vertex, float)
    y_incl = feature.y_ray.inclination
    r = compose_attitude_batch(sol.alpha, uv, y_incl, feature.psi, cam.f_px)
    r_alt = compose_attitude_batch(sol.alpha, uv, y_incl, feature.psi, cam.f_px,
                                   mirrored=True)
    quality = {"alpha": sol.alpha, "case": sol.case.value, "tangent": sol.tangent}
    return AttitudeEstimate(r_a=r, alternate_r=r_alt, quality=quality)


def attitude_candidates(feature: TroveFeature, beta: float, cam: CameraModel,
                        right_angle_tol: float = 1e-4) -> List[AttitudeEstimate]:
    """All attitude candidates for a feature: roots x interpretations.

    Each returned estimate carries a single rotation in r_a (alternate_r is
    unpacked into its own entry) so disambiguation can treat them uniformly.
    """
    case = case_of(feature, beta, right_angle_tol=right_angle_tol)
    sol = solve_alpha(feature.theta, feature.phi, feature.psi, beta, case)
    alphas = [sol.alpha] + ([sol.alternate] if sol.alternate is not None else [])
    out = []
    for a in alphas:
        est = compose_attitude(AlphaSolution(alpha=a, case=case, tangent=sol.tangent),
                               feature, cam)
        out.append(AttitudeEstimate(r_a=est.r_a, quality=dict(est.quality, root=a)))
        out.append(AttitudeEstimate(r_a=est.alternate_r,
                                    quality=dict(est.quality, root=a, mirrored=True)))
    return out


# --- ambiguity rejection ---

def rotation_distance(r1, r2) -> float:
    return float(geodesic_angle(r1, r2))


def disambiguate_consistency(
        candidates_left: Sequence[AttitudeEstimate],
        candidates_right: Sequence[AttitudeEstimate],
        threshold: float = DEFAULT_CONSISTENCY_THRESHOLD) -> AttitudeEstimate:
    """Keep the interpretation both cameras agree on.

    Scores every left/right pairing by geodesic distance; the winner must be
    below `threshold` and every other sub-threshold pairing must agree with
    it (otherwise the observation cannot discriminate, e.g. both cameras saw
    the same vertex).
    """
    if not candidates_left or not candidates_right:
        raise InvalidArgumentError("need candidates from both cameras")
    pairs = []
    for i, cl in enumerate(candidates_left):
        for j, cr in enumerate(candidates_right):
            pairs.append((rotation_distance(cl.r_a, cr.r_a), i, j))
    pairs.sort(key=lambda t: t[0])
    best, bi, bj = pairs[0]
    if best > threshold:
        raise NoConsistentInterpretationError(
            f"closest pairing differs by {np.rad2deg(best):.3f} deg "
            f"(threshold {np.rad2deg(threshold):.3f})")
    winner = candidates_left[bi]
    for d, i, j in pairs[1:]:
        if d > threshold:
            break
        if rotation_distance(candidates_left[i].r_a, winner.r_a) > threshold:
            raise NoConsistentInterpretationError(
                "multiple mutually inconsistent pairings below threshold")
    q = quat_slerp(matrix_to_quat(candidates_left[bi].r_a),
                   matrix_to_quat(candidates_right[bj].r_a), 0.5)
    quality = dict(candidates_left[bi].quality)
    quality["consistency_angle"] = best
    return AttitudeEstimate(r_a=quat_to_matrix(q), quality=quality)


def disambiguate_pitch(candidates: Sequence[AttitudeEstimate],
                       pitch_hint: float,
                       margin: float = DEFAULT_PITCH_MARGIN,
                       sign_only: bool = False) -> AttitudeEstimate:
    """Select the candidate matching a pitch prior.

    With sign_only=True only the sign of the hint is trusted and a unique
    sign match is required; otherwise the candidate nearest the hinted pitch
    wins among sign matches. A hint smaller than `margin` is rejected.
    """
    if not candidates:
        raise InvalidArgumentError("no candidates to disambiguate")
    if abs(pitch_hint) < margin:
        raise AmbiguousHintError("pitch hint magnitude below margin")
    sign = np.sign(pitch_hint)
    matches = [c for c in candidates if np.sign(c.pitch) == sign]
    if not matches:
        raise NoConsistentInterpretationError("no candidate matches the hinted pitch sign")
    if len(matches) == 1:
        return matches[0]
    if sign_only:
        raise AmbiguousHintError("several candidates share the hinted pitch sign")
    return min(matches, key=lambda c: abs(c.pitch - pitch_hint))


# --- inverse map: attitude -> beta ---

def _centering_matrix(feature: TroveFeature) -> np.ndarray:
    """Rebuild R_gamma from the feature's pre-standardization vertex."""
    u, v = feature.raw_vertex
    s = np.hypot(u, v)
    if s < 1e-12:
        return np.eye(3)
    return axis_angle_matrix(np.array([v, -u, 0.0]) / s, feature.gamma)


def recover_beta(r_a: np.ndarray, feature: TroveFeature,
                 right_angle_tol: float = 1e-4) -> float:
    """Recover the horizontal included angle from a known attitude.

    Strips the centering and roll stages off R_a to expose R_beta R_alpha,
    whose middle row is (0, sin(alpha), cos(alpha)); beta then follows from
    the closed form evaluated at that alpha and the measured angles.
    """
    if not feature.standardized:
        raise InvalidArgumentError("recover_beta expects a standardized feature")
    r_gamma = _centering_matrix(feature)
    r_phi = rot_z(np.pi / 2 - feature.y_ray.inclination)
    m_mat = np.asarray(r_a) @ r_gamma.T @ r_phi.T
    alpha = float(np.arctan2(m_mat[1, 1], m_mat[1, 2]))
    if not (0 < alpha < np.pi / 2):
        raise InconsistentAttitudeError(
            f"extracted alpha {alpha:.6f} outside (0, pi/2)")
    theta, phi, psi = feature.theta, feature.phi, feature.psi
    half = np.pi / 2
    if abs(phi - half) <= right_angle_tol or abs(psi - half) <= right_angle_tol:
        # tan(beta) = tan(theta)/cos(alpha); beta is obtuse in this configuration
        return float(np.mod(np.arctan2(np.tan(theta), np.cos(alpha)), np.pi))
    x2 = np.tan(alpha) ** 2
    m, p, q = np.cos(theta), np.cos(phi), np.cos(psi)
    sign = 1.0 if min(phi, psi) > half else -1.0
    num = 1 + m / (x2 * p * q)
    den = np.sqrt((1 + 1 / (x2 * p * p)) * (1 + 1 / (x2 * q * q)))
    return float(np.arccos(np.clip(sign * num / den, -1.0, 1.0)))
