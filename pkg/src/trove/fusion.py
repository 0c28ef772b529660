"""Attitude fusion: a complementary filter on the IMU stream and geodesic
(Slerp) blending of image attitude estimates with the gyro-propagated prior.

Attitude quaternions map body (camera) coordinates to reference (object)
coordinates. The filter runs at the IMU rate; whenever an image estimate
arrives the propagated prior g_q = increment * q_prev is pulled toward the
image estimate along the geodesic:

    q_k = q_img * (q_img^-1 * g_q)^(1 - w_i)

so w_i = 1 returns the image estimate and w_i = 0 the propagated prior,
both exactly. The accelerometer enters only through the complementary
correction (weight w_a) and can never observe rotation about gravity.

The per-sample quaternion math runs on plain floats: the filter sits in the
hot loop at IMU rate and small-array overhead dominates otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DatasetError, InvalidArgumentError, StreamError

DEFAULT_GRAVITY = (0.0, 0.0, -9.80665)  # reference-frame gravity vector
W_A_MAX = 0.004


@dataclass
class ImuSample:
    timestamp: float
    gyro: Tuple[float, float, float]    # rad/s, body frame
    accel: Tuple[float, float, float]   # m/s^2, gravity minus acceleration


@dataclass(frozen=True)
class FusionState:
    q_hat: Tuple[float, float, float, float]
    last_timestamp: float
    w_a: float = 0.0
    w_i: float = 0.02

    def __post_init__(self):
        if not (0.0 <= self.w_a <= W_A_MAX):
            raise InvalidArgumentError(f"w_a must lie in [0, {W_A_MAX}]")
        if not (0.0 <= self.w_i <= 1.0):
            raise InvalidArgumentError("w_i must lie in [0, 1]")

    @property
    def quaternion(self):
        return np.array(self.q_hat)


# --- scalar quaternion core (hot path) ---

def _qmul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw)


def _qconj(q):
    return (q[0], -q[1], -q[2], -q[3])


def _qnorm(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def _qexp(rx, ry, rz):
    """Unit quaternion for a rotation vector."""
    ang = math.sqrt(rx * rx + ry * ry + rz * rz)
    if ang < 1e-14:
        return (1.0, 0.5 * rx, 0.5 * ry, 0.5 * rz)
    k = math.sin(0.5 * ang) / ang
    return (math.cos(0.5 * ang), rx * k, ry * k, rz * k)


def _qrot(q, v):
    """Rotate vector v by quaternion q."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 u x v; out = v + w t + u x t
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (vx + w * tx + y * tz - z * ty,
            vy + w * ty + z * tx - x * tz,
            vz + w * tz + x * ty - y * tx)


def _qpow(q, t):
    w, x, y, z = q
    s = math.sqrt(x * x + y * y + z * z)
    if s < 1e-300:
        return (1.0, 0.0, 0.0, 0.0)
    half = math.atan2(s, w)
    th = t * half
    k = math.sin(th) / s
    return (math.cos(th), x * k, y * k, z * k)


# --- filter steps ---

def complementary_step(state: FusionState, sample: ImuSample,
                       gravity=DEFAULT_GRAVITY,
                       max_dt: float = 0.1) -> FusionState:
    """One IMU update: exact gyro integration over dt, then a tilt of
    fraction w_a toward the measured gravity direction.

    Raises StreamError when the timestamp does not advance or the gap
    exceeds max_dt.
    """
    dt = sample.timestamp - state.last_timestamp
    if not (0.0 < dt < max_dt):
        raise StreamError(f"IMU timestamp step {dt:.6f}s outside (0, {max_dt})")
    gx, gy, gz = sample.gyro
    q = _qmul(state.q_hat, _qexp(gx * dt, gy * dt, gz * dt))
    if state.w_a > 0.0:
        ax, ay, az = sample.accel
        an = math.sqrt(ax * ax + ay * ay + az * az)
        if an > 1e-9:
            m = (ax / an, ay / an, az / an)  # measured down direction, body
            gnx, gny, gnz = gravity
            gn = math.sqrt(gnx * gnx + gny * gny + gnz * gnz)
            p = _qrot(_qconj(q), (gnx / gn, gny / gn, gnz / gn))  # predicted
            cx = m[1] * p[2] - m[2] * p[1]
            cy = m[2] * p[0] - m[0] * p[2]
            cz = m[0] * p[1] - m[1] * p[0]
            s = math.sqrt(cx * cx + cy * cy + cz * cz)
            if s > 1e-12:
                dot = m[0] * p[0] + m[1] * p[1] + m[2] * p[2]
                ang = math.atan2(s, dot) * state.w_a / s
                q = _qmul(q, _qexp(cx * ang, cy * ang, cz * ang))
    return replace(state, q_hat=_qnorm(q), last_timestamp=sample.timestamp)


def fuse_image(state: FusionState, q_image, gyro_increment,
               timestamp: Optional[float] = None) -> FusionState:
    """Geodesic blend of the image estimate with the propagated prior.

    gyro_increment is the reference-frame attitude increment accumulated
    since the previous fused estimate, so the prior is
    g_q = gyro_increment * q_hat. The w_i endpoints short-circuit so they
    reproduce the inputs bit for bit.
    """
    qi = tuple(float(x) for x in np.asarray(q_image).ravel())
    if len(qi) != 4:
        raise InvalidArgumentError("q_image must be a quaternion")
    t = state.last_timestamp if timestamp is None else timestamp
    if state.w_i == 1.0:
        return replace(state, q_hat=qi, last_timestamp=t)
    inc = tuple(float(x) for x in np.asarray(gyro_increment).ravel())
    g_q = _qmul(inc, state.q_hat)
    if state.w_i == 0.0:
        return replace(state, q_hat=g_q, last_timestamp=t)
    rel = _qmul(_qconj(qi), g_q)
    if rel[0] < 0.0:
        rel = (-rel[0], -rel[1], -rel[2], -rel[3])
    fused = _qmul(qi, _qpow(rel, 1.0 - state.w_i))
    return replace(state, q_hat=_qnorm(fused), last_timestamp=t)


def inclination_error(q_est, q_true) -> float:
    """Angle between the estimated and true directions of the body vertical
    axis (body z at the reference orientation); invariant to body yaw."""
    ze = _qrot(tuple(np.asarray(q_est, float)), (0.0, 0.0, 1.0))
    zt = _qrot(tuple(np.asarray(q_true, float)), (0.0, 0.0, 1.0))
    cx = ze[1] * zt[2] - ze[2] * zt[1]
    cy = ze[2] * zt[0] - ze[0] * zt[2]
    cz = ze[0] * zt[1] - ze[1] * zt[0]
    s = math.sqrt(cx * cx + cy * cy + cz * cz)
    d = ze[0] * zt[0] + ze[1] * zt[1] + ze[2] * zt[2]
    return math.atan2(s, d)


# --- stream replay ---

@dataclass
class ReplayRow:
    timestamp: float
    source: str                  # imu | image | fused
    quaternion: Tuple[float, float, float, float]
    inclination_error: Optional[float] = None


class TruthInterpolator:
    """Slerp interpolation of a ground-truth attitude stream."""

    def __init__(self, times, quats):
        self.times = np.asarray(times, float)
        q = np.asarray(quats, float)
        # enforce sign continuity for clean interpolation
        for i in range(1, len(q)):
            if float(np.dot(q[i], q[i - 1])) < 0:
                q[i] = -q[i]
        self.quats = q

    def __call__(self, t: float):
        ts = self.times
        i = int(np.searchsorted(ts, t))
        if i <= 0:
            return self.quats[0]
        if i >= len(ts):
            return self.quats[-1]
        h = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
        q0, q1 = self.quats[i - 1], self.quats[i]
        from .geometry import quat_slerp
        return quat_slerp(q0, q1, h)


def replay(imu: Sequence[ImuSample], image_events, w_i: float, w_a: float,
           gravity=DEFAULT_GRAVITY, truth: Optional[TruthInterpolator] = None,
           latency: float = 0.0, max_dt: float = 0.1) -> List[ReplayRow]:
    """Event-driven rerun of the filter over merged IMU + image streams.

    image_events: sequence of (timestamp, quaternion). Image timestamps are
    shifted back by `latency` before merging. The state seeds from the first
    image estimate; IMU samples before it only start the clock. With
    w_i == 0 the image branch short-circuits to the propagated prior, so the
    run is bit-identical to the complementary filter alone.
    """
    events = [(s.timestamp, 0, s) for s in imu]
    events += [(t - latency, 1, np.asarray(q, float)) for t, q in image_events]
    events.sort(key=lambda e: (e[0], e[1]))

    rows: List[ReplayRow] = []
    state: Optional[FusionState] = None
    q_last_fused = None
    for t, kind, payload in events:
        if state is None:
            if kind == 1:
                qi = tuple(float(x) for x in payload)
                state = FusionState(q_hat=qi, last_timestamp=t, w_a=w_a, w_i=w_i)
                q_last_fused = qi
                rows.append(_row(t, "fused", state.q_hat, truth))
                rows.append(_row(t, "image", qi, truth))
            continue
        if kind == 0:
            if payload.timestamp <= state.last_timestamp:
                continue
            state = complementary_step(state, payload, gravity, max_dt)
            rows.append(_row(t, "imu", state.q_hat, truth))
        else:
            qi = tuple(float(x) for x in payload)
            if state.w_i == 0.0:
                fused = state  # pure complementary filter, bit for bit
            else:
                inc = _qmul(state.q_hat, _qconj(q_last_fused))
                fused = fuse_image(
                    replace(state, q_hat=q_last_fused), qi, inc, timestamp=t)
            state = fused
            q_last_fused = state.q_hat
            rows.append(_row(t, "image", qi, truth))
            rows.append(_row(t, "fused", state.q_hat, truth))
    return rows


def _row(t, source, q, truth):
    err = None if truth is None else float(inclination_error(q, truth(t)))
    return ReplayRow(timestamp=t, source=source, quaternion=tuple(q),
                     inclination_error=err)


def rms(values) -> float:
    v = np.asarray(list(values), float)
    if v.size == 0:
        raise DatasetError("no values to aggregate")
    return float(np.sqrt(np.mean(v * v)))


def sweep_weights(imu: Sequence[ImuSample], image_events, truth: TruthInterpolator,
                  w_i_grid, w_a_grid, gravity=DEFAULT_GRAVITY,
                  latency: float = 0.0):
    """RMS inclination error of the fused stream per (w_i, w_a) pair.

    Returns (errors[len(w_i_grid), len(w_a_grid)], (i_best, j_best)).
    """
    if truth is None:
        raise DatasetError("weight sweep needs a ground-truth stream")
    w_i_grid = list(w_i_grid)
    w_a_grid = list(w_a_grid)
    errs = np.empty((len(w_i_grid), len(w_a_grid)))
    for i, wi in enumerate(w_i_grid):
        for j, wa in enumerate(w_a_grid):
            rows = replay(imu, image_events, wi, wa, gravity, truth, latency)
            errs[i, j] = rms(r.inclination_error for r in rows
                             if r.source == "fused")
    best = np.unravel_index(int(np.argmin(errs)), errs.shape)
    return errs, (int(best[0]), int(best[1]))
