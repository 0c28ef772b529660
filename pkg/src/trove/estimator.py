"""Per-frame-pair pose estimation and the dataset-level driver used by the
CLI: detection on both cameras, cross-camera disambiguation, triangulation,
and fusion with the IMU stream."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import dataio, fusion
from .attitude import attitude_candidates, disambiguate_consistency
from .errors import TroveError
from .geometry import CameraModel, matrix_to_quat
from .pipeline import DetectionStats, Frame, PipelineConfig, detect_feature
from .stereo import (StereoObservation, position_in_object_frame,
                     predict_depth_sigma, triangulate_vertex)
from .pipeline import VertexEstimate


@dataclass
class PoseEstimate:
    timestamp: float
    r_a: np.ndarray
    p_c: np.ndarray
    depth: float
    quality: dict = field(default_factory=dict)

    @property
    def quaternion(self):
        return matrix_to_quat(self.r_a)


@dataclass
class FramePairResult:
    index: int
    timestamp: float
    pose: Optional[PoseEstimate]
    error: Optional[str]
    stats_left: Optional[DetectionStats] = None
    stats_right: Optional[DetectionStats] = None


def thread_count(default: Optional[int] = None) -> int:
    """Worker count for frame-parallel stages; TROVE_THREADS caps it."""
    requested = default or (os.cpu_count() or 1)
    env = os.environ.get("TROVE_THREADS")
    if env:
        try:
            return max(1, min(int(env), requested))
        except ValueError:
            return 1
    return requested


def estimate_frame_pair(left: Frame, right: Frame, cam: CameraModel,
                        config: PipelineConfig,
                        consistency_threshold: float = np.deg2rad(2.0)
                        ) -> Tuple[PoseEstimate, DetectionStats, DetectionStats]:
    """Detect the feature in both frames, resolve the interpretation by
    stereo consistency, and triangulate the camera position."""
    feat_l, stats_l = detect_feature(left, cam, config)
    feat_r, stats_r = detect_feature(right, cam, config)
    t0 = time.perf_counter()
    cands_l = attitude_candidates(feat_l, config.beta, cam)
    cands_r = attitude_candidates(feat_r, config.beta, cam)
    att = disambiguate_consistency(cands_l, cands_r, consistency_threshold)
    solve_each = 0.5 * (time.perf_counter() - t0)
    stats_l.timings_s["attitude_solve"] = solve_each
    stats_r.timings_s["attitude_solve"] = solve_each

    obs = StereoObservation(
        v_left=VertexEstimate(feat_l.raw_vertex[0], feat_l.raw_vertex[1],
                              stats_l.vertex_sse),
        v_right=VertexEstimate(feat_r.raw_vertex[0], feat_r.raw_vertex[1],
                               stats_r.vertex_sse),
        timestamp=left.timestamp)
    p_v = triangulate_vertex(obs, cam)
    p_c = position_in_object_frame(p_v, att.r_a)
    depth = float(p_v[2])
    quality = dict(att.quality)
    quality.update(sse_left=stats_l.vertex_sse, sse_right=stats_r.vertex_sse,
                   predicted_sigma=predict_depth_sigma(depth, 1.0, cam))
    pose = PoseEstimate(timestamp=left.timestamp, r_a=att.r_a, p_c=p_c,
                        depth=depth, quality=quality)
    return pose, stats_l, stats_r


@dataclass
class DatasetRun:
    results: List[FramePairResult]
    fusion_rows: List[fusion.ReplayRow]
    timings: Dict[str, float]            # per-stage medians, seconds
    summary: Dict[str, float]

    @property
    def poses(self) -> List[PoseEstimate]:
        return [r.pose for r in self.results if r.pose is not None]


def _stage_medians(stats: Sequence[DetectionStats]) -> Dict[str, float]:
    """Per-image medians for the four front-end stages; the attitude stage
    combines feature preparation with the closed-form solve."""
    out = {}
    for k in ("segmentation", "edge_extraction", "ransac"):
        vals = [s.timings_s.get(k, 0.0) for s in stats if s.timings_s]
        out[k] = float(np.median(vals)) if vals else 0.0
    att = [s.timings_s.get("attitude_prep", 0.0)
           + s.timings_s.get("attitude_solve", 0.0)
           for s in stats if s.timings_s]
    out["attitude"] = float(np.median(att)) if att else 0.0
    out["total"] = sum(out.values())
    return out


def run_dataset(ds: dataio.Dataset, cam: CameraModel, config: PipelineConfig,
                w_i: float = 0.02, w_a: float = 0.0,
                latency: Optional[float] = None,
                threads: Optional[int] = None) -> DatasetRun:
    """Estimate every stereo pair, then fuse with the IMU stream.

    Detection failures skip the frame (recorded with the error message);
    estimation is frame-parallel with order restored on collection.
    """
    gravity = tuple(dataio.parse_floats(
        ds.scene_cfg.get("gravity_obj", "0,0,-9.80665"), 3))
    if latency is None:
        latency = float(ds.scene_cfg.get("latency_s", "0"))

    def work(i: int) -> FramePairResult:
        t = float(ds.frame_times[i])
        try:
            lf = Frame(dataio.read_ppm(ds.left_frames[i]), "left", t)
            rf = Frame(dataio.read_ppm(ds.right_frames[i]), "right", t)
            pose, sl, sr = estimate_frame_pair(lf, rf, cam, config)
            return FramePairResult(i, t, pose, None, sl, sr)
        except TroveError as e:
            return FramePairResult(i, t, None, f"{type(e).__name__}: {e}")

    n = ds.n_pairs
    workers = thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(work, range(n)))
    else:
        results = [work(i) for i in range(n)]

    truth = None
    if ds.truth is not None:
        t_times, t_quats, _ = ds.truth
        truth = fusion.TruthInterpolator(t_times, t_quats)

    image_events = [(r.timestamp, matrix_to_quat(r.pose.r_a))
                    for r in results if r.pose is not None]
    imu = [fusion.ImuSample(t, tuple(g), tuple(a)) for t, g, a in ds.imu]
    rows = fusion.replay(imu, image_events, w_i, w_a, gravity, truth, latency)

    stats = [s for r in results for s in (r.stats_left, r.stats_right) if s]
    summary = _summarize(results, rows, ds)
    return DatasetRun(results=results, fusion_rows=rows,
                      timings=_stage_medians(stats), summary=summary)


def _summarize(results, rows, ds) -> Dict[str, float]:
    out: Dict[str, float] = {
        "pairs_total": float(len(results)),
        "pairs_detected": float(sum(1 for r in results if r.pose is not None)),
    }
    if ds.truth is not None:
        t_times, t_quats, t_pos = ds.truth
        truth_q = fusion.TruthInterpolator(t_times, t_quats)
        incl = []
        pos_err = []
        for r in results:
            if r.pose is None:
                continue
            incl.append(fusion.inclination_error(
                matrix_to_quat(r.pose.r_a), truth_q(r.timestamp)))
            p_true = _interp_position(t_times, t_pos, r.timestamp)
            pos_err.append(float(np.linalg.norm(r.pose.p_c - p_true)))
        for name, vals in (("image_incl_err", incl), ("position_err", pos_err)):
            if vals:
                v = np.asarray(vals)
                out[f"{name}_mean"] = float(np.mean(np.abs(v)))
                out[f"{name}_std"] = float(np.std(v))
                out[f"{name}_rms"] = float(np.sqrt(np.mean(v * v)))
        fused = [r.inclination_error for r in rows
                 if r.source == "fused" and r.inclination_error is not None]
        imu_rows = [r.inclination_error for r in rows
                    if r.source == "imu" and r.inclination_error is not None]
        if fused:
            out["fused_incl_err_rms"] = fusion.rms(fused)
        if imu_rows:
            out["imu_incl_err_rms"] = fusion.rms(imu_rows)
    return out


def _interp_position(times, positions, t) -> np.ndarray:
    i = int(np.searchsorted(times, t))
    if i <= 0:
        return positions[0]
    if i >= len(times):
        return positions[-1]
    h = (t - times[i - 1]) / (times[i] - times[i - 1])
    return positions[i - 1] * (1 - h) + positions[i] * h


def depth_profile(results: Sequence[FramePairResult], ds: dataio.Dataset,
                  cam: CameraModel, bin_edges=None):
    """Depth-binned position error rows: (lo, hi, n, mean, std, rms, one_px).

    Bins with no samples are omitted. one_px is the predicted depth error for
    a one-pixel disparity error at the bin center.
    """
    if ds.truth is None:
        raise dataio.DatasetError("depth profile needs ground truth")
    if bin_edges is None:
        bin_edges = np.arange(0.8, 2.2001, 0.2)
    t_times, _, t_pos = ds.truth
    depths, errs = [], []
    for r in results:
        if r.pose is None:
            continue
        p_true = _interp_position(t_times, t_pos, r.timestamp)
        depths.append(r.pose.depth)
        errs.append(float(np.linalg.norm(r.pose.p_c - p_true)))
    depths = np.asarray(depths)
    errs = np.asarray(errs)
    rows = []
    for lo, hi in zip(bin_edges[:-1], bin_edges[1:]):
        m = (depths >= lo) & (depths < hi)
        if not np.any(m):
            continue
        e = errs[m]
        mid = 0.5 * (lo + hi)
        rows.append({
            "depth_lo": float(lo), "depth_hi": float(hi), "n": int(m.sum()),
            "mean_abs": float(np.mean(np.abs(e))), "std": float(np.std(e)),
            "rms": float(np.sqrt(np.mean(e * e))),
            "one_pixel": predict_depth_sigma(mid, 1.0, cam),
        })
    return rows
