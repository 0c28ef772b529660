"""Command-line interface.

Subcommands:
  gen            render a synthetic stereo dataset to disk
  estimate       run the full pipeline over a dataset, write pose/fusion CSVs
  sweep          fusion weight sweep, write the error-surface CSV
  depth-profile  depth-binned position error table

Exit codes: 0 success, 2 configuration error, 3 dataset error,
4 estimation failure. TROVE_THREADS caps frame-level parallelism.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import dataio, fusion, report, simulate
from .errors import ConfigError, DatasetError, TroveError
from .estimator import depth_profile, run_dataset
from .geometry import CameraModel, matrix_to_quat
from .pipeline import PipelineConfig, RansacParams, SegmentationThresholds

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_ESTIMATION = 4

_RUN_KEYS = {
    "beta_deg", "intensity_min", "chroma_min", "search_width",
    "ransac_iterations", "ransac_tol", "ransac_min_inlier_frac", "ransac_seed",
    "sse_max", "orientation", "w_i", "w_a", "latency_s", "seed",
    "consistency_threshold_deg", "f_px", "width", "height", "u0", "v0",
    "baseline_m", "rect_map",
}


def load_run_config(path, scene_cfg) -> dict:
    """Merge an optional run config over the dataset's scene.cfg defaults."""
    merged = dict(scene_cfg)
    if path is not None:
        cfg = dataio.parse_kv_config(path)
        unknown = set(cfg) - _RUN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(cfg)
    return merged


def camera_from(cfg: dict):
    cam = dataio.camera_from_config(cfg)
    if cfg.get("rect_map"):
        cam.rect_map = dataio.read_rect_map(cfg["rect_map"])
        if cam.rect_map.shape[:2] != (cam.height, cam.width):
            raise ConfigError("rectification map size does not match the camera")
    return cam


def pipeline_config_from(cfg: dict) -> PipelineConfig:
    th = SegmentationThresholds(
        intensity_min=int(float(cfg.get("intensity_min", "150"))),
        chroma_min=float(cfg.get("chroma_min", "0.51")))
    ransac = RansacParams(
        iterations=int(float(cfg.get("ransac_iterations", "200"))),
        inlier_tol=float(cfg.get("ransac_tol", "1.0")),
        min_inlier_frac=float(cfg.get("ransac_min_inlier_frac", "0.30")),
        seed=int(float(cfg.get("ransac_seed", "12345"))))
    return PipelineConfig(
        thresholds=th,
        search_width=int(float(cfg.get("search_width", "4"))),
        ransac=ransac,
        sse_max=float(cfg.get("sse_max", "9.0")),
        orientation=cfg.get("orientation", "upright"),
        beta=np.deg2rad(float(cfg.get("beta_deg", "90"))))


def _scene_from_config(cfg: dict) -> simulate.SceneSpec:
    def color(key, default):
        return tuple(int(x) for x in dataio.parse_floats(cfg[key], 3)) \
            if key in cfg else default

    return simulate.SceneSpec(
        beta=np.deg2rad(float(cfg.get("beta_deg", "90"))),
        edge_lengths=tuple(float(cfg.get(k, "0.5")) for k in
                           ("edge_x_m", "edge_y_m", "edge_z_m")),
        color_top=color("color_top", (255, 115, 0)),
        color_left=color("color_left", (0, 250, 80)),
        color_right=color("color_right", (0, 100, 215)),
        gravity_obj=tuple(dataio.parse_floats(
            cfg.get("gravity_obj", "0,9.80665,0"), 3)))


def _traj_from_config(cfg: dict, seed: int) -> tuple:
    noise = simulate.NoiseSpec(
        pixel_sigma=float(cfg.get("pixel_sigma", "0")),
        gyro_sigma=float(cfg.get("gyro_sigma", "0")),
        gyro_bias=tuple(dataio.parse_floats(cfg.get("gyro_bias", "0,0,0"), 3)),
        accel_sigma=float(cfg.get("accel_sigma", "0")))
    kind = cfg.get("type", "orbit")
    if kind == "orbit":
        traj = simulate.orbit_trajectory(
            duration=float(cfg.get("duration_s", "8")),
            keyframe_dt=float(cfg.get("keyframe_dt_s", "0.8")),
            radius=(float(cfg.get("radius_min_m", "1.0")),
                    float(cfg.get("radius_max_m", "2.0"))),
            seed=seed, noise=noise,
            wobble_deg=float(cfg.get("wobble_deg", "6")))
    elif kind == "keyframes":
        keys = []
        for line in cfg.get("keyframes", "").split(";"):
            vals = dataio.parse_floats(line, 8)
            keys.append((vals[0], np.array(vals[1:4]), np.array(vals[4:8])))
        traj = simulate.TrajectorySpec(keyframes=keys, noise=noise)
    else:
        raise ConfigError(f"unknown trajectory type {kind!r}")
    rates = (float(cfg.get("frame_rate_hz", "60")),
             float(cfg.get("imu_rate_hz", "240")))
    return traj, noise, rates


def cmd_gen(args) -> int:
    scene_cfg = dataio.parse_kv_config(args.scene) if args.scene else {}
    traj_cfg = dataio.parse_kv_config(args.traj) if args.traj else {}
    scene = _scene_from_config(scene_cfg)
    cam = dataio.camera_from_config(scene_cfg) if "f_px" in scene_cfg \
        else CameraModel(f_px=702.0, width=1280, height=720)
    traj, noise, (frame_rate, imu_rate) = _traj_from_config(traj_cfg, args.seed)
    out = simulate.generate_dataset(
        scene, traj, cam, args.out, frame_rate=frame_rate, imu_rate=imu_rate,
        seed=args.seed, noise=noise,
        supersample=int(traj_cfg.get("supersample", "1")))
    ds = dataio.load_dataset(out)
    print(f"dataset written to {out} ({ds.n_pairs} stereo pairs)")
    return EXIT_OK


def cmd_estimate(args) -> int:
    ds = dataio.load_dataset(args.dataset)
    cfg = load_run_config(args.config, ds.scene_cfg)
    cam = camera_from(cfg)
    pipeline = pipeline_config_from(cfg)
    run = run_dataset(ds, cam, pipeline,
                      w_i=float(cfg.get("w_i", "0.02")),
                      w_a=float(cfg.get("w_a", "0")),
                      latency=float(cfg.get("latency_s", "0")),
                      threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "poses.csv", "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["timestamp_s", "qw", "qx", "qy", "qz",
                      "x_m", "y_m", "z_m", "depth_m", "sse_left", "sse_right",
                      "error"])
        for r in run.results:
            if r.pose is None:
                wtr.writerow([f"{r.timestamp:.9f}"] + [""] * 10 + [r.error])
                continue
            q = matrix_to_quat(r.pose.r_a)
            wtr.writerow([f"{r.timestamp:.9f}"]
                         + [f"{x:.12g}" for x in q]
                         + [f"{x:.12g}" for x in r.pose.p_c]
                         + [f"{r.pose.depth:.12g}",
                            f"{r.pose.quality.get('sse_left', 0):.6g}",
                            f"{r.pose.quality.get('sse_right', 0):.6g}", ""])

    dataio.write_output_csv(
        out / "fusion.csv",
        [(r.timestamp, r.source, r.quaternion, r.inclination_error)
         for r in run.fusion_rows])

    with open(out / "summary.csv", "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["metric", "value"])
        for k, v in run.summary.items():
            wtr.writerow([k, f"{v:.9g}"])
        for stage, t in run.timings.items():
            wtr.writerow([f"median_{stage}_ms", f"{1e3 * t:.4f}"])

    report.error_timeline(run.fusion_rows, out / "error_timeline.png")
    report.trajectory_figure(run.poses, ds.truth, out / "trajectory.png")

    detected = int(run.summary["pairs_detected"])
    print(f"estimated {detected}/{len(run.results)} pairs; outputs in {out}")
    for k in ("image_incl_err_rms", "fused_incl_err_rms", "position_err_rms"):
        if k in run.summary:
            val = run.summary[k]
            if "incl" in k:
                print(f"  {k}: {np.rad2deg(val):.4f} deg")
            else:
                print(f"  {k}: {val * 1e3:.2f} mm")
    if detected == 0:
        print("no frame pair yielded a pose", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


def _parse_grid(spec: str):
    try:
        a, b, n = spec.split(":")
        return list(np.linspace(float(a), float(b), int(n)))
    except ValueError as e:
        raise ConfigError(f"grid spec {spec!r} must be start:stop:count") from e


def cmd_sweep(args) -> int:
    ds = dataio.load_dataset(args.dataset)
    if ds.truth is None:
        raise DatasetError("sweep requires ground truth in the dataset")
    cfg = load_run_config(args.config, ds.scene_cfg)
    cam = camera_from(cfg)
    pipeline = pipeline_config_from(cfg)
    run = run_dataset(ds, cam, pipeline, w_i=0.0, w_a=0.0,
                      latency=float(cfg.get("latency_s", "0")),
                      threads=args.threads)
    image_events = [(r.timestamp, matrix_to_quat(r.pose.r_a))
                    for r in run.results if r.pose is not None]
    imu = [fusion.ImuSample(t, tuple(g), tuple(a)) for t, g, a in ds.imu]
    truth = fusion.TruthInterpolator(ds.truth[0], ds.truth[1])
    gravity = tuple(dataio.parse_floats(
        cfg.get("gravity_obj", "0,0,-9.80665"), 3))
    w_i_grid = _parse_grid(args.wi)
    w_a_grid = _parse_grid(args.wa)
    errs, (bi, bj) = fusion.sweep_weights(
        imu, image_events, truth, w_i_grid, w_a_grid, gravity,
        latency=float(cfg.get("latency_s", "0")))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["w_i", "w_a", "rms_inclination_error_rad", "is_optimum"])
        for i, wi in enumerate(w_i_grid):
            for j, wa in enumerate(w_a_grid):
                wtr.writerow([f"{wi:.6g}", f"{wa:.6g}", f"{errs[i, j]:.12g}",
                              "1" if (i, j) == (bi, bj) else "0"])
    report.sweep_surface(w_i_grid, w_a_grid, errs, out / "sweep.png")
    print(f"sweep written to {out}; optimum w_i={w_i_grid[bi]:.4g} "
          f"w_a={w_a_grid[bj]:.4g} "
          f"rms={np.rad2deg(errs[bi, bj]):.4f} deg")
    return EXIT_OK


def cmd_depth_profile(args) -> int:
    ds = dataio.load_dataset(args.dataset)
    if ds.truth is None:
        raise DatasetError("depth profile requires ground truth")
    cfg = load_run_config(args.config, ds.scene_cfg)
    cam = camera_from(cfg)
    pipeline = pipeline_config_from(cfg)
    run = run_dataset(ds, cam, pipeline, threads=args.threads)
    rows = depth_profile(run.results, ds, cam)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "depth_profile.csv", "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["depth_lo_m", "depth_hi_m", "n", "mean_abs_m", "std_m",
                      "rms_m", "one_pixel_m"])
        for r in rows:
            wtr.writerow([f"{r['depth_lo']:.2f}", f"{r['depth_hi']:.2f}",
                          r["n"], f"{r['mean_abs']:.9g}", f"{r['std']:.9g}",
                          f"{r['rms']:.9g}", f"{r['one_pixel']:.9g}"])
    if rows:
        report.depth_profile_figure(rows, out / "depth_profile.png")
    print(f"depth profile ({len(rows)} bins) written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trove", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--scene", default=None, help="scene key-value config")
    g.add_argument("--traj", default=None, help="trajectory key-value config")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("estimate", help="run the pipeline over a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--config", default=None)
    e.add_argument("--out", required=True)
    e.add_argument("--threads", type=int, default=None)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="fusion weight sweep")
    s.add_argument("--dataset", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--wi", required=True, help="start:stop:count")
    s.add_argument("--wa", required=True, help="start:stop:count")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("depth-profile", help="depth-binned position error")
    d.add_argument("--dataset", required=True)
    d.add_argument("--config", default=None)
    d.add_argument("--out", required=True)
    d.add_argument("--threads", type=int, default=None)
    d.set_defaults(func=cmd_depth_profile)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as e:
        print(f"dataset error: {e}", file=sys.stderr)
        return EXIT_DATASET
    except TroveError as e:
        print(f"estimation error: {e}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
