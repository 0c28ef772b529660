"""On-disk formats: PPM frames, raw RGB streams, rectification maps,
key-value configs, and the CSV stream formats.

CSV schemas:
  imu.csv    timestamp_s, gx, gy, gz, ax, ay, az        (rad/s, m/s^2)
  truth.csv  timestamp_s, qw, qx, qy, qz, x_m, y_m, z_m
  output     timestamp_s, source {imu|image|fused}, qw..qz, inclination_error_rad
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DatasetError

RECT_MAGIC = b"TRVRECT1"


# --- PPM (P6, 8-bit) ---

def write_ppm(path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DatasetError("PPM writer expects an (H, W, 3) uint8 array")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P6"):
        raise DatasetError(f"{path}: not a binary PPM (P6) file")
    # header: magic, width, height, maxval; '#' comments allowed between tokens
    tokens: List[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    i += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise DatasetError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=i)
    return pixels.reshape(h, w, 3).copy()


# --- raw RGB24 stream with sidecar header ---

def write_raw_stream(path, frames: np.ndarray, fps: float, camera_id: str) -> None:
    """frames: (N, H, W, 3) uint8, concatenated row-major; sidecar at path + '.hdr'."""
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    n, h, w, _ = frames.shape
    Path(path).write_bytes(frames.tobytes())
    write_kv_config(str(path) + ".hdr", {
        "width": w, "height": h, "fps": fps, "camera_id": camera_id})


def read_raw_stream(path) -> Tuple[np.ndarray, Dict[str, str]]:
    hdr = parse_kv_config(str(path) + ".hdr")
    w, h = int(hdr["width"]), int(hdr["height"])
    blob = Path(path).read_bytes()
    frame_bytes = w * h * 3
    if len(blob) % frame_bytes:
        raise DatasetError(f"{path}: size not a multiple of one frame")
    n = len(blob) // frame_bytes
    return np.frombuffer(blob, dtype=np.uint8).reshape(n, h, w, 3).copy(), hdr


# --- rectification map ---

def write_rect_map(path, rect: np.ndarray) -> None:
    """(H, W, 2) float32 per-pixel (du, dv), little-endian, 16-byte header."""
    rect = np.ascontiguousarray(rect, dtype="<f4")
    if rect.ndim != 3 or rect.shape[2] != 2:
        raise DatasetError("rect map must be (H, W, 2)")
    h, w = rect.shape[:2]
    with open(path, "wb") as f:
        f.write(RECT_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(rect.tobytes())


def read_rect_map(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:8] != RECT_MAGIC:
        raise DatasetError(f"{path}: bad rectification map magic")
    w, h = struct.unpack("<II", blob[8:16])
    expect = w * h * 2 * 4
    if len(blob) != 16 + expect:
        raise DatasetError(f"{path}: rect map payload size mismatch")
    return np.frombuffer(blob, dtype="<f4", offset=16).reshape(h, w, 2).copy()


# --- key-value text config ---

def write_kv_config(path, values: Dict) -> None:
    lines = [f"{k} = {values[k]}" for k in values]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_kv_config(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{path}:{ln}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


def parse_floats(text: str, n: Optional[int] = None):
    vals = [float(x) for x in text.replace(",", " ").split()]
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {len(vals)}: {text!r}")
    return vals


# --- CSV streams ---

def write_imu_csv(path, samples) -> None:
    with open(path, "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["timestamp_s", "gx", "gy", "gz", "ax", "ay", "az"])
        for t, gyro, accel in samples:
            wtr.writerow([f"{t:.9f}"] + [f"{x:.12g}" for x in gyro]
                         + [f"{x:.12g}" for x in accel])


def read_imu_csv(path):
    out = []
    with open(path, newline="") as f:
        rdr = csv.reader(f)
        header = next(rdr, None)
        if header is None or header[0] != "timestamp_s":
            raise DatasetError(f"{path}: missing IMU header")
        for row in rdr:
            t = float(row[0])
            out.append((t, np.array([float(x) for x in row[1:4]]),
                        np.array([float(x) for x in row[4:7]])))
    return out


def write_truth_csv(path, rows) -> None:
    """rows: (timestamp, quaternion(4,), position(3,))."""
    with open(path, "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["timestamp_s", "qw", "qx", "qy", "qz", "x_m", "y_m", "z_m"])
        for t, q, p in rows:
            wtr.writerow([f"{t:.9f}"] + [f"{x:.12g}" for x in q]
                         + [f"{x:.12g}" for x in p])


def read_truth_csv(path):
    ts, qs, ps = [], [], []
    with open(path, newline="") as f:
        rdr = csv.reader(f)
        header = next(rdr, None)
        if header is None or header[0] != "timestamp_s":
            raise DatasetError(f"{path}: missing truth header")
        for row in rdr:
            ts.append(float(row[0]))
            qs.append([float(x) for x in row[1:5]])
            ps.append([float(x) for x in row[5:8]])
    return np.array(ts), np.array(qs), np.array(ps)


def write_output_csv(path, rows) -> None:
    """rows: (timestamp, source, quaternion(4,), inclination_error or None)."""
    with open(path, "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["timestamp_s", "source", "qw", "qx", "qy", "qz",
                      "inclination_error_rad"])
        for t, source, q, err in rows:
            wtr.writerow([f"{t:.9f}", source] + [f"{x:.12g}" for x in q]
                         + ["" if err is None else f"{err:.12g}"])


# --- dataset handle ---

@dataclass
class Dataset:
    root: Path
    scene_cfg: Dict[str, str]
    left_frames: List[Path]
    right_frames: List[Path]
    frame_times: np.ndarray
    imu: list
    truth: Optional[tuple]  # (times, quats, positions)

    @property
    def n_pairs(self) -> int:
        return len(self.left_frames)


def load_dataset(root) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    cfg_path = root / "scene.cfg"
    if not cfg_path.exists():
        raise DatasetError(f"{root}: missing scene.cfg")
    cfg = parse_kv_config(cfg_path)
    frames = root / "frames"
    left = sorted(frames.glob("left_*.ppm"))
    right = sorted(frames.glob("right_*.ppm"))
    if not left or len(left) != len(right):
        raise DatasetError(f"{root}: unmatched stereo frame files "
                           f"({len(left)} left, {len(right)} right)")
    rate = float(cfg.get("frame_rate_hz", "60"))
    t0 = float(cfg.get("t0_s", "0"))
    times = t0 + np.arange(len(left)) / rate
    imu_path = root / "imu.csv"
    imu = read_imu_csv(imu_path) if imu_path.exists() else []
    truth_path = root / "truth.csv"
    truth = read_truth_csv(truth_path) if truth_path.exists() else None
    return Dataset(root=root, scene_cfg=cfg, left_frames=left, right_frames=right,
                   frame_times=times, imu=imu, truth=truth)


def camera_from_config(cfg: Dict[str, str]):
    from .geometry import CameraModel
    try:
        return CameraModel(
            f_px=float(cfg["f_px"]), width=int(cfg["width"]),
            height=int(cfg["height"]),
            u0=float(cfg["u0"]) if "u0" in cfg else None,
            v0=float(cfg["v0"]) if "v0" in cfg else None,
            baseline_m=float(cfg.get("baseline_m", "0.12")))
    except KeyError as e:
        raise ConfigError(f"camera parameter missing from config: {e}") from e
