"""Image front end: color segmentation, shifted-patch edge extraction,
RANSAC line fitting, and the least-squares vertex.

The edge extractor never scans pixel neighborhoods. Each pixel is switched on
its own label and at most two other labels are examined at a fixed search
width W, so the per-pixel work is bounded by three label comparisons. A pixel
of the right face with the left face W to its left votes for the vertical
edge; right face with the top face W up-left votes for one horizontal edge;
left face with the top face W up-right votes for the other. Vote coordinates
are the midpoints of the examined pair, rectified through the (optional)
per-pixel correction map, and only those coordinates are ever rectified.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import (DegenerateLinesError, FeatureNotFoundError,
                     InvalidArgumentError, InvalidFeatureError,
                     LineNotFoundError)
from .features import (ANGLE_SUM_TOL_DETECTED, TroveFeature, build_feature,
                       validate_properties)
from .geometry import CameraModel

LABEL_NONE, LABEL_TOP, LABEL_LEFT, LABEL_RIGHT = 0, 1, 2, 3
_LABEL_NAMES = {LABEL_NONE: "none", LABEL_TOP: "top",
                LABEL_LEFT: "left", LABEL_RIGHT: "right"}


@dataclass
class Frame:
    pixels: np.ndarray           # (H, W, 3) uint8
    camera_id: str = "left"
    timestamp: float = 0.0

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise InvalidArgumentError("frame pixels must be (H, W, 3)")
        if self.camera_id not in ("left", "right"):
            raise InvalidArgumentError("camera_id must be 'left' or 'right'")

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


@dataclass
class SegmentationThresholds:
    """Chromaticity (channel share) and intensity cuts per target face.

    face_channels maps each face label to the RGB channel that dominates it.
    A pixel gets a face label when that channel passes both cuts; a pixel
    passing the cuts for more than one face is labeled none (transition band).
    """

    intensity_min: int = 150
    chroma_min: float = 0.51
    face_channels: Dict[int, int] = field(
        default_factory=lambda: {LABEL_TOP: 0, LABEL_LEFT: 1, LABEL_RIGHT: 2})


@dataclass
class RansacParams:
    iterations: int = 200
    inlier_tol: float = 1.0       # px
    min_inlier_frac: float = 0.30
    seed: int = 12345


@dataclass
class PipelineConfig:
    thresholds: SegmentationThresholds = field(default_factory=SegmentationThresholds)
    search_width: int = 4         # px; 6 recommended at 1080p
    ransac: RansacParams = field(default_factory=RansacParams)
    sse_max: float = 9.0          # px^2 vertex screening threshold
    orientation: str = "upright"  # or "inverted"
    angle_sum_tol: float = ANGLE_SUM_TOL_DETECTED
    beta: float = np.pi / 2
    validate: bool = True


@dataclass
class LineH:
    """Line in Hough normal form: rho = x cos(theta) + y sin(theta)."""

    rho: float
    theta: float                  # [-pi/2, pi/2)
    inlier_count: int = 0
    residual_rms: float = 0.0

    def distance(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, float)
        return np.abs(self.rho - xy[..., 0] * np.cos(self.theta)
                      - xy[..., 1] * np.sin(self.theta))


@dataclass
class VertexEstimate:
    u: float
    v: float
    sse: float

    @property
    def uv(self):
        return self.u, self.v


@dataclass
class DetectionStats:
    comparisons: int = 0
    pixels: int = 0
    candidate_counts: Dict[str, int] = field(default_factory=dict)
    inlier_counts: Dict[str, int] = field(default_factory=dict)
    vertex_sse: float = 0.0
    timings_s: Dict[str, float] = field(default_factory=dict)

    @property
    def comparisons_per_pixel(self) -> float:
        return self.comparisons / max(self.pixels, 1)


def segment_colors(frame: Frame,
                   thresholds: Optional[SegmentationThresholds] = None) -> np.ndarray:
    """Label each pixel top/left/right/none by chromaticity and intensity.

    The cheap intensity gate runs on the full frame in uint8; chromaticity
    (integer-scaled channel share) is evaluated only on the surviving pixels,
    which keeps the common mostly-background frame fast.
    """
    th = thresholds or SegmentationThresholds()
    rgb = frame.pixels
    label = np.zeros(rgb.shape[:2], dtype=np.uint8)
    # a pixel can only be labeled if some channel reaches the intensity cut;
    # restrict the chromaticity math to the bounding box of such pixels
    gate = (np.maximum(np.maximum(rgb[:, :, 0], rgb[:, :, 1]), rgb[:, :, 2])
            >= th.intensity_min)
    rows = np.flatnonzero(gate.any(axis=1))
    if rows.size == 0:
        return label
    cols = np.flatnonzero(gate.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    sub = rgb[r0:r1, c0:c1].astype(np.int32)
    total = sub.sum(axis=2)
    chroma_num = int(round(th.chroma_min * 1000))
    sub_label = np.zeros(sub.shape[:2], dtype=np.uint8)
    hits = np.zeros(sub.shape[:2], dtype=np.uint8)
    for lab, ch in th.face_channels.items():
        c = sub[:, :, ch]
        ok = (c >= th.intensity_min) & (1000 * c >= chroma_num * total)
        sub_label[ok] = lab
        hits += ok
    sub_label[hits > 1] = LABEL_NONE  # transition pixels match several faces
    label[r0:r1, c0:c1] = sub_label
    return label


def extract_edge_candidates(mask: np.ndarray, search_width: int,
                            orientation: str = "upright",
                            rect_map: Optional[np.ndarray] = None
                            ) -> Tuple[Dict[str, np.ndarray], DetectionStats]:
    """Shifted-patch edge candidates.

    Returns clouds keyed 'x', 'y', 'z' (in raw pixel coordinates, as (x, y)
    columns): 'z' collects right-face pixels with the left face W to the
    left (the projected vertical edge), 'x' right-face pixels with the top
    face W up-left, 'y' left-face pixels with the top face W up-right. The
    orientation hint mirrors the shifts for an upside-down camera.

    Stats count label examinations: one for the pixel's own label plus one
    per neighbor looked at, bounded by 3 per pixel.
    """
    if search_width < 2:
        raise InvalidArgumentError("search width must be at least 2 px")
    if orientation not in ("upright", "inverted"):
        raise InvalidArgumentError("orientation must be 'upright' or 'inverted'")
    w = search_width
    s = 1 if orientation == "upright" else -1
    full_h, full_w = mask.shape
    stats = DetectionStats(pixels=full_h * full_w, comparisons=full_h * full_w)

    # pair tests can only fire inside the labeled region; restrict the slice
    # work to its bounding box (the per-pixel switch is already counted above)
    labeled = mask != LABEL_NONE
    rows = np.flatnonzero(labeled.any(axis=1))
    cols = np.flatnonzero(labeled.any(axis=0))
    if rows.size == 0:
        raise FeatureNotFoundError("no labeled pixels in the frame")
    r0 = max(int(rows[0]) - w, 0)
    r1 = min(int(rows[-1]) + w + 1, full_h)
    c0 = max(int(cols[0]) - w, 0)
    c1 = min(int(cols[-1]) + w + 1, full_w)
    mask = mask[r0:r1, c0:c1]
    h, wid = mask.shape

    def pair_hits(own, lab_b, di, dj, exclude=None):
        """Pixels with label mask==own whose neighbor at (di, dj) is lab_b.

        Works on overlapping slice views; returns global (ii, jj)."""
        ai0, ai1 = max(0, -di), h - max(0, di)
        aj0, aj1 = max(0, -dj), wid - max(0, dj)
        a = mask[ai0:ai1, aj0:aj1]
        b = mask[ai0 + di:ai1 + di, aj0 + dj:aj1 + dj]
        hit = (a == own) & (b == lab_b)
        if exclude is not None:
            hit &= ~exclude[ai0:ai1, aj0:aj1]
        ii, jj = np.nonzero(hit)
        return ii + ai0, jj + aj0

    is_right = mask == LABEL_RIGHT
    n_right = int(np.count_nonzero(is_right))
    n_left = int(np.count_nonzero(mask == LABEL_LEFT))

    # right pixel, left face at (i, j - sW) -> vertical edge midpoint
    zi, zj = pair_hits(LABEL_RIGHT, LABEL_LEFT, 0, -s * w)
    stats.comparisons += n_right
    z_full = np.zeros_like(is_right)
    z_full[zi, zj] = True
    # right pixel (vertical test failed), top face at (i - sW, j - sW)
    xi, xj = pair_hits(LABEL_RIGHT, LABEL_TOP, -s * w, -s * w, exclude=z_full)
    stats.comparisons += n_right - len(zi)
    # left pixel, top face at (i - sW, j + sW)
    yi, yj = pair_hits(LABEL_LEFT, LABEL_TOP, -s * w, s * w)
    stats.comparisons += n_left

    half = s * w / 2.0
    clouds: Dict[str, np.ndarray] = {}
    for key, (ii, jj), (oy, ox) in (("z", (zi, zj), (0.0, -half)),
                                    ("x", (xi, xj), (-half, -half)),
                                    ("y", (yi, yj), (-half, half))):
        pts = np.stack([jj + c0 + ox, ii + r0 + oy], -1).astype(float)
        if rect_map is not None and pts.size:
            ri = np.clip(np.rint(pts[:, 1]).astype(int), 0, full_h - 1)
            rj = np.clip(np.rint(pts[:, 0]).astype(int), 0, full_w - 1)
            pts = pts + rect_map[ri, rj]
        clouds[key] = pts
        stats.candidate_counts[key] = len(pts)
    if any(len(v) == 0 for v in clouds.values()):
        empty = [k for k, v in clouds.items() if len(v) == 0]
        raise FeatureNotFoundError(f"no edge candidates for {empty}")
    return clouds, stats


def _hough_normalize(nx, ny, rho):
    theta = np.arctan2(ny, nx)
    if theta >= np.pi / 2:
        theta -= np.pi
        rho = -rho
    elif theta < -np.pi / 2:
        theta += np.pi
        rho = -rho
    return rho, theta


def _tls_fit(pts: np.ndarray):
    """Total-least-squares line through a point set: minimizes perpendicular
    distance. Returns (rho, theta)."""
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d
    evals, evecs = np.linalg.eigh(cov)
    normal = evecs[:, 0]  # eigenvector of the smaller eigenvalue
    rho = float(normal @ centroid)
    return _hough_normalize(normal[0], normal[1], rho)


def ransac_line(points: np.ndarray, params: Optional[RansacParams] = None,
                rng: Optional[np.random.Generator] = None,
                refit_tol: Optional[float] = None) -> LineH:
    """Two-point RANSAC with a total-least-squares refit on the consensus set.

    Deterministic for a fixed seed. Raises LineNotFoundError when the best
    consensus covers less than min_inlier_frac of the points.

    refit_tol widens the inlier band for the final fit: shifted-patch
    candidates form a uniform strip about the true edge, and fitting only a
    narrow RANSAC window inside it would re-center the line arbitrarily
    within the strip. Passing the strip half-width keeps the fit unbiased.
    """
    params = params or RansacParams()
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise InvalidArgumentError("need at least two 2D points")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    n = len(pts)
    k = params.iterations
    i1 = rng.integers(0, n, size=k)
    i2 = rng.integers(0, n - 1, size=k)
    i2 = np.where(i2 >= i1, i2 + 1, i2)  # distinct index pair
    p1, p2 = pts[i1], pts[i2]
    d = p2 - p1
    norm = np.hypot(d[:, 0], d[:, 1])
    ok = norm > 1e-12
    normals = np.stack([-d[:, 1], d[:, 0]], -1)
    normals[ok] /= norm[ok, None]
    rho = np.sum(normals * p1, axis=1)
    count_tol = max(params.inlier_tol, refit_tol or 0.0)
    dist = np.abs(pts @ normals.T - rho[None, :])
    counts = np.where(ok, (dist <= count_tol).sum(axis=0), -1)
    best = int(np.argmax(counts))
    if counts[best] < max(2, params.min_inlier_frac * n):
        raise LineNotFoundError(
            f"best consensus {counts[best]}/{n} below "
            f"{params.min_inlier_frac:.0%}")
    inliers = pts[dist[:, best] <= count_tol]
    rho_f, theta_f = _tls_fit(inliers)
    if refit_tol is not None:
        # re-select around the refined line so the band is symmetric
        res_all = np.abs(rho_f - pts[:, 0] * np.cos(theta_f)
                         - pts[:, 1] * np.sin(theta_f))
        inliers = pts[res_all <= refit_tol]
        if len(inliers) >= 2:
            rho_f, theta_f = _tls_fit(inliers)
    res = np.abs(rho_f - inliers[:, 0] * np.cos(theta_f)
                 - inliers[:, 1] * np.sin(theta_f))
    return LineH(rho=float(rho_f), theta=float(theta_f),
                 inlier_count=int(len(inliers)),
                 residual_rms=float(np.sqrt(np.mean(res ** 2))))


def solve_vertex(lines) -> VertexEstimate:
    """Point minimizing the sum of squared distances to the three lines."""
    lines = list(lines)
    if len(lines) != 3:
        raise InvalidArgumentError("exactly three lines are required")
    r = np.array([[np.cos(l.theta), np.sin(l.theta)] for l in lines])
    rho = np.array([l.rho for l in lines])
    _, sv, _ = np.linalg.svd(r)
    if sv[-1] < 1e-6:
        raise DegenerateLinesError("line normals do not span the plane")
    v, *_ = np.linalg.lstsq(r, rho, rcond=None)
    res = rho - r @ v
    return VertexEstimate(u=float(v[0]), v=float(v[1]), sse=float(res @ res))


def _ray_inclination(line: LineH, cloud: np.ndarray, vertex_xy) -> float:
    """Directed inclination of the fitted line, pointing at the cloud mass."""
    d = np.array([-np.sin(line.theta), np.cos(line.theta)])
    centroid = cloud.mean(axis=0)
    if float((centroid - np.asarray(vertex_xy)) @ d) < 0:
        d = -d
    return float(np.arctan2(d[1], d[0]))


def detect_feature(frame: Frame, cam: CameraModel,
                   config: Optional[PipelineConfig] = None
                   ) -> Tuple[TroveFeature, DetectionStats]:
    """Full front end: segment, extract, fit three lines, solve the vertex,
    and return the standardized standard-type feature.

    The vertical ray comes from the left/right face boundary; the two
    horizontal rays get their x/z roles from the feature normalization.
    """
    config = config or PipelineConfig()
    if (frame.height, frame.width) != (cam.height, cam.width):
        raise InvalidArgumentError(
            f"frame is {frame.width}x{frame.height}, camera expects "
            f"{cam.width}x{cam.height}")
    t0 = time.perf_counter()
    mask = segment_colors(frame, config.thresholds)
    t1 = time.perf_counter()
    clouds, stats = extract_edge_candidates(
        mask, config.search_width, config.orientation, cam.rect_map)
    t2 = time.perf_counter()
    rng = np.random.default_rng(config.ransac.seed)
    lines = {}
    # candidate strips are as wide as the shift component across the edge:
    # up to W for the horizontal shift, W*sqrt(2) for the diagonal ones
    w = config.search_width
    strip_half = {"z": w / 2 + 0.5, "x": w / np.sqrt(2) + 0.5,
                  "y": w / np.sqrt(2) + 0.5}
    for key in ("x", "y", "z"):
        lines[key] = ransac_line(clouds[key], config.ransac, rng,
                                 refit_tol=strip_half[key])
        stats.inlier_counts[key] = lines[key].inlier_count
    t3 = time.perf_counter()
    vest = solve_vertex([lines["x"], lines["y"], lines["z"]])
    if vest.sse > config.sse_max:
        raise InvalidFeatureError(
            f"vertex residual {vest.sse:.2f} px^2 exceeds {config.sse_max}")
    stats.vertex_sse = vest.sse

    u_c, v_c = cam.centered(vest.u, vest.v)
    incl = [_ray_inclination(lines[key], clouds[key], (vest.u, vest.v))
            for key in ("x", "y", "z")]
    # clouds x/y are the two top-face boundaries (horizontal edges); cloud z
    # is the left/right boundary, i.e. the projected vertical edge
    feature = build_feature((float(u_c), float(v_c)), incl, 2, cam,
                            tol=config.angle_sum_tol)
    if config.validate:
        report = validate_properties(feature, config.beta)
        if not report.passed:
            failed = [k for k, v in report.checks.items() if not v]
            raise InvalidFeatureError(f"feature fails property screen: {failed}")
    t4 = time.perf_counter()
    stats.timings_s = {"segmentation": t1 - t0, "edge_extraction": t2 - t1,
                       "ransac": t3 - t2, "attitude_prep": t4 - t3}
    return feature, stats
