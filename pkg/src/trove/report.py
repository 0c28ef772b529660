"""Figure rendering for the CLI report paths.

Every analysis command writes CSV first; these helpers render companion PNG
figures next to the delimited output. Matplotlib runs on the Agg backend so
the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def error_timeline(rows, out_path) -> Path:
    """Inclination error vs time for the imu/image/fused streams."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    plotted = False
    for source, color in (("imu", "tab:gray"), ("image", "tab:blue"),
                          ("fused", "tab:red")):
        pts = [(r.timestamp, r.inclination_error) for r in rows
               if r.source == source and r.inclination_error is not None]
        if not pts:
            continue
        t, e = np.array(pts).T
        ax.plot(t, np.rad2deg(e), label=source, color=color,
                linewidth=0.9 if source == "imu" else 1.3)
        plotted = True
    ax.set_xlabel("time (s)")
    ax.set_ylabel("inclination error (deg)")
    if plotted:
        ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)


def trajectory_figure(poses, truth, out_path) -> Path:
    """Estimated camera track in the object frame against ground truth."""
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    if truth is not None:
        _, _, t_pos = truth
        ax.plot(t_pos[:, 0], t_pos[:, 1], t_pos[:, 2], color="0.6",
                linewidth=1.0, label="truth")
    if poses:
        p = np.array([pose.p_c for pose in poses])
        ax.plot(p[:, 0], p[:, 1], p[:, 2], color="tab:red", linewidth=1.0,
                label="estimate")
        ax.scatter([0], [0], [0], color="k", marker="*", s=40, label="vertex")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_zlabel("z (m)")
    if poses or truth is not None:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)


def sweep_surface(w_i_grid: Sequence[float], w_a_grid: Sequence[float],
                  errors: np.ndarray, out_path) -> Path:
    """Heat map of RMS inclination error over the weight grid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(np.rad2deg(errors), origin="lower", aspect="auto",
                   extent=(min(w_a_grid), max(w_a_grid),
                           min(w_i_grid), max(w_i_grid)), cmap="viridis")
    i, j = np.unravel_index(int(np.argmin(errors)), errors.shape)
    ax.plot(w_a_grid[j], w_i_grid[i], "r*", markersize=12, label="optimum")
    ax.set_xlabel("accelerometer weight w_a")
    ax.set_ylabel("image weight w_i")
    fig.colorbar(im, ax=ax, label="RMS inclination error (deg)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)


def depth_profile_figure(rows, out_path) -> Path:
    """Binned depth error with the one-pixel prediction curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    mids = [0.5 * (r["depth_lo"] + r["depth_hi"]) for r in rows]
    ax.errorbar(mids, [r["mean_abs"] for r in rows],
                yerr=[r["std"] for r in rows], fmt="o-", capsize=3,
                label="measured |error|")
    ax.plot(mids, [r["one_pixel"] for r in rows], "k--",
            label="one-pixel error")
    ax.set_xlabel("depth (m)")
    ax.set_ylabel("position error (m)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return Path(out_path)
