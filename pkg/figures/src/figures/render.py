"""Turn one scenario export directory into a raster figure.

Two kinds are supported: a bird's-eye strip with vehicle boxes drawn at a
fixed time cadence, and position-versus-time plots with the interior
constraint time and targets marked. Rendering is read-only over the export
files and deterministic: the same inputs give the same figure size and
axes ranges.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

KINDS = ("snapshot", "postime")
_DPI = 130


class RenderError(RuntimeError):
    """The export directory is malformed (missing file, empty table, ...)."""


class MissingColumnError(RenderError):
    """A required CSV column is absent; the message names it."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_dir: Path
    output_path: Path
    snapshot_interval: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.snapshot_interval <= 0.0:
            raise ValueError("snapshot_interval must be positive")


def _read_table(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise RenderError(f"{path}: file not found")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise RenderError(f"{path.name}: empty table")
    header = [h.strip() for h in lines[0].split(",")]
    for column in required:
        if column not in header:
            raise MissingColumnError(f"{path.name}: missing column {column!r}")
    if len(lines) < 2:
        raise RenderError(f"{path.name}: no data rows")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.shape[1] != len(header):
        raise RenderError(f"{path.name}: ragged rows")
    return {name: data[:, k] for k, name in enumerate(header)}


def _load_export(input_dir: Path):
    ego = _read_table(input_dir / "ego.csv",
                      ("t", "s_x", "v_x", "u_x", "s_y", "v_y", "u_y"))
    obstacle = _read_table(input_dir / "obstacle.csv",
                           ("t", "x_s_true", "x_s_pred", "y_s"))
    meta_path = input_dir / "meta.json"
    if not meta_path.exists():
        raise RenderError(f"{meta_path}: file not found")
    meta = json.loads(meta_path.read_text())
    return ego, obstacle, meta


def _vehicle_box(ax, x: float, y: float, length: float, width: float,
                 color: str, alpha: float) -> None:
    ax.add_patch(Rectangle((x - length / 2.0, y - width / 2.0), length, width,
                           facecolor=color, edgecolor="black",
                           linewidth=0.6, alpha=alpha))


def _render_snapshot(spec: FigureSpec, ego, obstacle, meta) -> dict:
    t = ego["t"]
    t0, tf = float(t[0]), float(t[-1])
    count = int(np.floor((tf - t0) / spec.snapshot_interval + 1e-9)) + 1
    snap_times = t0 + spec.snapshot_interval * np.arange(count)
    idx = np.clip(np.searchsorted(t, snap_times - 1e-9), 0, len(t) - 1)

    env = meta["envelope"]
    boundary = meta["boundary"]
    lane_width = boundary["s_yf"] - boundary["s_y0"]
    road_lo = boundary["s_y0"] - lane_width / 2.0
    road_hi = boundary["s_yf"] + lane_width / 2.0
    divider = 0.5 * (boundary["s_y0"] + boundary["s_yf"])

    fig, ax = plt.subplots(figsize=(11.0, 3.0), dpi=_DPI)
    ax.axhline(road_lo, color="black", linewidth=1.2)
    ax.axhline(road_hi, color="black", linewidth=1.2)
    ax.axhline(divider, color="gray", linewidth=0.8, linestyle=(0, (6, 6)))

    for rank, k in enumerate(idx):
        alpha = 0.25 + 0.75 * rank / max(1, count - 1)
        _vehicle_box(ax, ego["s_x"][k], ego["s_y"][k],
                     env["length"], env["width"], "tab:green", alpha)
        _vehicle_box(ax, obstacle["x_s_true"][k], obstacle["y_s"][k],
                     env["length"], env["width"], "tab:orange", alpha)

    x_all = np.concatenate([ego["s_x"][idx], obstacle["x_s_true"][idx]])
    x_lo = float(x_all.min()) - env["length"]
    x_hi = float(x_all.max()) + env["length"]
    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(road_lo - 1.0, road_hi + 1.0)
    ax.set_xlabel("longitudinal position (m)")
    ax.set_ylabel("lateral position (m)")
    ax.set_title(f"{meta.get('scenario', spec.input_dir.name)}: poses every "
                 f"{spec.snapshot_interval:g} s")
    fig.tight_layout()
    info = {
        "snapshots": count,
        "xlim": ax.get_xlim(),
        "ylim": ax.get_ylim(),
    }
    return fig, info


def _render_postime(spec: FigureSpec, ego, obstacle, meta) -> dict:
    t = ego["t"]
    plan = meta["plan"]
    env = meta["envelope"]
    t_i = plan.get("t_i")

    fig, (ax_x, ax_y) = plt.subplots(2, 1, figsize=(7.0, 6.5), dpi=_DPI,
                                     sharex=True)
    ax_x.plot(t, ego["s_x"], color="tab:green", label="ego")
    ax_x.plot(t, obstacle["x_s_true"], color="tab:orange", label="neighbor")
    ax_x.plot(t, obstacle["x_s_pred"], color="tab:orange", linestyle=":",
              label="neighbor (predicted)")
    ax_y.plot(t, ego["s_y"], color="tab:green", label="ego")
    ax_y.plot(t, obstacle["y_s"], color="tab:orange", label="neighbor lane")

    if t_i is not None:
        sign = -1.0 if meta.get("side") == "front_cross" else 1.0
        a, b, c, d = meta["prediction"]["coefficients"]
        x_pred = ((a * t_i + b) * t_i + c) * t_i + d
        x_c = x_pred + sign * (env["length"] / 2.0 + env["margin_x"])
        y_c = obstacle["y_s"][0] - sign * (env["width"] / 2.0 + env["margin_y"])
        for ax, target in ((ax_x, x_c), (ax_y, y_c)):
            ax.axvline(t_i, color="red", linestyle="--", linewidth=1.0)
            ax.axhline(target, color="red", linestyle="--", linewidth=1.0)
        ax_x.plot([t_i], [x_c], "r.", markersize=8)
        ax_y.plot([t_i], [y_c], "r.", markersize=8)

    ax_x.set_ylabel("longitudinal position (m)")
    ax_y.set_ylabel("lateral position (m)")
    ax_y.set_xlabel("time (s)")
    ax_x.set_title(meta.get("scenario", spec.input_dir.name))
    ax_x.legend(loc="upper left", fontsize=8)
    ax_y.legend(loc="upper left", fontsize=8)
    ax_y.set_xlim(float(t[0]), float(t[-1]))
    fig.tight_layout()
    info = {
        "snapshots": None,
        "xlim": ax_x.get_xlim(),
        "ylim": (ax_x.get_ylim(), ax_y.get_ylim()),
        "t_i": t_i,
    }
    return fig, info


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns {path, snapshots, xlim, ylim, ...}.

    The output file appears only after a fully successful render: the image
    is written to a sibling temp file first and moved into place.
    """
    ego, obstacle, meta = _load_export(Path(spec.input_dir))
    if spec.kind == "snapshot":
        fig, info = _render_snapshot(spec, ego, obstacle, meta)
    else:
        fig, info = _render_postime(spec, ego, obstacle, meta)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".part")
    image_format = (out.suffix.lstrip(".") or "png").lower()
    try:
        fig.savefig(tmp, format=image_format)
        os.replace(tmp, out)
    finally:
        plt.close(fig)
        tmp.unlink(missing_ok=True)
    info["path"] = out
    return info
