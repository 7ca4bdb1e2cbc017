"""Dense depth-map metrics under metric and per-frame scale-shift alignment.

A depth frame is a dense h x w float map plus a validity mask (NaN encodes
invalid on disk).  Scale-shift alignment fits s*pred + t to the ground truth
per frame in closed form (2x2 normal equations over jointly valid pixels)
before computing AbsRel, RMSE and the delta < 1.25 inlier percentage.

On-disk formats: a small binary container (magic 'DPTH', u32 height, u32
width, little-endian, then row-major float32) and a CSV grid for tests
(one row per image row, empty cells or 'nan' meaning invalid).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEPTH_MAGIC = b"DPTH"

METRIC = "metric"
SCALE_SHIFT = "scale-shift"
ALIGNMENTS = (METRIC, SCALE_SHIFT)


@dataclass
class DepthFrame:
    """Dense depth values with a validity mask (non-finite pixels invalid)."""

    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"depth values must be 2-D, got shape {self.values.shape}")
        finite = np.isfinite(self.values)
        if self.mask is None:
            self.mask = finite
        else:
            self.mask = np.asarray(self.mask, dtype=bool) & finite
        if self.mask.shape != self.values.shape:
            raise ValueError("mask shape differs from values shape")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _scale_shift_fit(pred: np.ndarray, gt: np.ndarray):
    """Closed-form argmin over (s, t) of sum (s*pred + t - gt)^2."""
    n = float(len(pred))
    sp = pred.sum()
    spp = (pred * pred).sum()
    sg = gt.sum()
    spg = (pred * gt).sum()
    det = spp * n - sp * sp
    if abs(det) < np.finfo(float).tiny * max(n, 1.0):
        raise ValueError("degenerate scale-shift fit: constant prediction")
    s = (spg * n - sp * sg) / det
    t = (spp * sg - sp * spg) / det
    return s, t


def depth_metrics(pred: DepthFrame, gt: DepthFrame, alignment: str = METRIC):
    """(absrel, rmse, delta125-percent) over jointly valid pixels."""
    if alignment not in ALIGNMENTS:
        raise ValueError(f"alignment must be one of {ALIGNMENTS}, got {alignment!r}")
    if pred.values.shape != gt.values.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.values.shape} vs gt {gt.values.shape}"
        )
    joint = pred.mask & gt.mask
    if not joint.any():
        raise ValueError("no jointly valid pixels")
    p = pred.values[joint]
    g = gt.values[joint]
    if (g <= 0).any():
        raise ValueError("nonpositive ground-truth depth at a valid pixel")
    if alignment == SCALE_SHIFT:
        s, t = _scale_shift_fit(p, g)
        p = s * p + t
    err = p - g
    absrel = float(np.abs(err / g).mean())
    rmse = float(np.sqrt((err * err).mean()))
    ratio = np.maximum(p / g, g / p)
    delta125 = float((ratio < 1.25).mean() * 100.0)
    return absrel, rmse, delta125


# --- binary container -----------------------------------------------------------


def write_depth_bin(path, frame: DepthFrame) -> None:
    data = frame.values.astype(np.float32).copy()
    data[~frame.mask] = np.nan
    header = DEPTH_MAGIC + struct.pack("<II", frame.height, frame.width)
    Path(path).write_bytes(header + data.tobytes(order="C"))


def read_depth_bin(path) -> DepthFrame:
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != DEPTH_MAGIC:
        raise ValueError(f"{path}: not a depth container (bad magic)")
    h, w = struct.unpack("<II", blob[4:12])
    expected = 12 + 4 * h * w
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {h}x{w}, got {len(blob)}")
    values = np.frombuffer(blob[12:], dtype="<f4").reshape(h, w).astype(float)
    return DepthFrame(values=values)


# --- CSV grid (test fixtures) ----------------------------------------------------


def write_depth_csv(path, frame: DepthFrame) -> None:
    lines = []
    for r in range(frame.height):
        cells = []
        for c in range(frame.width):
            if frame.mask[r, c]:
                cells.append(format(float(frame.values[r, c]), ".17g"))
            else:
                cells.append("")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_depth_csv(path) -> DepthFrame:
    rows = []
    for raw in Path(path).read_text().splitlines():
        if raw.startswith("#") or not raw.strip():
            continue
        cells = raw.split(",")
        rows.append(
            [float(c) if c.strip() not in ("", "nan") else np.nan for c in cells]
        )
    if not rows:
        raise ValueError(f"{path}: empty depth grid")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged depth grid (row widths {sorted(widths)})")
    return DepthFrame(values=np.array(rows))
