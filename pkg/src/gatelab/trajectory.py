"""Trajectory alignment and error metrics, plus TUM/KITTI pose-file ingestion.

Estimated trajectories are aligned to ground truth with a similarity
transform (scale, rotation, translation) fitted in closed form from matched
translations; ATE is the RMSE of the aligned residuals, and rotational RPE
the RMSE of the geodesic angle between relative-rotation increments at a
fixed frame lag.

Quaternions are stored w-last (x, y, z, w) and renormalized on parsing.
Timestamp association is greedy nearest-neighbor with a 20 ms default
tolerance; unmatched poses are dropped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

ASSOCIATION_TOLERANCE_S = 0.02


@dataclass
class Pose:
    """Timestamped rigid pose: unit quaternion (x, y, z, w) + translation."""

    timestamp: float
    quat: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        self.quat = np.asarray(self.quat, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        if self.quat.shape != (4,):
            raise ValueError(f"quaternion must have 4 components, got {self.quat.shape}")
        if self.trans.shape != (3,):
            raise ValueError(f"translation must have 3 components, got {self.trans.shape}")
        n = np.linalg.norm(self.quat)
        if n == 0 or not np.isfinite(n):
            raise ValueError("degenerate quaternion")
        self.quat = self.quat / n


@dataclass
class Trajectory:
    poses: List[Pose] = field(default_factory=list)

    def __post_init__(self):
        ts = [p.timestamp for p in self.poses]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.poses)

    def translations(self) -> np.ndarray:
        return np.array([p.trans for p in self.poses]).reshape(len(self.poses), 3)

    def rotations(self) -> np.ndarray:
        return np.array([quat_to_matrix(p.quat) for p in self.poses])

    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.poses])


@dataclass
class Sim3Transform:
    """Similarity transform x -> scale * R @ x + t with R in SO(3)."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * points @ self.rotation.T + self.translation

    def inverse(self) -> "Sim3Transform":
        r_inv = self.rotation.T
        s_inv = 1.0 / self.scale
        return Sim3Transform(s_inv, r_inv, -s_inv * r_inv @ self.translation)

    def compose(self, other: "Sim3Transform") -> "Sim3Transform":
        """Transform equivalent to applying `other` first, then self."""
        return Sim3Transform(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * self.rotation @ other.translation + self.translation,
        )


# --- quaternion helpers (w-last convention) ----------------------------------


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to (x, y, z, w), largest-component branch for stability."""
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    return q / np.linalg.norm(q)


# --- alignment ----------------------------------------------------------------


def umeyama_sim3(src: np.ndarray, dst: np.ndarray) -> Sim3Transform:
    """Least-squares similarity aligning src points onto dst points.

    Minimizes sum ||s*R*src_i + t - dst_i||^2; rotation from the SVD of the
    cross-covariance with a determinant-sign correction on the smallest
    singular direction, so the result is always a proper rotation.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError(f"need matching (n, 3) point sets, got {src.shape} and {dst.shape}")
    n = src.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 correspondences, got {n}")
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    x = src - mu_src
    y = dst - mu_dst
    var_src = (x * x).sum() / n
    if var_src < np.finfo(float).tiny:
        raise ValueError("zero source variance: all source points coincide")
    cov = y.T @ x / n
    u, d, vt = np.linalg.svd(cov)
    if d[1] <= 1e-12 * max(d[0], 1.0):
        raise ValueError("rank-deficient covariance: source points are collinear")
    sign = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rotation = u @ np.diag(sign) @ vt
    scale = float((d * sign).sum() / var_src)
    translation = mu_dst - scale * rotation @ mu_src
    return Sim3Transform(scale, rotation, translation)


def associate(est: Trajectory, gt: Trajectory, tolerance: float = ASSOCIATION_TOLERANCE_S):
    """Greedy unique nearest-neighbor timestamp matching.

    Candidate pairs within the tolerance are taken best-first (smallest time
    difference, ties broken by indices); returns index pairs sorted by the
    estimate's order.
    """
    te, tg = est.timestamps(), gt.timestamps()
    candidates = []
    for i, t in enumerate(te):
        close = np.flatnonzero(np.abs(tg - t) <= tolerance)
        for j in close:
            candidates.append((abs(tg[j] - t), i, int(j)))
    candidates.sort()
    used_i, used_j, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j))
    pairs.sort()
    return pairs


def ate_rmse(est: Trajectory, gt: Trajectory, tolerance: float = ASSOCIATION_TOLERANCE_S) -> float:
    """RMSE of translation residuals after similarity alignment (meters)."""
    pairs = associate(est, gt, tolerance)
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 associated poses, got {len(pairs)}")
    p_est = est.translations()[[i for i, _ in pairs]]
    p_gt = gt.translations()[[j for _, j in pairs]]
    transform = umeyama_sim3(p_est, p_gt)
    residual = transform.apply(p_est) - p_gt
    return float(np.sqrt((residual * residual).sum(axis=1).mean()))


def rpe_rotation(
    est: Trajectory,
    gt: Trajectory,
    delta: int = 1,
    tolerance: float = ASSOCIATION_TOLERANCE_S,
) -> float:
    """RMSE of relative-rotation geodesic angles at frame lag delta (degrees)."""
    if delta < 1:
        raise ValueError(f"delta must be >= 1, got {delta}")
    pairs = associate(est, gt, tolerance)
    if len(pairs) < delta + 1:
        raise ValueError(
            f"need at least delta+1 = {delta + 1} associated poses, got {len(pairs)}"
        )
    r_est = est.rotations()[[i for i, _ in pairs]]
    r_gt = gt.rotations()[[j for _, j in pairs]]
    angles = []
    for i in range(len(pairs) - delta):
        rel_gt = r_gt[i].T @ r_gt[i + delta]
        rel_est = r_est[i].T @ r_est[i + delta]
        disc = rel_gt.T @ rel_est
        cos_angle = np.clip((np.trace(disc) - 1.0) / 2.0, -1.0, 1.0)
        angles.append(math.acos(cos_angle))
    angles = np.degrees(angles)
    return float(np.sqrt((angles * angles).mean()))


# --- file formats ---------------------------------------------------------------


def parse_tum(path) -> Trajectory:
    """Whitespace-separated 'timestamp tx ty tz qx qy qz qw' lines, '#' comments."""
    poses = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric field ({exc})") from None
        poses.append(Pose(timestamp=vals[0], quat=np.array(vals[4:8]), trans=np.array(vals[1:4])))
    return Trajectory(poses)


def write_tum(path, traj: Trajectory) -> None:
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for p in traj.poses:
        fields = [p.timestamp, *p.trans, *p.quat]
        lines.append(" ".join(format(float(v), ".17g") for v in fields))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_kitti(path) -> Trajectory:
    """One 3x4 row-major pose matrix (12 floats) per line; frame index as time.

    Rotation blocks further than 1e-3 from orthonormal are warned about and
    projected back onto SO(3) via SVD.
    """
    poses = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 12:
            raise ValueError(f"{path}:{lineno}: expected 12 fields, got {len(parts)}")
        try:
            vals = np.array([float(p) for p in parts]).reshape(3, 4)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric field ({exc})") from None
        r = vals[:, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-3:
            warnings.warn(
                f"{path}:{lineno}: rotation not orthonormal, projecting onto SO(3)"
            )
            u, _, vt = np.linalg.svd(r)
            sign = np.ones(3)
            if np.linalg.det(u) * np.linalg.det(vt) < 0:
                sign[-1] = -1.0
            r = u @ np.diag(sign) @ vt
        poses.append(
            Pose(timestamp=float(len(poses)), quat=matrix_to_quat(r), trans=vals[:, 3])
        )
    return Trajectory(poses)


def write_kitti(path, traj: Trajectory) -> None:
    lines = []
    for p in traj.poses:
        m = np.hstack([quat_to_matrix(p.quat), p.trans.reshape(3, 1)])
        lines.append(" ".join(format(float(v), ".17g") for v in m.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")
