"""Synthetic ground truth: kinematic camera tracks, induced observations,
noise models, and error metrics.

The observation geometry is relative between consecutive frames: the earlier
camera of each pair sits at the origin, scene points are expressed in its
frame, and the measurement is the reprojection under the relative motion.  A
filter therefore estimates the frame-to-frame motion; absolute poses are the
running product.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .lie import MotionState, geodesic_distance, prod_exp, se3_inverse
from .integrators import lie_midpoint_step
from .mef import kinematic_drift
from .observation import KAPPA_MIN, Observation

log = logging.getLogger(__name__)

MIN_DEPTH = 1e-6

NOISE_KINDS = ("AG", "AU", "MG", "MU", "none")


@dataclass
class Track:
    """Time-stamped pose sequence with optional stacked derivative vectors."""

    times: np.ndarray
    poses: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.poses = np.asarray(self.poses, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("track times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def relative_pose(self, frame: int) -> np.ndarray:
        """Motion from frame-1 to frame expressed in the earlier camera."""
        return se3_inverse(self.poses[frame - 1]) @ self.poses[frame]


@dataclass
class Scene:
    """Static bag of 3D points (world coordinates)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(self.points) == 0:
            raise ValueError("scene must contain at least one point")


def frustum_scene(n_points: int, rng: np.random.Generator,
                  depth_range=(4.0, 40.0), half_width: float = 0.5,
                  camera: np.ndarray | None = None) -> Scene:
    """Sample points uniformly in the viewing frustum of ``camera``.

    Normalized image coordinates are drawn in [-half_width, half_width]^2 and
    depths uniformly in ``depth_range``; the identity camera is the default.
    """
    z = rng.uniform(*depth_range, size=n_points)
    uv = rng.uniform(-half_width, half_width, size=(n_points, 2))
    pts = np.column_stack([uv[:, 0] * z, uv[:, 1] * z, z])
    if camera is not None:
        pts = pts @ camera[:3, :3].T + camera[:3, 3]
    return Scene(pts)


@dataclass
class NoiseModel:
    """Observation noise: additive/multiplicative, Gaussian/uniform.

    Additive models perturb the measured location; multiplicative models
    scale each flow component.  The uniform distribution is parameterized by
    mean and variance (half width sqrt(3 sigma^2)).
    """

    kind: str = "none"
    mean: float = 0.0
    variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}, expected one of {NOISE_KINDS}")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind in ("AG", "MG"):
            return rng.normal(self.mean, np.sqrt(self.variance), size=shape)
        half = np.sqrt(3.0 * self.variance)
        return rng.uniform(self.mean - half, self.mean + half, size=shape)


def generate_track(order: int, E0: np.ndarray, v0: np.ndarray, frames: int,
                   delta: float, process_noise: np.ndarray | None = None,
                   rng: np.random.Generator | None = None,
                   substeps: int = 10) -> Track:
    """Integrate the order-m kinematic system over ``frames`` steps of size delta.

    ``v0`` stacks the initial derivative vectors, shape (order-1, 6).  Without
    process noise the state is advanced with the implicit Lie midpoint rule;
    with a covariance it is advanced by Euler-Maruyama increments at ten times
    finer steps.
    """
    v0 = np.asarray(v0, dtype=float).reshape(order - 1, 6) if order > 1 else np.zeros((0, 6))
    G = MotionState(np.asarray(E0, dtype=float), v0.copy())
    times = [0.0]
    poses = [G.pose.copy()]
    vels = [G.vels.ravel().copy()]
    if process_noise is not None:
        process_noise = np.asarray(process_noise, dtype=float)
        if rng is None:
            rng = np.random.default_rng(0)
        chol = np.linalg.cholesky(process_noise + 1e-300 * np.eye(6 * order))
    for k in range(1, frames + 1):
        if process_noise is None:
            G = lie_midpoint_step(G, kinematic_drift, delta)
        else:
            h = delta / substeps
            for _ in range(substeps):
                eps = chol @ rng.standard_normal(6 * order)
                inc = h * kinematic_drift(G) + np.sqrt(h) * eps
                G = G.compose(prod_exp(inc, order))
        times.append(k * delta)
        poses.append(G.pose.copy())
        vels.append(G.vels.ravel().copy())
    return Track(np.array(times), np.array(poses), np.array(vels))


def observe_frame(E_prev: np.ndarray, E_cur: np.ndarray, scene: Scene, n: int,
                  rng: np.random.Generator) -> list[Observation]:
    """Project ``n`` scene points through the frame pair.

    Points are expressed in the earlier camera; pixel and depth come from
    there, the measurement is the reprojection under the relative motion.
    Points behind either camera (or on a principal plane) are skipped and
    replaced by further draws; raises if the scene cannot supply n valid
    points.
    """
    E_rel = se3_inverse(E_prev) @ E_cur
    E_rel_inv = se3_inverse(E_rel)
    prev_inv = se3_inverse(E_prev)
    order = rng.permutation(len(scene.points))
    out: list[Observation] = []
    for idx in order:
        if len(out) == n:
            break
        p_world = scene.points[idx]
        p_prev = prev_inv[:3, :3] @ p_world + prev_inv[:3, 3]
        depth = p_prev[2]
        if depth <= MIN_DEPTH:
            continue
        pixel = p_prev[:2] / depth
        g = np.array([p_prev[0], p_prev[1], depth, 1.0])
        b = E_rel_inv @ g
        if abs(b[2]) <= KAPPA_MIN:
            continue
        y = b[:2] / b[2]
        out.append(Observation(pixel=pixel, depth=float(depth), y=y, g=g))
    if len(out) < n:
        raise ValueError(f"scene provided only {len(out)} of {n} valid observations")
    return out


def observation_stream(track: Track, n: int, rng: np.random.Generator,
                       scene_points: int | None = None,
                       noise: NoiseModel | None = None,
                       depth_range=(4.0, 40.0)) -> list[list[Observation]]:
    """Per-frame observation batches for a track.

    A fresh frustum scene is sampled in each frame pair's earlier camera, so
    every frame is guaranteed n valid points regardless of how far the track
    travels.  Noise, when given, is applied with a single generator seeded
    from the model so identical seeds give identical streams.
    """
    scene_points = scene_points or max(4 * n, 64)
    noise_rng = noise.rng() if noise is not None and noise.kind != "none" else None
    stream = []
    for frame in range(1, len(track)):
        scene = frustum_scene(scene_points, rng, depth_range=depth_range,
                              camera=track.poses[frame - 1])
        obs = observe_frame(track.poses[frame - 1], track.poses[frame], scene, n, rng)
        if noise_rng is not None:
            obs = apply_noise(obs, noise, noise_rng)
        stream.append(obs)
    return stream


def apply_noise(observations, model: NoiseModel,
                rng: np.random.Generator | None = None) -> list[Observation]:
    """Return a noisy copy of a batch.

    Additive kinds add the draw to the measurement; multiplicative kinds
    scale the flow (measurement minus pixel) componentwise.
    """
    if model.kind == "none":
        return [Observation(o.pixel.copy(), o.depth, o.y.copy(), o.g.copy()) for o in observations]
    if rng is None:
        rng = model.rng()
    out = []
    for o in observations:
        eps = model.draw(rng, 2)
        if model.kind in ("AG", "AU"):
            y = o.y + eps
        else:
            y = o.pixel + (o.y - o.pixel) * eps
        out.append(Observation(o.pixel.copy(), o.depth, y, o.g.copy()))
    return out


# ---------------------------------------------------------------------------
# Error metrics
# ---------------------------------------------------------------------------


def rotation_error_deg(E_gt: np.ndarray, E_est: np.ndarray) -> float:
    """Angle in degrees of the relative rotation between two poses."""
    R = E_gt[:3, :3].T @ E_est[:3, :3]
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(cos_theta)))


def translation_error(E_gt: np.ndarray, E_est: np.ndarray) -> float:
    return float(np.linalg.norm(E_gt[:3, 3] - E_est[:3, 3]))


def geodesic_error_series(track_gt, track_est) -> np.ndarray:
    """Per-frame geodesic distances between two pose sequences."""
    gt = track_gt.poses if isinstance(track_gt, Track) else np.asarray(track_gt)
    est = track_est.poses if isinstance(track_est, Track) else np.asarray(track_est)
    if len(gt) != len(est):
        raise ValueError(f"length mismatch: {len(gt)} vs {len(est)}")
    return np.array([geodesic_distance(a, b) for a, b in zip(gt, est)])


# ---------------------------------------------------------------------------
# Pose file I/O: one line per pose, 12 reals, row-major [R | w]
# ---------------------------------------------------------------------------


def save_pose_file(track: Track, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for E in track.poses:
            fh.write(" ".join(repr(float(v)) for v in E[:3, :].ravel()) + "\n")


def _orthonormalize(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


def load_pose_file(path, delta: float = 1.0) -> Track:
    """Read a pose file; rotations drifting from orthogonality are polar
    projected back (with a warning beyond 1e-3)."""
    poses = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 12:
                raise ValueError(f"{path}:{lineno}: expected 12 values, found {len(parts)}")
            try:
                vals = np.array([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            E = np.eye(4)
            E[:3, :] = vals.reshape(3, 4)
            R = E[:3, :3]
            drift = np.abs(R.T @ R - np.eye(3)).max()
            if drift > 1e-9:
                if drift > 1e-3:
                    warnings.warn(f"{path}:{lineno}: rotation deviates by {drift:.2e}, re-orthonormalizing")
                E[:3, :3] = _orthonormalize(R)
            poses.append(E)
    times = np.arange(len(poses)) * delta
    return Track(times, np.array(poses))
