"""Canonical face/gaze normalization.

Re-expresses a captured face and its gaze vector in a virtual camera frame:
a rotation that points the camera z-axis at the face center (with roll
cancelled against the original camera y-axis), plus a scaling that moves the
face to a canonical distance, realized as a 3x3 image warp
W = K_norm @ S @ R @ K_real^-1 with S = diag(1, 1, distance_norm / distance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidIntrinsics
from .geometry import CameraIntrinsics

DEFAULT_FOCAL_NORM = 960.0
DEFAULT_DISTANCE_NORM = 600.0
DEFAULT_SIZE_NORM = 224


@dataclass(frozen=True)
class NormalizationParams:
    focal_norm: float = DEFAULT_FOCAL_NORM
    distance_norm: float = DEFAULT_DISTANCE_NORM
    size_norm: int = DEFAULT_SIZE_NORM

    def __post_init__(self):
        if self.focal_norm <= 0 or self.distance_norm <= 0 or self.size_norm <= 0:
            raise ValueError("normalization parameters must be positive")

    def intrinsics_matrix(self) -> np.ndarray:
        return np.array([[self.focal_norm, 0.0, self.size_norm / 2.0],
                         [0.0, self.focal_norm, self.size_norm / 2.0],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class NormalizedSampleGeometry:
    R_norm: np.ndarray
    warp: np.ndarray
    gaze_norm: np.ndarray | None


def normalization_rotation(face_center_camera_mm) -> np.ndarray:
    """Rotation taking the face-center direction to (0, 0, 1), roll cancelled
    against the original camera y-axis (the "down proxy")."""
    c = np.asarray(face_center_camera_mm, dtype=float)
    n = np.linalg.norm(c)
    if n < 1e-12:
        raise DegenerateGeometry("face center at the camera origin")
    z_n = c / n
    down = np.array([0.0, 1.0, 0.0])
    x_n = np.cross(down, z_n)
    xn = np.linalg.norm(x_n)
    if xn < 1e-12:
        raise DegenerateGeometry("face center parallel to the camera y-axis")
    x_n = x_n / xn
    y_n = np.cross(z_n, x_n)
    return np.vstack([x_n, y_n, z_n])


def normalize_gaze(R: np.ndarray, gaze_camera) -> np.ndarray:
    g = R @ np.asarray(gaze_camera, dtype=float)
    n = np.linalg.norm(g)
    if n < 1e-12:
        raise DegenerateGeometry("zero gaze vector")
    return g / n


def normalization_warp(K_real: CameraIntrinsics, params: NormalizationParams,
                       R: np.ndarray, face_distance_mm: float) -> np.ndarray:
    """Image transform original pixels -> normalized pixels."""
    if face_distance_mm <= 0:
        raise DegenerateGeometry("face distance must be positive")
    Km = K_real.matrix()
    if abs(np.linalg.det(Km)) < 1e-12:
        raise InvalidIntrinsics("singular intrinsics")
    S = np.diag([1.0, 1.0, params.distance_norm / face_distance_mm])
    return params.intrinsics_matrix() @ S @ R @ np.linalg.inv(Km)


def warp_image(image: np.ndarray, transform: np.ndarray,
               out_w: int, out_h: int) -> np.ndarray:
    """Inverse-mapping warp with bilinear interpolation.

    Output pixels whose source falls outside the input image are 0."""
    inv = np.linalg.inv(np.asarray(transform, dtype=float))
    ys, xs = np.mgrid[0:out_h, 0:out_w]
    ones = np.ones_like(xs, dtype=float)
    dst = np.stack([xs.astype(float), ys.astype(float), ones])
    src = np.tensordot(inv, dst, axes=1)
    w = src[2]
    valid = np.abs(w) > 1e-12
    sx = np.where(valid, src[0] / np.where(valid, w, 1.0), -1.0)
    sy = np.where(valid, src[1] / np.where(valid, w, 1.0), -1.0)

    h, wid = image.shape[:2]
    inside = (sx >= 0) & (sy >= 0) & (sx <= wid - 1) & (sy <= h - 1)
    # clamp the cell so exact border coordinates interpolate within range
    x0c = np.clip(np.floor(sx).astype(int), 0, wid - 2)
    y0c = np.clip(np.floor(sy).astype(int), 0, h - 2)
    fx = sx - x0c
    fy = sy - y0c
    img = image.astype(float)
    top = img[y0c, x0c] * (1 - fx) + img[y0c, x0c + 1] * fx
    bot = img[y0c + 1, x0c] * (1 - fx) + img[y0c + 1, x0c + 1] * fx
    out = top * (1 - fy) + bot * fy
    out[~inside] = 0.0
    if np.issubdtype(image.dtype, np.integer):
        return np.clip(np.rint(out), 0, 255).astype(image.dtype)
    return out.astype(image.dtype)


def normalize_sample(image: np.ndarray | None, K_real: CameraIntrinsics,
                     params: NormalizationParams, face_center_camera_mm,
                     gaze_camera=None) -> tuple[NormalizedSampleGeometry, np.ndarray | None]:
    """Full normalization of one capture: rotation, warp, optional gaze, and
    the warped face crop (None when no image is supplied)."""
    R = normalization_rotation(face_center_camera_mm)
    dist = float(np.linalg.norm(np.asarray(face_center_camera_mm, dtype=float)))
    W = normalization_warp(K_real, params, R, dist)
    gaze_n = normalize_gaze(R, gaze_camera) if gaze_camera is not None else None
    warped = None
    if image is not None:
        warped = warp_image(image, W, params.size_norm, params.size_norm)
    return NormalizedSampleGeometry(R_norm=R, warp=W, gaze_norm=gaze_n), warped
