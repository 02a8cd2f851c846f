"""Letter-board geometry.

Board frame convention: origin at the board center, x to the questioner's
right, y downward, z normal to the board toward the questioner. All cell
positions lie in the z = 0 plane; units are millimeters.

Camera frame: standard computer-vision convention (x right, y down,
z forward into the scene). A CameraPose maps board-frame points into the
camera frame: p_cam = R @ p_board + t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegenerateGeometry,
    InsufficientData,
    InvalidIntrinsics,
    NotFound,
    ParseError,
    PointAtInfinity,
)

# Standard gojūon grid, 5 rows (a i u e o) x 10 consonant columns.
# "." marks an empty cell; ん sits in the otherwise empty u-row slot.
_GOJUON_ROWS = [
    "あかさたなはまやらわ",
    "いきしちにひみ.り.",
    "うくすつぬふむゆるん",
    "えけせてねへめ.れ.",
    "おこそとのほもよろを",
]


@dataclass(frozen=True)
class LetterCell:
    id: str
    glyph: str
    row: int
    col: int
    position_mm: tuple[float, float, float]


@dataclass(frozen=True)
class BoardLayout:
    cells: tuple[LetterCell, ...]
    rows: int
    cols: int
    pitch_mm: float
    glyph_set_id: str = "hiragana-gojuon"
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)
    _by_glyph: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        seen_rc = set()
        for c in self.cells:
            if (c.row, c.col) in seen_rc:
                raise ValueError(f"duplicate cell at ({c.row}, {c.col})")
            seen_rc.add((c.row, c.col))
            if c.glyph in self._by_glyph:
                raise ValueError(f"glyph {c.glyph!r} appears in more than one cell")
            if c.position_mm[2] != 0.0:
                raise ValueError("cell positions must lie in the board z=0 plane")
            self._by_id[c.id] = c
            self._by_glyph[c.glyph] = c

    @property
    def glyphs(self) -> frozenset[str]:
        return frozenset(self._by_glyph)

    def cell(self, letter_id: str) -> LetterCell:
        """Look up a cell by id or by glyph."""
        c = self._by_id.get(letter_id) or self._by_glyph.get(letter_id)
        if c is None:
            raise NotFound(f"no such letter on the board: {letter_id!r}")
        return c

    def has_glyph(self, glyph: str) -> bool:
        return glyph in self._by_glyph

    def mirrored_position(self, letter_id: str) -> tuple[float, float, float]:
        """Where the glyph appears in the opposite player's view: (-x, y, 0)."""
        x, y, z = self.cell(letter_id).position_mm
        return (-x, y, z)

    def content_hash(self) -> str:
        import hashlib

        txt = f"{self.rows},{self.cols},{self.pitch_mm},{self.glyph_set_id};" + ";".join(
            f"{c.id},{c.glyph},{c.row},{c.col}" for c in self.cells
        )
        return hashlib.sha256(txt.encode("utf-8")).hexdigest()[:16]


def cell_position(row: int, col: int, rows: int, cols: int, pitch_mm: float) -> tuple[float, float, float]:
    """Board-centered grid position of cell (row, col)."""
    x = (col - (cols - 1) / 2.0) * pitch_mm
    y = (row - (rows - 1) / 2.0) * pitch_mm
    return (x, y, 0.0)


def make_grid_layout(glyph_rows: list[str], pitch_mm: float = 60.0,
                     glyph_set_id: str = "hiragana-gojuon") -> BoardLayout:
    """Build a centered grid layout from rows of glyphs ('.' = empty cell)."""
    rows = len(glyph_rows)
    cols = max(len(r) for r in glyph_rows)
    cells = []
    for r, line in enumerate(glyph_rows):
        for c, glyph in enumerate(line):
            if glyph == ".":
                continue
            cells.append(LetterCell(
                id=f"r{r}c{c}",
                glyph=glyph,
                row=r,
                col=c,
                position_mm=cell_position(r, c, rows, cols, pitch_mm),
            ))
    return BoardLayout(cells=tuple(cells), rows=rows, cols=cols,
                       pitch_mm=pitch_mm, glyph_set_id=glyph_set_id)


def default_board_layout(pitch_mm: float = 60.0) -> BoardLayout:
    return make_grid_layout(_GOJUON_ROWS, pitch_mm=pitch_mm)


def load_board_layout(path) -> BoardLayout:
    """Load a board layout file: 'key = value' header lines, then a [cells]
    table of 'row col glyph' lines. Lines starting with '#' are comments."""
    header: dict[str, str] = {}
    cells: list[tuple[int, int, str]] = []
    in_cells = False
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line == "[cells]":
                in_cells = True
                continue
            if not in_cells:
                if "=" not in line:
                    raise ParseError(f"expected 'key = value', got {line!r}", ln)
                k, v = (s.strip() for s in line.split("=", 1))
                header[k] = v
            else:
                parts = line.split()
                if len(parts) != 3:
                    raise ParseError(f"expected 'row col glyph', got {line!r}", ln)
                try:
                    cells.append((int(parts[0]), int(parts[1]), parts[2]))
                except ValueError:
                    raise ParseError(f"bad cell indices in {line!r}", ln) from None
    try:
        rows = int(header["rows"])
        cols = int(header["cols"])
        pitch = float(header["pitch_mm"])
    except KeyError as e:
        raise ParseError(f"missing header key {e.args[0]!r}") from None
    glyph_set_id = header.get("glyph_set_id", "custom")
    built = [
        LetterCell(id=f"r{r}c{c}", glyph=g, row=r, col=c,
                   position_mm=cell_position(r, c, rows, cols, pitch))
        for r, c, g in cells
    ]
    return BoardLayout(cells=tuple(built), rows=rows, cols=cols,
                       pitch_mm=pitch, glyph_set_id=glyph_set_id)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_w: int
    image_h: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidIntrinsics("focal lengths must be positive")
        if not (0 <= self.cx < self.image_w and 0 <= self.cy < self.image_h):
            raise InvalidIntrinsics("principal point outside the image")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


class CameraPose:
    """Rigid transform board frame -> camera frame: p_cam = R @ p_board + t."""

    __slots__ = ("rotation", "translation_mm")

    def __init__(self, rotation, translation_mm):
        R = np.asarray(rotation, dtype=float).reshape(3, 3)
        t = np.asarray(translation_mm, dtype=float).reshape(3)
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            raise DegenerateGeometry("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise DegenerateGeometry("rotation determinant is not +1")
        self.rotation = R
        self.translation_mm = t

    def camera_origin_board(self) -> np.ndarray:
        """Camera origin expressed in the board frame: -R^T t."""
        return -self.rotation.T @ self.translation_mm

    def to_camera(self, p_board) -> np.ndarray:
        return self.rotation @ np.asarray(p_board, dtype=float) + self.translation_mm


class Homography:
    """3x3 projective map image pixels -> board millimeters (both 2D).

    Stored normalized: h[2,2] = 1 when that entry is nonzero, otherwise
    unit Frobenius norm.
    """

    __slots__ = ("h",)

    def __init__(self, h):
        H = np.asarray(h, dtype=float).reshape(3, 3)
        if abs(H[2, 2]) > 1e-12:
            H = H / H[2, 2]
        else:
            H = H / np.linalg.norm(H)
        # Condition check: reject maps that are numerically non-invertible.
        if abs(np.linalg.det(H)) < 1e-12 * np.linalg.norm(H, "fro") ** 3:
            raise DegenerateConfiguration("homography is not invertible")
        self.h = H

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.h)


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-300:
        raise DegenerateGeometry("zero-length vector")
    return v / n


def letter_position(layout: BoardLayout, letter_id: str) -> np.ndarray:
    """3D board-frame position of a letter, by cell id or glyph.

    Both players' views of a glyph resolve to the same physical cell, so
    the result is view-independent.
    """
    return np.asarray(layout.cell(letter_id).position_mm, dtype=float)


def gaze_label(pose: CameraPose, eye_origin_camera_mm, target_board_mm) -> np.ndarray:
    """Unit gaze-direction label in the camera frame, from the eye origin
    toward a board-frame target point."""
    d = pose.to_camera(target_board_mm) - np.asarray(eye_origin_camera_mm, dtype=float)
    return _unit(d)


def angular_error_deg(v1, v2) -> float:
    """Angle between two directions in degrees, in [0, 180]."""
    a = _unit(np.asarray(v1, dtype=float))
    b = _unit(np.asarray(v2, dtype=float))
    return math.degrees(math.acos(np.clip(np.dot(a, b), -1.0, 1.0)))


def _hartley_normalization(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translate to centroid and scale to mean distance sqrt(2).

    Returns (normalized homogeneous points, 3x3 transform T)."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = math.sqrt(2.0) / d if d > 1e-12 else 1.0
    T = np.array([[s, 0.0, -s * centroid[0]],
                  [0.0, s, -s * centroid[1]],
                  [0.0, 0.0, 1.0]])
    homog = np.column_stack([pts, np.ones(len(pts))])
    return (T @ homog.T).T, T


def estimate_homography(correspondences) -> Homography:
    """Normalized DLT estimate of the image->board homography.

    correspondences: iterable of (image_px_xy, board_mm_xy) pairs, >= 4.
    For exactly 4 pairs no 3 image points may be collinear.
    """
    pairs = list(correspondences)
    if len(pairs) < 4:
        raise InsufficientData(f"need >= 4 correspondences, got {len(pairs)}")
    src = np.array([p[0] for p in pairs], dtype=float)
    dst = np.array([p[1] for p in pairs], dtype=float)
    src_n, T_src = _hartley_normalization(src)
    dst_n, T_dst = _hartley_normalization(dst)

    A = np.zeros((2 * len(pairs), 9))
    for i, (p, q) in enumerate(zip(src_n, dst_n)):
        x, y, _ = p
        u, v, _ = q
        A[2 * i] = [-x, -y, -1, 0, 0, 0, u * x, u * y, u]
        A[2 * i + 1] = [0, 0, 0, -x, -y, -1, v * x, v * y, v]

    _, s, vt = np.linalg.svd(A)
    if s[-2] < 1e-10 * s[0]:
        raise DegenerateConfiguration("rank-deficient design matrix")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(T_dst) @ Hn @ T_src
    return Homography(H)


def homography_from_pose(pose: CameraPose, K: CameraIntrinsics) -> Homography:
    """Image->board homography induced by a pose of the z=0 board plane."""
    R, t = pose.rotation, pose.translation_mm
    H_b2i = K.matrix() @ np.column_stack([R[:, 0], R[:, 1], t])
    if abs(np.linalg.det(H_b2i)) < 1e-12:
        raise DegenerateConfiguration("pose induces a singular homography")
    return Homography(np.linalg.inv(H_b2i))


def pose_from_homography(H: Homography, K: CameraIntrinsics) -> CameraPose:
    """Planar pose decomposition of an image->board homography.

    Internally inverts H to the board->image direction, then applies the
    standard decomposition B = K^-1 H_b2i; r1 = b1/lam, r2 = b2/lam,
    r3 = r1 x r2, t = b3/lam with lam = mean(|b1|, |b2|), nearest-rotation
    projection via SVD, and the sign chosen so the board sits in front of
    the camera (t_z > 0).
    """
    H_b2i = H.inverse()
    B = np.linalg.inv(K.matrix()) @ H_b2i
    lam = (np.linalg.norm(B[:, 0]) + np.linalg.norm(B[:, 1])) / 2.0
    if lam < 1e-12:
        raise DegenerateConfiguration("near-singular homography decomposition")
    B = B / lam
    if B[2, 2] < 0:  # board must be in front of the camera
        B = -B
    r1, r2, t = B[:, 0], B[:, 1], B[:, 2]
    R_approx = np.column_stack([r1, r2, np.cross(r1, r2)])
    U, _, Vt = np.linalg.svd(R_approx)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, 2] *= -1
        R = U @ Vt
    return CameraPose(R, t)


def map_gaze_to_board(gaze_px, H: Homography) -> np.ndarray:
    """Map a 2D image point to board millimeters through H."""
    p = np.array([gaze_px[0], gaze_px[1], 1.0])
    q = H.h @ p
    if abs(q[2]) < 1e-12:
        raise PointAtInfinity("mapped point has vanishing w component")
    return q[:2] / q[2]


def project_board_point(pose: CameraPose, K: CameraIntrinsics, p_board) -> np.ndarray:
    """Pinhole projection of a board-frame 3D point to image pixels."""
    pc = pose.to_camera(p_board)
    if pc[2] <= 0:
        raise DegenerateGeometry("point behind the camera")
    q = K.matrix() @ pc
    return q[:2] / q[2]


def vector_to_pitchyaw(v) -> tuple[float, float]:
    """Gaze parameterization: pitch = asin(-y), yaw = atan2(-x, -z), radians.

    Gimbal-locked at |pitch| = pi/2 (yaw undefined there)."""
    x, y, z = _unit(np.asarray(v, dtype=float))
    return math.asin(np.clip(-y, -1.0, 1.0)), math.atan2(-x, -z)


def pitchyaw_to_vector(pitch: float, yaw: float) -> np.ndarray:
    return np.array([
        -math.cos(pitch) * math.sin(yaw),
        -math.sin(pitch),
        -math.cos(pitch) * math.cos(yaw),
    ])
