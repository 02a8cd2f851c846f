"""Capture orchestration and pluggable drivers.

The engine decides *when* to capture; this module does the capture itself:
grab a frame, detect the face, compute the gaze label from the target
letter, run normalization, and (as feedback only) run the gaze estimator.
Nothing is persisted here - the session store writes a sample only after
the questioner approves it.

Synthetic reference drivers let the whole system run hardware-free: the
frame source renders a parametric face (ellipse head, iris dots displaced
by the true gaze) and carries its ground truth in frame metadata, which the
synthetic detector and estimator read back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DriverTimeout
from .geometry import (
    BoardLayout,
    CameraIntrinsics,
    CameraPose,
    gaze_label,
    letter_position,
    vector_to_pitchyaw,
)
from .normalization import NormalizationParams, normalize_sample


@dataclass
class Frame:
    timestamp: float
    image: np.ndarray | None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FaceObservation:
    face_center_camera_mm: tuple[float, float, float]
    face_distance_mm: float
    landmarks: tuple | None = None


class FrameSourceInterface(Protocol):
    reentrant: bool

    def grab(self) -> Frame: ...


class FaceDetectorInterface(Protocol):
    reentrant: bool

    def detect(self, frame: Frame) -> FaceObservation | None: ...


class GazeEstimatorInterface(Protocol):
    reentrant: bool

    def estimate(self, normalized_image, frame: Frame,
                 geometry) -> tuple[np.ndarray, float] | None: ...


@dataclass
class GazeSample:
    sample_id: str
    session_id: str
    participant_id: str
    mode: str  # gamified | standard
    letter_id: str | None
    stimulus_xy_mm: tuple[float, float] | None
    label_vector_camera: tuple[float, float, float]
    label_pitchyaw_norm: tuple[float, float]
    image_ref: str
    normalized_image_ref: str
    estimator_output: tuple[float, float, float] | None
    wearing_eyetracker: bool
    timestamp: float
    eyetracker_ref: str | None = None

    def __post_init__(self):
        if (self.letter_id is None) == (self.stimulus_xy_mm is None):
            raise ValueError("exactly one of letter_id / stimulus_xy_mm must be set")
        v = np.asarray(self.label_vector_camera, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("label vector must be unit norm")


@dataclass
class CaptureOutcome:
    no_face: bool
    sample: GazeSample | None = None
    image: np.ndarray | None = None
    normalized_image: np.ndarray | None = None
    true_gaze_camera: tuple | None = None  # synthetic ground truth, tests only


class CapturePipeline:
    """Binds drivers and geometry for one camera; one capture in flight per
    session at a time (enforced by the engine)."""

    def __init__(self, frame_source, face_detector, estimator,
                 board: BoardLayout, pose: CameraPose, intrinsics: CameraIntrinsics,
                 norm_params: NormalizationParams | None = None):
        self.frame_source = frame_source
        self.face_detector = face_detector
        self.estimator = estimator
        self.board = board
        self.pose = pose
        self.intrinsics = intrinsics
        self.norm_params = norm_params or NormalizationParams()
        self._counter = 0

    def capture(self, session_id: str, participant_id: str, mode: str,
                letter_id: str | None = None,
                stimulus_xy_mm: tuple[float, float] | None = None,
                wearing_eyetracker: bool = False,
                eye_origin_camera_mm=(0.0, 0.0, 0.0)) -> CaptureOutcome:
        """Run one capture for a board letter or a canvas stimulus point."""
        if letter_id is not None:
            target_board = letter_position(self.board, letter_id)
        else:
            target_board = np.array([stimulus_xy_mm[0], stimulus_xy_mm[1], 0.0])
        if hasattr(self.frame_source, "set_target"):
            self.frame_source.set_target(target_board)

        frame = self.frame_source.grab()
        face = self.face_detector.detect(frame)
        if face is None:
            return CaptureOutcome(no_face=True, image=frame.image)

        label = gaze_label(self.pose, eye_origin_camera_mm, target_board)
        geometry, norm_image = normalize_sample(
            frame.image, self.intrinsics, self.norm_params,
            face.face_center_camera_mm, gaze_camera=label)
        pitchyaw = vector_to_pitchyaw(geometry.gaze_norm)

        est_out = None
        if self.estimator is not None:
            try:
                est = self.estimator.estimate(norm_image, frame, geometry)
            except Exception:
                est = None  # estimation is feedback, not ground truth
            if est is not None:
                vec = np.asarray(est[0], dtype=float)
                est_out = tuple(vec / np.linalg.norm(vec))

        self._counter += 1
        sample_id = f"{session_id}-{self._counter:05d}"
        sample = GazeSample(
            sample_id=sample_id,
            session_id=session_id,
            participant_id=participant_id,
            mode=mode,
            letter_id=letter_id,
            stimulus_xy_mm=tuple(stimulus_xy_mm) if stimulus_xy_mm is not None else None,
            label_vector_camera=tuple(label),
            label_pitchyaw_norm=pitchyaw,
            image_ref=f"images/{sample_id}.pgm",
            normalized_image_ref=f"images/{sample_id}_norm.pgm",
            estimator_output=est_out,
            wearing_eyetracker=wearing_eyetracker,
            timestamp=frame.timestamp,
        )
        return CaptureOutcome(no_face=False, sample=sample, image=frame.image,
                              normalized_image=norm_image,
                              true_gaze_camera=frame.meta.get("true_gaze_camera"))


# -- direction perturbation ---------------------------------------------------

def perturb_direction(v: np.ndarray, angle_rad: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate a unit vector by angle_rad about a random perpendicular axis."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    # random axis perpendicular to v
    r = rng.normal(size=3)
    axis = r - np.dot(r, v) * v
    n = np.linalg.norm(axis)
    while n < 1e-12:
        r = rng.normal(size=3)
        axis = r - np.dot(r, v) * v
        n = np.linalg.norm(axis)
    axis = axis / n
    return v * math.cos(angle_rad) + np.cross(axis, v) * math.sin(angle_rad)


def rayleigh_angle(sigma_deg: float, rng: np.random.Generator) -> float:
    """Random angular deviation with mean exactly sigma_deg (Rayleigh with
    scale sigma * sqrt(2/pi))."""
    scale = math.radians(sigma_deg) * math.sqrt(2.0 / math.pi)
    return rng.rayleigh(scale)


# -- synthetic drivers ----------------------------------------------------------

@dataclass
class SyntheticScenario:
    """Ground-truth configuration for hardware-free runs.

    gaze_noise_deg models the participant's fixation accuracy: the true gaze
    deviates from the camera-origin-to-target direction by a random angle
    with mean gaze_noise_deg.
    """
    pose: CameraPose
    intrinsics: CameraIntrinsics
    face_center_camera_mm: tuple[float, float, float] = (0.0, 0.0, 600.0)
    gaze_noise_deg: float = 0.0
    image_size: tuple[int, int] = (64, 64)  # (h, w) of the rendered frame
    blink_frames: frozenset[int] = frozenset()
    absent_frames: frozenset[int] = frozenset()
    eye_origin_camera_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)


class SyntheticFrameSource:
    """Renders a deterministic parametric face and carries ground truth in
    frame metadata."""

    reentrant = True

    def __init__(self, scenario: SyntheticScenario, rng_seed: int = 0):
        self.scenario = scenario
        self.rng = np.random.default_rng(rng_seed)
        self._frame_no = 0
        self._target_board = np.zeros(3)

    def set_target(self, target_board_mm):
        self._target_board = np.asarray(target_board_mm, dtype=float)

    def grab(self) -> Frame:
        sc = self.scenario
        n = self._frame_no
        self._frame_no += 1
        t = float(n)

        if n in sc.absent_frames:
            h, w = sc.image_size
            return Frame(timestamp=t, image=np.zeros((h, w), dtype=np.uint8),
                         meta={"face_present": False})

        true_dir = sc.pose.to_camera(self._target_board) - np.asarray(sc.eye_origin_camera_mm)
        true_dir = true_dir / np.linalg.norm(true_dir)
        if sc.gaze_noise_deg > 0:
            true_dir = perturb_direction(true_dir,
                                         rayleigh_angle(sc.gaze_noise_deg, self.rng),
                                         self.rng)
        blink = n in sc.blink_frames
        image = self._render(true_dir, blink)
        return Frame(timestamp=t, image=image, meta={
            "face_present": True,
            "blink": blink,
            "true_gaze_camera": tuple(true_dir),
            "face_center_camera_mm": sc.face_center_camera_mm,
        })

    def _render(self, gaze_dir: np.ndarray, blink: bool) -> np.ndarray:
        h, w = self.scenario.image_size
        img = np.zeros((h, w), dtype=np.uint8)
        cy, cx = h / 2.0, w / 2.0
        ys, xs = np.mgrid[0:h, 0:w]
        head = (((xs - cx) / (w * 0.35)) ** 2 + ((ys - cy) / (h * 0.45)) ** 2) <= 1.0
        img[head] = 120
        if not blink:
            # iris dots shifted opposite the gaze x/y components
            off_x = -gaze_dir[0] * w * 0.1
            off_y = -gaze_dir[1] * h * 0.1
            for ex in (-w * 0.15, w * 0.15):
                eye = ((xs - (cx + ex + off_x)) ** 2 + (ys - (cy - h * 0.1 + off_y)) ** 2) <= (w * 0.03) ** 2
                img[eye] = 255
        return img


class SyntheticFaceDetector:
    """Reads the frame source's ground-truth metadata; a blink still counts
    as a detected face (blink filtering is the questioner's approval job)."""

    reentrant = True

    def detect(self, frame: Frame) -> FaceObservation | None:
        if not frame.meta.get("face_present"):
            return None
        center = frame.meta["face_center_camera_mm"]
        return FaceObservation(face_center_camera_mm=tuple(center),
                               face_distance_mm=float(np.linalg.norm(center)))


class SyntheticEstimator:
    """Simulated pre-trained estimator: the true gaze perturbed by angular
    noise of mean noise_deg, with a small chance of a gross outlier drawn
    uniformly from the frontal hemisphere."""

    reentrant = True

    def __init__(self, noise_deg: float = 5.0, outlier_rate: float = 0.0,
                 rng_seed: int = 0):
        self.noise_deg = noise_deg
        self.outlier_rate = outlier_rate
        self.rng = np.random.default_rng(rng_seed)

    def estimate(self, normalized_image, frame: Frame, geometry):
        true_cam = frame.meta.get("true_gaze_camera")
        if true_cam is None:
            return None
        g = geometry.R_norm @ np.asarray(true_cam, dtype=float)
        g = g / np.linalg.norm(g)
        if self.outlier_rate > 0 and self.rng.random() < self.outlier_rate:
            # uniform direction in the frontal (z < 0 toward camera) hemisphere
            d = self.rng.normal(size=3)
            d = d / np.linalg.norm(d)
            if d[2] > 0:
                d[2] = -d[2]
            return d, 0.1
        if self.noise_deg > 0:
            g = perturb_direction(g, rayleigh_angle(self.noise_deg, self.rng), self.rng)
        return g, 0.9


class TimeoutFrameSource:
    """Test double for a stalled camera."""

    reentrant = True

    def grab(self) -> Frame:
        raise DriverTimeout("frame source did not deliver within the deadline")


def synthetic_frame_source(scenario: SyntheticScenario, rng_seed: int = 0) -> SyntheticFrameSource:
    return SyntheticFrameSource(scenario, rng_seed)


def synthetic_estimator(noise_deg: float = 5.0, outlier_rate: float = 0.0,
                        rng_seed: int = 0) -> SyntheticEstimator:
    return SyntheticEstimator(noise_deg, outlier_rate, rng_seed)
