"""Hardware-free simulation harness.

Drives whole games through the server core with synthetic drivers: used by
the CLI `simulate` command, the fuzzed replay checks, and the statistical
calibration tests. Also synthesizes eye-tracker evaluation records whose
ground truth is known exactly, so the geometric pipeline can be validated
end to end.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import engine as eng
from .capture import (
    CapturePipeline,
    SyntheticEstimator,
    SyntheticFaceDetector,
    SyntheticFrameSource,
    SyntheticScenario,
)
from .engine import GameConfig
from .evaluation import EvalRecord
from .geometry import BoardLayout, CameraIntrinsics, CameraPose, project_board_point
from .server import ClientMessage, GameServer
from .store import SessionStore

# Marker-corner board positions (mm): three per side, like the physical
# setup with markers flanking the board.
DEFAULT_MARKERS_MM = [(-320.0, -140.0), (-320.0, 0.0), (-320.0, 140.0),
                      (320.0, -140.0), (320.0, 0.0), (320.0, 140.0)]


def fronto_parallel_pose(distance_mm: float = 600.0) -> CameraPose:
    return CameraPose(np.eye(3), [0.0, 0.0, distance_mm])


def default_scene_intrinsics() -> CameraIntrinsics:
    # Pupil-Invisible-like scene camera
    return CameraIntrinsics(fx=766.0, fy=766.0, cx=544.0, cy=540.0,
                            image_w=1088, image_h=1080)


def random_pose(rng: np.random.Generator, distance_range=(400.0, 900.0),
                max_tilt_deg: float = 30.0) -> CameraPose:
    """Random board->camera pose: bounded tilt, random roll, board center
    pushed to the given distance in front of the camera."""
    tilt = np.radians(rng.uniform(0.0, max_tilt_deg))
    azim = rng.uniform(0.0, 2.0 * np.pi)
    roll = rng.uniform(-np.pi / 6, np.pi / 6)
    axis = np.array([np.cos(azim), np.sin(azim), 0.0])
    R_tilt = _axis_angle(axis, tilt)
    R_roll = _axis_angle(np.array([0.0, 0.0, 1.0]), roll)
    R = R_roll @ R_tilt
    d = rng.uniform(*distance_range)
    t = np.array([rng.uniform(-50, 50), rng.uniform(-50, 50), d])
    return CameraPose(R, t)


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def synthetic_eval_record(sample_id: str, pose: CameraPose, K: CameraIntrinsics,
                          gaze_dir_camera, markers_mm=None,
                          corner_noise_px: float = 0.0,
                          rng: np.random.Generator | None = None) -> EvalRecord:
    """Build an eye-tracker record for a gaze ray from the camera origin.

    The measured gaze pixel is the projection of the ray's intersection
    with the board plane; marker corners are projected board points with
    optional Gaussian pixel noise."""
    markers_mm = markers_mm if markers_mm is not None else DEFAULT_MARKERS_MM
    g = np.asarray(gaze_dir_camera, dtype=float)
    g = g / np.linalg.norm(g)
    origin_board = pose.camera_origin_board()
    dir_board = pose.rotation.T @ g
    if abs(dir_board[2]) < 1e-12:
        raise ValueError("gaze ray parallel to the board plane")
    s = -origin_board[2] / dir_board[2]
    hit = origin_board + s * dir_board
    gaze_px = project_board_point(pose, K, hit)

    corners = []
    for mx, my in markers_mm:
        px = project_board_point(pose, K, [mx, my, 0.0])
        if corner_noise_px > 0:
            px = px + rng.normal(0.0, corner_noise_px, size=2)
        corners.append(((float(px[0]), float(px[1])), (float(mx), float(my))))
    return EvalRecord(sample_id=sample_id, scene_intrinsics=K,
                      gaze_px=(float(gaze_px[0]), float(gaze_px[1])),
                      markers=corners)


class RecordingPipelineFactory:
    """Pipeline factory for GameServer that remembers every capture outcome,
    so simulations can pair stored samples with their synthetic ground truth."""

    def __init__(self, board: BoardLayout, pose: CameraPose,
                 intrinsics: CameraIntrinsics,
                 gaze_noise_deg: float = 0.0, estimator_noise_deg: float = 5.0,
                 estimator_outlier_rate: float = 0.0, base_seed: int = 0,
                 absent_frames=frozenset()):
        self.board = board
        self.pose = pose
        self.intrinsics = intrinsics
        self.gaze_noise_deg = gaze_noise_deg
        self.estimator_noise_deg = estimator_noise_deg
        self.estimator_outlier_rate = estimator_outlier_rate
        self.base_seed = base_seed
        self.absent_frames = frozenset(absent_frames)
        self.outcomes: dict[str, object] = {}  # sample_id -> CaptureOutcome

    def __call__(self, session_id: str, participant_id: str) -> CapturePipeline:
        # stable across processes, unlike hash()
        seed = (zlib.crc32(session_id.encode("utf-8")) ^ self.base_seed) & 0x7FFFFFFF
        scenario = SyntheticScenario(
            pose=self.pose, intrinsics=self.intrinsics,
            gaze_noise_deg=self.gaze_noise_deg,
            absent_frames=self.absent_frames)
        pipeline = CapturePipeline(
            frame_source=SyntheticFrameSource(scenario, rng_seed=seed),
            face_detector=SyntheticFaceDetector(),
            estimator=SyntheticEstimator(self.estimator_noise_deg,
                                         self.estimator_outlier_rate,
                                         rng_seed=seed + 1),
            board=self.board, pose=self.pose, intrinsics=self.intrinsics)
        factory = self

        original = pipeline.capture

        def recording_capture(*args, **kwargs):
            outcome = original(*args, **kwargs)
            if outcome.sample is not None:
                factory.outcomes[outcome.sample.sample_id] = outcome
            return outcome

        pipeline.capture = recording_capture
        return pipeline


@dataclass
class PlayedGame:
    session_id: str
    trace: list = field(default_factory=list)
    event_log_json: list = field(default_factory=list)
    final_state: dict = field(default_factory=dict)


class GameDriver:
    """Plays legal games against a server core, recording a replayable trace.

    The driver peeks at the authoritative session to pick legal moves (it is
    a simulation harness, not a client); the recorded trace contains only
    legitimate wire messages and clock ticks."""

    def __init__(self, server: GameServer, rng: random.Random):
        self.server = server
        self.rng = rng

    def play_gamified(self, session_id: str, seed: int,
                      p_reject: float = 0.1, p_answer_correct: float = 0.6,
                      p_timeout: float = 0.1, p_late_answer: float = 0.2,
                      players=("alice", "bob"), wearing=(False, False),
                      start_t: float = 0.0) -> PlayedGame:
        server = self.server
        rng = self.rng
        trace: list[dict] = []
        server.create_session(session_id, mode="gamified", rng_seed=seed)
        t = start_t

        def send(kind, alias, payload=None, token=None):
            nonlocal t
            entry = {"kind": kind, "session_id": session_id, "token": token,
                     "t": t, "payload": payload or {}}
            recorded = dict(entry)
            recorded["token"] = alias  # replayable alias
            trace.append(recorded)
            return server.handle_message(ClientMessage.from_dict(entry))

        def tick(dt):
            nonlocal t
            t += dt
            trace.append({"tick": {"session_id": session_id, "t": t}})
            return server.advance_time(session_id, t)

        tokens = {}
        for i, (alias, pid) in enumerate(zip(("c1", "c2"), players)):
            replies = send("join", alias, {"player_id": pid,
                                           "wearing_eyetracker": wearing[i]})
            tokens[alias] = replies[0][1].payload["token"]
        send("start", "c1", token=tokens["c1"])
        send("start", "c2", token=tokens["c2"])

        slot = server.slot(session_id)
        session = slot.session
        alias_of = {players[0]: "c1", players[1]: "c2"}

        guard = 0
        while session.phase != eng.Phase.FINISHED:
            guard += 1
            if guard > 2000:
                raise RuntimeError("driver did not finish the game")
            phase = session.phase
            t += rng.uniform(0.05, 0.8)
            if phase == eng.Phase.BRIEFING:
                who = rng.choice(list(players))
                send("ready", alias_of[who], token=tokens[alias_of[who]])
            elif phase == eng.Phase.ANSWERER_REVIEW:
                a = session.answerer
                send("ready", alias_of[a], token=tokens[alias_of[a]])
            elif phase == eng.Phase.AWAIT_CAPTURE_TRIGGER:
                q = session.questioner
                send("trigger_capture", alias_of[q], token=tokens[alias_of[q]])
            elif phase == eng.Phase.COUNTDOWN:
                tick(session.config.capture_countdown_s + rng.uniform(0.01, 0.3))
            elif phase == eng.Phase.AWAIT_APPROVAL:
                q = session.questioner
                kind = "reject_capture" if rng.random() < p_reject else "approve_capture"
                send(kind, alias_of[q], token=tokens[alias_of[q]])
            elif phase == eng.Phase.ANSWERER_MARKING:
                a = session.answerer
                if rng.random() < 0.8:
                    send("mark", alias_of[a],
                         {"position_mm": [rng.uniform(-300, 300),
                                          rng.uniform(-150, 150)]},
                         token=tokens[alias_of[a]])
                    t += rng.uniform(0.05, 0.3)
                send("ready", alias_of[a], token=tokens[alias_of[a]])
            elif phase == eng.Phase.ANSWERING:
                a = session.answerer
                roll = rng.random()
                if roll < p_timeout:
                    while session.phase == eng.Phase.ANSWERING:
                        tick(rng.uniform(5.0, 20.0))
                else:
                    if roll < p_timeout + p_late_answer:
                        # cross the clue threshold first
                        late = (session.config.answer_time_limit_s
                                - session.config.clue_reveal_remaining_s
                                + rng.uniform(0.5, 5.0))
                        tick(late)
                        if session.phase != eng.Phase.ANSWERING:
                            continue
                    word = session.question.entry.word
                    text = word if rng.random() < p_answer_correct \
                        else word[::-1] + "x"
                    send("answer", alias_of[a], {"text": text},
                         token=tokens[alias_of[a]])
            elif phase == eng.Phase.REVEAL:
                a = session.answerer
                send("proceed", alias_of[a], token=tokens[alias_of[a]])
            else:
                tick(0.5)

        return PlayedGame(
            session_id=session_id,
            trace=trace,
            event_log_json=[ev.to_json() for ev in session.event_log],
            final_state=session.state_fingerprint())

    def play_standard(self, session_id: str, seed: int, participant: str = "solo",
                      start_t: float = 0.0) -> PlayedGame:
        server = self.server
        rng = self.rng
        trace: list[dict] = []
        server.create_session(session_id, mode="standard", rng_seed=seed)
        t = start_t

        def send(kind, payload=None, token=None, alias="c1"):
            entry = {"kind": kind, "session_id": session_id, "token": token,
                     "t": t, "payload": payload or {}}
            recorded = dict(entry)
            recorded["token"] = alias
            trace.append(recorded)
            return server.handle_message(ClientMessage.from_dict(entry))

        replies = send("join", {"player_id": participant})
        token = replies[0][1].payload["token"]
        send("start", token=token)
        slot = server.slot(session_id)
        session = slot.session
        while session.phase != eng.Phase.FINISHED:
            if session.phase in (eng.Phase.AWAIT_TRIGGER, eng.Phase.CAPTURED):
                t += rng.uniform(0.2, 1.5)
                send("trigger_capture", token=token)
            else:
                t += session.config.capture_countdown_s + rng.uniform(0.01, 0.2)
                trace.append({"tick": {"session_id": session_id, "t": t}})
                server.advance_time(session_id, t)
        return PlayedGame(
            session_id=session_id,
            trace=trace,
            event_log_json=[ev.to_json() for ev in session.event_log],
            final_state=session.state_fingerprint())


def make_server(board, entries, config: GameConfig,
                factory: RecordingPipelineFactory,
                store: SessionStore | None = None) -> GameServer:
    counter = [0]

    def token_factory():
        counter[0] += 1
        return f"tok{counter[0]:04d}"

    return GameServer(config=config, board=board, dictionary_entries=entries,
                      pipeline_factory=factory, store=store,
                      token_factory=token_factory)


def write_trace(trace: list[dict], path):
    with open(path, "w", encoding="utf-8") as f:
        for entry in trace:
            f.write(json.dumps(entry, ensure_ascii=False) + "\n")


def read_trace(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
