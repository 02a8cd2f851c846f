"""Application configuration: main YAML config plus board-layout and
calibration file loading."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dictionary import load_dictionary
from .engine import GameConfig
from .errors import ConfigError
from .geometry import BoardLayout, CameraIntrinsics, CameraPose, default_board_layout, load_board_layout
from .normalization import NormalizationParams


def _data_path(name: str):
    return resources.files("gazeboard").joinpath("data", name)


@dataclass
class CalibratedCamera:
    intrinsics: CameraIntrinsics
    pose: CameraPose


@dataclass
class SyntheticConfig:
    gaze_noise_deg: float = 0.0
    estimator_noise_deg: float = 5.0
    estimator_outlier_rate: float = 0.0
    face_center_mm: tuple[float, float, float] = (0.0, 0.0, 600.0)
    rng_seed: int = 0


@dataclass
class AppConfig:
    board: BoardLayout
    dictionary_entries: list
    game: GameConfig
    normalization: NormalizationParams
    camera: CalibratedCamera
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    store_root: str = "./gazeboard_store"
    host: str = "127.0.0.1"
    port: int = 8000
    grace_period_s: float = 120.0


def parse_intrinsics(d: dict) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(fx=float(d["fx"]), fy=float(d["fy"]),
                                cx=float(d["cx"]), cy=float(d["cy"]),
                                image_w=int(d["image_w"]), image_h=int(d["image_h"]))
    except KeyError as e:
        raise ConfigError(f"intrinsics missing key {e.args[0]!r}") from None


def parse_extrinsics(d: dict) -> CameraPose:
    try:
        R = np.array(d["rotation"], dtype=float).reshape(3, 3)  # row-major
        t = np.array(d["translation_mm"], dtype=float)
    except KeyError as e:
        raise ConfigError(f"extrinsics missing key {e.args[0]!r}") from None
    return CameraPose(R, t)


def load_calibration(path) -> dict[str, CalibratedCamera]:
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    cameras = {}
    for name, cam in (doc.get("cameras") or {}).items():
        cameras[name] = CalibratedCamera(
            intrinsics=parse_intrinsics(cam["intrinsics"]),
            pose=parse_extrinsics(cam["extrinsics"]))
    if not cameras:
        raise ConfigError("calibration file defines no cameras")
    return cameras


def load_app_config(path=None) -> AppConfig:
    """Load the main config; missing path falls back to packaged defaults."""
    if path is None:
        doc = yaml.safe_load(_data_path("config_default.yaml").read_text(encoding="utf-8"))
        base = None
    else:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f)
        base = Path(path).parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() or base is None else base / p

    if doc.get("board_layout"):
        board = load_board_layout(resolve(doc["board_layout"]))
    else:
        board = default_board_layout()

    if doc.get("dictionary"):
        with open(resolve(doc["dictionary"]), encoding="utf-8") as f:
            entries = load_dictionary(f).entries
    else:
        with _data_path("words_ja.txt").open(encoding="utf-8") as f:
            entries = load_dictionary(f).entries

    game = GameConfig(**(doc.get("game") or {}))
    norm = NormalizationParams(**(doc.get("normalization") or {}))

    if doc.get("calibration"):
        cameras = load_calibration(resolve(doc["calibration"]))
        camera = next(iter(cameras.values()))
    else:
        cal = doc.get("camera") or {}
        camera = CalibratedCamera(
            intrinsics=parse_intrinsics(cal.get("intrinsics") or {
                "fx": 900.0, "fy": 900.0, "cx": 640.0, "cy": 360.0,
                "image_w": 1280, "image_h": 720}),
            pose=parse_extrinsics(cal.get("extrinsics") or {
                "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1],
                "translation_mm": [0.0, 0.0, 600.0]}))

    syn = SyntheticConfig(**{k: (tuple(v) if k == "face_center_mm" else v)
                             for k, v in (doc.get("synthetic") or {}).items()})
    srv = doc.get("server") or {}
    return AppConfig(
        board=board,
        dictionary_entries=entries,
        game=game,
        normalization=norm,
        camera=camera,
        synthetic=syn,
        store_root=str(doc.get("store", "./gazeboard_store")),
        host=srv.get("host", "127.0.0.1"),
        port=int(srv.get("port", 8000)),
        grace_period_s=float(srv.get("grace_period_s", 120.0)),
    )
