import numpy as np
import pytest

from gazeboard.config import load_app_config, load_calibration, parse_extrinsics
from gazeboard.errors import ConfigError


def test_packaged_defaults_load(app_config):
    assert app_config.game.words_per_game == 2
    assert app_config.normalization.focal_norm == 960.0
    assert app_config.camera.intrinsics.fx == 900.0
    assert len(app_config.board.cells) == 46
    assert app_config.dictionary_entries


def test_extrinsics_row_major():
    pose = parse_extrinsics({"rotation": [0, -1, 0, 1, 0, 0, 0, 0, 1],
                             "translation_mm": [1.0, 2.0, 600.0]})
    assert np.allclose(pose.rotation[0], [0, -1, 0])


def test_calibration_file(tmp_path):
    path = tmp_path / "cal.yaml"
    path.write_text(
        "cameras:\n"
        "  scene:\n"
        "    intrinsics: {fx: 766, fy: 766, cx: 544, cy: 540,"
        " image_w: 1088, image_h: 1080}\n"
        "    extrinsics:\n"
        "      rotation: [1, 0, 0, 0, 1, 0, 0, 0, 1]\n"
        "      translation_mm: [0, 0, 500]\n")
    cams = load_calibration(path)
    assert cams["scene"].intrinsics.image_w == 1088
    assert cams["scene"].pose.translation_mm[2] == 500


def test_calibration_requires_cameras(tmp_path):
    path = tmp_path / "cal.yaml"
    path.write_text("cameras: {}\n")
    with pytest.raises(ConfigError):
        load_calibration(path)


def test_missing_intrinsics_key(tmp_path):
    path = tmp_path / "cal.yaml"
    path.write_text(
        "cameras:\n"
        "  scene:\n"
        "    intrinsics: {fx: 766}\n"
        "    extrinsics:\n"
        "      rotation: [1, 0, 0, 0, 1, 0, 0, 0, 1]\n"
        "      translation_mm: [0, 0, 500]\n")
    with pytest.raises(ConfigError):
        load_calibration(path)


def test_custom_config_with_relative_paths(tmp_path, board):
    lines = [f"rows = {board.rows}", f"cols = {board.cols}",
             f"pitch_mm = {board.pitch_mm}", "[cells]"]
    lines += [f"{c.row} {c.col} {c.glyph}" for c in board.cells]
    (tmp_path / "board.txt").write_text("\n".join(lines), encoding="utf-8")
    (tmp_path / "words.txt").write_text("ありがとう\nかたつむり\n", encoding="utf-8")
    (tmp_path / "app.yaml").write_text(
        "board_layout: board.txt\ndictionary: words.txt\n"
        "game: {words_per_game: 3}\n", encoding="utf-8")
    cfg = load_app_config(tmp_path / "app.yaml")
    assert cfg.game.words_per_game == 3
    assert len(cfg.dictionary_entries) == 2
    assert len(cfg.board.cells) == 46
