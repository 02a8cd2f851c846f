
import numpy as np
import pytest

from gazeboard import geometry as geo
from gazeboard.errors import (
    DegenerateConfiguration,
    DegenerateGeometry,
    InsufficientData,
    NotFound,
    ParseError,
    PointAtInfinity,
)
from gazeboard.simulate import random_pose


# -- board layout -------------------------------------------------------------

def test_cell_position_centering_brute_force():
    # oracle: positions must average to zero and step by the pitch
    rows, cols, pitch = 5, 10, 60.0
    xs = [geo.cell_position(r, c, rows, cols, pitch)[0]
          for r in range(rows) for c in range(cols)]
    ys = [geo.cell_position(r, c, rows, cols, pitch)[1]
          for r in range(rows) for c in range(cols)]
    assert abs(np.mean(xs)) < 1e-12
    assert abs(np.mean(ys)) < 1e-12
    assert geo.cell_position(0, 0, rows, cols, pitch) == (-270.0, -120.0, 0.0)
    assert geo.cell_position(4, 9, rows, cols, pitch) == (270.0, 120.0, 0.0)
    p0 = geo.cell_position(2, 3, rows, cols, pitch)
    p1 = geo.cell_position(2, 4, rows, cols, pitch)
    assert p1[0] - p0[0] == pitch


def test_default_board_has_46_unique_kana(board):
    assert len(board.cells) == 46
    assert len(board.glyphs) == 46
    assert board.has_glyph("あ") and board.has_glyph("ん") and board.has_glyph("を")


def test_board_lookup_by_id_and_glyph(board):
    by_glyph = board.cell("あ")
    by_id = board.cell(by_glyph.id)
    assert by_glyph == by_id
    with pytest.raises(NotFound):
        board.cell("が")  # diacritic, not printed on the board


def test_board_center_cell_at_origin(board):
    # row 2, col 4 is the exact center of a 5x10 grid offset by half a pitch
    c = board.cell("r2c4")
    assert c.position_mm == (-30.0, 0.0, 0.0)


def test_mirrored_position_flips_x_only(board):
    for cell in board.cells:
        mx, my, mz = board.mirrored_position(cell.id)
        assert mx == -cell.position_mm[0]
        assert my == cell.position_mm[1]
        assert mz == 0.0


def test_letter_position_view_independent(board):
    # both players name the same glyph; the physical point is one cell
    p = geo.letter_position(board, "あ")
    q = geo.letter_position(board, board.cell("あ").id)
    assert np.array_equal(p, q)
    assert p[2] == 0.0


def test_duplicate_glyph_rejected():
    with pytest.raises(ValueError):
        geo.make_grid_layout(["ああ"])


def test_board_layout_roundtrip_through_file(tmp_path, board):
    path = tmp_path / "board.txt"
    lines = [f"rows = {board.rows}", f"cols = {board.cols}",
             f"pitch_mm = {board.pitch_mm}",
             f"glyph_set_id = {board.glyph_set_id}", "[cells]"]
    lines += [f"{c.row} {c.col} {c.glyph}" for c in board.cells]
    path.write_text("\n".join(lines), encoding="utf-8")
    loaded = geo.load_board_layout(path)
    assert loaded.content_hash() == board.content_hash()


def test_board_layout_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("rows = 1\ncols = 1\npitch_mm = 60\n[cells]\n0 zero あ\n",
                    encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        geo.load_board_layout(path)
    assert exc.value.line_no == 5


# -- poses and intrinsics -----------------------------------------------------

def test_camera_pose_rejects_non_rotation():
    with pytest.raises(DegenerateGeometry):
        geo.CameraPose(np.eye(3) * 2.0, [0, 0, 600])
    with pytest.raises(DegenerateGeometry):
        geo.CameraPose(np.diag([1.0, 1.0, -1.0]), [0, 0, 600])  # det -1


def test_camera_origin_board_inverts_pose():
    rng = np.random.default_rng(0)
    for _ in range(50):
        pose = random_pose(rng)
        origin = pose.camera_origin_board()
        assert np.allclose(pose.to_camera(origin), 0.0, atol=1e-9)


def test_gaze_label_unit_and_direction(frontal_pose):
    label = geo.gaze_label(frontal_pose, (0, 0, 0), (0, 0, 0))
    assert np.allclose(label, [0, 0, 1])
    assert abs(np.linalg.norm(label) - 1.0) < 1e-12
    # looking at a point to the questioner's right shifts x positive
    label = geo.gaze_label(frontal_pose, (0, 0, 0), (270, 0, 0))
    assert label[0] > 0


def test_angular_error_basics():
    assert geo.angular_error_deg([0, 0, 1], [0, 0, 1]) == 0.0
    assert abs(geo.angular_error_deg([0, 0, 1], [0, 1, 0]) - 90.0) < 1e-12
    assert abs(geo.angular_error_deg([0, 0, 1], [0, 0, -1]) - 180.0) < 1e-12
    # scale invariance
    assert abs(geo.angular_error_deg([0, 0, 5], [0, 3, 3]) - 45.0) < 1e-9


# -- homography ---------------------------------------------------------------

def _marker_pairs(pose, K, markers, noise_px=0.0, rng=None):
    pairs = []
    for mx, my in markers:
        px = geo.project_board_point(pose, K, [mx, my, 0.0])
        if noise_px:
            px = px + rng.normal(0, noise_px, 2)
        pairs.append(((px[0], px[1]), (mx, my)))
    return pairs


MARKERS = [(-320.0, -140.0), (-320.0, 0.0), (-320.0, 140.0),
           (320.0, -140.0), (320.0, 0.0), (320.0, 140.0)]


def test_estimate_homography_recovers_synthesized_map(intrinsics):
    rng = np.random.default_rng(1)
    for _ in range(20):
        pose = random_pose(rng)
        H_true = geo.homography_from_pose(pose, intrinsics)
        pairs = _marker_pairs(pose, intrinsics, MARKERS)
        H_est = geo.estimate_homography(pairs)
        assert np.allclose(H_est.h, H_true.h, atol=1e-8)


def test_estimate_homography_maps_unseen_points(intrinsics, frontal_pose):
    pairs = _marker_pairs(frontal_pose, intrinsics, MARKERS)
    H = geo.estimate_homography(pairs)
    for p_board in [(0.0, 0.0), (123.0, -45.0), (-200.0, 80.0)]:
        px = geo.project_board_point(frontal_pose, intrinsics,
                                     [p_board[0], p_board[1], 0.0])
        back = geo.map_gaze_to_board(px, H)
        assert np.allclose(back, p_board, atol=1e-9)


def test_estimate_homography_needs_four_points(intrinsics, frontal_pose):
    pairs = _marker_pairs(frontal_pose, intrinsics, MARKERS[:3])
    with pytest.raises(InsufficientData):
        geo.estimate_homography(pairs)


def test_estimate_homography_rejects_collinear():
    pts = [((i * 10.0, i * 10.0), (i * 5.0, i * 5.0)) for i in range(5)]
    with pytest.raises(DegenerateConfiguration):
        geo.estimate_homography(pts)


def test_homography_normalized_h22():
    H = geo.Homography(np.diag([2.0, 2.0, 2.0]))
    assert H.h[2, 2] == 1.0


def test_map_gaze_to_board_point_at_infinity():
    H = geo.Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 1.0]]))
    with pytest.raises(PointAtInfinity):
        geo.map_gaze_to_board((0.0, 1.0), H)


# -- planar pose decomposition --------------------------------------------------

def test_pose_from_homography_roundtrip(intrinsics):
    rng = np.random.default_rng(2)
    for _ in range(100):
        pose = random_pose(rng)
        H = geo.homography_from_pose(pose, intrinsics)
        rec = geo.pose_from_homography(H, intrinsics)
        assert np.allclose(rec.rotation, pose.rotation, atol=1e-8)
        assert np.allclose(rec.translation_mm, pose.translation_mm, atol=1e-6)
        assert rec.translation_mm[2] > 0


def test_pose_from_estimated_markers(intrinsics):
    rng = np.random.default_rng(3)
    for _ in range(50):
        pose = random_pose(rng)
        H = geo.estimate_homography(_marker_pairs(pose, intrinsics, MARKERS))
        rec = geo.pose_from_homography(H, intrinsics)
        origin_err = np.linalg.norm(rec.camera_origin_board()
                                    - pose.camera_origin_board())
        assert origin_err < 1e-3


# -- pitch/yaw parameterization -------------------------------------------------

def test_pitchyaw_convention_anchors():
    # straight at the camera
    p, y = geo.vector_to_pitchyaw([0, 0, -1])
    assert p == 0.0 and y == 0.0
    # looking up in camera coordinates (y down) is positive pitch
    p, _ = geo.vector_to_pitchyaw([0, -1, -1])
    assert p > 0
    # looking to the camera's left is positive yaw
    _, y = geo.vector_to_pitchyaw([-1, 0, -1])
    assert y > 0


def test_pitchyaw_roundtrip():
    rng = np.random.default_rng(4)
    for _ in range(200):
        v = rng.normal(size=3)
        v[2] = -abs(v[2]) - 0.1
        v = v / np.linalg.norm(v)
        p, y = geo.vector_to_pitchyaw(v)
        assert np.allclose(geo.pitchyaw_to_vector(p, y), v, atol=1e-12)


def test_pitchyaw_pure_axes():
    for pitch, yaw in [(0.3, 0.0), (0.0, 0.4), (-0.2, 1.0)]:
        v = geo.pitchyaw_to_vector(pitch, yaw)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12
        p2, y2 = geo.vector_to_pitchyaw(v)
        assert abs(p2 - pitch) < 1e-12
        assert abs(y2 - yaw) < 1e-12
