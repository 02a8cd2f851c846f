import numpy as np
import pytest

from gazeboard import normalization as norm
from gazeboard.errors import DegenerateGeometry
from gazeboard.geometry import CameraIntrinsics, angular_error_deg


def test_identity_rotation_for_on_axis_face():
    R = norm.normalization_rotation((0.0, 0.0, 600.0))
    assert np.allclose(R, np.eye(3), atol=1e-12)


def test_45_degree_case():
    R = norm.normalization_rotation((600.0, 0.0, 600.0))
    c = np.array([600.0, 0.0, 600.0])
    assert np.allclose(R @ (c / np.linalg.norm(c)), [0, 0, 1], atol=1e-12)
    # gaze along +z rotates into the x-z plane
    g = norm.normalize_gaze(R, (0.0, 0.0, 1.0))
    assert np.allclose(g, [-np.sqrt(0.5), 0.0, np.sqrt(0.5)], atol=1e-12)


def test_rotation_sends_face_center_to_axis():
    rng = np.random.default_rng(0)
    for _ in range(200):
        c = rng.normal(size=3) * 300 + [0, 0, 700]
        R = norm.normalization_rotation(c)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12
        assert np.allclose(R @ (c / np.linalg.norm(c)), [0, 0, 1], atol=1e-12)


def test_rotation_scale_invariant():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = rng.normal(size=3) + [0, 0, 5]
        assert np.allclose(norm.normalization_rotation(c),
                           norm.normalization_rotation(c * 37.5), atol=1e-12)


def test_rotation_degenerate_on_y_axis():
    with pytest.raises(DegenerateGeometry):
        norm.normalization_rotation((0.0, 600.0, 0.0))


def test_angular_relations_preserved():
    rng = np.random.default_rng(2)
    for _ in range(100):
        c = rng.normal(size=3) * 200 + [0, 0, 600]
        R = norm.normalization_rotation(c)
        g1 = rng.normal(size=3)
        g2 = rng.normal(size=3)
        before = angular_error_deg(g1, g2)
        after = angular_error_deg(R @ g1, R @ g2)
        assert abs(before - after) < 1e-9


def test_warp_identity_when_canonical():
    params = norm.NormalizationParams(focal_norm=960, distance_norm=600,
                                      size_norm=224)
    K = CameraIntrinsics(fx=960, fy=960, cx=112, cy=112, image_w=224, image_h=224)
    W = norm.normalization_warp(K, params, np.eye(3), 600.0)
    assert np.allclose(W, np.eye(3), atol=1e-12)


def test_warp_fixes_principal_point_under_distance_change():
    params = norm.NormalizationParams()
    K = CameraIntrinsics(fx=960, fy=960, cx=112, cy=112, image_w=224, image_h=224)
    W = norm.normalization_warp(K, params, np.eye(3), 2 * params.distance_norm)
    p = W @ np.array([112.0, 112.0, 1.0])
    assert np.allclose(p[:2] / p[2], [112.0, 112.0], atol=1e-9)


def test_warp_maps_face_center_to_principal_point(intrinsics):
    params = norm.NormalizationParams()
    rng = np.random.default_rng(3)
    for _ in range(50):
        c = rng.normal(size=3) * 150 + [0, 0, 650]
        R = norm.normalization_rotation(c)
        W = norm.normalization_warp(intrinsics, params, R, np.linalg.norm(c))
        proj = intrinsics.matrix() @ c
        px = np.append(proj[:2] / proj[2], 1.0)
        mapped = W @ px
        assert np.allclose(mapped[:2] / mapped[2],
                           [params.size_norm / 2, params.size_norm / 2], atol=1e-6)


def test_warp_image_identity():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
    out = norm.warp_image(img, np.eye(3), 32, 32)
    assert np.array_equal(out, img)


def test_warp_image_integer_translation_exact():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, size=(20, 20)).astype(np.uint8)
    T = np.array([[1.0, 0, 3.0], [0, 1.0, 2.0], [0, 0, 1.0]])
    out = norm.warp_image(img, T, 20, 20)
    assert np.array_equal(out[2:19, 3:19], img[0:17, 0:16])
    assert np.all(out[:2, :] == 0) and np.all(out[:, :3] == 0)


def test_warp_image_90_degree_rotation_matches_oracle():
    rng = np.random.default_rng(6)
    n = 21
    img = rng.integers(0, 256, size=(n, n)).astype(np.uint8)
    c = (n - 1) / 2.0
    # clockwise quarter turn about the image center
    R = np.array([[0.0, -1.0, 2 * c], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    out = norm.warp_image(img, R, n, n)
    oracle = np.rot90(img, k=-1)
    assert np.array_equal(out[1:-1, 1:-1], oracle[1:-1, 1:-1])


def test_warp_roundtrip_mad_under_two_levels():
    # checkerboard warped to the normalized frame and back; double bilinear
    # resampling blurs block edges, so the MAD budget needs blocks that are
    # large relative to the sub-pixel displacement
    n, block = 512, 128
    params = norm.NormalizationParams(focal_norm=2000, distance_norm=600,
                                      size_norm=n)
    K = CameraIntrinsics(fx=2000, fy=2000, cx=n / 2, cy=n / 2,
                         image_w=n, image_h=n)
    R = norm.normalization_rotation((2.0, 1.0, 600.0))
    W = norm.normalization_warp(K, params, R, 605.0)
    ys, xs = np.mgrid[0:n, 0:n]
    img = (((xs // block) + (ys // block)) % 2 * 255).astype(np.uint8)
    fwd = norm.warp_image(img, W, n, n)
    back = norm.warp_image(fwd, np.linalg.inv(W), n, n)
    b = n // 8
    mad = np.mean(np.abs(back[b:-b, b:-b].astype(float)
                         - img[b:-b, b:-b].astype(float)))
    assert mad < 2.0


def test_normalize_sample_full(intrinsics):
    params = norm.NormalizationParams(size_norm=64)
    img = np.zeros((720, 1280), dtype=np.uint8)
    geomet, warped = norm.normalize_sample(img, intrinsics, params,
                                           (50.0, -30.0, 620.0),
                                           gaze_camera=(0.1, 0.2, 0.97))
    assert warped.shape == (64, 64)
    assert abs(np.linalg.norm(geomet.gaze_norm) - 1.0) < 1e-12
    geomet2, warped2 = norm.normalize_sample(None, intrinsics, params,
                                             (50.0, -30.0, 620.0))
    assert warped2 is None and geomet2.gaze_norm is None
    assert np.allclose(geomet2.R_norm, geomet.R_norm)
