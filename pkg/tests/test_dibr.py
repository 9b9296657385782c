import numpy as np
import pytest

from depthfill.dibr import WarpConfig, close_cracks, fill_depth_holes, forward_warp


def _flat_image(h, w, value=(9, 9, 9)):
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = value
    return img


class TestWarpConfig:
    def test_disparity_affine(self):
        cfg = WarpConfig(baseline_gain=4.0, depth_offset=1.0)
        assert cfg.disparity(np.array([0]))[0] == pytest.approx(1.0)
        assert cfg.disparity(np.array([255]))[0] == pytest.approx(5.0)

    def test_rejects_bad_direction(self):
        with pytest.raises(ValueError):
            WarpConfig(direction="up")

    def test_rejects_negative_gain(self):
        with pytest.raises(ValueError):
            WarpConfig(baseline_gain=-1.0)


class TestForwardWarp:
    def test_constant_depth_is_translation(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(8, 16, 3), dtype=np.uint8)
        depth = np.full((8, 16), 255, dtype=np.uint8)
        res = forward_warp(img, depth, WarpConfig(baseline_gain=4.0, direction="right"))
        # every pixel shifted left by 4; trailing 4-column strip unhit
        assert (res.image[:, :12] == img[:, 4:]).all()
        assert res.known[:, :12].all()
        assert not res.known[:, 12:].any()

    def test_zero_disparity_is_identity(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(6, 6, 3), dtype=np.uint8)
        depth = rng.integers(0, 256, size=(6, 6), dtype=np.uint8)
        res = forward_warp(img, depth, WarpConfig(baseline_gain=0.0))
        assert (res.image == img).all()
        assert res.known.all()
        assert (res.depth == depth).all()

    def test_depth_step_opens_hole_band(self):
        # foreground (255) on the left half, background (0) on the right;
        # rightward movement shifts the foreground 4 px left, leaving a
        # 4-column hole on the right side of the foreground region.
        img = _flat_image(4, 16)
        depth = np.zeros((4, 16), dtype=np.uint8)
        depth[:, :8] = 255
        res = forward_warp(img, depth, WarpConfig(baseline_gain=4.0, direction="right"))
        assert not res.known[:, 4:8].any()
        assert res.known[:, :4].all()
        assert res.known[:, 8:].all()

    def test_collision_nearest_wins(self):
        # gain 2.0: disp(200) = 1.57 -> 2, disp(50) = 0.39 -> 0, so the pixel
        # at x=2 (depth 200) and the pixel at x=0 (depth 50) both land on 0;
        # the nearer one provides color and depth.
        img = np.zeros((1, 3, 3), dtype=np.uint8)
        img[0, 0] = (11, 0, 0)
        img[0, 2] = (22, 0, 0)
        depth = np.array([[50, 0, 200]], dtype=np.uint8)
        res = forward_warp(img, depth, WarpConfig(baseline_gain=2.0, direction="right"))
        assert (res.image[0, 0] == (22, 0, 0)).all()
        assert res.depth[0, 0] == 200

    def test_warp_deterministic(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, size=(5, 20, 3), dtype=np.uint8)
        depth = rng.integers(0, 256, size=(5, 20), dtype=np.uint8)
        cfg = WarpConfig(baseline_gain=7.0, direction="right")
        a, b = forward_warp(img, depth, cfg), forward_warp(img, depth, cfg)
        assert (a.image == b.image).all() and (a.known == b.known).all()

    def test_direction_left_shifts_right(self):
        img = _flat_image(2, 8)
        depth = np.full((2, 8), 255, dtype=np.uint8)
        res = forward_warp(img, depth, WarpConfig(baseline_gain=3.0, direction="left"))
        assert not res.known[:, :3].any()
        assert res.known[:, 3:].all()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward_warp(_flat_image(2, 4), np.zeros((2, 5), dtype=np.uint8), WarpConfig())

    def test_known_colors_exist_in_source(self):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 256, size=(6, 12, 3), dtype=np.uint8)
        depth = rng.integers(0, 256, size=(6, 12), dtype=np.uint8)
        res = forward_warp(img, depth, WarpConfig(baseline_gain=5.0))
        ys, xs = np.nonzero(res.known)
        src_rows = {tuple(v) for row in img for v in row}
        for y, x in zip(ys[:50], xs[:50]):
            assert tuple(res.image[y, x]) in src_rows

    def test_hole_width_matches_disparity_difference(self):
        for d_fg, d_bg in [(255, 0), (255, 128), (200, 40)]:
            img = _flat_image(4, 32)
            depth = np.full((4, 32), d_bg, dtype=np.uint8)
            depth[:, :16] = d_fg
            cfg = WarpConfig(baseline_gain=6.0, direction="right")
            res = forward_warp(img, depth, cfg)
            expected = round(cfg.disparity(np.array([d_fg]))[0]) - round(
                cfg.disparity(np.array([d_bg]))[0]
            )
            hole_cols = int((~res.known[0, :24]).sum())  # away from edge strip
            assert abs(hole_cols - expected) <= 1


class TestCloseCracks:
    def test_single_column_crack_closed(self):
        img = np.zeros((2, 3, 3), dtype=np.uint8)
        img[:, 0] = 10
        img[:, 2] = 20
        known = np.array([[True, False, True], [True, False, True]])
        depth = np.array([[10, 0, 20], [10, 0, 20]], dtype=np.uint8)
        from depthfill.dibr import WarpResult

        res = WarpResult(image=img, depth=depth, known=known)
        n = close_cracks(res)
        assert n == 2
        assert res.known.all()
        assert (res.image[:, 1] == 15).all()
        assert (res.depth[:, 1] == 15).all()

    def test_wide_hole_untouched(self):
        img = np.zeros((1, 4, 3), dtype=np.uint8)
        known = np.array([[True, False, False, True]])
        from depthfill.dibr import WarpResult

        res = WarpResult(image=img, depth=np.zeros((1, 4), np.uint8), known=known.copy())
        assert close_cracks(res) == 0
        assert (res.known == known).all()


class TestFillDepthHoles:
    def test_no_holes_identity(self):
        depth = np.arange(12, dtype=np.uint8).reshape(3, 4)
        out = fill_depth_holes(depth, np.ones((3, 4), bool), WarpConfig())
        assert (out == depth).all()

    def test_rightward_takes_right_neighbor(self):
        depth = np.array([[200, 0, 0, 40]], dtype=np.uint8)
        known = np.array([[True, False, False, True]])
        out = fill_depth_holes(depth, known, WarpConfig(direction="right"))
        assert (out == [[200, 40, 40, 40]]).all()

    def test_leftward_takes_left_neighbor(self):
        depth = np.array([[30, 0, 90]], dtype=np.uint8)
        known = np.array([[True, False, True]])
        out = fill_depth_holes(depth, known, WarpConfig(direction="left"))
        assert out[0, 1] == 30

    def test_single_hole_left_neighbor_fallback(self):
        # rightward movement but nothing known on the right: falls back left
        depth = np.array([[30, 0]], dtype=np.uint8)
        known = np.array([[True, False]])
        out = fill_depth_holes(depth, known, WarpConfig(direction="right"))
        assert out[0, 1] == 30

    def test_fully_hole_row_uses_vertical_neighbor(self):
        depth = np.array([[7, 7], [0, 0], [0, 0], [9, 9]], dtype=np.uint8)
        known = np.array([[True, True], [False, False], [False, False], [True, True]])
        out = fill_depth_holes(depth, known, WarpConfig(direction="right"))
        assert (out[1] == 7).all()  # nearest defined row above (tie prefers up)
        assert (out[3] == 9).all()
        assert (out[2] == 9).all() or (out[2] == 7).all()

    def test_fully_hole_image_errors(self):
        with pytest.raises(ValueError):
            fill_depth_holes(np.zeros((2, 2), np.uint8), np.zeros((2, 2), bool), WarpConfig())

    def test_never_alters_known(self):
        rng = np.random.default_rng(11)
        depth = rng.integers(0, 256, size=(6, 9), dtype=np.uint8)
        known = rng.random((6, 9)) > 0.4
        known[0, 0] = True
        out = fill_depth_holes(depth, known, WarpConfig(direction="right"))
        assert (out[known] == depth[known]).all()
        # no undefined pixels: output equals itself and is finite by dtype
        assert out.shape == depth.shape

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fill_depth_holes(np.zeros((2, 2), np.uint8), np.ones((2, 3), bool), WarpConfig())
