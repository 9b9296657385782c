import json

import numpy as np
import pytest

import helpers
from depthfill import imaging
from depthfill.cli import EXIT_IO, EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, main, parse_config


@pytest.fixture
def scene(tmp_path):
    img, depth = helpers.bleeding_scene()
    imaging.save_image(img, tmp_path / "texture.png")
    imaging.save_depth(depth, tmp_path / "depth.pgm")
    return tmp_path


def _run_args(scene, out="out", extra=()):
    return [
        "run",
        "--texture", str(scene / "texture.png"),
        "--depth", str(scene / "depth.pgm"),
        "--out", str(scene / out),
        "--patch", "8x8", "--gap", "4x4", "--label-stride", "2",
        *extra,
    ]


class TestRunCommand:
    def test_full_run_writes_artifacts(self, scene, capsys):
        assert main(_run_args(scene)) == EXIT_OK
        out = scene / "out"
        for name in ("virtual.png", "hole_mask.pgm", "completed.png",
                     "completed_depth.pgm", "report.json"):
            assert (out / name).is_file()
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["lambda_d"] == 3.0
        assert report["config"]["patch"] == "8x8"
        assert report["solver"]["commits"] > 0
        # completed image has no holes left: every mask=0 pixel was rewritten
        completed = imaging.load_image(out / "completed.png")
        known = imaging.load_mask(out / "hole_mask.pgm")
        virtual = imaging.load_image(out / "virtual.png")
        assert (completed[known] == virtual[known]).all()

    def test_uniform_depth_run_translates(self, tmp_path, capsys):
        img = helpers.stripes(48)
        depth = np.full((48, 48), 255, np.uint8)
        imaging.save_image(img, tmp_path / "t.png")
        imaging.save_depth(depth, tmp_path / "d.pgm")
        rc = main([
            "run", "--texture", str(tmp_path / "t.png"), "--depth", str(tmp_path / "d.pgm"),
            "--out", str(tmp_path / "o"), "--patch", "8x8", "--gap", "4x4",
            "--baseline-gain", "4", "--label-stride", "1",
        ])
        assert rc == EXIT_OK
        completed = imaging.load_image(tmp_path / "o" / "completed.png")
        # interior is the translated input; the 4-column edge strip is filled
        assert (completed[:, :44] == img[:, 4:]).all()
        known = imaging.load_mask(tmp_path / "o" / "hole_mask.pgm")
        assert not known[:, 44:].any()

    def test_metrics_against_reference(self, scene, capsys):
        rc = main(_run_args(scene, extra=("--reference", str(scene / "texture.png"))))
        assert rc == EXIT_OK
        report = json.loads((scene / "out" / "report.json").read_text())
        assert "metrics" in report
        assert report["metrics"]["hole_pixel_count"] > 0
        assert "psnr_y" in capsys.readouterr().out

    def test_skip_warp_all_known_returns_input(self, tmp_path, capsys):
        img = helpers.stripes(32)
        imaging.save_image(img, tmp_path / "v.png")
        imaging.save_depth(np.full((32, 32), 5, np.uint8), tmp_path / "vd.pgm")
        imaging.save_mask(np.ones((32, 32), bool), tmp_path / "m.pgm")
        rc = main([
            "run", "--skip-warp",
            "--virtual", str(tmp_path / "v.png"),
            "--virtual-depth", str(tmp_path / "vd.pgm"),
            "--mask", str(tmp_path / "m.pgm"),
            "--out", str(tmp_path / "o"),
        ])
        assert rc == EXIT_OK
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["solver"] == {"skipped": True}
        assert (imaging.load_image(tmp_path / "o" / "completed.png") == img).all()

    def test_skip_warp_with_holes(self, tmp_path, capsys):
        img = helpers.stripes(48)
        known = helpers.central_hole_mask(48, 8)
        virtual = img.copy()
        virtual[~known] = 0
        imaging.save_image(virtual, tmp_path / "v.png")
        imaging.save_depth(np.full((48, 48), 90, np.uint8), tmp_path / "vd.pgm")
        imaging.save_mask(known, tmp_path / "m.pgm")
        rc = main([
            "run", "--skip-warp",
            "--virtual", str(tmp_path / "v.png"),
            "--virtual-depth", str(tmp_path / "vd.pgm"),
            "--mask", str(tmp_path / "m.pgm"),
            "--out", str(tmp_path / "o"),
            "--patch", "8x8", "--gap", "4x4", "--label-stride", "1",
        ])
        assert rc == EXIT_OK
        completed = imaging.load_image(tmp_path / "o" / "completed.png")
        assert (completed == img).all()  # periodic texture restored exactly


class TestCliErrors:
    def test_missing_depth_names_stage(self, scene, capsys):
        rc = main([
            "run", "--texture", str(scene / "texture.png"),
            "--depth", str(scene / "nope.pgm"), "--out", str(scene / "o"),
        ])
        assert rc == EXIT_IO
        assert "load_depth" in capsys.readouterr().err

    def test_gap_violation_is_usage_error(self, scene, capsys):
        rc = main(_run_args(scene, extra=("--gap", "20x20", "--patch", "14x14")))
        assert rc == EXIT_USAGE
        assert "gap" in capsys.readouterr().err

    def test_missing_required_input(self, scene, capsys):
        rc = main(["run", "--depth", str(scene / "depth.pgm"), "--out", str(scene / "o")])
        assert rc == EXIT_USAGE
        assert "texture" in capsys.readouterr().err

    def test_corrupt_texture_is_io_error(self, scene, capsys):
        bad = scene / "bad.ppm"
        bad.write_bytes(b"P6\n4 4\n255\n\x00\x00")
        rc = main([
            "run", "--texture", str(bad), "--depth", str(scene / "depth.pgm"),
            "--out", str(scene / "o"),
        ])
        assert rc == EXIT_IO
        assert "load_texture" in capsys.readouterr().err


class TestConfigFile:
    def test_defaults_without_config(self, scene):
        assert main(_run_args(scene)) == EXIT_OK
        report = json.loads((scene / "out" / "report.json").read_text())
        cfg = report["config"]
        assert cfg["lambda_d"] == 3.0
        assert cfg["direction"] == "right"
        assert cfg["labels_min"] == 3 and cfg["labels_max"] == 50
        assert cfg["blend"] == "feathered"

    def test_file_values_and_flag_override(self, scene):
        cfg_file = scene / "run.cfg"
        cfg_file.write_text(
            "# demo config\n"
            "lambda-d = 1.5\n"
            "patch = 8x8\n"
            "gap = 4x4\n"
            "label-stride = 2\n"
            "iters = 1\n"
        )
        rc = main([
            "run", "--config", str(cfg_file),
            "--texture", str(scene / "texture.png"),
            "--depth", str(scene / "depth.pgm"),
            "--out", str(scene / "o2"),
            "--lambda-d", "0",  # flag overrides file
        ])
        assert rc == EXIT_OK
        report = json.loads((scene / "o2" / "report.json").read_text())
        assert report["config"]["lambda_d"] == 0.0
        assert report["config"]["depth_term_active"] is False
        assert report["config"]["iters"] == 1

    def test_unknown_key_rejected(self, scene, capsys):
        cfg_file = scene / "bad.cfg"
        cfg_file.write_text("no-such-option = 1\n")
        rc = main(_run_args(scene, extra=("--config", str(cfg_file))))
        assert rc == EXIT_USAGE
        assert "no-such-option" in capsys.readouterr().err

    def test_parse_config_types(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("patch = 10x6\nskip-warp = true\nthreads = 4\nw0 = 0.5\n")
        vals = parse_config(f)
        assert vals == {"patch": (10, 6), "skip-warp": True, "threads": 4, "w0": 0.5}


class TestWarpCommand:
    def test_warp_only(self, scene, capsys):
        rc = main([
            "warp", "--texture", str(scene / "texture.png"),
            "--depth", str(scene / "depth.pgm"),
            "--baseline-gain", "8", "--out", str(scene / "w"),
        ])
        assert rc == EXIT_OK
        for name in ("virtual.png", "virtual_depth.pgm", "hole_mask.pgm"):
            assert (scene / "w" / name).is_file()
        known = imaging.load_mask(scene / "w" / "hole_mask.pgm")
        assert not known.all()


class TestEvalCommand:
    def test_eval_outputs_json(self, scene, capsys):
        rc = main([
            "eval", "--reference", str(scene / "texture.png"),
            "--test", str(scene / "texture.png"),
        ])
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["psnr_y_full"] == 99.0
        assert out["ssim_full"] == pytest.approx(1.0)

    def test_eval_with_mask(self, scene, tmp_path, capsys):
        known = helpers.central_hole_mask(64, 16)
        imaging.save_mask(known, tmp_path / "m.pgm")
        a, b = helpers.stripes(64), helpers.checkerboard(64)
        imaging.save_image(a, tmp_path / "a.png")
        imaging.save_image(b, tmp_path / "b.png")
        rc = main([
            "eval", "--reference", str(tmp_path / "a.png"),
            "--test", str(tmp_path / "b.png"), "--mask", str(tmp_path / "m.pgm"),
        ])
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["hole_pixel_count"] == 256
        assert out["psnr_y_holes"] < out["psnr_y_full"] + 99  # fields present


class TestWarpSkipWarpChain:
    def test_chained_equals_direct(self, scene):
        rc = main([
            "warp", "--texture", str(scene / "texture.png"),
            "--depth", str(scene / "depth.pgm"),
            "--baseline-gain", "8", "--out", str(scene / "w"),
        ])
        assert rc == EXIT_OK
        rc = main([
            "run", "--skip-warp",
            "--virtual", str(scene / "w" / "virtual.png"),
            "--virtual-depth", str(scene / "w" / "virtual_depth.pgm"),
            "--mask", str(scene / "w" / "hole_mask.pgm"),
            "--out", str(scene / "chained"),
            "--patch", "8x8", "--gap", "4x4", "--label-stride", "2",
        ])
        assert rc == EXIT_OK
        assert main(_run_args(scene, out="direct", extra=("--baseline-gain", "8"))) == EXIT_OK
        chained = imaging.load_image(scene / "chained" / "completed.png")
        direct = imaging.load_image(scene / "direct" / "completed.png")
        assert (chained == direct).all()


class TestDebugOutputs:
    def test_debug_overlays_written(self, scene):
        assert main(_run_args(scene, extra=("--debug",))) == EXIT_OK
        assert (scene / "out" / "debug_lattice.png").is_file()
        assert (scene / "out" / "debug_boundary.png").is_file()


class TestReproducibility:
    def test_identical_runs_bit_identical(self, scene):
        assert main(_run_args(scene, out="r1")) == EXIT_OK
        assert main(_run_args(scene, out="r2")) == EXIT_OK
        a = (scene / "r1" / "completed.png").read_bytes()
        b = (scene / "r2" / "completed.png").read_bytes()
        assert a == b
        ra = json.loads((scene / "r1" / "report.json").read_text())
        rb = json.loads((scene / "r2" / "report.json").read_text())
        ra["config"]["out"] = rb["config"]["out"] = ""
        assert ra == rb
