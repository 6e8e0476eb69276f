import json

import numpy as np
import pytest

from treering.annotation import load_annotation, save_rings
from treering.cli import main
from treering.raster import load_image, read_pmap, save_png, write_pmap

from synth import (DISC_RADII, make_disc_image, make_disc_mask, make_ring_pmap)
from test_metrics import circle_polygon


@pytest.fixture()
def synthetic_inputs(tmp_path):
    size = 512
    image_path = tmp_path / "disc.png"
    pmap_path = tmp_path / "disc.pmap"
    mask_path = tmp_path / "disc_mask.png"
    save_png(image_path, make_disc_image(size))
    write_pmap(pmap_path, make_ring_pmap(size))
    save_png(mask_path, make_disc_mask(size) * 255)
    return {"size": size, "image": image_path, "pmap": pmap_path, "mask": mask_path,
            "dir": tmp_path}


def detect_args(inp, output, extra=()):
    return ["detect", "--image", str(inp["image"]), "--backend", "pmap",
            "--pmap", str(inp["pmap"]), "--pith-x", "256", "--pith-y", "256",
            "--tile-size", "256", "--rotations", "5", "--target", "0",
            "--output", str(output), *extra]


class TestDetectCommand:
    def test_synthetic_disc_eight_rings(self, synthetic_inputs, tmp_path):
        out = tmp_path / "rings.json"
        assert main(detect_args(synthetic_inputs, out)) == 0
        doc = load_annotation(out)
        assert len(doc.ring_polygons()) == 8
        assert doc.metadata["rotations"] == 5

    def test_overlay_and_debug_dumps(self, synthetic_inputs, tmp_path):
        out = tmp_path / "rings.json"
        overlay = tmp_path / "overlay.png"
        dbg = tmp_path / "debug"
        code = main(detect_args(synthetic_inputs, out,
                                extra=["--overlay", str(overlay),
                                       "--debug-dir", str(dbg)]))
        assert code == 0
        assert overlay.is_file()
        over = load_image(overlay)
        base = load_image(synthetic_inputs["image"])
        assert (over != base).any()  # rings drawn in blue
        pm = read_pmap(dbg / "disc_probability.pmap")
        assert pm.shape == (512, 512)
        assert (dbg / "disc_mask.png").is_file()
        assert (dbg / "disc_skeleton.png").is_file()

    def test_byte_identical_reruns(self, synthetic_inputs, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(detect_args(synthetic_inputs, out1)) == 0
        assert main(detect_args(synthetic_inputs, out2)) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_batch_with_sidecar_and_jobs(self, synthetic_inputs, tmp_path):
        img2 = tmp_path / "disc2.png"
        img2.write_bytes(synthetic_inputs["image"].read_bytes())
        for img in (synthetic_inputs["image"], img2):
            sidecar = img.parent / (img.name + ".pith.json")
            sidecar.write_text(json.dumps({"cx": 256, "cy": 256}))
        out_dir = tmp_path / "batch"
        args = ["detect", "--image", str(synthetic_inputs["image"]), str(img2),
                "--backend", "pmap", "--pmap", str(synthetic_inputs["pmap"]),
                "--tile-size", "256", "--rotations", "5", "--target", "0",
                "--output", str(out_dir), "--jobs", "2"]
        assert main(args) == 0
        a = (out_dir / "disc.rings.json").read_bytes()
        b = (out_dir / "disc2.rings.json").read_bytes()
        assert len(load_annotation(out_dir / "disc.rings.json").ring_polygons()) == 8
        # single-image run produces the identical document
        single = tmp_path / "single.json"
        main(detect_args(synthetic_inputs, single))
        assert a == single.read_bytes()

    def test_gradient_on_constant_image_zero_rings(self, tmp_path):
        img = tmp_path / "flat.png"
        save_png(img, np.full((128, 128, 3), 170, np.uint8))
        out = tmp_path / "flat.json"
        code = main(["detect", "--image", str(img), "--backend", "gradient",
                     "--rotations", "1", "--tile-size", "0", "--target", "0",
                     "--pith-x", "64", "--pith-y", "64", "--output", str(out)])
        assert code == 0
        assert load_annotation(out).ring_polygons() == []

    def test_missing_model_is_backend_error(self, synthetic_inputs, tmp_path, capsys):
        code = main(["detect", "--image", str(synthetic_inputs["image"]),
                     "--backend", "neural", "--model", str(tmp_path / "nope.onnx"),
                     "--pith-x", "256", "--pith-y", "256",
                     "--output", str(tmp_path / "x.json")])
        assert code == 4
        assert "nope.onnx" in capsys.readouterr().err

    def test_missing_pith_is_input_error(self, synthetic_inputs, tmp_path, capsys):
        code = main(["detect", "--image", str(synthetic_inputs["image"]),
                     "--backend", "pmap", "--pmap", str(synthetic_inputs["pmap"]),
                     "--output", str(tmp_path / "x.json")])
        assert code == 2

    def test_pith_outside_mask_exit_code(self, synthetic_inputs, tmp_path):
        code = main(["detect", "--image", str(synthetic_inputs["image"]),
                     "--mask", str(synthetic_inputs["mask"]),
                     "--backend", "pmap", "--pmap", str(synthetic_inputs["pmap"]),
                     "--pith-x", "2", "--pith-y", "2", "--target", "0",
                     "--output", str(tmp_path / "x.json")])
        assert code == 3

    def test_unreadable_image(self, tmp_path):
        bad = tmp_path / "broken.png"
        bad.write_bytes(b"not a png")
        code = main(["detect", "--image", str(bad), "--pith-x", "1",
                     "--pith-y", "1", "--output", str(tmp_path / "x.json")])
        assert code == 2


class TestEvalCommand:
    def make_gt(self, tmp_path, radii=(60, 120, 180), size=512, disc_r=240.0):
        gt_path = tmp_path / "gt.json"
        polys = [circle_polygon(256, 256, r) for r in radii]
        save_rings(polys, gt_path, "disc.png", size, size)
        mask_path = tmp_path / "mask.png"
        save_png(mask_path, make_disc_mask(size, disc_radius=disc_r) * 255)
        return gt_path, mask_path

    def test_pred_equals_gt(self, tmp_path, capsys):
        gt, mask = self.make_gt(tmp_path)
        csv_path = tmp_path / "m.csv"
        json_path = tmp_path / "m.json"
        code = main(["eval", "--pred", str(gt), "--gt", str(gt),
                     "--mask", str(mask), "--csv", str(csv_path),
                     "--json", str(json_path)])
        assert code == 0
        report = json.loads(json_path.read_text())
        assert report["mean"]["mAR"] == 1.0
        assert report["mean"]["ARAND"] == pytest.approx(0.0, abs=1e-12)
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "image,mAR,ARAND"
        assert len(lines) == 3  # one image + mean row

    def test_dimension_mismatch_exit(self, tmp_path):
        gt, _ = self.make_gt(tmp_path)
        small_mask = tmp_path / "small.png"
        save_png(small_mask, np.ones((64, 64), np.uint8) * 255)
        code = main(["eval", "--pred", str(gt), "--gt", str(gt),
                     "--mask", str(small_mask)])
        assert code == 5

    def test_crossing_rings_identify_file(self, tmp_path, capsys):
        gt, mask = self.make_gt(tmp_path)
        bad = tmp_path / "crossing.json"
        polys = [circle_polygon(256, 256, 120),
                 circle_polygon(330, 256, 100)]  # overlapping, not nested
        save_rings(polys, bad, "disc.png", 512, 512)
        code = main(["eval", "--pred", str(bad), "--gt", str(gt),
                     "--mask", str(mask)])
        assert code == 5
        assert "crossing.json" in capsys.readouterr().err

    def test_list_length_mismatch(self, tmp_path):
        gt, mask = self.make_gt(tmp_path)
        code = main(["eval", "--pred", str(gt), str(gt), "--gt", str(gt),
                     "--mask", str(mask)])
        assert code == 2


class TestOverlayCommand:
    def test_overlay_draws_rings(self, tmp_path):
        size = 256
        img_path = tmp_path / "disc.png"
        save_png(img_path, make_disc_image(size, radii=(40, 80), disc_radius=100))
        rings_path = tmp_path / "rings.json"
        save_rings([circle_polygon(128, 128, 40)], rings_path, "disc.png", size, size)
        out = tmp_path / "overlay.png"
        assert main(["overlay", "--image", str(img_path), "--rings",
                     str(rings_path), "--output", str(out)]) == 0
        over = load_image(out)
        # blue 1-px ring pixels present
        blue = (over[..., 2] > 200) & (over[..., 0] < 60)
        assert blue.sum() > 100
