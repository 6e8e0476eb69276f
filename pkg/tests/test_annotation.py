import json

import numpy as np
import pytest

from treering.annotation import AnnotationDoc, load_annotation, save_rings
from treering.grouping import RingSet
from treering.raster import Pith


def minimal_doc(tmp_path, shapes, width=100, height=100):
    doc = {"version": "5.0.1", "flags": {}, "shapes": shapes,
           "imagePath": "disc.png", "imageData": None,
           "imageHeight": height, "imageWidth": width}
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(doc))
    return path


class TestLoadAnnotation:
    def test_minimal_triangle(self, tmp_path):
        path = minimal_doc(tmp_path, [{
            "label": "ring", "shape_type": "polygon",
            "points": [[10, 10], [20, 10], [15, 20]],
        }])
        doc = load_annotation(path)
        assert doc.width == 100 and doc.height == 100
        assert len(doc.ring_polygons()) == 1
        assert doc.ring_polygons()[0].shape == (3, 2)

    def test_open_polyline_not_a_ring(self, tmp_path):
        path = minimal_doc(tmp_path, [{
            "label": "scratch", "shape_type": "linestrip",
            "points": [[1, 1], [2, 2]],
        }])
        doc = load_annotation(path)
        assert doc.ring_polygons() == []
        assert len(doc.shapes) == 1

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"shapes": [], "imageWidth": 10}))
        with pytest.raises(ValueError, match="imageHeight"):
            load_annotation(path)

    def test_point_outside_bounds_rejected_with_path(self, tmp_path):
        path = minimal_doc(tmp_path, [{
            "label": "ring", "shape_type": "polygon",
            "points": [[10, 10], [120, 10], [15, 20]],
        }])
        with pytest.raises(ValueError, match=r"shapes\[0\].points\[1\]"):
            load_annotation(path)

    def test_closed_ring_needs_three_points(self, tmp_path):
        path = minimal_doc(tmp_path, [{
            "label": "ring", "shape_type": "polygon",
            "points": [[10, 10], [20, 10]],
        }])
        with pytest.raises(ValueError, match=">= 3 points"):
            load_annotation(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{nope")
        with pytest.raises(ValueError, match="JSON"):
            load_annotation(path)


class TestSaveRings:
    def test_round_trip_ringset(self, tmp_path):
        rings = RingSet(Pith(250.0, 250.0), 360,
                        np.stack([np.full(360, 60.0), np.full(360, 120.0)]))
        path = tmp_path / "rings.json"
        save_rings(rings, path, "disc.png", 512, 512, metadata={"alpha": 45})
        doc = load_annotation(path)
        assert len(doc.ring_polygons()) == 2
        assert doc.metadata == {"alpha": 45}
        for got, want in zip(doc.ring_polygons(), rings.polylines()):
            assert np.abs(got - want).max() <= 1e-3

    def test_round_trip_of_saved_document_is_stable(self, tmp_path):
        rng = np.random.default_rng(4)
        polys = [rng.uniform(10, 90, size=(17, 2))]
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_rings(polys, p1, "x.png", 100, 100)
        doc = load_annotation(p1)
        save_rings(doc.ring_polygons(), p2, "x.png", 100, 100)
        assert p1.read_text() == p2.read_text()

    def test_labels_are_ordered(self, tmp_path):
        polys = [np.array([[10, 10], [20, 10], [15, 20]], float)] * 3
        path = tmp_path / "r.json"
        save_rings(polys, path, "x.png", 50, 50)
        doc = json.loads(path.read_text())
        assert [s["label"] for s in doc["shapes"]] == ["ring_01", "ring_02", "ring_03"]
        assert all(s["shape_type"] == "polygon" for s in doc["shapes"])

    def test_byte_identical_reruns(self, tmp_path):
        polys = [np.array([[10.12345, 10.9], [20.5, 10.1], [15.0, 20.0]])]
        p1, p2 = tmp_path / "1.json", tmp_path / "2.json"
        save_rings(polys, p1, "x.png", 50, 50, metadata={"k": 1})
        save_rings(polys, p2, "x.png", 50, 50, metadata={"k": 1})
        assert p1.read_bytes() == p2.read_bytes()
