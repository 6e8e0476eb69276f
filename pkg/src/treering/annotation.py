"""Labelme-compatible annotation documents and ring serialization.

Both ground-truth annotations and detection results use the same JSON shape
schema ("shapes" with "points"/"shape_type"), so results open directly in the
annotation tool. Coordinates round-trip to 3 decimal places.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = "1.0.0"


@dataclass
class RingShape:
    label: str
    points: np.ndarray  # (N, 2) float
    closed: bool = True


@dataclass
class AnnotationDoc:
    image_name: str
    width: int
    height: int
    shapes: list[RingShape] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def ring_polygons(self) -> list[np.ndarray]:
        return [s.points for s in self.shapes if s.closed]


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ValueError(f"{path}: missing required field '{key}'")
    return doc[key]


def load_annotation(path) -> AnnotationDoc:
    """Parse a Labelme-style JSON document, validating the schema.

    Closed ring shapes ("polygon") need at least 3 points; every point must
    lie within the image bounds. Violations report the offending field path.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    name = str(path.name)
    shapes_raw = _require(doc, "shapes", name)
    width = int(_require(doc, "imageWidth", name))
    height = int(_require(doc, "imageHeight", name))
    image_name = doc.get("imagePath", "")
    shapes: list[RingShape] = []
    for i, shape in enumerate(shapes_raw):
        where = f"{name}: shapes[{i}]"
        label = str(_require(shape, "label", where))
        shape_type = _require(shape, "shape_type", where)
        pts = np.asarray(_require(shape, "points", where), dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"{where}.points: expected a list of (x, y) pairs")
        closed = shape_type == "polygon"
        if closed and pts.shape[0] < 3:
            raise ValueError(f"{where}.points: closed ring needs >= 3 points, "
                             f"got {pts.shape[0]}")
        for j, (x, y) in enumerate(pts):
            if not (0 <= x <= width and 0 <= y <= height):
                raise ValueError(
                    f"{where}.points[{j}]: ({x}, {y}) outside image bounds "
                    f"{width}x{height}")
        shapes.append(RingShape(label=label, points=pts, closed=closed))
    return AnnotationDoc(image_name=image_name, width=width, height=height,
                         shapes=shapes, metadata=doc.get("metadata", {}))


def save_rings(rings, path, image_name: str, width: int, height: int,
               metadata: dict | None = None) -> None:
    """Write ring polygons (or a RingSet) as a Labelme-compatible document.

    ``rings`` is a RingSet or an iterable of (N, 2) arrays ordered pith to
    bark. Coordinates are clamped to the image bounds (interpolated ring
    vertices may poke marginally outside) and rounded to 3 decimals; the
    metadata block records configuration for reproducibility (no timestamps,
    so identical runs write identical bytes).
    """
    polygons = rings.polylines() if hasattr(rings, "polylines") else list(rings)
    shapes = []
    for i, poly in enumerate(polygons):
        pts = np.asarray(poly, dtype=np.float64)
        pts = np.clip(pts, 0.0, [float(width), float(height)])
        shapes.append({
            "label": f"ring_{i + 1:02d}",
            "points": [[round(float(x), 3), round(float(y), 3)] for x, y in pts],
            "group_id": None,
            "shape_type": "polygon",
            "flags": {},
        })
    doc = {
        "version": FORMAT_VERSION,
        "flags": {},
        "shapes": shapes,
        "imagePath": image_name,
        "imageData": None,
        "imageHeight": int(height),
        "imageWidth": int(width),
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
