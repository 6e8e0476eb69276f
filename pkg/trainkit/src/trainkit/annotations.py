"""Labelme-style annotation parsing (the dataset interchange format)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Annotation:
    image_name: str
    width: int
    height: int
    rings: list[np.ndarray] = field(default_factory=list)  # closed (N,2) polylines
    pith: tuple[float, float] | None = None


def load_annotation(path) -> Annotation:
    """Read ring polylines (closed "polygon" shapes) and an optional pith point."""
    path = Path(path)
    doc = json.loads(path.read_text())
    for key in ("shapes", "imageWidth", "imageHeight"):
        if key not in doc:
            raise ValueError(f"{path.name}: missing required field '{key}'")
    rings: list[np.ndarray] = []
    pith = None
    for i, shape in enumerate(doc["shapes"]):
        pts = np.asarray(shape.get("points", []), dtype=np.float64)
        stype = shape.get("shape_type", "polygon")
        label = str(shape.get("label", ""))
        if stype == "point" and label.lower() == "pith" and pts.shape == (1, 2):
            pith = (float(pts[0, 0]), float(pts[0, 1]))
            continue
        if stype != "polygon":
            continue
        if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
            raise ValueError(f"{path.name}: shapes[{i}] is not a closed polyline")
        rings.append(pts)
    return Annotation(image_name=doc.get("imagePath", path.stem),
                      width=int(doc["imageWidth"]), height=int(doc["imageHeight"]),
                      rings=rings, pith=pith)
