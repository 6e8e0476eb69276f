"""Sentinel-separated curve sets and skeleton-to-curve tracing.

Curves are stored as a single N x 2 integer array of (x, y) pixels with
(-1, -1) sentinel rows separating consecutive curves. Within one curve the
pixels are ordered end-to-end and consecutive pixels are 8-neighbors.
"""

from __future__ import annotations

import numpy as np

SENTINEL = (-1, -1)
MIN_CURVE_PIXELS = 3


class CurveSet:
    """Ordered pixel polylines encoded with (-1, -1) separators."""

    def __init__(self, coords: np.ndarray):
        coords = np.asarray(coords, dtype=np.int32).reshape(-1, 2)
        self.coords = coords

    @classmethod
    def from_curves(cls, curves) -> "CurveSet":
        rows = []
        for curve in curves:
            arr = np.asarray(curve, dtype=np.int32).reshape(-1, 2)
            if arr.shape[0] == 0:
                continue
            if rows:
                rows.append(np.array([SENTINEL], dtype=np.int32))
            rows.append(arr)
        if not rows:
            return cls(np.empty((0, 2), dtype=np.int32))
        return cls(np.concatenate(rows, axis=0))

    def curves(self) -> list[np.ndarray]:
        """Split on sentinels; empty segments are skipped."""
        if self.coords.shape[0] == 0:
            return []
        is_sep = (self.coords[:, 0] == SENTINEL[0]) & (self.coords[:, 1] == SENTINEL[1])
        out = []
        start = 0
        for idx in np.flatnonzero(is_sep):
            if idx > start:
                out.append(self.coords[start:idx])
            start = idx + 1
        if start < self.coords.shape[0]:
            out.append(self.coords[start:])
        return out

    def normalized(self, min_len: int = 1) -> "CurveSet":
        """Drop curves shorter than ``min_len`` and collapse sentinel runs."""
        return CurveSet.from_curves(
            [c for c in self.curves() if c.shape[0] >= min_len])

    def __len__(self) -> int:
        return len(self.curves())

    def __eq__(self, other) -> bool:
        return isinstance(other, CurveSet) and np.array_equal(self.coords, other.coords)


def _pixel_graph(skeleton: np.ndarray) -> dict[tuple[int, int], list[tuple[int, int]]]:
    """8-neighbor adjacency with redundant diagonal edges pruned.

    A diagonal edge is dropped when either shared orthogonal cell is also
    foreground (the path already exists through it); this keeps corner
    configurations from producing spurious 3-pixel cycles.
    """
    fg = {(int(x), int(y)) for y, x in zip(*np.nonzero(skeleton))}
    graph: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for x, y in fg:
        nbrs = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                q = (x + dx, y + dy)
                if q not in fg:
                    continue
                if dx != 0 and dy != 0:
                    if (x, y + dy) in fg or (x + dx, y) in fg:
                        continue
                nbrs.append(q)
        graph[(x, y)] = sorted(nbrs)
    return graph


def trace_curves(skeleton: np.ndarray) -> CurveSet:
    """Extract ordered pixel curves from a 1-px-wide skeleton.

    Each maximal path between endpoints/junctions becomes one curve; closed
    loops are opened at an arbitrary pixel (first and last stay 8-neighbors);
    junction pixels (degree > 2) terminate paths and may appear in several
    curves. Curves shorter than 3 pixels are dropped.
    """
    graph = _pixel_graph(skeleton)
    degree = {p: len(n) for p, n in graph.items()}
    visited: set[tuple[int, int]] = set()
    curves: list[list[tuple[int, int]]] = []

    def walk(start, first):
        """Follow the path start -> first ... until endpoint/junction."""
        path = [start, first]
        visited.add(first)
        prev, cur = start, first
        while degree[cur] == 2:
            a, b = graph[cur]
            nxt = b if a == prev else a
            path.append(nxt)
            if degree[nxt] <= 2:
                if nxt in visited:
                    break
                visited.add(nxt)
            else:
                break  # stop at junction, keep it as the end pixel
            prev, cur = cur, nxt
        return path

    # Open arcs starting at endpoints.
    for p in sorted(graph):
        if degree[p] == 1 and p not in visited:
            visited.add(p)
            nbr = graph[p][0]
            if degree[nbr] > 2:
                curves.append([p, nbr])
            elif nbr not in visited:
                curves.append(walk(p, nbr))

    # Arms emanating from junction pixels.
    for p in sorted(graph):
        if degree[p] <= 2:
            continue
        for nbr in graph[p]:
            if degree[nbr] > 2 or nbr in visited:
                continue
            curves.append(walk(p, nbr))

    # Remaining degree-2 pixels form pure closed loops.
    for p in sorted(graph):
        if p in visited or degree[p] != 2:
            continue
        loop = [p]
        visited.add(p)
        prev, cur = p, graph[p][0]
        while cur != p:
            loop.append(cur)
            visited.add(cur)
            a, b = graph[cur]
            prev, cur = cur, (b if a == prev else a)
        curves.append(loop)

    kept = [c for c in curves if len(c) >= MIN_CURVE_PIXELS]
    return CurveSet.from_curves([np.array(c, dtype=np.int32) for c in kept])
