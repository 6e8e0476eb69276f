"""Curve normals, the radial-alignment filter, and chain resampling on rays.

Angles of points about the pith use atan2(dy, dx) on image coordinates
(x right, y down), degrees in [0, 360). Rays leave the pith at
k * 360 / num_rays for k = 0..num_rays-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import MIN_CURVE_PIXELS, CurveSet
from .raster import Pith

_EPS = 1e-9


@dataclass(frozen=True)
class Node:
    """Intersection of a curve with a ray."""

    ray_index: int
    radius: float
    x: float
    y: float
    chain_id: int


@dataclass
class Chain:
    """A curve resampled at consecutive ray crossings (one node per ray)."""

    id: int
    nodes: list[Node]
    source_curve: int

    @property
    def rays(self) -> list[int]:
        return [n.ray_index for n in self.nodes]

    @property
    def radii(self) -> list[float]:
        return [n.radius for n in self.nodes]


def ray_directions(num_rays: int) -> np.ndarray:
    """(num_rays, 2) unit vectors of the ray fan."""
    ang = np.arange(num_rays) * (2.0 * np.pi / num_rays)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def curve_normals(curve: np.ndarray) -> np.ndarray:
    """Unit normals per curve pixel; NaN rows where the tangent vanishes.

    Interior tangents are central differences of the neighbors along the
    curve, endpoints use one-sided differences; the normal is the tangent
    rotated by (-Ty, Tx) and normalized.
    """
    pts = np.asarray(curve, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    if n < 3:
        raise ValueError(f"curve_normals: need >= 3 pixels, got {n}")
    tangent = np.empty_like(pts)
    tangent[1:-1] = pts[2:] - pts[:-2]
    tangent[0] = pts[1] - pts[0]
    tangent[-1] = pts[-1] - pts[-2]
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
    length = np.hypot(normal[:, 0], normal[:, 1])
    bad = length < _EPS
    length[bad] = 1.0
    normal /= length[:, None]
    normal[bad] = np.nan
    return normal


def angle_delta(pith: Pith, p0, normal) -> float:
    """Angle in degrees between the pith-to-pixel vector and the normal."""
    cp = np.asarray(p0, dtype=np.float64) - pith.as_array()
    nv = np.asarray(normal, dtype=np.float64)
    norm_cp = float(np.hypot(cp[0], cp[1]))
    norm_n = float(np.hypot(nv[0], nv[1]))
    if norm_cp < _EPS:
        raise ValueError("angle_delta: pixel coincides with the pith")
    cosd = float(np.dot(cp, nv)) / (norm_cp * norm_n)
    return math.degrees(math.acos(max(-1.0, min(1.0, cosd))))


def _removal_mask(pts: np.ndarray, pith: Pith, alpha: float) -> np.ndarray:
    normal = curve_normals(pts)
    cp = pts.astype(np.float64) - pith.as_array()
    dist = np.hypot(cp[:, 0], cp[:, 1])
    with np.errstate(invalid="ignore"):
        cosd = (cp[:, 0] * normal[:, 0] + cp[:, 1] * normal[:, 1]) / np.maximum(dist, _EPS)
        delta = np.degrees(np.arccos(np.clip(cosd, -1.0, 1.0)))
    remove = (delta >= alpha) & (delta <= 180.0 - alpha)
    remove |= np.isnan(delta)
    remove |= dist < _EPS
    return remove


def filter_by_normal(curve_set: CurveSet, pith: Pith, alpha: float = 45.0) -> CurveSet:
    """Remove pixels whose normal is not radially aligned, splitting curves.

    A pixel is removed iff alpha <= delta <= 180 - alpha (boundary inclusive),
    where delta is the angle between the pith ray and the curve normal at the
    pixel. Removal sentinels split curves; fragments shorter than 3 pixels are
    dropped. The pass repeats until a fixed point, so the result is idempotent
    even though fragment endpoints switch to one-sided tangents.
    """
    fragments = [c for c in curve_set.curves() if c.shape[0] >= MIN_CURVE_PIXELS]
    while True:
        next_fragments: list[np.ndarray] = []
        changed = False
        for pts in fragments:
            remove = _removal_mask(pts, pith, alpha)
            if not remove.any():
                next_fragments.append(pts)
                continue
            changed = True
            keep_slices = np.flatnonzero(~remove)
            if keep_slices.size:
                # split the kept indices into consecutive runs
                cuts = np.flatnonzero(np.diff(keep_slices) > 1) + 1
                for run in np.split(keep_slices, cuts):
                    if run.size >= MIN_CURVE_PIXELS:
                        next_fragments.append(pts[run])
        fragments = next_fragments
        if not changed:
            return CurveSet.from_curves(fragments)


def sample_chains(curve_set: CurveSet, pith: Pith, num_rays: int = 360) -> list[Chain]:
    """Resample curves at their ray crossings into chains.

    Each crossing of a ray yields a node at the exact segment/ray-line
    intersection; when a curve crosses the same ray again it is split so every
    chain holds at most one node per ray. Chains with fewer than 2 nodes are
    dropped.
    """
    if num_rays < 4:
        raise ValueError(f"sample_chains: num_rays must be >= 4, got {num_rays}")
    spacing = 360.0 / num_rays
    center = pith.as_array()
    chains: list[Chain] = []
    next_id = 0

    for curve_idx, pts_i in enumerate(curve_set.curves()):
        pts = pts_i.astype(np.float64)
        closed = (pts.shape[0] > 3
                  and np.abs(pts[0] - pts[-1]).max() <= 1.5)
        if closed:
            # traced loops are opened at an arbitrary pixel; walk the closing
            # segment too so the crossing between last and first is not lost
            pts = np.vstack([pts, pts[0]])
        rel = pts - center
        phi = np.degrees(np.arctan2(rel[:, 1], rel[:, 0]))
        dphi = (np.diff(phi) + 180.0) % 360.0 - 180.0
        unwrapped = np.concatenate(([phi[0]], phi[0] + np.cumsum(dphi)))
        if closed:
            # the loop returns to its start: snap the accumulated sweep to the
            # exact turn multiple so the final ray crossing is not lost to
            # floating-point drift
            turns = round((unwrapped[-1] - unwrapped[0]) / 360.0)
            unwrapped[-1] = unwrapped[0] + 360.0 * turns

        crossings: list[tuple[int, float, float, float]] = []
        for i in range(pts.shape[0] - 1):
            a, b = unwrapped[i], unwrapped[i + 1]
            if a == b:
                continue
            # intervals are start-exclusive/end-inclusive so shared vertices
            # never yield two crossings; the very first vertex of an open
            # curve has no predecessor segment, so include it there
            include_start = i == 0 and not closed
            if b > a:
                m0 = math.ceil(a / spacing) if include_start \
                    else math.floor(a / spacing) + 1
                ms = range(m0, math.floor(b / spacing) + 1)
            else:
                m0 = math.floor(a / spacing) if include_start \
                    else math.ceil(a / spacing) - 1
                ms = range(m0, math.ceil(b / spacing) - 1, -1)
            for m in ms:
                k = m % num_rays
                theta = math.radians(k * spacing)
                ux, uy = math.cos(theta), math.sin(theta)
                s1 = ux * rel[i, 1] - uy * rel[i, 0]
                s2 = ux * rel[i + 1, 1] - uy * rel[i + 1, 0]
                den = s1 - s2
                if abs(den) < 1e-12:
                    continue
                t = min(1.0, max(0.0, s1 / den))
                px = pts[i, 0] + t * (pts[i + 1, 0] - pts[i, 0])
                py = pts[i, 1] + t * (pts[i + 1, 1] - pts[i, 1])
                if (px - center[0]) * ux + (py - center[1]) * uy <= 0:
                    continue  # intersection on the anti-ray
                radius = math.hypot(px - center[0], py - center[1])
                crossings.append((k, radius, px, py))

        # split into chains with unique rays
        current: list[tuple[int, float, float, float]] = []
        used: set[int] = set()

        def flush():
            nonlocal current, used, next_id
            if len(current) >= 2:
                nodes = [Node(k, r, x, y, next_id) for k, r, x, y in current]
                chains.append(Chain(next_id, nodes, curve_idx))
                next_id += 1
            current, used = [], set()

        for cross in crossings:
            if cross[0] in used:
                flush()
            current.append(cross)
            used.add(cross[0])
        flush()

    return chains
