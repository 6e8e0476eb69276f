"""Group chains into closed, mutually non-crossing rings around the pith.

Greedy merging: the cheapest bridge between two ray-disjoint chains is taken
whenever its interpolated span is smooth enough and crosses no other chain;
chains that end up covering enough of the ray fan are closed by interpolation,
the rest are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Chain, ray_directions
from .raster import Pith


@dataclass
class RingSet:
    """Closed ring curves, innermost first, one radius per ray."""

    pith: Pith
    num_rays: int
    radii: np.ndarray  # (n_rings, num_rays) float64
    coverage: np.ndarray = field(default=None)  # sampled-ray fraction per ring

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1, self.num_rays)
        if self.coverage is None:
            self.coverage = np.ones(len(self.radii))

    def __len__(self) -> int:
        return self.radii.shape[0]

    def polylines(self) -> list[np.ndarray]:
        """Ring vertices in working-frame (x, y) coordinates, one per ray."""
        dirs = ray_directions(self.num_rays)
        origin = self.pith.as_array()
        return [origin + r[:, None] * dirs for r in self.radii]

    @classmethod
    def empty(cls, pith: Pith, num_rays: int) -> "RingSet":
        return cls(pith, num_rays, np.empty((0, num_rays)))


def check_noncrossing(rings: RingSet) -> list[tuple[int, int, int]]:
    """Violations (ray, ring_i, ring_j) where radii fail to strictly increase."""
    out = []
    r = rings.radii
    for i in range(len(r) - 1):
        for ray in np.flatnonzero(r[i] >= r[i + 1]):
            out.append((int(ray), i, i + 1))
    return sorted(out)


@dataclass
class _Arc:
    """Working chain: consecutive rays (mod num_rays) with one radius each."""

    id: int
    rays: list[int]
    radii: list[float]

    @property
    def support(self) -> set[int]:
        return set(self.rays)

    @property
    def start(self) -> int:
        return self.rays[0]

    @property
    def end(self) -> int:
        return self.rays[-1]

    def as_map(self) -> dict[int, float]:
        return dict(zip(self.rays, self.radii))


def _canonical(chain: Chain, num_rays: int) -> _Arc:
    rays = chain.rays
    radii = chain.radii
    if len(rays) > 1 and (rays[1] - rays[0]) % num_rays == num_rays - 1:
        rays, radii = rays[::-1], radii[::-1]
    return _Arc(chain.id, list(rays), [float(r) for r in radii])


def _bridge(a: _Arc, b: _Arc, num_rays: int) -> tuple[list[int], list[float]] | None:
    """Rays/radii interpolated across the gap from a's end to b's start."""
    gap = (b.start - a.end) % num_rays
    if gap == 0:
        return None
    rays = [(a.end + j) % num_rays for j in range(1, gap)]
    if set(rays) & (a.support | b.support):
        return None
    r0, r1 = a.radii[-1], b.radii[0]
    radii = [r0 + (r1 - r0) * j / gap for j in range(1, gap)]
    return rays, radii


def _crosses(candidate: dict[int, float], others: list[_Arc]) -> bool:
    """True if the candidate radius map fails strict ordering vs any arc."""
    for other in others:
        sign = 0
        for ray, r_other in zip(other.rays, other.radii):
            r = candidate.get(ray)
            if r is None:
                continue
            d = r - r_other
            if d == 0:
                return True
            s = 1 if d > 0 else -1
            if sign == 0:
                sign = s
            elif s != sign:
                return True
    return False


def connect_chains(chains: list[Chain], pith: Pith, num_rays: int,
                   smooth_thr: float = 2.0, min_coverage: float = 0.9) -> RingSet:
    """Merge chains into closed non-crossing rings.

    Iteratively merges the globally cheapest pair of ray-disjoint chains whose
    bridge keeps per-ray radial increments within ``smooth_thr`` and preserves
    radial ordering against every other chain; ties prefer larger combined
    node counts, then lower chain ids. Chains covering at least
    ``min_coverage`` of the rays are closed by interpolating the remaining
    gap; the rest are discarded. Any residual crossing drops the
    lower-coverage ring.
    """
    arcs = [_canonical(c, num_rays) for c in chains if len(c.nodes) >= 2]

    while True:
        candidates = []
        for a in arcs:
            for b in arcs:
                if a is b or len(a.rays) == num_rays or len(b.rays) == num_rays:
                    continue
                if a.support & b.support:
                    continue
                bridge = _bridge(a, b, num_rays)
                if bridge is None:
                    continue
                gap = (b.start - a.end) % num_rays
                cost = abs(a.radii[-1] - b.radii[0]) / gap
                if cost > smooth_thr:
                    continue
                candidates.append((cost, -(len(a.rays) + len(b.rays)), a.id, b.id,
                                   a, b, bridge))
        candidates.sort(key=lambda c: c[:4])

        merged = None
        for cost, _neg, _ia, _ib, a, b, (brays, bradii) in candidates:
            new_rays = a.rays + brays + b.rays
            new_radii = a.radii + bradii + b.radii
            cand_map = dict(zip(new_rays, new_radii))
            others = [c for c in arcs if c is not a and c is not b]
            if _crosses(cand_map, others):
                continue
            merged = _Arc(a.id, new_rays, new_radii)
            arcs = [c for c in others] + [merged]
            break
        if merged is None:
            break

    # close sufficiently covered arcs, discard the rest
    rings: list[tuple[float, float, np.ndarray]] = []  # (mean_radius, coverage, radii)
    for arc in arcs:
        coverage = len(arc.rays) / num_rays
        if coverage < min_coverage:
            continue
        full = np.empty(num_rays, dtype=np.float64)
        for ray, r in zip(arc.rays, arc.radii):
            full[ray] = r
        gap = (arc.start - arc.end) % num_rays
        if len(arc.rays) < num_rays and gap > 0:
            r0, r1 = arc.radii[-1], arc.radii[0]
            for j in range(1, gap):
                full[(arc.end + j) % num_rays] = r0 + (r1 - r0) * j / gap
        rings.append((float(full.mean()), coverage, full))

    rings.sort(key=lambda t: t[0])

    # resolve residual crossings by dropping the lower-coverage ring
    while True:
        violation = None
        for i in range(len(rings) - 1):
            if (rings[i][2] >= rings[i + 1][2]).any():
                violation = i
                break
        if violation is None:
            break
        i = violation
        drop = i if rings[i][1] < rings[i + 1][1] else i + 1
        rings.pop(drop)

    if not rings:
        return RingSet.empty(pith, num_rays)
    return RingSet(pith, num_rays,
                   np.stack([r for _, _, r in rings]),
                   coverage=np.array([c for _, c, _ in rings]))
