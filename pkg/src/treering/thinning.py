"""Morphological thinning of binary masks to 1-px-wide skeletons.

Zhang-Suen iterative thinning, vectorized over the whole mask, followed by a
sequential cleanup pass that removes the rare leftover pixels forming 2x2
foreground blocks. The result is a subset of the input mask and each
foreground component stays 8-connected.
"""

from __future__ import annotations

import cv2
import numpy as np

from .validation import check_mask

# Ring offsets (dy, dx) for P2..P9: N, NE, E, SE, S, SW, W, NW.
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _neighbors(pad: np.ndarray) -> list[np.ndarray]:
    h, w = pad.shape[0] - 2, pad.shape[1] - 2
    return [pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy, dx in _RING]


def _subiteration(pad: np.ndarray, step: int) -> bool:
    n = _neighbors(pad)
    center = pad[1:-1, 1:-1]
    b = np.zeros(center.shape, dtype=np.int8)
    for arr in n:
        b += arr
    a = np.zeros(center.shape, dtype=np.int8)
    for k in range(8):
        a += (n[k] == 0) & (n[(k + 1) % 8] == 1)
    p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
    if step == 0:
        cond3 = (p2 & p4 & p6) == 0
        cond4 = (p4 & p6 & p8) == 0
    else:
        cond3 = (p2 & p4 & p8) == 0
        cond4 = (p2 & p6 & p8) == 0
    remove = (center == 1) & (b >= 2) & (b <= 6) & (a == 1) & cond3 & cond4
    if not remove.any():
        return False
    _guard_total_erasure(pad, remove)
    center[remove] = 0
    return True


def _guard_total_erasure(pad: np.ndarray, remove: np.ndarray) -> None:
    """Keep one pixel of any component the parallel step would fully delete.

    Symmetric blocky remnants (2x2 squares and relatives) satisfy both
    sub-iteration conditions everywhere at once and would vanish; their
    correct skeleton is a single dot. A pixel whose entire foreground
    neighborhood is also marked is the cheap witness that this can happen.
    """
    rem_pad = np.pad(remove, 1)
    h, w = remove.shape
    all_marked = remove.copy()
    for dy, dx in _RING:
        nbr_fg = pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] == 1
        nbr_removed = rem_pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        all_marked &= ~nbr_fg | nbr_removed
    if not all_marked.any():
        return
    center = pad[1:-1, 1:-1]
    _count, labels = cv2.connectedComponents(np.ascontiguousarray(center), connectivity=8)
    fg_labels = np.unique(labels[center == 1])
    survivor_labels = np.unique(labels[(center == 1) & ~remove])
    for lab in np.setdiff1d(fg_labels, survivor_labels, assume_unique=True):
        ys, xs = np.nonzero(labels == lab)
        remove[ys[0], xs[0]] = False


def _local_components(pad: np.ndarray, y: int, x: int) -> int:
    """8-connected component count of the foreground ring around (y, x)."""
    cells = [(dy, dx) for dy, dx in _RING if pad[y + dy, x + dx]]
    remaining = set(cells)
    groups = 0
    while remaining:
        groups += 1
        stack = [remaining.pop()]
        while stack:
            cy, cx = stack.pop()
            for q in list(remaining):
                if abs(q[0] - cy) <= 1 and abs(q[1] - cx) <= 1:
                    remaining.remove(q)
                    stack.append(q)
    return groups


def _cleanup_blocks(pad: np.ndarray) -> None:
    """Break up remaining 2x2 foreground blocks without changing connectivity.

    A pixel is deleted only if it sits in a 2x2 block, has an orthogonal
    background neighbor, is not an endpoint, and its foreground ring is a
    single 8-connected group (so removal cannot split the component).
    Deletion is sequential, so no simultaneous-removal hazards.
    """
    while True:
        core = pad[1:-1, 1:-1]
        blocks = (core[:-1, :-1] & core[1:, :-1] & core[:-1, 1:] & core[1:, 1:])
        ys, xs = np.nonzero(blocks)
        if ys.size == 0:
            return
        removed = False
        for by, bx in zip(ys, xs):
            for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
                y, x = by + dy + 1, bx + dx + 1  # padded coordinates
                if not pad[y, x]:
                    continue
                # still in some 2x2 block?
                in_block = any(
                    pad[y + sy, x + sx] and pad[y + sy, x] and pad[y, x + sx]
                    for sy in (-1, 1) for sx in (-1, 1))
                if not in_block:
                    continue
                orthogonal_bg = not (pad[y - 1, x] and pad[y + 1, x]
                                     and pad[y, x - 1] and pad[y, x + 1])
                degree = int(pad[y - 1:y + 2, x - 1:x + 2].sum()) - 1
                if orthogonal_bg and degree > 1 and _local_components(pad, y, x) == 1:
                    pad[y, x] = 0
                    removed = True
        if not removed:
            return


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Thin a binary mask to a 1-px-wide 8-connected skeleton (uint8 {0,1})."""
    mask = check_mask(mask)
    ys, xs = np.nonzero(mask)
    out = np.zeros_like(mask)
    if ys.size == 0:
        return out
    # Work on the foreground bounding box only.
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    pad = np.pad(mask[y0:y1, x0:x1], 1).astype(np.uint8)
    while True:
        changed = _subiteration(pad, 0)
        changed |= _subiteration(pad, 1)
        if not changed:
            break
    _cleanup_blocks(pad)
    out[y0:y1, x0:x1] = pad[1:-1, 1:-1]
    return out
