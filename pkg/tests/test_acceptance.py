"""Acceptance suite: one test per gate criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are fixed here and match the module documentation.
"""

import json
import time

import numpy as np
import pytest
from scipy import ndimage

from treering.cli import main
from treering.curves import trace_curves
from treering.detect import DetectorConfig, detect_probability
from treering.geometry import angle_delta, curve_normals, filter_by_normal
from treering.grouping import check_noncrossing, connect_chains
from treering.metrics import (adapted_rand_error, mean_average_recall,
                              rasterize_regions)
from treering.annotation import load_annotation
from treering.raster import Pith, save_png, write_pmap
from treering.segmentation import infer_map, plan_tiles
from treering.thinning import skeletonize

from synth import (DISC_RADII, CoordinateStubBackend, analytic_region_labels,
                   make_disc_image, make_disc_mask, make_ring_pmap,
                   radial_stub_backend, random_blob_mask)
from test_grouping import arc, make_chain, PITH
from test_metrics import brute_force_arand


def report(name, detail=""):
    print(f"ACCEPTANCE PASS: {name}" + (f" ({detail})" if detail else ""))


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    """One CLI `detect` run on the synthetic 512^2 disc, shared by criteria."""
    tmp = tmp_path_factory.mktemp("accept")
    size = 512
    image_path = tmp / "disc.png"
    pmap_path = tmp / "disc.pmap"
    save_png(image_path, make_disc_image(size))
    write_pmap(pmap_path, make_ring_pmap(size))
    out = tmp / "rings.json"
    args = ["detect", "--image", str(image_path), "--backend", "pmap",
            "--pmap", str(pmap_path), "--pith-x", "256", "--pith-y", "256",
            "--tile-size", "256", "--rotations", "5", "--alpha", "45",
            "--threshold", "0.2", "--target", "0", "--output", str(out)]
    t0 = time.time()
    code = main(args)
    elapsed = time.time() - t0
    return {"tmp": tmp, "args": args, "out": out, "code": code,
            "elapsed": elapsed, "size": size}


def test_synthetic_end_to_end(synthetic_run):
    """512^2 disc, 8 boundaries at radii 25..200, tile 256, 5 rotations."""
    assert synthetic_run["code"] == 0
    assert synthetic_run["elapsed"] <= 30.0
    doc = load_annotation(synthetic_run["out"])
    rings = doc.ring_polygons()
    assert len(rings) == 8
    for poly in rings:  # closed: one vertex per ray, endpoints adjacent rays
        assert poly.shape[0] == 360
    size = synthetic_run["size"]
    gt = analytic_region_labels(size, (256, 256), DISC_RADII, 230.0)
    pred = rasterize_regions(rings, make_disc_mask(size))
    mar = mean_average_recall(pred, gt)
    arand = adapted_rand_error(pred, gt)
    assert mar >= 0.95
    assert arand <= 0.05
    report("synthetic end-to-end",
           f"8 rings, mAR {mar:.3f} >= 0.95, ARAND {arand:.3f} <= 0.05, "
           f"{synthetic_run['elapsed']:.1f}s <= 30s")


def test_tile_fusion_equivalence():
    """Pixelwise stub: tiled inference equals full-image application <= 1e-6."""
    backend = CoordinateStubBackend(
        lambda xx, yy: 0.5 + 0.35 * np.sin(xx / 13.0) * np.cos(yy / 19.0)
                     + 0.1 * np.sin((xx + yy) / 7.0))
    img = np.zeros((512, 512, 3), np.uint8)
    tiled = infer_map(img, plan_tiles(512, 512, 256), backend)
    full = infer_map(img, plan_tiles(512, 512, 0), backend)
    diff = float(np.abs(tiled - full).max())
    assert diff <= 1e-6
    report("tile-fusion equivalence", f"max abs diff {diff:.2e} <= 1e-6")


def test_tta_consistency():
    """Rotation-equivariant stub: rotations 1/3/5 agree <= 0.02 in the disc."""
    image = make_disc_image(256, radii=(40, 80), disc_radius=110)
    pith = Pith(128.0, 128.0)
    backend = radial_stub_backend((128.0, 128.0))
    outs = {n: detect_probability(image, pith,
                                  DetectorConfig(tile_size=128, total_rotations=n),
                                  backend)
            for n in (1, 3, 5)}
    yy, xx = np.mgrid[0:256, 0:256]
    disc = np.hypot(xx - 128, yy - 128) <= 126
    worst = max(float(np.abs(outs[a] - outs[b])[disc].mean())
                for a, b in ((1, 3), (1, 5), (3, 5)))
    assert worst <= 0.02
    report("TTA consistency", f"worst pairwise mean abs diff {worst:.4f} <= 0.02")


def test_skeleton_certificates():
    """100 random blobs: skeleton subset of mask, no 2x2 block; 100% pass."""
    rng = np.random.default_rng(2024)
    struct8 = np.ones((3, 3), int)
    for i in range(100):
        mask = random_blob_mask(rng, size=96)
        labels, n = ndimage.label(mask, structure=struct8)
        for c in range(1, n + 1):
            if (labels == c).sum() < 8:
                mask[labels == c] = 0
        skel = skeletonize(mask)
        assert not (skel & ~mask).any(), f"blob {i}: skeleton not a subset"
        blocks = skel[:-1, :-1] & skel[1:, :-1] & skel[:-1, 1:] & skel[1:, 1:]
        assert not blocks.any(), f"blob {i}: 2x2 block survived"
    report("skeleton certificates", "100/100 blobs: subset and 1-px width")


def test_normal_filter_exhaustion():
    """Retained pixels have delta < 45 or > 135; circles survive, radials die."""
    pith = Pith(128.0, 128.0)
    # rasterized pith-centered circle survives >= 95%
    size = 256
    yy, xx = np.mgrid[0:size, 0:size]
    ring = (np.abs(np.hypot(xx - 128, yy - 128) - 70) <= 1.5).astype(np.uint8)
    circle_curves = trace_curves(skeletonize(ring))
    n_before = sum(c.shape[0] for c in circle_curves.curves())
    kept_set = filter_by_normal(circle_curves, pith, alpha=45.0)
    n_after = sum(c.shape[0] for c in kept_set.curves())
    survival = n_after / n_before
    assert survival >= 0.95

    # straight radial segment is fully removed
    from treering.curves import CurveSet
    radial = np.array([[128 + i, 128] for i in range(10, 60)])
    assert len(filter_by_normal(CurveSet.from_curves([radial]), pith, 45.0)) == 0

    # exhaustive band check on random skeleton curves
    rng = np.random.default_rng(11)
    checked = 0
    for seed in range(10):
        skel = skeletonize(random_blob_mask(np.random.default_rng(seed), size=96))
        out = filter_by_normal(trace_curves(skel), Pith(48.0, 48.0), alpha=45.0)
        for frag in out.curves():
            normals = curve_normals(frag)
            for p, nv in zip(frag, normals):
                if np.isnan(nv).any():
                    continue
                d = angle_delta(Pith(48.0, 48.0), p.astype(float), nv)
                assert d < 45.0 or d > 135.0
                checked += 1
    assert checked > 100
    report("normal-filter exhaustion",
           f"circle survival {survival:.3f} >= 0.95, radial removed, "
           f"{checked} retained pixels inside the kept bands")


def test_noncrossing_grouping():
    """50 randomized chain sets group into non-crossing rings; arcs close."""
    for seed in range(50):
        rng = np.random.default_rng(seed)
        chains = []
        cid = 0
        for r in (25, 50, 75, 100, 125):
            start = int(rng.integers(0, 360))
            n_frag = int(rng.integers(1, 4))
            cuts = sorted(rng.integers(0, 340, size=n_frag - 1).tolist())
            bounds = [0] + cuts + [340]
            for a, b in zip(bounds[:-1], bounds[1:]):
                if b - a < 8:
                    continue
                rays = [(start + k) % 360 for k in range(a, b)]
                chains.append(make_chain(cid, rays, r + rng.normal(0, 0.3, len(rays))))
                cid += 1
        rings = connect_chains(chains, PITH, 360, min_coverage=0.8)
        assert check_noncrossing(rings) == []

    halves = [arc(0, 0, 179, 50.0), arc(1, 180, 359, 50.0)]
    ring = connect_chains(halves, PITH, 360)
    assert len(ring) == 1
    dev = float(np.abs(ring.radii[0] - 50.0).max())
    assert dev <= 1.0
    report("non-crossing grouping",
           f"50/50 random sets clean; half-arcs close with max dev {dev:.3f} <= 1")


def test_arand_oracle():
    """Exact match with O(n^2) pixel-pair brute force on 50 random 8x8 maps."""
    rng = np.random.default_rng(12)
    for _ in range(50):
        pred = rng.integers(0, 4, size=(8, 8)).astype(np.int32)
        gt = rng.integers(0, 4, size=(8, 8)).astype(np.int32)
        assert adapted_rand_error(pred, gt) == pytest.approx(
            brute_force_arand(pred, gt), abs=1e-12)
    gt = analytic_region_labels(64, (32, 32), (10, 20), 28.0)
    assert adapted_rand_error(gt, gt) == pytest.approx(0.0, abs=1e-12)
    two = np.repeat(np.array([[1], [2]], np.int32), 8, axis=1)
    merged = np.ones_like(two)
    assert adapted_rand_error(merged, two) == pytest.approx(1.0 / 3.0)
    report("ARAND oracle", "50/50 exact vs brute force; identity 0; merge case 1/3")


def test_mar_definitional():
    """Identity 1.0; constructed IoU=0.7 case 0.5; label-permutation invariant."""
    gt = analytic_region_labels(256, (128, 128), (40, 80), 100.0)
    assert mean_average_recall(gt, gt) == 1.0

    strip_gt = np.zeros((1, 230), np.int32)
    strip_pred = np.zeros((1, 230), np.int32)
    strip_gt[0, :170] = 1
    strip_pred[0, 30:200] = 1
    assert mean_average_recall(strip_pred, strip_gt) == pytest.approx(0.5)

    rng = np.random.default_rng(1)
    a = rng.integers(0, 5, size=(32, 32)).astype(np.int32)
    b = rng.integers(0, 5, size=(32, 32)).astype(np.int32)
    perm = np.array([0, 3, 1, 4, 2])
    assert mean_average_recall(perm[a], b) == pytest.approx(mean_average_recall(a, b))
    report("mAR definitional checks", "identity 1.0; IoU-0.7 case 0.5; "
           "permutation invariant")


def test_detect_determinism(synthetic_run):
    """Re-running detect (any --jobs) writes byte-identical result JSON."""
    tmp = synthetic_run["tmp"]
    base = synthetic_run["out"].read_bytes()
    rerun = tmp / "rerun.json"
    args = list(synthetic_run["args"])
    args[args.index("--output") + 1] = str(rerun)
    assert main(args) == 0
    assert rerun.read_bytes() == base

    # batch mode with a pith sidecar and --jobs 2
    image_path = tmp / "disc.png"
    sidecar = tmp / "disc.png.pith.json"
    sidecar.write_text(json.dumps({"cx": 256, "cy": 256}))
    out_dir = tmp / "jobs2"
    batch = ["detect", "--image", str(image_path), str(image_path),
             "--backend", "pmap", "--pmap", str(tmp / "disc.pmap"),
             "--tile-size", "256", "--rotations", "5", "--alpha", "45",
             "--threshold", "0.2", "--target", "0",
             "--output", str(out_dir), "--jobs", "2"]
    assert main(batch) == 0
    assert (out_dir / "disc.rings.json").read_bytes() == base
    report("determinism", "reruns and --jobs 2 batch byte-identical")
