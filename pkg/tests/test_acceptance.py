"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line (run with `pytest tests/test_acceptance.py -s` to see
them live)."""
from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from pathlib import Path
from time import perf_counter

import numpy as np
import pytest

from bench_fixture import build_fixture
from conftest import random_scene
from oracles import (
    chamfer_l1_reference,
    kid_reference,
    proposal_passes,
    render_reference,
    render_reference_fast,
)
from splatlab.bench import evaluate_run, validate_manifest
from splatlab.cli import main as cli_main
from splatlab.core import CameraPose, FeatureSet, ImageBuffer, IntrinsicsSpec, save_feature_set, save_image
from splatlab.losses import chamfer_l1, geom_consistency_loss, mse_loss, smooth_l1_centers, total_loss
from splatlab.masks import FilterConfig, RegionProposal, TrackedMaskSet, accept_frames, filter_proposals
from splatlab.metrics import frechet_distance, kernel_mmd
from splatlab.recolor import (
    AugmentationConfig,
    RegionRecolorJob,
    apply_transform,
    blend_frame,
    recolor_sequence,
    renormalize_masks,
    sample_params,
)
from splatlab.report import report_json_bytes
from splatlab.splat import GaussianScene, RenderConfig, drop_view, load_ply, rasterize, save_ply

FIXTURES = Path(__file__).parent / "fixtures"


@contextmanager
def criterion(name: str, budget_s: float | None = None):
    start = perf_counter()
    ok = False
    try:
        yield
        elapsed = perf_counter() - start
        if budget_s is not None and elapsed >= budget_s:
            raise AssertionError(f"runtime {elapsed:.2f}s exceeds the {budget_s}s budget")
        ok = True
    finally:
        elapsed = perf_counter() - start
        print(f"[{'PASS' if ok else 'FAIL'}] {name} ({elapsed:.2f}s)")


def test_criterion_filter_acceptance():
    with criterion("filter/acceptance: oracle agreement, inclusive boundaries, hand traces", budget_s=1.0):
        cfg = FilterConfig()
        image = (512, 512)
        # 50 randomized proposal sets against the direct predicate oracle
        for trial in range(50):
            gen = np.random.default_rng(trial)
            props = []
            for i in range(int(gen.integers(5, 40))):
                w = int(gen.integers(1, 150))
                h = int(gen.integers(1, 150))
                x = int(gen.integers(0, 512 - w))
                y = int(gen.integers(0, 512 - h))
                props.append(
                    RegionProposal(i, int(gen.integers(0, 3000)), float(gen.uniform(0.8, 1.0)),
                                   float(gen.uniform(0.5, 1.0)), (x, y, w, h))
                )
            kept = filter_proposals(props, image, cfg)
            expected = sorted(
                (p for p in props if proposal_passes(p, image, cfg)),
                key=lambda p: (-p.area, p.proposal_id),
            )[: cfg.n_max]
            assert [(p.area, p.bbox, p.stability) for p in kept] == [
                (p.area, p.bbox, p.stability) for p in expected
            ], f"disagreement with predicate oracle on trial {trial}"

        # supplement boundary values are accepted inclusively
        boundary = RegionProposal(0, 400, 0.92, 0.7, (10, 10, 50, 50))
        assert len(filter_proposals([boundary], image, cfg)) == 1
        assert filter_proposals([RegionProposal(0, 399, 0.92, 0.7, (10, 10, 50, 50))], image, cfg) == []

        # hand-traced accept/skip pattern incl. the exact-0.5 boundary
        def frames(id_sets):
            return [
                TrackedMaskSet(frame_index=i, object_ids=frozenset(s),
                               masks={o: np.zeros((1, 1)) for o in s})
                for i, s in enumerate(id_sets)
            ]

        flags = [f.accepted for f in accept_frames(frames([{1, 2}, {1, 2}, {3, 4}, {1, 2}]))]
        assert flags == [True, True, False, True]
        flags = [f.accepted for f in accept_frames(frames([{1, 2}, {1, 3}]))]
        assert flags == [True, True], "exact 0.5 overlap must be accepted"


def test_criterion_recolor(tmp_path):
    with criterion("recolor: identity, alpha-blend endpoint, threaded determinism, mask sums", budget_s=10.0):
        gen = np.random.default_rng(0)
        frames_dir = tmp_path / "frames"
        tracked_dir = tmp_path / "tracked"
        frames_dir.mkdir()
        tracked_dir.mkdir()
        size = 256
        xx = np.arange(size)[None, :].repeat(size, axis=0)
        logits_a = np.where(xx < size // 2, 5.0, -5.0).astype(np.float32)
        logits_b = np.where(xx >= size // 3, 3.0, -3.0).astype(np.float32)
        for i in range(10):
            save_image(ImageBuffer(gen.random((size, size, 3))), frames_dir / f"f{i:02d}.png")
            fs = FeatureSet(np.stack([logits_a.ravel(), logits_b.ravel()]), ("0", "1"))
            save_feature_set(fs, tracked_dir / f"f{i:02d}.ftc")

        # identity-params pipeline is the image identity within 1/255 (via the CLI)
        ident_dir = tmp_path / "ident"
        assert cli_main(["recolor", "--frames", str(frames_dir), "--tracked", str(tracked_dir),
                         "--identity", "-o", str(ident_dir)]) == 0
        from splatlab.core import load_image

        for p in sorted(frames_dir.glob("*.png")):
            diff = np.abs(load_image(p).data - load_image(ident_dir / p.name).data).max()
            assert diff <= 1.0 / 255.0

        # single full-weight region reduces to the bare transform
        img = ImageBuffer(gen.random((32, 32, 3)))
        params = sample_params(3, 0)
        blended = blend_frame(img, [RegionRecolorJob(0, params, {0: np.ones((32, 32))})], 0)
        assert np.abs(blended.data - apply_transform(img, params).data).max() < 1e-12

        # two-run determinism: byte-identical trees under different thread counts
        def digest(directory):
            h = hashlib.sha256()
            for p in sorted(Path(directory).rglob("*.png")):
                h.update(p.read_bytes())
            return h.hexdigest()

        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        assert cli_main(["recolor", "--frames", str(frames_dir), "--tracked", str(tracked_dir),
                         "--seed", "11", "--threads", "1", "-o", str(out1)]) == 0
        assert cli_main(["recolor", "--frames", str(frames_dir), "--tracked", str(tracked_dir),
                         "--seed", "11", "--threads", "4", "-o", str(out2)]) == 0
        assert digest(out1) == digest(out2)

        # renormalized overlapping masks sum to <= 1 + 1e-6 everywhere
        for trial in range(20):
            g2 = np.random.default_rng(trial)
            stack = renormalize_masks([g2.random((16, 16)) for _ in range(int(g2.integers(1, 5)))])
            assert np.sum(stack, axis=0).max() <= 1.0 + 1e-6


def test_criterion_rasterizer_oracle():
    with criterion("rasterizer: 100-scene oracle sweep, exact background, tiling/thread invariance",
                   budget_s=60.0):
        k = IntrinsicsSpec(fx=90.0, fy=85.0, cx=31.0, cy=33.0, width=64, height=64)
        pose = CameraPose.identity()
        cfg = RenderConfig(background=(0.1, 0.2, 0.3), transmittance_floor=1e-12)

        # the vectorized oracle matches the scalar definition on a few scenes
        for trial in range(3):
            scene = random_scene(np.random.default_rng(7000 + trial), 25, sh_degree=trial % 2)
            slow = render_reference(scene, pose, k, background=cfg.background)
            fast = render_reference_fast(scene, pose, k, background=cfg.background)
            assert np.abs(slow - fast).max() < 1e-12

        worst = 0.0
        for trial in range(100):
            gen = np.random.default_rng(5000 + trial)
            scene = random_scene(gen, int(gen.integers(1, 201)), sh_degree=int(gen.integers(0, 2)))
            ours = rasterize(scene, pose, k, cfg)
            ref = render_reference_fast(scene, pose, k, background=cfg.background)
            worst = max(worst, float(np.abs(ours.data - ref).max()))
        assert worst < 1e-5, f"worst oracle deviation {worst:.2e}"

        # empty scene renders the background exactly
        empty = rasterize(GaussianScene((), 0), pose, k, cfg)
        assert (empty.data == np.broadcast_to(np.array(cfg.background), (64, 64, 3))).all()

        # zero-opacity additions change nothing
        gen = np.random.default_rng(42)
        scene = random_scene(gen, 50)
        from splatlab.splat import GaussianPrimitive

        ghost = GaussianPrimitive(np.array([0.0, 0.0, 3.0]), np.array([1.0, 0, 0, 0]),
                                  np.ones(3), 0.0, np.zeros((1, 3)))
        with_ghost = GaussianScene(scene.primitives + (ghost,), 0)
        assert rasterize(scene, pose, k, cfg).data.tobytes() == rasterize(with_ghost, pose, k, cfg).data.tobytes()

        # tile-size and thread-count sweeps are bit-identical
        scene = random_scene(np.random.default_rng(9), 120)
        reference_bytes = rasterize(scene, pose, k, RenderConfig(tile_size=16)).data.tobytes()
        for tile in (4, 16, 100):
            assert rasterize(scene, pose, k, RenderConfig(tile_size=tile)).data.tobytes() == reference_bytes
        for threads in (2, 8):
            assert rasterize(scene, pose, k, RenderConfig(tile_size=16), threads=threads).data.tobytes() == reference_bytes


def test_criterion_losses():
    with criterion("losses: closed forms to 1e-9, exact chamfer oracle, zero geom, total 2.34"):
        a = ImageBuffer(np.full((4, 4, 3), 0.5))
        b = ImageBuffer(np.full((4, 4, 3), 0.25))
        assert abs(mse_loss(a, b) - 0.0625) < 1e-9
        assert abs(smooth_l1_centers(np.full((4, 3), 0.5), np.zeros((4, 3))) - 0.125) < 1e-9
        assert abs(smooth_l1_centers(np.full((4, 3), 2.0), np.zeros((4, 3))) - 1.5) < 1e-9
        assert abs(chamfer_l1(np.zeros((1, 3)), np.array([[1.0, 0, 0]])) - 2.0) < 1e-9

        gen = np.random.default_rng(17)
        for na, nb in ((3, 3), (20, 35), (50, 50)):
            x = gen.normal(size=(na, 3))
            y = gen.normal(size=(nb, 3))
            assert chamfer_l1(x, y) == chamfer_l1_reference(x, y), "chamfer must match brute force exactly"

        pts = gen.normal(size=(40, 3))
        for seed in range(5):
            assert geom_consistency_loss([pts, pts.copy(), pts.copy()], sample_size=11, seed=seed) == 0.0

        assert abs(total_loss(clip=1, lpips=1, mse=1, center=1, geom=1).total - 2.34) < 1e-12


def test_criterion_metrics():
    with criterion("metrics: FID self/closed-form/rotation, KID oracle and magnitude", budget_s=30.0):
        gen = np.random.default_rng(23)
        x = gen.normal(size=(60, 8))
        assert frechet_distance(x, x) < 1e-6

        z = gen.normal(size=(50, 1))
        z = (z - z.mean()) / z.std(ddof=1)
        assert abs(frechet_distance(z, z + 1.0) - 1.0) < 1e-6

        y = gen.normal(size=(60, 8)) * 1.3 + 0.4
        q, _ = np.linalg.qr(gen.normal(size=(8, 8)))
        assert abs(frechet_distance(x @ q, y @ q) - frechet_distance(x, y)) < 1e-6

        for n in (20, 200):
            xs = gen.normal(size=(n, 6))
            ys = gen.normal(size=(n, 6)) + 0.3
            ours = kernel_mmd(xs, ys, subset_size=n, n_subsets=1, seed=0)
            assert abs(ours - kid_reference(xs, ys)) < 1e-9

        # synthetic distribution in the toolkit's embedding regime (unit-normalized rows)
        big = np.random.default_rng(99)
        xs = big.normal(size=(500, 16))
        ys = big.normal(size=(500, 16))
        xs /= np.linalg.norm(xs, axis=1, keepdims=True)
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        assert abs(kernel_mmd(xs, ys, subset_size=100, n_subsets=10, seed=1)) < 0.01


def test_criterion_benchmark_arithmetic(tmp_path):
    with criterion("benchmark: 100 instances, category balance, near-zero metrics, frozen report"):
        manifest, paths = build_fixture(tmp_path, n_scenes=20, prompts_per_scene=5)
        assert len(manifest.instances) == 100
        report = validate_manifest(manifest, root=paths["scenes"])
        assert report.ok
        for count in report.category_counts.values():
            assert abs(count - 25) <= 5

        timings = json.loads(paths["timings"].read_text())
        result = evaluate_run(manifest, paths["render"], paths["features"], timings)
        assert result.c_fid < 1e-6
        assert result.c_kid < 1e-6
        assert abs(result.c_kid) < 1e-6  # rendered == reference keeps magnitude tiny too
        assert result.mean_time_s == pytest.approx(0.51)

        expected = (FIXTURES / "bench100_expected_report.json").read_bytes()
        assert report_json_bytes(result) == expected, "report must reproduce the committed JSON byte-for-byte"


def test_criterion_drop_view():
    with criterion("drop-view: exact endpoints, seeded frequency in [0.44, 0.56]"):
        from splatlab.splat import GaussianPrimitive

        prims = tuple(
            GaussianPrimitive(np.array([0.0, 0.0, 3.0 + i]), np.array([1.0, 0, 0, 0]),
                              np.ones(3) * 0.1, 0.5, np.zeros((1, 3)), source_view=i % 2)
            for i in range(6)
        )
        scene = GaussianScene(prims, 0)
        n_view0 = sum(1 for g in prims if g.source_view == 0)
        for seed in range(50):
            assert len(drop_view(scene, 0, 0.0, seed)) == len(scene)
            assert len(drop_view(scene, 0, 1.0, seed)) == len(scene) - n_view0
        hits = sum(1 for seed in range(1000) if len(drop_view(scene, 0, 0.5, seed)) != len(scene))
        assert 440 <= hits <= 560, f"drop frequency {hits}/1000 outside [0.44, 0.56]"


def test_criterion_ply_round_trip(tmp_path):
    with criterion("PLY: float32 round-trip incl. logit opacity and log scales"):
        for trial, sh_degree in enumerate((0, 1, 2)):
            scene = random_scene(np.random.default_rng(300 + trial), 40, sh_degree=sh_degree)
            path = tmp_path / f"rt{trial}.ply"
            save_ply(scene, path)
            back = load_ply(path)
            assert back.sh_degree == sh_degree
            worst = 0.0
            for ga, gb in zip(scene.primitives, back.primitives):
                worst = max(worst, float(np.abs(ga.center - gb.center).max()))
                worst = max(worst, float(np.abs(ga.rotation - gb.rotation).max()))
                worst = max(worst, float(np.abs(ga.scale - gb.scale).max()))
                worst = max(worst, abs(ga.opacity - gb.opacity))
                worst = max(worst, float(np.abs(ga.sh_coeffs - gb.sh_coeffs).max()))
            assert worst <= 1e-6, f"round-trip deviation {worst:.2e}"
