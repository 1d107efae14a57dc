from __future__ import annotations

import numpy as np
import pytest

from oracles import chamfer_l1_reference, smooth_l1_reference
from splatlab.core import ImageBuffer
from splatlab.errors import ValidationError
from splatlab.losses import (
    LossWeights,
    chamfer_l1,
    embedding_distance,
    geom_consistency_loss,
    mse_loss,
    smooth_l1_centers,
    total_loss,
)


class TestMSE:
    def test_identical_zero(self, rng):
        img = ImageBuffer(rng.random((4, 4, 3)))
        assert mse_loss(img, img) == 0.0

    def test_unit_gap(self):
        a = ImageBuffer(np.ones((3, 3, 3)))
        b = ImageBuffer(np.zeros((3, 3, 3)))
        assert mse_loss(a, b) == 1.0

    def test_quarter_gap(self):
        a = ImageBuffer(np.full((2, 2, 3), 0.5))
        b = ImageBuffer(np.full((2, 2, 3), 0.25))
        assert mse_loss(a, b) == pytest.approx(0.0625, abs=1e-12)

    def test_symmetric(self, rng):
        a = ImageBuffer(rng.random((3, 5, 3)))
        b = ImageBuffer(rng.random((3, 5, 3)))
        assert mse_loss(a, b) == mse_loss(b, a)

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            mse_loss(ImageBuffer(np.zeros((2, 2, 3))), ImageBuffer(np.zeros((2, 3, 3))))


class TestEmbeddingDistance:
    def test_equal_vectors_zero(self):
        v = np.array([0.3, -0.4, 0.5])
        assert embedding_distance(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_is_one(self):
        assert embedding_distance([1, 0], [0, 1]) == pytest.approx(1.0)

    def test_antiparallel_is_two(self):
        v = np.array([0.2, 0.9, -0.1])
        assert embedding_distance(v, -v) == pytest.approx(2.0)

    def test_l2_kind(self):
        assert embedding_distance([1.0, 1.0], [0.0, 0.0], kind="l2") == pytest.approx(1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValidationError):
            embedding_distance([0.0, 0.0], [1.0, 0.0])


class TestSmoothL1:
    def test_equal_zero(self, rng):
        pts = rng.normal(size=(10, 3))
        assert smooth_l1_centers(pts, pts) == 0.0

    def test_quadratic_branch(self):
        pred = np.full((4, 3), 0.5)
        ref = np.zeros((4, 3))
        assert smooth_l1_centers(pred, ref, beta=1.0) == pytest.approx(0.125, abs=1e-12)

    def test_linear_branch(self):
        pred = np.full((4, 3), 2.0)
        ref = np.zeros((4, 3))
        assert smooth_l1_centers(pred, ref, beta=1.0) == pytest.approx(1.5, abs=1e-12)

    def test_matches_scalar_reference(self, rng):
        pred = rng.normal(size=(7, 3)) * 2
        ref = rng.normal(size=(7, 3))
        for beta in (0.5, 1.0, 2.0):
            assert smooth_l1_centers(pred, ref, beta) == pytest.approx(
                smooth_l1_reference(pred, ref, beta), abs=1e-12
            )

    def test_cardinality_mismatch(self):
        with pytest.raises(ValidationError):
            smooth_l1_centers(np.zeros((3, 3)), np.zeros((4, 3)))


class TestChamfer:
    def test_equal_sets_zero(self, rng):
        pts = rng.normal(size=(12, 3))
        assert chamfer_l1(pts, pts) == 0.0

    def test_unit_shift_two(self):
        assert chamfer_l1(np.array([[0.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0]])) == pytest.approx(2.0)

    def test_matches_brute_force_exactly(self, rng):
        for na, nb in ((1, 1), (5, 9), (50, 33)):
            a = rng.normal(size=(na, 3))
            b = rng.normal(size=(nb, 3))
            assert chamfer_l1(a, b) == chamfer_l1_reference(a, b)

    def test_symmetric(self, rng):
        a, b = rng.normal(size=(9, 3)), rng.normal(size=(6, 3))
        assert chamfer_l1(a, b) == chamfer_l1(b, a)

    def test_zero_iff_mutual_containment(self):
        a = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        b = np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0]])
        assert chamfer_l1(a, b) == 0.0
        c = np.array([[0.0, 0, 0], [2.0, 0, 0]])
        assert chamfer_l1(a, c) > 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            chamfer_l1(np.zeros((0, 3)), np.zeros((1, 3)))


class TestGeomConsistency:
    def test_two_identical_views_zero(self, rng):
        pts = rng.normal(size=(20, 3))
        assert geom_consistency_loss([pts, pts.copy()], sample_size=10, seed=3) == 0.0

    def test_two_view_normalization(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[1.0, 0.0, 0.0]])
        # single pair, chamfer 2.0, scaled by 1/(V(V-1)) = 1/2
        assert geom_consistency_loss([a, b], sample_size=8, seed=0) == pytest.approx(1.0)

    def test_three_identical_views_zero_any_seed(self, rng):
        pts = rng.normal(size=(30, 3))
        for seed in range(5):
            assert geom_consistency_loss([pts] * 3, sample_size=7, seed=seed) == 0.0

    def test_seed_determinism(self, rng):
        views = [rng.normal(size=(40, 3)) for _ in range(3)]
        a = geom_consistency_loss(views, sample_size=10, seed=11)
        b = geom_consistency_loss(views, sample_size=10, seed=11)
        assert a == b

    def test_single_view_rejected(self, rng):
        with pytest.raises(ValidationError):
            geom_consistency_loss([rng.normal(size=(5, 3))])


class TestTotalLoss:
    def test_all_ones_default_weights(self):
        report = total_loss(clip=1.0, lpips=1.0, mse=1.0, center=1.0, geom=1.0)
        assert report.total == pytest.approx(2.34, abs=1e-12)

    def test_all_zero(self):
        assert total_loss().total == 0.0

    def test_single_term(self):
        assert total_loss(mse=0.5).total == pytest.approx(0.5, abs=1e-15)

    def test_per_view_terms_averaged(self):
        report = total_loss(mse=[0.2, 0.4], clip=[1.0, 0.0])
        assert report.mse == pytest.approx(0.3)
        assert report.clip == pytest.approx(0.5)
        assert report.total == pytest.approx(1.0 * 0.3 + 0.5 * 0.5)

    def test_linear_in_each_term(self):
        w = LossWeights()
        base = total_loss(clip=1, lpips=1, mse=1, center=1, geom=1, weights=w).total
        for name, weight in (("clip", w.clip), ("lpips", w.lpips), ("mse", w.mse),
                             ("center", w.center), ("geom", w.geom)):
            kwargs = {"clip": 1, "lpips": 1, "mse": 1, "center": 1, "geom": 1, name: 2}
            bumped = total_loss(weights=w, **kwargs).total
            assert bumped - base == pytest.approx(weight, abs=1e-12)

    def test_report_consistency_invariant(self, rng):
        w = LossWeights()
        r = total_loss(clip=rng.random(), lpips=rng.random(), mse=rng.random(),
                       center=rng.random(), geom=rng.random(), weights=w)
        recon = w.clip * r.clip + w.lpips * r.lpips + w.mse * r.mse + w.center * r.center + w.geom * r.geom
        assert r.total == pytest.approx(recon, rel=1e-9)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            total_loss(mse=float("nan"))

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            LossWeights(mse=-1.0)
