import json

import numpy as np
import pytest
from scipy.stats import binomtest

from voxatlas.annotate import (
    AnnotationSet,
    SimParams,
    SliceAnnotation,
    baseline_slices,
    effort,
    read_annotation,
    sample_skilled,
    sample_spread,
    skilled_candidates,
    spread_variance,
    trial_rng,
    write_annotation,
)
from voxatlas.deform import DeformParams, center_template
from voxatlas.errors import ParameterError
from voxatlas.grid import VoxelGrid, iou
from voxatlas.mesh import icosphere
from voxatlas.rasterize import surface_points

from .conftest import ellipsoid_grid
from .oracles import boundary2d_count_brute


@pytest.fixture(scope="module")
def sphere_surface():
    g = ellipsoid_grid((10.0, 10.0, 10.0), dims=(28, 28, 28))
    return surface_points(g)


class TestAnnotationSet:
    def test_rejects_duplicates(self):
        pts = np.array([[1, 2, 3], [1, 2, 3]], float)
        with pytest.raises(ParameterError):
            AnnotationSet(points=pts)

    def test_rejects_bad_source(self):
        with pytest.raises(ParameterError):
            AnnotationSet(points=np.zeros((1, 3)), source="guess")

    def test_json_roundtrip(self, tmp_path):
        ann = AnnotationSet(points=np.array([[1.5, 2.5, 3.5], [0, 0, 1]], float),
                            sample_id="s1", source="simulated", seed=42)
        path = tmp_path / "ann.json"
        write_annotation(path, ann)
        back = read_annotation(path)
        assert isinstance(back, AnnotationSet)
        assert (back.points == ann.points).all()
        assert back.sample_id == "s1" and back.seed == 42
        d = json.loads(path.read_text())
        assert d["points"][0] == [1.5, 2.5, 3.5]  # (z, y, x) mm over the wire


class TestSampleSpread:
    def test_single_trial_reproducible(self, sphere_surface):
        a = sample_spread(sphere_surface, 25, 1, seed=9)
        b = sample_spread(sphere_surface, 25, 1, seed=9)
        assert (a.points == b.points).all()
        c = sample_spread(sphere_surface, 25, 1, seed=10)
        assert not np.array_equal(a.points, c.points)

    def test_full_surface_regardless_of_trials(self, sphere_surface):
        n = len(sphere_surface)
        a = sample_spread(sphere_surface, n, 7, seed=0)
        assert len(a) == n
        assert sorted(map(tuple, a.points)) == sorted(map(tuple, sphere_surface))

    def test_too_many_points_rejected(self, sphere_surface):
        with pytest.raises(ParameterError):
            sample_spread(sphere_surface, len(sphere_surface) + 1, 1, seed=0)

    def test_selected_variance_beats_control_mean(self, sphere_surface):
        # variance-scored spread selection maximizes over 100 candidates, so
        # it must beat the average of a fresh 100-candidate control batch
        surf = sphere_surface[
            trial_rng(999).choice(len(sphere_surface), 200, replace=False)
        ]
        for rep in range(20):
            picked = sample_spread(surf, 25, 100, seed=rep, score="variance")
            got = spread_variance(picked.points)
            ctrl_rng = trial_rng(10_000 + rep)
            ctrl = [
                spread_variance(surf[ctrl_rng.choice(len(surf), 25, replace=False)])
                for _ in range(100)
            ]
            assert got >= np.mean(ctrl)

    def test_prefix_coupling_makes_scores_monotone(self, sphere_surface):
        from voxatlas.annotate import spread_spacing

        for seed in range(10):
            for score, fn in (("variance", spread_variance),
                              ("spacing", spread_spacing)):
                vals = [
                    fn(sample_spread(sphere_surface, 25, p, seed,
                                     score=score).points)
                    for p in (1, 10, 100)
                ]
                assert vals[0] <= vals[1] <= vals[2]

    def test_variance_gain_significant_over_seeds(self, sphere_surface):
        wins = 0
        ties = 0
        for seed in range(50):
            v1 = spread_variance(
                sample_spread(sphere_surface, 20, 1, seed, score="variance").points)
            v100 = spread_variance(
                sample_spread(sphere_surface, 20, 100, seed, score="variance").points)
            if v100 > v1:
                wins += 1
            elif v100 == v1:
                ties += 1
        assert binomtest(wins, 50 - ties, 0.5, alternative="greater").pvalue < 0.05


class TestSampleSkilled:
    @pytest.fixture(scope="class")
    def fixture(self):
        gt = ellipsoid_grid((11.0, 9.0, 7.0), dims=(30, 30, 30))
        surf = surface_points(gt)
        c, r = center_template(surf)
        tpl = icosphere(2, radius=r, center=c)
        dp = DeformParams(max_iters=50)
        return gt, surf, tpl, dp

    def test_k1_equals_single_spread_deform(self, fixture):
        gt, surf, tpl, dp = fixture
        params = SimParams(n_points=30, spread_trials=3, skill_trials=1, seed=5)
        ann, mesh, score = sample_skilled(surf, tpl, gt, params, dp)
        cands = skilled_candidates(surf, tpl, gt, params, dp)
        assert len(cands) == 1
        assert (ann.points == cands[0][0].points).all()
        assert score == cands[0][2]

    def test_returns_max_over_candidates(self, fixture):
        gt, surf, tpl, dp = fixture
        params = SimParams(n_points=20, spread_trials=1, skill_trials=5, seed=3)
        cands = skilled_candidates(surf, tpl, gt, params, dp)
        ann, mesh, score = sample_skilled(surf, tpl, gt, params, dp)
        assert score == max(c[2] for c in cands)
        assert score >= cands[0][2]

    def test_prefix_coupling_in_skill(self, fixture):
        gt, surf, tpl, dp = fixture
        for seed in (0, 1):
            s1 = sample_skilled(surf, tpl, gt,
                                SimParams(n_points=20, spread_trials=1,
                                          skill_trials=1, seed=seed), dp)[2]
            s3 = sample_skilled(surf, tpl, gt,
                                SimParams(n_points=20, spread_trials=1,
                                          skill_trials=3, seed=seed), dp)[2]
            assert s3 >= s1

    def test_plateau_below_perfect_on_full_surface(self, fixture):
        gt, surf, _, dp = fixture
        from voxatlas.deform import deform
        from voxatlas.rasterize import GridSpec, rasterize

        # finer template than the class fixture: the accumulated spring pull
        # scales with points per face, so dense point sets need face headroom
        c, r = center_template(surf)
        tpl = icosphere(3, radius=r, center=c)
        mesh, _ = deform(tpl, surf, dp)
        score = iou(rasterize(mesh, GridSpec.like(gt)), gt)
        assert 0.7 < score < 1.0


class TestSimParams:
    @pytest.mark.parametrize("kw", [{"n_points": 3}, {"spread_trials": 0},
                                    {"skill_trials": 0}])
    def test_domain(self, kw):
        with pytest.raises(ParameterError):
            SimParams(**kw)


class TestBaselineSlices:
    def test_square_contour_count(self):
        m = np.zeros((7, 7, 7), np.uint8)
        m[3, 2:5, 2:5] = 1  # 3x3 square in one axis-0 slice
        g = VoxelGrid(m)
        ann = baseline_slices(g, 1, rng=trial_rng(0))
        # the only qualifying axis-0 slice is index 3; axes 1/2 also qualify
        if ann.slices[0][0] == 0:
            assert ann.contour_point_count == 8
        axis, idx = ann.slices[0]
        sl = [slice(None)] * 3
        sl[axis] = idx
        assert m[tuple(sl)].any()

    def test_forced_square_slice(self):
        m = np.zeros((7, 7, 7), np.uint8)
        m[3, 2:5, 2:5] = 1
        g = VoxelGrid(m)
        # the grid has exactly 1 qualifying slice on axis 0, 3 on axes 1 and 2
        all_ann = baseline_slices(g, 7, rng=trial_rng(1))
        assert len(all_ann.slices) == 7
        z_slices = [s for s in all_ann.slices if s[0] == 0]
        assert z_slices == [(0, 3)]

    def test_counts_match_brute_force(self, rng):
        from .conftest import random_mask

        for _ in range(5):
            g = random_mask(rng, (6, 6, 6), 0.25)
            ann = baseline_slices(g, 3, rng=rng)
            total = 0
            for axis, idx in ann.slices:
                sl = [slice(None)] * 3
                sl[axis] = idx
                total += boundary2d_count_brute(g.data[tuple(sl)])
            assert ann.contour_point_count == total

    def test_requesting_too_many(self):
        m = np.zeros((4, 4, 4), np.uint8)
        m[1, 1, 1] = 1
        with pytest.raises(ParameterError):
            baseline_slices(VoxelGrid(m), 4, rng=trial_rng(0))

    def test_json_roundtrip(self, tmp_path):
        ann = SliceAnnotation(sample_id="x", slices=[(0, 3), (2, 1)],
                              contour_point_count=17)
        path = tmp_path / "slices.json"
        write_annotation(path, ann)
        back = read_annotation(path)
        assert isinstance(back, SliceAnnotation)
        assert back.slices == [(0, 3), (2, 1)]
        assert back.contour_point_count == 17


class TestEffort:
    def test_point_count(self, rng):
        pts = rng.random((25, 3))
        assert effort(AnnotationSet(points=pts)) == 25

    def test_slice_contours(self):
        assert effort(SliceAnnotation(sample_id="", slices=[(0, 3)],
                                      contour_point_count=8)) == 8

    def test_full_annotation_scale(self, rng):
        # a full expert annotation of ~1509 points counts as exactly that
        pts = rng.random((1509, 3)) * 100
        assert effort(AnnotationSet(points=pts)) == 1509

    def test_unsupported_type(self):
        with pytest.raises(ParameterError):
            effort([1, 2, 3])
