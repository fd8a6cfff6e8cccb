"""Annotator behavior simulation: spread-selected point sets, skill-selected
deformations, and the full-slice baseline, plus effort accounting.

All randomness flows through a splittable counter-style scheme: trial t of a
seeded operation uses ``trial_rng(seed, t)``, so enlarging a trial budget
keeps earlier trials bit-identical (the candidate list for P=10 is a prefix
of the one for P=100).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .deform import DeformParams, DeformSolver
from .errors import ParameterError
from .grid import VoxelGrid, iou
from .mesh import TriMesh
from .rasterize import GridSpec, rasterize

SOURCES = ("interactive", "simulated", "slice-derived")


def trial_rng(seed, *path):
    """Independent generator for one trial of a seeded experiment."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(ss)


@dataclass
class AnnotationSet:
    points: np.ndarray  # (n, 3) mm, (z, y, x)
    sample_id: str = ""
    source: str = "simulated"
    seed: int = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.points.shape[1] != 3:
            raise ParameterError("points must be (n, 3)")
        if self.source not in SOURCES:
            raise ParameterError(f"source must be one of {SOURCES}, got {self.source!r}")
        uniq = {tuple(p) for p in self.points}
        if len(uniq) != len(self.points):
            raise ParameterError("annotation contains duplicate points")

    def __len__(self):
        return len(self.points)

    def to_dict(self):
        return {
            "sample_id": self.sample_id,
            "source": self.source,
            "seed": self.seed,
            "points": [[float(c) for c in p] for p in self.points],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            points=np.asarray(d["points"], dtype=np.float64),
            sample_id=d.get("sample_id", ""),
            source=d.get("source", "simulated"),
            seed=d.get("seed"),
        )


@dataclass
class SimParams:
    n_points: int = 50        # points per sample
    spread_trials: int = 1    # candidate subsets per annotation (point spread)
    skill_trials: int = 1     # deform-and-score attempts (annotator skill)
    seed: int = 0
    spread_score: str = "spacing"

    def __post_init__(self):
        if self.n_points < 4:
            raise ParameterError("n_points must be >= 4 (template centering)")
        if self.spread_trials < 1 or self.skill_trials < 1:
            raise ParameterError("spread_trials and skill_trials must be >= 1")
        _score_fn(self.spread_score)


@dataclass
class SliceAnnotation:
    sample_id: str
    slices: list = field(default_factory=list)  # (axis, index) pairs
    contour_point_count: int = 0

    def to_dict(self):
        return {
            "sample_id": self.sample_id,
            "slices": [[int(a), int(i)] for a, i in self.slices],
            "contour_point_count": int(self.contour_point_count),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            sample_id=d.get("sample_id", ""),
            slices=[(int(a), int(i)) for a, i in d["slices"]],
            contour_point_count=int(d["contour_point_count"]),
        )


SPREAD_SCORES = ("spacing", "variance")


def spread_variance(points):
    """Intra-point variance: trace of the 3x3 sample covariance."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    return float(pts.var(axis=0, ddof=1).sum())


def spread_spacing(points):
    """Mean nearest-neighbor distance: the uniformity measure that spread
    selection maximizes by default.

    Plain variance maximization favors extreme points; on elongated targets
    that skews the template placement and makes fits *worse* as the trial
    budget grows, which is the opposite of what a conscientious annotator's
    spread should do.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 600:
        from scipy.spatial import cKDTree

        d, _ = cKDTree(pts).query(pts, k=2)
        return float(d[:, 1].mean())
    from scipy.spatial.distance import squareform, pdist

    dm = squareform(pdist(pts))
    np.fill_diagonal(dm, np.inf)
    return float(dm.min(axis=1).mean())


def _score_fn(score):
    if score not in SPREAD_SCORES:
        raise ParameterError(f"score must be one of {SPREAD_SCORES}, got {score!r}")
    return spread_spacing if score == "spacing" else spread_variance


def _spread_indices(surface, n_points, spread_trials, seed, path_prefix=(),
                    score="spacing"):
    if n_points > len(surface):
        raise ParameterError(
            f"n_points={n_points} exceeds surface size {len(surface)}"
        )
    fn = _score_fn(score)
    best = None
    best_score = -1.0
    for t in range(spread_trials):
        rng = trial_rng(seed, *path_prefix, t)
        idx = rng.choice(len(surface), size=n_points, replace=False)
        if spread_trials == 1:
            return idx
        val = fn(surface[idx])
        if val > best_score:
            best_score = val
            best = idx
    return best


def sample_spread(surface, n_points, spread_trials, seed, sample_id="",
                  score="spacing"):
    """Draw spread_trials uniform n_points-subsets of the surface and keep the
    best-spread one (lowest trial index on ties).

    score picks the spread measure: "spacing" (mean nearest-neighbor
    distance, the default) or "variance" (trace of the sample covariance).
    """
    surface = np.asarray(surface, dtype=np.float64)
    idx = _spread_indices(surface, n_points, spread_trials, seed, score=score)
    return AnnotationSet(
        points=surface[idx], sample_id=sample_id, source="simulated", seed=int(seed)
    )


def spread_for_trial(surface, n_points, spread_trials, seed, trial, sample_id="",
                     score="spacing"):
    """The spread annotation that skill trial ``trial`` of sample_skilled
    would draw (rng paths (seed, trial, t))."""
    surface = np.asarray(surface, dtype=np.float64)
    idx = _spread_indices(surface, n_points, spread_trials, seed, (int(trial),),
                          score=score)
    return AnnotationSet(
        points=surface[idx], sample_id=sample_id, source="simulated", seed=int(seed)
    )


def skilled_candidates(gt_surface, template, gt_grid, params, deform_params=None):
    """All skill_trials candidate (annotation, mesh, iou) triples, trial order.

    Each trial k draws its spread annotation with rng paths (seed, k, t).
    """
    deform_params = deform_params or DeformParams()
    solver = DeformSolver(template, deform_params)
    spec = GridSpec.like(gt_grid)
    surface = np.asarray(gt_surface, dtype=np.float64)
    out = []
    for k in range(params.skill_trials):
        idx = _spread_indices(
            surface, params.n_points, params.spread_trials, params.seed, (k,),
            score=params.spread_score,
        )
        ann = AnnotationSet(points=surface[idx], source="simulated", seed=params.seed)
        mesh, _ = solver.deform(ann.points)
        score = iou(rasterize(mesh, spec), gt_grid)
        out.append((ann, mesh, score))
    return out


def sample_skilled(gt_surface, template: TriMesh, gt_grid: VoxelGrid,
                   params: SimParams, deform_params: DeformParams = None):
    """Skill simulation: deform with skill_trials candidate annotations and
    return the best-scoring (annotation, mesh, iou); earliest trial on ties."""
    cands = skilled_candidates(gt_surface, template, gt_grid, params, deform_params)
    best = max(range(len(cands)), key=lambda k: (cands[k][2], -k))
    return cands[best]


def _slice_boundary_count(plane):
    """4-connected 2D boundary pixel count; outside the slice counts as
    background."""
    m = plane != 0
    p = np.pad(m, 1, constant_values=False)
    all_nb = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return int(np.count_nonzero(m & ~all_nb))


def _take_slice(data, axis, index):
    sl = [slice(None)] * 3
    sl[axis] = index
    return data[tuple(sl)]


def baseline_slices(gt_grid: VoxelGrid, num_slices, rng, sample_id=""):
    """Full-slice baseline annotation: uniform (axis, index) picks, without
    replacement, among slices that intersect the foreground."""
    if num_slices < 1:
        raise ParameterError("num_slices must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = trial_rng(rng, 0)
    data = gt_grid.data
    qualifying = [
        (axis, int(i))
        for axis in range(3)
        for i in range(data.shape[axis])
        if _take_slice(data, axis, i).any()
    ]
    if num_slices > len(qualifying):
        raise ParameterError(
            f"requested {num_slices} slices but only {len(qualifying)} intersect foreground"
        )
    picks = rng.choice(len(qualifying), size=num_slices, replace=False)
    chosen = [qualifying[i] for i in sorted(picks)]
    count = sum(_slice_boundary_count(_take_slice(data, a, i)) for a, i in chosen)
    return SliceAnnotation(sample_id=sample_id, slices=chosen, contour_point_count=count)


def effort(annotation):
    """Annotation effort proxy: point count for point sets, total contour
    pixels for slice annotations."""
    if isinstance(annotation, SliceAnnotation):
        return int(annotation.contour_point_count)
    if isinstance(annotation, AnnotationSet):
        return len(annotation)
    raise ParameterError(f"unsupported annotation type {type(annotation)!r}")


def write_annotation(path, annotation):
    with open(path, "w") as fh:
        json.dump(annotation.to_dict(), fh, indent=1)


def read_annotation(path):
    with open(path) as fh:
        d = json.load(fh)
    if "points" in d:
        return AnnotationSet.from_dict(d)
    return SliceAnnotation.from_dict(d)
