"""Effort-vs-quality benchmarking over synthetic phantom families.

A grid cell is (effort_per_sample, samples_annotated).  For the points
method, effort is the number of surface points per sample driving the
template deformation; for the slices method it is the number of fully
annotated slices (realized effort is the total contour pixel count).  Each
cell runs the full supervision pipeline and scores the final segmentation
against the phantom truth.

CSV rows follow the fixed schema
    method,effort_per_sample,samples,seed,phantom_id,iou,final_loss,wall_ms
so plots are regenerable with any tool.  With timing disabled the output is
byte-reproducible for fixed seeds.
"""

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import varseg
from .annotate import (
    SimParams,
    baseline_slices,
    sample_skilled,
    spread_for_trial,
    trial_rng,
)
from .deform import DeformParams, center_template, deform
from .errors import ParameterError
from .grid import VoxelGrid, iou, threshold, weight_map
from .mesh import icosphere
from .rasterize import GridSpec, rasterize, surface_points

FULL_SURFACE = -1  # effort sentinel: use every ground-truth surface point

CSV_COLUMNS = "method,effort_per_sample,samples,seed,phantom_id,iou,final_loss,wall_ms"


@dataclass
class BenchRecord:
    method: str
    effort_per_sample: int
    samples_annotated: int
    mean_iou: float
    std_iou: float
    seeds_used: int
    per_run_ious: list = field(default_factory=list)
    failed: bool = False
    error: str = ""

    def to_dict(self):
        return {
            "method": self.method,
            "effort_per_sample": self.effort_per_sample,
            "samples_annotated": self.samples_annotated,
            "mean_iou": self.mean_iou,
            "std_iou": self.std_iou,
            "seeds_used": self.seeds_used,
            "failed": self.failed,
            "error": self.error,
        }


@dataclass
class IsoCurve:
    target_iou: float
    method: str
    points: list = field(default_factory=list)  # (effort, samples), Pareto frontier

    @property
    def empty(self):
        return not self.points

    def to_dict(self):
        return {
            "target_iou": self.target_iou,
            "method": self.method,
            "points": [[float(e), int(s)] for e, s in self.points],
        }


def default_phantom_family(noise_levels=(0.02, 0.05, 0.1)):
    """5 shape variants x 3 noise levels standing in for datasets."""
    shapes = [
        (20.0, 16.0, 12.0),
        (16.0, 16.0, 16.0),
        (22.0, 12.0, 10.0),
        (14.0, 18.0, 10.0),
        (18.0, 14.0, 16.0),
    ]
    family = []
    for si, axes in enumerate(shapes):
        for sigma in noise_levels:
            spec = varseg.PhantomSpec(axes=axes, noise_sigma=sigma)
            family.append((f"shape{si}-n{sigma:g}", spec))
    return family


def derive_seed(master, *path):
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1)[0])


def _slice_supervision(truth: VoxelGrid, num_slices, rng):
    """Slice-baseline supervision: template equals ground truth on the chosen
    slices, and the CE mask zeroes every unannotated voxel."""
    ann = baseline_slices(truth, num_slices, rng)
    template = np.zeros_like(truth.data)
    ce_mask = np.zeros(truth.dims, dtype=np.float32)
    for axis, index in ann.slices:
        sl = [slice(None)] * 3
        sl[axis] = index
        template[tuple(sl)] = truth.data[tuple(sl)]
        ce_mask[tuple(sl)] = 1.0
    template_grid = VoxelGrid(template, truth.spacing, truth.origin)
    mask_grid = VoxelGrid(ce_mask, truth.spacing, truth.origin)
    return ann, template_grid, mask_grid


def run_cell(method, effort, phantom_id, spec, seed, cell_index,
             sim: SimParams = None, deform_params: DeformParams = None,
             varseg_cfg: varseg.VarSegConfig = None, template_subdiv=3):
    """One (cell, phantom, seed) pipeline run; returns a CSV row dict."""
    t0 = time.perf_counter()
    varseg_cfg = varseg_cfg or varseg.VarSegConfig()
    deform_params = deform_params or DeformParams()
    noise_seed = derive_seed(seed, 0, cell_index)
    ann_seed = derive_seed(seed, 1, cell_index)
    x, truth, _ = varseg.make_phantom(spec, seed=noise_seed)

    if method == "points":
        surface = surface_points(truth)
        n_points = len(surface) if effort == FULL_SURFACE else int(effort)
        n_points = min(n_points, len(surface))
        trials = sim.spread_trials if sim is not None else 1
        # the template is placed from annotator points (skill trial 0), not
        # from the full ground-truth surface
        ann = spread_for_trial(surface, n_points, trials, ann_seed, 0)
        center, radius = center_template(ann.points)
        template = icosphere(template_subdiv, radius=radius, center=center)
        if sim is not None and sim.skill_trials > 1:
            params = SimParams(
                n_points=n_points,
                spread_trials=sim.spread_trials,
                skill_trials=sim.skill_trials,
                seed=ann_seed,
            )
            ann, mesh, _ = sample_skilled(surface, template, truth, params, deform_params)
        else:
            mesh, _ = deform(template, ann.points, deform_params)
        template_y = rasterize(mesh, GridSpec.like(truth))
        if not template_y.data.any():
            raise ParameterError("deformed template rasterized to an empty grid")
        w = varseg.default_weights(template_y)
        prob, trace = varseg.optimize(x, template_y, w, varseg_cfg)
        realized_effort = len(ann)
    elif method == "slices":
        rng = trial_rng(ann_seed, 0)
        ann, template_y, ce_mask = _slice_supervision(truth, int(effort), rng)
        # w_lo = 0 off the annotated band: a per-voxel model with nonzero
        # reconstruction weight everywhere would segment the whole volume
        # from the image alone, which no slice-trained baseline could do.
        w = weight_map(
            template_y, d=varseg.VARSEG_BAND, w_hi=varseg.VARSEG_W_HI, w_lo=0.0,
        )
        prob, trace = varseg.optimize(x, template_y, w, varseg_cfg, ce_mask=ce_mask)
        realized_effort = ann.contour_point_count
    else:
        raise ParameterError(f"method must be 'points' or 'slices', got {method!r}")

    seg = threshold(prob, varseg_cfg.gamma)
    score = iou(seg, truth)
    wall_ms = int(round((time.perf_counter() - t0) * 1000.0))
    return {
        "method": method,
        "effort_per_sample": realized_effort,
        "seed": seed,
        "phantom_id": phantom_id,
        "iou": score,
        "final_loss": trace[-1],
        "wall_ms": wall_ms,
    }


def run_grid(phantoms, method, cells, seeds, sim=None, deform_params=None,
             varseg_cfg=None, template_subdiv=3, workers=1, timing=True):
    """Run every (effort, samples) cell over phantoms and seeds.

    phantoms: sequence of (phantom_id, PhantomSpec); a cell with samples=S
    uses the first S of them.  Returns (records, rows): aggregated
    BenchRecords and the per-run CSV row dicts.  Failures are recorded on the
    cell, never dropped.  With timing=False, wall_ms is written as 0 so fixed
    seeds reproduce output byte-for-byte.
    """
    if len(seeds) < 3:
        raise ParameterError("need at least 3 seeds for released records")
    phantoms = list(phantoms)
    jobs = []
    for ci, (effort, samples) in enumerate(cells):
        if samples < 1 or samples > len(phantoms):
            raise ParameterError(
                f"cell wants {samples} samples but {len(phantoms)} phantoms exist"
            )
        for seed in seeds:
            for pi in range(samples):
                pid, spec = phantoms[pi]
                jobs.append((ci, effort, samples, seed, pid, spec))

    def run_job(job):
        ci, effort, samples, seed, pid, spec = job
        try:
            row = run_cell(
                method, effort, pid, spec, seed, ci,
                sim=sim, deform_params=deform_params,
                varseg_cfg=varseg_cfg, template_subdiv=template_subdiv,
            )
            row["samples"] = samples
            if not timing:
                row["wall_ms"] = 0
            return ci, row, None
        except Exception as exc:  # recorded on the cell, never dropped
            return ci, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(j) for j in jobs]

    rows = []
    by_cell = {ci: [] for ci in range(len(cells))}
    errors = {}
    for ci, row, err in results:
        if err is not None:
            errors[ci] = err
        else:
            by_cell[ci].append(row)
            rows.append(row)

    records = []
    for ci, (effort, samples) in enumerate(cells):
        cell_rows = by_cell[ci]
        if ci in errors or not cell_rows:
            records.append(
                BenchRecord(
                    method=method,
                    effort_per_sample=0 if effort == FULL_SURFACE else int(effort),
                    samples_annotated=samples,
                    mean_iou=float("nan"),
                    std_iou=float("nan"),
                    seeds_used=len(seeds),
                    failed=True,
                    error=errors.get(ci, "no successful runs"),
                )
            )
            continue
        ious = [r["iou"] for r in cell_rows]
        eff = int(round(float(np.mean([r["effort_per_sample"] for r in cell_rows]))))
        records.append(
            BenchRecord(
                method=method,
                effort_per_sample=eff,
                samples_annotated=samples,
                mean_iou=float(np.mean(ious)),
                std_iou=float(np.std(ious)),
                seeds_used=len(seeds),
                per_run_ious=ious,
            )
        )
    return records, rows


def rows_to_csv(rows) -> str:
    """Fixed-schema CSV with stable float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS.split(","))
    for r in rows:
        writer.writerow(
            [
                r["method"],
                r["effort_per_sample"],
                r["samples"],
                r["seed"],
                r["phantom_id"],
                f"{r['iou']:.6f}",
                f"{r['final_loss']:.9e}",
                r["wall_ms"],
            ]
        )
    return buf.getvalue()


def _crossing_effort(e0, i0, e1, i1, target):
    """Log-effort linear interpolation of the target crossing."""
    if i1 == i0:
        return e1
    t = (target - i0) / (i1 - i0)
    return math.exp(math.log(e0) + t * (math.log(e1) - math.log(e0)))


def iso_curves(records, target_iou):
    """Pareto frontiers of (effort, samples) reaching the target IoU, one per
    method present in the records."""
    if not records:
        raise ParameterError("records must be nonempty")
    methods = sorted({r.method for r in records})
    curves = []
    for method in methods:
        recs = [r for r in records if r.method == method and not r.failed]
        by_samples = {}
        for r in recs:
            by_samples.setdefault(r.samples_annotated, []).append(r)
        candidates = []
        for samples, cell_list in by_samples.items():
            cell_list.sort(key=lambda r: r.effort_per_sample)
            crossing = None
            for i, r in enumerate(cell_list):
                if r.mean_iou >= target_iou:
                    if i == 0:
                        crossing = float(r.effort_per_sample)
                    else:
                        prev = cell_list[i - 1]
                        crossing = _crossing_effort(
                            prev.effort_per_sample, prev.mean_iou,
                            r.effort_per_sample, r.mean_iou, target_iou,
                        )
                    break
            if crossing is not None:
                candidates.append((crossing, samples))
        # Pareto filter: drop any point beaten or tied on both coordinates.
        frontier = []
        for e, s in sorted(candidates):
            dominated = any(
                (e2 <= e and s2 <= s) and (e2, s2) != (e, s) for e2, s2 in candidates
            )
            if not dominated:
                frontier.append((e, s))
        frontier.sort(key=lambda p: p[0])
        curves.append(IsoCurve(target_iou=float(target_iou), method=method, points=frontier))
    return curves
