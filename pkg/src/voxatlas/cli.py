"""Command-line interface.

Pipelines compose through files: meshes as OBJ, volumes as RVOL, annotations
and reports as JSON, benchmarks as CSV.  The deform/rasterize defaults are
identical to the HTTP service's so both paths produce bit-identical output
for the same inputs.
"""

import json
import os
import sys

import click
import numpy as np

from . import bench as bench_mod
from . import varseg
from .annotate import (
    AnnotationSet,
    SimParams,
    read_annotation,
    sample_skilled,
    sample_spread,
    write_annotation,
)
from .deform import DeformParams, center_template, deform as run_deform
from .grid import (
    VoxelGrid,
    WeightMap,
    iou,
    read_rvol,
    threshold,
    weight_map,
    write_rvol,
)
from .losses import total_loss
from .mesh import icosphere, read_obj, validate, write_obj
from .rasterize import GridSpec, rasterize, surface_points
from .service import TEMPLATE_SUBDIVISIONS


def _triple(text, cast=float):
    parts = [cast(p) for p in str(text).split(",")]
    if len(parts) != 3:
        raise click.BadParameter(f"expected three comma-separated values, got {text!r}")
    return tuple(parts)


def _floats(text):
    return [float(p) for p in str(text).split(",") if p != ""]


def _ints(text):
    return [int(p) for p in str(text).split(",") if p != ""]


def _deform_params(alpha, beta, tau, kappa, max_iters, tol):
    return DeformParams(
        alpha=alpha, beta=beta, tau=tau, kappa=kappa, max_iters=max_iters, tol=tol
    )


deform_options = [
    click.option("--alpha", default=DeformParams.alpha, show_default=True),
    click.option("--beta", default=DeformParams.beta, show_default=True),
    click.option("--tau", default=DeformParams.tau, show_default=True),
    click.option("--kappa", default=DeformParams.kappa, show_default=True),
    click.option("--max-iters", default=DeformParams.max_iters, show_default=True),
    click.option("--tol", default=DeformParams.tol, show_default=True),
]


def add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn

    return wrap


@click.group()
def main():
    """Template-deformation segmentation toolkit."""


@main.command()
@click.option("--subdivisions", default=TEMPLATE_SUBDIVISIONS, show_default=True)
@click.option("--radius", default=1.0, show_default=True)
@click.option("--center", default="0,0,0", show_default=True, help="z,y,x mm")
@click.option("--out", required=True, type=click.Path())
def template(subdivisions, radius, center, out):
    """Write an icosphere template as OBJ."""
    mesh = icosphere(subdivisions, radius=radius, center=_triple(center))
    write_obj(out, mesh)
    click.echo(json.dumps(validate(mesh).to_dict()))


@main.command("rasterize")
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True))
@click.option("--dims", required=True, help="D,H,W")
@click.option("--spacing", default="1,1,1", show_default=True)
@click.option("--origin", default="0,0,0", show_default=True)
@click.option("--ray-axis", default=2, show_default=True)
@click.option("--out", required=True, type=click.Path())
def rasterize_cmd(mesh_path, dims, spacing, origin, ray_axis, out):
    """Voxelize a watertight OBJ mesh into a binary RVOL."""
    mesh = read_obj(mesh_path)
    spec = GridSpec(_triple(dims, int), _triple(spacing), _triple(origin))
    grid = rasterize(mesh, spec, ray_axis=ray_axis)
    write_rvol(out, grid)
    click.echo(json.dumps({"foreground": int(grid.data.sum())}))


@main.command("deform")
@click.option("--points", "points_path", required=True, type=click.Path(exists=True))
@click.option("--template", "template_path", type=click.Path(exists=True),
              help="template OBJ; omit to center an icosphere on the points")
@click.option("--subdivisions", default=TEMPLATE_SUBDIVISIONS, show_default=True)
@add_options(deform_options)
@click.option("--out-mesh", required=True, type=click.Path())
@click.option("--out-report", type=click.Path())
def deform_cmd(points_path, template_path, subdivisions, alpha, beta, tau, kappa,
               max_iters, tol, out_mesh, out_report):
    """Deform a spherical template toward annotation points."""
    ann = read_annotation(points_path)
    if not isinstance(ann, AnnotationSet):
        raise click.BadParameter("points file is not a point annotation")
    if template_path:
        tpl = read_obj(template_path)
    else:
        ctr, radius = center_template(ann.points)
        tpl = icosphere(subdivisions, radius=radius, center=ctr)
    params = _deform_params(alpha, beta, tau, kappa, max_iters, tol)
    mesh, report = run_deform(tpl, ann.points, params)
    write_obj(out_mesh, mesh)
    if out_report:
        with open(out_report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=1)
    click.echo(json.dumps({
        "iterations": report.iterations_used,
        "converged": report.converged,
        "residual": report.residuals[-1],
    }))


@main.command("weightmap")
@click.option("--template-y", required=True, type=click.Path(exists=True))
@click.option("--band", default=3.0, show_default=True)
@click.option("--w-hi", default=1.0, show_default=True)
@click.option("--w-lo", default=0.1, show_default=True)
@click.option("--out", required=True, type=click.Path())
def weightmap_cmd(template_y, band, w_hi, w_lo, out):
    """Boundary-proximity weight map from a binary template RVOL."""
    wm = weight_map(read_rvol(template_y), d=band, w_hi=w_hi, w_lo=w_lo)
    write_rvol(out, wm.grid)


@main.command("loss")
@click.option("--template-y", required=True, type=click.Path(exists=True))
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--recon", type=click.Path(exists=True),
              help="reconstruction RVOL; omit to use the piecewise-constant model")
@click.option("--weights", type=click.Path(exists=True),
              help="weight RVOL; omit to build one from the template")
@click.option("--band", default=3.0, show_default=True)
@click.option("--w-hi", default=1.0, show_default=True)
@click.option("--w-lo", default=0.1, show_default=True)
@click.option("--lam", default=1e-4, show_default=True)
def loss_cmd(template_y, pred, image, recon, weights, band, w_hi, w_lo, lam):
    """Print the LossBreakdown JSON for grids on disk."""
    y = read_rvol(template_y)
    yhat = read_rvol(pred)
    x = read_rvol(image)
    xhat = read_rvol(recon) if recon else varseg.reconstruct(yhat, x)
    if weights:
        wg = read_rvol(weights)
        wm = WeightMap(grid=wg, d=band, w_hi=float(wg.data.max()), w_lo=float(wg.data.min()))
    else:
        wm = weight_map(y, d=band, w_hi=w_hi, w_lo=w_lo)
    click.echo(json.dumps(total_loss(y, yhat, x, xhat, wm, lam).to_dict()))


@main.command("phantom")
@click.option("--dims", default="64,64,64", show_default=True)
@click.option("--axes", default="20,16,12", show_default=True)
@click.option("--template-delta", default="2,0,0", show_default=True)
@click.option("--fg", default=3.0, show_default=True)
@click.option("--bg", default=0.0, show_default=True)
@click.option("--sigma", default=0.05, show_default=True)
@click.option("--no-distractor", is_flag=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-image", required=True, type=click.Path())
@click.option("--out-truth", required=True, type=click.Path())
@click.option("--out-template", required=True, type=click.Path())
def phantom_cmd(dims, axes, template_delta, fg, bg, sigma, no_distractor, seed,
                out_image, out_truth, out_template):
    """Write a synthetic phantom: image, true mask, template mask."""
    spec = varseg.PhantomSpec(
        dims=_triple(dims, int),
        axes=_triple(axes),
        template_axes_delta=_triple(template_delta),
        fg_intensity=fg,
        bg_intensity=bg,
        noise_sigma=sigma,
        distractor_center=None if no_distractor else varseg.PhantomSpec.distractor_center,
    )
    x, truth, tpl = varseg.make_phantom(spec, seed=seed)
    write_rvol(out_image, x)
    write_rvol(out_truth, truth)
    write_rvol(out_template, tpl)


@main.command("segment")
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--template-y", required=True, type=click.Path(exists=True))
@click.option("--weights", type=click.Path(exists=True))
@click.option("--lam", default=1e-4, show_default=True)
@click.option("--gamma", default=0.95, show_default=True)
@click.option("--steps", default=100, show_default=True)
@click.option("--step-size", default=1.0, show_default=True)
@click.option("--init", default="from-template", show_default=True)
@click.option("--out-prob", required=True, type=click.Path())
@click.option("--out-mask", type=click.Path())
@click.option("--out-trace", type=click.Path())
def segment_cmd(image, template_y, weights, lam, gamma, steps, step_size, init,
                out_prob, out_mask, out_trace):
    """Optimize a segmentation against the template + reconstruction loss."""
    x = read_rvol(image)
    y = read_rvol(template_y)
    if weights:
        wg = read_rvol(weights)
        wm = WeightMap(grid=wg, d=varseg.VARSEG_BAND,
                       w_hi=float(wg.data.max()), w_lo=float(wg.data.min()))
    else:
        wm = varseg.default_weights(y)
    cfg = varseg.VarSegConfig(lam=lam, gamma=gamma, steps=steps,
                              step_size=step_size, init=init)
    prob, trace = varseg.optimize(x, y, wm, cfg)
    write_rvol(out_prob, prob)
    if out_mask:
        write_rvol(out_mask, threshold(prob, gamma))
    if out_trace:
        with open(out_trace, "w") as fh:
            json.dump(trace, fh)
    click.echo(json.dumps({"final_loss": trace[-1], "steps": len(trace) - 1}))


@main.command("sweep")
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--truth", required=True, type=click.Path(exists=True))
@click.option("--template-y", required=True, type=click.Path(exists=True))
@click.option("--lams", default="0,1e-6,1e-4,1e-2,1", show_default=True)
@click.option("--gammas", default="0.95", show_default=True)
@click.option("--steps", default=100, show_default=True)
@click.option("--out", type=click.Path(), help="CSV path; stdout when omitted")
def sweep_cmd(image, truth, template_y, lams, gammas, steps, out):
    """Sweep lambda/gamma, emitting CSV rows of segmentation quality."""
    x = read_rvol(image)
    gt = read_rvol(truth)
    y = read_rvol(template_y)
    wm = varseg.default_weights(y)
    lines = ["lambda,gamma,iou_vs_truth,iou_vs_template,final_loss"]
    for lam in _floats(lams):
        cfg = varseg.VarSegConfig(lam=lam, steps=steps)
        prob, trace = varseg.optimize(x, y, wm, cfg)
        for gamma in _floats(gammas):
            seg = threshold(prob, gamma)
            lines.append(
                f"{lam:g},{gamma:g},{iou(seg, gt):.6f},{iou(seg, y):.6f},{trace[-1]:.9e}"
            )
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command("simulate")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--n-points", default=50, show_default=True)
@click.option("--spread-trials", default=1, show_default=True)
@click.option("--skill-trials", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--subdivisions", default=3, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--out-mesh", type=click.Path())
def simulate_cmd(gt_path, n_points, spread_trials, skill_trials, seed, subdivisions,
                 out, out_mesh):
    """Simulate an annotator on a ground-truth RVOL."""
    gt = read_rvol(gt_path)
    surface = surface_points(gt)
    if skill_trials > 1:
        ctr, radius = center_template(surface)
        tpl = icosphere(subdivisions, radius=radius, center=ctr)
        params = SimParams(n_points=n_points, spread_trials=spread_trials,
                           skill_trials=skill_trials, seed=seed)
        ann, mesh, score = sample_skilled(surface, tpl, gt, params)
        if out_mesh:
            write_obj(out_mesh, mesh)
        click.echo(json.dumps({"iou": score, "points": len(ann)}))
    else:
        ann = sample_spread(surface, n_points, spread_trials, seed)
        click.echo(json.dumps({"points": len(ann)}))
    write_annotation(out, ann)


@main.command("iou")
@click.argument("grid_a", type=click.Path(exists=True))
@click.argument("grid_b", type=click.Path(exists=True))
def iou_cmd(grid_a, grid_b):
    """IoU of two binary RVOLs."""
    click.echo(f"{iou(read_rvol(grid_a), read_rvol(grid_b)):.6f}")


@main.command("bench")
@click.option("--method", type=click.Choice(["points", "slices"]), default="points",
              show_default=True)
@click.option("--efforts", default="10,25,50,100", show_default=True)
@click.option("--samples", default="1", show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--phantoms", default="3", show_default=True,
              help="number of phantoms from the default family")
@click.option("--steps", default=60, show_default=True)
@click.option("--workers", default=int(os.environ.get("VOXATLAS_WORKERS", "1")),
              show_default=True)
@click.option("--timing/--no-timing", default=True, show_default=True)
@click.option("--out-csv", required=True, type=click.Path())
@click.option("--out-records", type=click.Path())
def bench_cmd(method, efforts, samples, seeds, phantoms, steps, workers, timing,
              out_csv, out_records):
    """Run an effort-vs-quality grid and write CSV + aggregated records."""
    family = bench_mod.default_phantom_family()[: int(phantoms)]
    cells = [(e, s) for s in _ints(samples) for e in _ints(efforts)]
    records, rows = bench_mod.run_grid(
        family, method, cells, seeds=_ints(seeds),
        varseg_cfg=varseg.VarSegConfig(steps=steps),
        workers=workers, timing=timing,
    )
    with open(out_csv, "w") as fh:
        fh.write(bench_mod.rows_to_csv(rows))
    if out_records:
        with open(out_records, "w") as fh:
            json.dump([r.to_dict() for r in records], fh, indent=1)
    click.echo(f"{len(rows)} runs -> {out_csv}")


@main.command("isocurve")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--target-iou", required=True, type=float)
@click.option("--out", type=click.Path())
def isocurve_cmd(records_path, target_iou, out):
    """Iso-quality effort curves from aggregated bench records."""
    with open(records_path) as fh:
        raw = json.load(fh)
    records = [
        bench_mod.BenchRecord(
            method=r["method"],
            effort_per_sample=r["effort_per_sample"],
            samples_annotated=r["samples_annotated"],
            mean_iou=r["mean_iou"],
            std_iou=r["std_iou"],
            seeds_used=r["seeds_used"],
            failed=r.get("failed", False),
            error=r.get("error", ""),
        )
        for r in raw
    ]
    curves = [c.to_dict() for c in bench_mod.iso_curves(records, target_iou)]
    text = json.dumps(curves, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text)


@main.command("serve")
@click.option("--host", default=os.environ.get("VOXATLAS_BIND", "127.0.0.1"),
              show_default=True)
@click.option("--port", default=int(os.environ.get("VOXATLAS_PORT", "8077")),
              show_default=True)
@click.option("--workers", default=int(os.environ.get("VOXATLAS_WORKERS", "1")),
              show_default=True)
@click.option("--snapshot-dir", default=os.environ.get("VOXATLAS_SNAPSHOT_DIR"),
              type=click.Path())
@click.option("--ui-dir", default=os.environ.get("VOXATLAS_UI_DIR"),
              type=click.Path())
def serve_cmd(host, port, workers, snapshot_dir, ui_dir):
    """Run the annotation HTTP service."""
    import uvicorn

    if snapshot_dir:
        os.environ["VOXATLAS_SNAPSHOT_DIR"] = snapshot_dir
    if ui_dir:
        os.environ["VOXATLAS_UI_DIR"] = ui_dir
    uvicorn.run(
        "voxatlas.service:app_from_env", factory=True,
        host=host, port=port, workers=workers,
    )


if __name__ == "__main__":
    sys.exit(main())
