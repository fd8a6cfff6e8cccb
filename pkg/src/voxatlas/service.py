"""HTTP session service for the interactive annotation loop.

Versioned JSON API under /v1: upload a volume, place 3D points (mm, z-y-x),
deform the sphere template, fetch normalized slices with contour overlays,
export the session bundle.  Coordinates over the wire are always physical mm
so the client never needs grid arithmetic.

Sessions are in-memory; mutations are serialized per session (single-writer)
and bump a revision counter.  Slice overlays carry the revision they were
rasterized at and are flagged stale instead of silently served when the
point set has moved on.
"""

import base64
import io
import json
import threading
import uuid
import zipfile
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .deform import DeformParams, DeformSolver, center_template
from .errors import ParameterError
from .grid import VoxelGrid, grid_from_bytes, grid_to_bytes, iou
from .mesh import TriMesh, icosphere, mesh_to_obj
from .rasterize import GridSpec, rasterize

TEMPLATE_SUBDIVISIONS = 4


class ApiError(Exception):
    def __init__(self, status, error, detail=""):
        self.status = status
        self.error = error
        self.detail = detail
        super().__init__(f"{error}: {detail}")


@dataclass
class Session:
    id: str
    volume: VoxelGrid
    revision: int = 0
    points: list = field(default_factory=list)  # (point_id, np.ndarray(3,))
    next_point_id: int = 1
    template: TriMesh = None
    solver: DeformSolver = None
    deform_params: DeformParams = None
    deformed: TriMesh = None
    deformed_revision: int = -1
    raster: VoxelGrid = None
    raster_revision: int = -1
    last_report: dict = None
    gt: VoxelGrid = None
    lock: threading.RLock = field(default_factory=threading.RLock)

    def point_array(self):
        return np.array([p for _, p in self.points], dtype=np.float64).reshape(-1, 3)


def _slice_axes(axis):
    return [a for a in range(3) if a != axis]


def _rle_encode(mask):
    """Alternating run lengths over the flattened row-major mask, starting
    with a background run (possibly 0)."""
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    if flat.size == 0:
        return []
    change = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


def _contour2d(mask):
    """In-slice contour: mask minus its 4-connected erosion."""
    m = mask != 0
    p = np.pad(m, 1, constant_values=False)
    eroded = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:] & m
    return (m & ~eroded).astype(np.uint8)


def create_app(snapshot_dir=None):
    app = FastAPI(title="voxatlas annotation service")
    sessions = {}
    app.state.sessions = sessions

    def snapshot(session):
        if snapshot_dir is None:
            return

        def write():
            try:
                state = {
                    "id": session.id,
                    "revision": session.revision,
                    "points": [[pid] + [float(c) for c in p] for pid, p in session.points],
                }
                with open(f"{snapshot_dir}/{session.id}.json", "w") as fh:
                    json.dump(state, fh)
            except OSError:
                pass  # write-behind snapshots are best-effort

        threading.Thread(target=write, daemon=True).start()

    def get_session(sid) -> Session:
        s = sessions.get(sid)
        if s is None:
            raise ApiError(404, "unknown session", sid)
        return s

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.error, "detail": exc.detail}
        )

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        raw = await request.body()
        try:
            volume = grid_from_bytes(raw)
        except ParameterError as exc:
            raise ApiError(400, "malformed RVOL", str(exc))
        sid = uuid.uuid4().hex[:12]
        sessions[sid] = Session(id=sid, volume=volume)
        meta = session_meta(sessions[sid])
        return JSONResponse(status_code=201, content=meta)

    def session_meta(s: Session):
        with s.lock:
            return {
                "id": s.id,
                "revision": s.revision,
                "dims": list(s.volume.dims),
                "spacing": list(s.volume.spacing),
                "origin": list(s.volume.origin),
                "dtype": s.volume.dtype_name,
                "points": [
                    {"id": pid, "zyx": [float(c) for c in p]} for pid, p in s.points
                ],
                "deformed_revision": s.deformed_revision,
                "raster_revision": s.raster_revision,
                "raster_stale": s.raster_revision != s.revision,
                "last_report": s.last_report,
            }

    @app.get("/v1/sessions/{sid}")
    def get_meta(sid: str):
        return session_meta(get_session(sid))

    @app.post("/v1/sessions/{sid}/points")
    async def add_points(sid: str, request: Request):
        s = get_session(sid)
        body = await request.json()
        pts = np.asarray(body.get("points", []), dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ApiError(400, "bad points payload", "need nonempty [[z,y,x], ...] mm")
        with s.lock:
            inside = s.volume.contains_points(pts)
            if not inside.all():
                bad = pts[np.argmin(inside)]
                raise ApiError(
                    400, "point out of bounds", f"[{bad[0]}, {bad[1]}, {bad[2]}] mm"
                )
            existing = {tuple(p) for _, p in s.points}
            for p in pts:
                if tuple(p) in existing:
                    raise ApiError(
                        400, "duplicate point", f"[{p[0]}, {p[1]}, {p[2]}] mm"
                    )
            ids = []
            for p in pts:
                s.points.append((s.next_point_id, p.copy()))
                ids.append(s.next_point_id)
                s.next_point_id += 1
            s.revision += 1
            snapshot(s)
            return {"revision": s.revision, "point_ids": ids}

    @app.delete("/v1/sessions/{sid}/points/{pid}")
    def remove_point(sid: str, pid: int):
        s = get_session(sid)
        with s.lock:
            before = len(s.points)
            s.points = [(i, p) for i, p in s.points if i != pid]
            if len(s.points) == before:
                return {"revision": s.revision, "warning": f"no point with id {pid}"}
            s.revision += 1
            snapshot(s)
            return {"revision": s.revision}

    @app.post("/v1/sessions/{sid}/deform")
    async def deform_session(sid: str, request: Request):
        s = get_session(sid)
        body = await request.body()
        overrides = json.loads(body) if body else {}
        with s.lock:
            if len(s.points) < 4:
                raise ApiError(
                    409, "not enough points",
                    f"template deformation needs >= 4 points, have {len(s.points)}",
                )
            pts = s.point_array()
            params = DeformParams(**overrides) if overrides else (
                s.deform_params or DeformParams()
            )
            if s.solver is None or params != s.deform_params:
                center, radius = center_template(pts)
                s.template = icosphere(TEMPLATE_SUBDIVISIONS, radius=radius, center=center)
                s.solver = DeformSolver(s.template, params)
                s.deform_params = params
                start = None
            else:
                start = s.deformed
            mesh, report = s.solver.deform(pts, start=start)
            s.deformed = mesh
            s.deformed_revision = s.revision
            s.raster = rasterize(mesh, GridSpec.like(s.volume))
            s.raster_revision = s.revision
            s.last_report = report.to_dict()
            return {"revision": s.revision, "report": s.last_report}

    @app.get("/v1/sessions/{sid}/slice")
    def get_slice(sid: str, axis: int = Query(...), index: int = Query(...),
                  overlay: bool = Query(False)):
        s = get_session(sid)
        if axis not in (0, 1, 2):
            raise ApiError(400, "bad axis", f"axis must be 0, 1 or 2, got {axis}")
        with s.lock:
            dims = s.volume.dims
            if not 0 <= index < dims[axis]:
                raise ApiError(
                    400, "index out of range", f"axis {axis} has {dims[axis]} slices"
                )
            vol = s.volume.data
            vmin = float(vol.min())
            vmax = float(vol.max())
            sl = [slice(None)] * 3
            sl[axis] = index
            plane = vol[tuple(sl)].astype(np.float64)
            if vmax > vmin:
                img8 = np.round((plane - vmin) / (vmax - vmin) * 255.0).astype(np.uint8)
            else:
                img8 = np.zeros(plane.shape, dtype=np.uint8)
            h_ax, w_ax = _slice_axes(axis)
            payload = {
                "axis": axis,
                "index": index,
                "height": dims[h_ax],
                "width": dims[w_ax],
                "window": [vmin, vmax],
                "revision": s.revision,
                "image_b64": base64.b64encode(img8.tobytes()).decode("ascii"),
                "overlay": None,
            }
            if overlay:
                if s.raster is not None and s.raster_revision == s.revision:
                    rplane = s.raster.data[tuple(sl)]
                    payload["overlay"] = {
                        "stale": False,
                        "revision": s.raster_revision,
                        "rle": _rle_encode(_contour2d(rplane)),
                    }
                else:
                    payload["overlay"] = {"stale": True, "revision": None, "rle": None}
            return payload

    @app.get("/v1/sessions/{sid}/mesh")
    def get_mesh(sid: str):
        s = get_session(sid)
        with s.lock:
            if s.deformed is None:
                raise ApiError(404, "no deformed mesh", "call deform first")
            return Response(content=mesh_to_obj(s.deformed), media_type="text/plain")

    @app.get("/v1/sessions/{sid}/export")
    def export_session(sid: str):
        s = get_session(sid)
        with s.lock:
            buf = io.BytesIO()
            with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
                annotation = {
                    "sample_id": s.id,
                    "source": "interactive",
                    "seed": None,
                    "points": [[float(c) for c in p] for _, p in s.points],
                }
                zf.writestr("annotation.json", json.dumps(annotation, indent=1))
                manifest = {
                    "session_id": s.id,
                    "revision": s.revision,
                    "deformed_revision": s.deformed_revision,
                    "raster_revision": s.raster_revision,
                    "dims": list(s.volume.dims),
                    "spacing": list(s.volume.spacing),
                    "origin": list(s.volume.origin),
                }
                zf.writestr("manifest.json", json.dumps(manifest, indent=1))
                if s.deformed is not None:
                    zf.writestr("deformed.obj", mesh_to_obj(s.deformed))
                if s.raster is not None:
                    zf.writestr("raster.rvol", grid_to_bytes(s.raster))
                if s.last_report is not None:
                    zf.writestr("deform_report.json", json.dumps(s.last_report, indent=1))
            return Response(content=buf.getvalue(), media_type="application/zip")

    @app.post("/v1/sessions/{sid}/debug/gt")
    async def upload_gt(sid: str, request: Request):
        s = get_session(sid)
        raw = await request.body()
        try:
            gt = grid_from_bytes(raw)
        except ParameterError as exc:
            raise ApiError(400, "malformed RVOL", str(exc))
        with s.lock:
            if gt.dims != s.volume.dims:
                raise ApiError(400, "dims mismatch", f"{gt.dims} vs {s.volume.dims}")
            s.gt = gt
            return {"ok": True}

    @app.get("/v1/sessions/{sid}/debug/iou")
    def debug_iou(sid: str):
        s = get_session(sid)
        with s.lock:
            if s.gt is None:
                raise ApiError(404, "no ground truth uploaded", "POST debug/gt first")
            if s.raster is None:
                raise ApiError(404, "no raster", "call deform first")
            return {
                "iou": iou(s.raster, s.gt),
                "raster_revision": s.raster_revision,
                "stale": s.raster_revision != s.revision,
            }

    return app


def mount_ui(app, directory):
    """Serve a built browser client at /ui."""
    app.mount("/ui", StaticFiles(directory=directory, html=True), name="ui")
    return app


def app_from_env():
    """Uvicorn factory: configuration via VOXATLAS_* environment variables."""
    import os

    app = create_app(snapshot_dir=os.environ.get("VOXATLAS_SNAPSHOT_DIR") or None)
    ui_dir = os.environ.get("VOXATLAS_UI_DIR")
    if ui_dir:
        mount_ui(app, ui_dir)
    return app
