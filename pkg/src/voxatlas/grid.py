"""Dense voxel grids: container, RVOL I/O, IoU, thresholding, exact EDT and
the boundary-proximity weight map.

Grids are indexed (i, j, k) over dims (D, H, W); the matching physical axes
are (z, y, x) and every 3D point in this package is ordered (z, y, x) in mm.
Voxel (i, j, k) has its center at origin + spacing * (i+0.5, j+0.5, k+0.5).
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from ._kernels import edt_sq
from .errors import EmptyGridError, ParameterError, ShapeMismatchError

RVOL_MAGIC = b"RVOL0001"

_DTYPES = {"uint8": np.uint8, "float32": np.float32}


@dataclass
class VoxelGrid:
    """A dense scalar field over a regular grid.

    data is a C-contiguous (D, H, W) array of uint8 or float32; spacing and
    origin are (z, y, x) mm triples.
    """

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data)
        if self.data.ndim != 3:
            raise ParameterError(f"grid data must be 3D, got ndim={self.data.ndim}")
        if self.data.dtype not in (np.uint8, np.float32):
            raise ParameterError(f"grid dtype must be uint8 or float32, got {self.data.dtype}")
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.spacing) != 3 or len(self.origin) != 3:
            raise ParameterError("spacing and origin must be (z, y, x) triples")
        if any(s <= 0 for s in self.spacing):
            raise ParameterError(f"spacing must be strictly positive, got {self.spacing}")

    @property
    def dims(self):
        return self.data.shape

    @property
    def dtype_name(self):
        return "uint8" if self.data.dtype == np.uint8 else "float32"

    def indices_to_points(self, ijk):
        """Voxel indices (n, 3) -> physical centers (n, 3) in (z, y, x) mm."""
        ijk = np.atleast_2d(np.asarray(ijk, dtype=np.float64))
        return np.asarray(self.origin) + np.asarray(self.spacing) * (ijk + 0.5)

    def points_to_indices(self, pts):
        """Physical (z, y, x) mm points -> containing voxel indices (int)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        rel = (pts - np.asarray(self.origin)) / np.asarray(self.spacing)
        return np.floor(rel).astype(np.int64)

    def contains_points(self, pts):
        """True where a physical point falls inside the grid's extent."""
        idx = self.points_to_indices(pts)
        return np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=1)

    def copy(self):
        return VoxelGrid(self.data.copy(), self.spacing, self.origin)


@dataclass
class WeightMap:
    """Two-level per-voxel weights: w_hi within distance d of the template
    boundary, w_lo elsewhere."""

    grid: VoxelGrid
    d: float
    w_hi: float
    w_lo: float


def ensure_binary(g: VoxelGrid, name="grid"):
    if g.data.dtype != np.uint8 or not np.isin(g.data, (0, 1)).all():
        raise ParameterError(f"{name} must be binary (uint8 values in {{0,1}})")


def ensure_probability(g: VoxelGrid, name="grid"):
    if g.data.dtype != np.float32:
        raise ParameterError(f"{name} must be float32 probabilities")
    if g.data.min() < 0.0 or g.data.max() > 1.0:
        raise ParameterError(f"{name} has values outside [0, 1]")


def _check_same_dims(a: VoxelGrid, b: VoxelGrid):
    if a.dims != b.dims:
        raise ShapeMismatchError(f"grid dims differ: {a.dims} vs {b.dims}")


def iou(a: VoxelGrid, b: VoxelGrid):
    """Intersection over union of two binary grids.

    Two empty grids score 1.0 so degenerate benchmark cells do not poison
    averages.
    """
    _check_same_dims(a, b)
    ensure_binary(a, "a")
    ensure_binary(b, "b")
    fa = a.data != 0
    fb = b.data != 0
    union = np.count_nonzero(fa | fb)
    if union == 0:
        return 1.0
    return np.count_nonzero(fa & fb) / union


def threshold(p: VoxelGrid, gamma):
    """Binarize a probability grid: foreground iff p >= gamma."""
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    ensure_probability(p, "p")
    return VoxelGrid((p.data >= gamma).astype(np.uint8), p.spacing, p.origin)


def edt(binary: VoxelGrid):
    """Exact Euclidean distance (voxel units) to the nearest foreground voxel.

    Distances ignore anisotropic spacing on purpose: the boundary band is
    defined in voxels.
    """
    ensure_binary(binary, "binary")
    if not binary.data.any():
        raise EmptyGridError("distance to an empty foreground is undefined")
    sq = edt_sq(binary.data)
    return VoxelGrid(np.sqrt(sq).astype(np.float32), binary.spacing, binary.origin)


def boundary_mask(binary: VoxelGrid):
    """Surface voxels: foreground with a 6-connected background/out-of-bounds
    neighbor."""
    ensure_binary(binary, "binary")
    m = binary.data != 0
    p = np.pad(m, 1, constant_values=False)
    all_nb_fg = (
        p[:-2, 1:-1, 1:-1]
        & p[2:, 1:-1, 1:-1]
        & p[1:-1, :-2, 1:-1]
        & p[1:-1, 2:, 1:-1]
        & p[1:-1, 1:-1, :-2]
        & p[1:-1, 1:-1, 2:]
    )
    return VoxelGrid((m & ~all_nb_fg).astype(np.uint8), binary.spacing, binary.origin)


def weight_map(template_y: VoxelGrid, d=3.0, w_hi=1.0, w_lo=0.1):
    """Boundary-proximity weights: w_hi within d voxels of the template
    surface, w_lo elsewhere.

    The band test compares exact squared integer distances against d^2, so
    membership is free of rounding artifacts.
    """
    if d < 0:
        raise ParameterError(f"band radius d must be >= 0, got {d}")
    if not w_hi > w_lo >= 0:
        raise ParameterError(f"need w_hi > w_lo >= 0, got w_hi={w_hi} w_lo={w_lo}")
    ensure_binary(template_y, "template_y")
    if not template_y.data.any():
        raise EmptyGridError("weight map needs a nonempty template")
    surf = boundary_mask(template_y)
    sq = edt_sq(surf.data)
    weights = np.where(sq <= float(d) * float(d), np.float32(w_hi), np.float32(w_lo))
    grid = VoxelGrid(weights.astype(np.float32), template_y.spacing, template_y.origin)
    return WeightMap(grid=grid, d=float(d), w_hi=float(w_hi), w_lo=float(w_lo))


# ---------------------------------------------------------------------------
# RVOL container format
# ---------------------------------------------------------------------------

def grid_to_bytes(g: VoxelGrid) -> bytes:
    header = {
        "dims": list(g.dims),
        "spacing": list(g.spacing),
        "origin": list(g.origin),
        "dtype": g.dtype_name,
    }
    hdr = json.dumps(header).encode("utf-8")
    blob = np.ascontiguousarray(g.data).astype(
        "<u1" if g.data.dtype == np.uint8 else "<f4"
    ).tobytes()
    return RVOL_MAGIC + struct.pack("<I", len(hdr)) + hdr + blob


def grid_from_bytes(raw: bytes) -> VoxelGrid:
    if len(raw) < 12 or raw[:8] != RVOL_MAGIC:
        raise ParameterError("not an RVOL payload (bad magic)")
    (hdr_len,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + hdr_len:
        raise ParameterError("RVOL header truncated")
    try:
        header = json.loads(raw[12 : 12 + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParameterError(f"RVOL header is not valid JSON: {exc}") from exc
    try:
        dims = tuple(int(d) for d in header["dims"])
        spacing = tuple(float(s) for s in header["spacing"])
        origin = tuple(float(o) for o in header["origin"])
        dtype = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"RVOL header missing/invalid field: {exc}") from exc
    if dtype not in _DTYPES:
        raise ParameterError(f"RVOL dtype must be uint8 or float32, got {dtype!r}")
    np_dtype = np.dtype(_DTYPES[dtype]).newbyteorder("<")
    n_items = dims[0] * dims[1] * dims[2]
    expected = n_items * np_dtype.itemsize
    blob = raw[12 + hdr_len :]
    if len(blob) != expected:
        raise ParameterError(
            f"RVOL data blob byte count mismatch: expected {expected}, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype=np_dtype).reshape(dims)
    return VoxelGrid(data.astype(_DTYPES[dtype]), spacing, origin)


def write_rvol(path, g: VoxelGrid):
    with open(path, "wb") as fh:
        fh.write(grid_to_bytes(g))


def read_rvol(path) -> VoxelGrid:
    with open(path, "rb") as fh:
        return grid_from_bytes(fh.read())
