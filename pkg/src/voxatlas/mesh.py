"""Triangle meshes: icosphere templates, validity checks, the uniform
Laplacian, and exact point-to-surface queries.

Vertices are (z, y, x) mm like every other 3D point in the package.  OBJ
files store the conventional (x, y, z) order, so readers/writers reverse the
component order at the file boundary.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._kernels import closest_points
from .errors import MeshValidityError, ParameterError

MAX_SUBDIVISIONS = 7


@dataclass
class TriMesh:
    """Watertight triangulated surface with outward (CCW) face winding."""

    vertices: np.ndarray  # (V, 3) float64, (z, y, x) mm
    faces: np.ndarray     # (F, 3) int32

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ParameterError("vertices must have shape (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ParameterError("faces must have shape (F, 3)")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def with_vertices(self, vertices):
        """Same connectivity, new vertex positions."""
        return TriMesh(vertices, self.faces.copy())

    def face_areas(self):
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def signed_volume(self):
        """Divergence-theorem volume; positive for outward winding."""
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


@dataclass
class SparseOperator:
    """Square sparse matrix (CSR) with a symmetry tag."""

    matrix: sp.csr_matrix
    symmetric: bool = True

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class ValidityReport:
    watertight: bool
    oriented: bool
    euler_characteristic: int
    degenerate_faces: list = field(default_factory=list)
    n_vertices: int = 0
    n_edges: int = 0
    n_faces: int = 0

    @property
    def valid(self):
        return (
            self.watertight
            and self.oriented
            and self.euler_characteristic == 2
            and not self.degenerate_faces
        )

    def to_dict(self):
        return {
            "valid": self.valid,
            "watertight": self.watertight,
            "oriented": self.oriented,
            "euler_characteristic": self.euler_characteristic,
            "degenerate_faces": list(self.degenerate_faces),
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_faces": self.n_faces,
        }


# Golden-ratio icosahedron with outward CCW winding (signed volume > 0).
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1.0, _PHI, 0.0], [1.0, _PHI, 0.0], [-1.0, -_PHI, 0.0], [1.0, -_PHI, 0.0],
        [0.0, -1.0, _PHI], [0.0, 1.0, _PHI], [0.0, -1.0, -_PHI], [0.0, 1.0, -_PHI],
        [_PHI, 0.0, -1.0], [_PHI, 0.0, 1.0], [-_PHI, 0.0, -1.0], [-_PHI, 0.0, 1.0],
    ]
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [5, 4, 9], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int32,
)


def icosphere(subdivisions=4, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Geodesic sphere: icosahedron with n rounds of 1-to-4 face splits,
    vertices projected onto the sphere.

    V = 10*4^n + 2, F = 20*4^n.
    """
    subdivisions = int(subdivisions)
    if subdivisions < 0 or subdivisions > MAX_SUBDIVISIONS:
        raise ParameterError(
            f"subdivisions must be in [0, {MAX_SUBDIVISIONS}], got {subdivisions}"
        )
    if radius <= 0:
        raise ParameterError(f"radius must be positive, got {radius}")

    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]

    for _ in range(subdivisions):
        midpoint = {}

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    vertices = np.asarray(center, dtype=np.float64) + radius * np.asarray(verts)
    return TriMesh(vertices, np.asarray(faces, dtype=np.int32))


def _directed_edges(faces):
    for a, b, c in faces:
        yield (a, b)
        yield (b, c)
        yield (c, a)


def validate(mesh: TriMesh, area_eps=1e-12) -> ValidityReport:
    """Structural validity report: watertightness, consistent orientation,
    Euler characteristic, degenerate faces."""
    faces = mesh.faces
    degenerate = [
        int(i)
        for i, f in enumerate(faces)
        if len({int(f[0]), int(f[1]), int(f[2])}) < 3
    ]
    areas = mesh.face_areas()
    degenerate += [int(i) for i in np.nonzero(areas <= area_eps)[0] if int(i) not in degenerate]

    undirected = Counter()
    directed = Counter()
    for e in _directed_edges(faces):
        directed[e] += 1
        undirected[(e[0], e[1]) if e[0] < e[1] else (e[1], e[0])] += 1

    watertight = all(v == 2 for v in undirected.values())
    # Consistent winding: each undirected edge traversed once per direction.
    oriented = all(v == 1 for v in directed.values()) and watertight

    n_v = mesh.n_vertices
    n_e = len(undirected)
    n_f = mesh.n_faces
    return ValidityReport(
        watertight=watertight,
        oriented=oriented,
        euler_characteristic=n_v - n_e + n_f,
        degenerate_faces=sorted(degenerate),
        n_vertices=n_v,
        n_edges=n_e,
        n_faces=n_f,
    )


def require_valid(mesh: TriMesh):
    report = validate(mesh)
    if not report.valid:
        raise MeshValidityError(f"mesh failed validation: {report.to_dict()}")
    return report


def uniform_laplacian(mesh: TriMesh) -> SparseOperator:
    """Combinatorial (umbrella) Laplacian: L[i,i] = degree(i), L[i,j] = -1 on
    edges.  Symmetric positive semidefinite with row sums exactly zero."""
    require_valid(mesh)
    edges = set()
    for e in _directed_edges(mesh.faces):
        edges.add((e[0], e[1]) if e[0] < e[1] else (e[1], e[0]))
    edges = np.array(sorted(edges), dtype=np.int64)
    n = mesh.n_vertices
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = -np.ones(len(rows), dtype=np.float64)
    adj = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    degrees = -np.asarray(adj.sum(axis=1)).ravel()
    lap = sp.diags(degrees) + adj
    return SparseOperator(matrix=lap.tocsr(), symmetric=True)


def point_to_surface_distance(mesh: TriMesh, point):
    """Exact minimum distance from a point to the surface.

    Returns (distance_mm, face_id, barycentric), nearest face with the lowest
    index on ties.
    """
    d2, fi, bary = closest_points(mesh.vertices, mesh.faces, np.asarray(point, dtype=np.float64))
    return float(np.sqrt(d2[0])), int(fi[0]), bary[0]


# ---------------------------------------------------------------------------
# OBJ I/O (v/f records, 1-based indices, file order x y z)
# ---------------------------------------------------------------------------

def mesh_to_obj(mesh: TriMesh) -> str:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[2]:.17g} {v[1]:.17g} {v[0]:.17g}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"


def mesh_from_obj(text: str) -> TriMesh:
    verts = []
    faces = []
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise ParameterError(f"malformed OBJ vertex line: {raw!r}")
            x, y, z = (float(p) for p in parts[1:4])
            verts.append((z, y, x))
        elif parts[0] == "f":
            if len(parts) != 4:
                raise ParameterError("only triangle faces are supported")
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:4]]
            faces.append(idx)
    if not verts or not faces:
        raise ParameterError("OBJ contains no v/f records")
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))


def write_obj(path, mesh: TriMesh):
    with open(path, "w") as fh:
        fh.write(mesh_to_obj(mesh))


def read_obj(path) -> TriMesh:
    with open(path) as fh:
        return mesh_from_obj(fh.read())
