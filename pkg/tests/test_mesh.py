import numpy as np
import pytest

from voxatlas.errors import MeshValidityError, ParameterError
from voxatlas.mesh import (
    TriMesh,
    icosphere,
    mesh_from_obj,
    mesh_to_obj,
    point_to_surface_distance,
    uniform_laplacian,
    validate,
)

from .oracles import point_triangle_dist_grid


def tetrahedron():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.float64)
    faces = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], dtype=np.int32)
    return TriMesh(verts, faces)


class TestIcosphere:
    def test_base_icosahedron(self):
        m = icosphere(0)
        assert m.n_vertices == 12 and m.n_faces == 20

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
    def test_counts_follow_subdivision(self, n):
        m = icosphere(n)
        assert m.n_vertices == 10 * 4**n + 2
        assert m.n_faces == 20 * 4**n

    def test_vertices_on_sphere(self):
        m = icosphere(3, radius=7.5, center=(1.0, -2.0, 3.0))
        r = np.linalg.norm(m.vertices - np.array([1.0, -2.0, 3.0]), axis=1)
        assert np.abs(r / 7.5 - 1.0).max() < 1e-9

    def test_area_approaches_sphere(self):
        # summed face areas vs 4*pi at radius 1: within 2% at 3 subdivisions
        m = icosphere(3, radius=1.0)
        area = m.face_areas().sum()
        assert abs(area - 4 * np.pi) / (4 * np.pi) < 0.02

    def test_outward_winding(self):
        assert icosphere(2).signed_volume() > 0

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            icosphere(2, radius=-1.0)
        with pytest.raises(ParameterError):
            icosphere(8)

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 4, 5])
    def test_all_valid(self, n):
        assert validate(icosphere(n)).valid


class TestValidate:
    def test_missing_face_breaks_watertightness(self):
        m = icosphere(1)
        broken = TriMesh(m.vertices, m.faces[:-1])
        rep = validate(broken)
        assert not rep.watertight and not rep.valid

    def test_flipped_face_breaks_orientation(self):
        m = icosphere(1)
        faces = m.faces.copy()
        faces[0] = faces[0, ::-1]
        rep = validate(TriMesh(m.vertices, faces))
        assert rep.watertight and not rep.oriented

    def test_degenerate_face_reported(self):
        m = tetrahedron()
        faces = m.faces.copy()
        faces[0] = [0, 1, 1]
        rep = validate(TriMesh(m.vertices, faces))
        assert 0 in rep.degenerate_faces

    def test_euler_characteristic(self):
        rep = validate(icosphere(2))
        assert rep.euler_characteristic == 2
        assert rep.n_vertices - rep.n_edges + rep.n_faces == 2

    def test_report_serializable(self):
        import json

        json.dumps(validate(icosphere(0)).to_dict())


class TestUniformLaplacian:
    def test_tetrahedron_is_k4(self):
        L = uniform_laplacian(tetrahedron()).matrix.toarray()
        assert (np.diag(L) == 3.0).all()
        off = L - np.diag(np.diag(L))
        assert (off[off != 0] == -1.0).all()

    def test_constant_null_space(self):
        for n in (0, 1, 2):
            L = uniform_laplacian(icosphere(n)).matrix
            assert np.abs(L @ np.ones(L.shape[0])).max() == 0.0

    def test_icosahedron_spectrum(self):
        # dense eigensolve at V=12: smallest eigenvalue 0, multiplicity 1
        L = uniform_laplacian(icosphere(0)).matrix.toarray()
        evals = np.linalg.eigvalsh(L)
        assert abs(evals[0]) < 1e-12
        assert evals[1] > 1e-9

    def test_positive_semidefinite(self, rng):
        L = uniform_laplacian(icosphere(1)).matrix
        scale = np.abs(L).sum()
        for _ in range(1000):
            x = rng.normal(size=L.shape[0])
            q = float(x @ (L @ x))
            assert q >= -1e-9 * scale * (x @ x)
        ones = np.ones(L.shape[0])
        assert abs(ones @ (L @ ones)) <= 1e-9 * scale

    def test_symmetric(self):
        op = uniform_laplacian(icosphere(1))
        assert op.symmetric
        d = (op.matrix - op.matrix.T).tocoo()
        assert d.nnz == 0

    def test_nonmanifold_rejected(self):
        m = icosphere(0)
        with pytest.raises(MeshValidityError):
            uniform_laplacian(TriMesh(m.vertices, m.faces[:-2]))


class TestPointToSurface:
    def test_vertex_distance_zero(self):
        m = icosphere(2, radius=3.0)
        d, face, bary = point_to_surface_distance(m, m.vertices[7])
        assert d == pytest.approx(0.0, abs=1e-12)
        assert 7 in m.faces[face]

    def test_center_bounds(self):
        m = icosphere(2, radius=5.0)
        d, _, _ = point_to_surface_distance(m, (0.0, 0.0, 0.0))
        # bounded by circumradius and the polyhedron inradius
        a = m.vertices[m.faces[:, 0]]
        normals = np.cross(
            m.vertices[m.faces[:, 1]] - a, m.vertices[m.faces[:, 2]] - a
        )
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        inradius = np.abs(np.einsum("ij,ij->i", normals, a)).min()
        assert inradius - 1e-12 <= d <= 5.0

    def test_matches_per_face_oracle(self, rng):
        m = icosphere(1, radius=2.0)
        a = m.vertices[m.faces[:, 0]]
        b = m.vertices[m.faces[:, 1]]
        c = m.vertices[m.faces[:, 2]]
        for _ in range(25):
            p = rng.normal(0, 3, 3)
            d, face, bary = point_to_surface_distance(m, p)
            grid_best = min(
                point_triangle_dist_grid(p, a[f], b[f], c[f], n=120)
                for f in range(m.n_faces)
            )
            assert d == pytest.approx(grid_best, abs=2e-2)
            # reconstruction from (face, bary) gives the same distance
            tri = m.faces[face]
            closest = (
                bary[0] * m.vertices[tri[0]]
                + bary[1] * m.vertices[tri[1]]
                + bary[2] * m.vertices[tri[2]]
            )
            assert np.linalg.norm(p - closest) == pytest.approx(d, rel=1e-12)

    def test_never_exceeds_nearest_vertex(self, rng):
        m = icosphere(2, radius=4.0)
        for _ in range(50):
            p = rng.normal(0, 5, 3)
            d, _, _ = point_to_surface_distance(m, p)
            dv = np.linalg.norm(m.vertices - p, axis=1).min()
            assert d <= dv + 1e-12


class TestObj:
    def test_roundtrip_exact(self, rng):
        m = icosphere(1, radius=1.7, center=(0.3, -0.2, 5.0))
        m2 = mesh_from_obj(mesh_to_obj(m))
        assert (m2.vertices == m.vertices).all()
        assert (m2.faces == m.faces).all()

    def test_file_order_is_xyz(self):
        m = TriMesh(np.array([[1.0, 2.0, 3.0]] * 3), np.array([[0, 1, 2]]))
        line = mesh_to_obj(m).splitlines()[0]
        assert line == "v 3 2 1"

    def test_malformed(self):
        with pytest.raises(ParameterError):
            mesh_from_obj("v 1 2\nf 1 2 3\n")
        with pytest.raises(ParameterError):
            mesh_from_obj("")
        with pytest.raises(ParameterError):
            mesh_from_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\n")
