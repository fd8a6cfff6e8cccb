import numpy as np
import pytest

from voxatlas.errors import EmptyGridError, ParameterError, ShapeMismatchError
from voxatlas.grid import (
    VoxelGrid,
    boundary_mask,
    edt,
    grid_from_bytes,
    grid_to_bytes,
    iou,
    threshold,
    weight_map,
)

from .conftest import random_mask
from .oracles import boundary_brute, edt_sq_brute


def bin_grid(arr):
    return VoxelGrid(np.asarray(arr, dtype=np.uint8))


class TestVoxelGrid:
    def test_rejects_bad_dtype(self):
        with pytest.raises(ParameterError):
            VoxelGrid(np.zeros((2, 2, 2), dtype=np.float64))

    def test_rejects_nonpositive_spacing(self):
        with pytest.raises(ParameterError):
            VoxelGrid(np.zeros((2, 2, 2), np.uint8), spacing=(1.0, 0.0, 1.0))

    def test_rejects_wrong_ndim(self):
        with pytest.raises(ParameterError):
            VoxelGrid(np.zeros((4, 4), np.uint8))

    def test_index_transform_center_convention(self):
        g = VoxelGrid(np.zeros((4, 4, 4), np.uint8), spacing=(2.0, 1.0, 0.5),
                      origin=(10.0, -5.0, 0.0))
        pt = g.indices_to_points([[1, 2, 3]])[0]
        assert pt.tolist() == [10.0 + 2.0 * 1.5, -5.0 + 2.5, 0.5 * 3.5]
        assert g.points_to_indices([pt])[0].tolist() == [1, 2, 3]


class TestIoU:
    def test_identical_nonempty(self):
        a = bin_grid(np.ones((3, 3, 3)))
        assert iou(a, a) == 1.0

    def test_disjoint(self):
        a = np.zeros((2, 2, 2)); a[0, 0, 0] = 1
        b = np.zeros((2, 2, 2)); b[1, 1, 1] = 1
        assert iou(bin_grid(a), bin_grid(b)) == 0.0

    def test_hand_enumerated_overlap(self):
        # a = plane i=0 (4 voxels); b = column j=1 (4 voxels).
        # intersection = {(0,1,0), (0,1,1)} -> 2; union 4+4-2 = 6.
        a = np.zeros((2, 2, 2)); a[0, :, :] = 1
        b = np.zeros((2, 2, 2)); b[:, 1, :] = 1
        assert iou(bin_grid(a), bin_grid(b)) == pytest.approx(2 / 6)

    def test_both_empty_is_one(self):
        z = bin_grid(np.zeros((2, 2, 2)))
        assert iou(z, z) == 1.0

    def test_symmetry(self, rng):
        for _ in range(20):
            a = random_mask(rng, (5, 5, 5), 0.3, ensure_nonempty=False)
            b = random_mask(rng, (5, 5, 5), 0.3, ensure_nonempty=False)
            assert iou(a, b) == iou(b, a)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            iou(bin_grid(np.zeros((2, 2, 2))), bin_grid(np.zeros((3, 2, 2))))

    def test_nonbinary_rejected(self):
        g = VoxelGrid(np.full((2, 2, 2), 2, np.uint8))
        with pytest.raises(ParameterError):
            iou(g, g)


class TestThreshold:
    def test_boundary_inclusive(self):
        p = VoxelGrid(np.full((2, 2, 2), 0.95, np.float32))
        assert threshold(p, 0.95).data.all()

    def test_below(self):
        p = VoxelGrid(np.full((2, 2, 2), 0.5, np.float32))
        assert not threshold(p, 0.95).data.any()

    def test_elementwise(self):
        p = VoxelGrid(np.array([0.9, 0.96, 0.99, 0.1], np.float32).reshape(1, 2, 2))
        out = threshold(p, 0.95)
        assert out.data.ravel().tolist() == [0, 1, 1, 0]

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.5, 1.5])
    def test_gamma_domain(self, gamma):
        p = VoxelGrid(np.full((2, 2, 2), 0.5, np.float32))
        with pytest.raises(ParameterError):
            threshold(p, gamma)

    def test_monotone_in_gamma(self, rng):
        p = VoxelGrid(rng.random((6, 6, 6)).astype(np.float32))
        for g1, g2 in [(0.2, 0.5), (0.5, 0.9), (0.1, 0.95)]:
            lo = threshold(p, g1).data
            hi = threshold(p, g2).data
            assert not (hi & ~lo).any()  # foreground(g2) subset of foreground(g1)


class TestEdt:
    def test_axis_distance(self):
        m = np.zeros((1, 1, 5)); m[0, 0, 0] = 1
        d = edt(bin_grid(m))
        assert d.data[0, 0, 3] == 3.0
        assert d.data[0, 0, 0] == 0.0

    def test_diagonal(self):
        m = np.zeros((2, 2, 2)); m[0, 0, 0] = 1
        d = edt(bin_grid(m))
        assert d.data[1, 1, 1] == pytest.approx(np.sqrt(3.0))

    def test_matches_brute_force(self, rng):
        from voxatlas._kernels import edt_sq

        for _ in range(10):
            g = random_mask(rng, (8, 8, 8), 0.08)
            assert (edt_sq(g.data) == edt_sq_brute(g.data)).all()

    def test_exact_on_16cube(self, rng):
        from voxatlas._kernels import edt_sq

        for _ in range(3):
            g = random_mask(rng, (16, 16, 16), 0.02)
            assert (edt_sq(g.data) == edt_sq_brute(g.data)).all()

    def test_empty_foreground_rejected(self):
        with pytest.raises(EmptyGridError):
            edt(bin_grid(np.zeros((3, 3, 3))))


class TestBoundaryMask:
    def test_solid_block_sheds_center(self):
        m = np.zeros((5, 5, 5)); m[1:4, 1:4, 1:4] = 1
        b = boundary_mask(bin_grid(m))
        assert b.data.sum() == 26
        assert b.data[2, 2, 2] == 0

    def test_single_voxel(self):
        m = np.zeros((3, 3, 3)); m[1, 1, 1] = 1
        b = boundary_mask(bin_grid(m))
        assert (b.data == m).all()

    def test_grid_edge_counts_as_background(self):
        g = bin_grid(np.ones((3, 3, 3)))
        b = boundary_mask(g)
        assert b.data[1, 1, 1] == 0 and b.data[0, 1, 1] == 1

    def test_matches_brute_force(self, rng):
        for _ in range(10):
            g = random_mask(rng, (8, 8, 8), 0.3)
            assert (boundary_mask(g).data == boundary_brute(g.data)).all()


class TestWeightMap:
    def test_zero_band_is_boundary_only(self):
        m = np.zeros((7, 7, 7)); m[2:5, 2:5, 2:5] = 1
        g = bin_grid(m)
        wm = weight_map(g, d=0.0, w_hi=1.0, w_lo=0.1)
        hi = wm.grid.data == np.float32(1.0)
        assert (hi == (boundary_mask(g).data != 0)).all()

    def test_slab_band_thickness(self):
        # Slab fills i <= 4; at the central column the boundary planes are
        # i=0 and i=4, so with d=2 the high band is exactly i in [0..6].
        m = np.zeros((12, 5, 5)); m[:5, :, :] = 1
        wm = weight_map(bin_grid(m), d=2.0, w_hi=1.0, w_lo=0.1)
        col = wm.grid.data[:, 2, 2]
        assert (col[:7] == np.float32(1.0)).all()
        assert (col[7:] == np.float32(0.1)).all()
        # the band around the i=4 plane alone is 5 voxels thick: i in [2..6]
        assert (col[2:7] == np.float32(1.0)).all()

    def test_band_membership_matches_brute_force(self, rng):
        for _ in range(6):
            g = random_mask(rng, (7, 7, 7), 0.2)
            d = float(rng.integers(0, 4))
            wm = weight_map(g, d=d, w_hi=2.0, w_lo=0.5)
            surf = np.argwhere(boundary_brute(g.data))
            for idx in np.ndindex(g.dims):
                dist2 = ((surf - np.asarray(idx)) ** 2).sum(axis=1).min()
                expect = 2.0 if dist2 <= d * d else 0.5
                assert wm.grid.data[idx] == np.float32(expect)

    def test_levels_and_superset_invariant(self, rng):
        for _ in range(5):
            g = random_mask(rng, (8, 8, 8), 0.25)
            wm = weight_map(g, d=1.5, w_hi=3.0, w_lo=0.25)
            vals = set(np.unique(wm.grid.data).tolist())
            assert vals <= {np.float32(3.0), np.float32(0.25)}
            hi = wm.grid.data == np.float32(3.0)
            assert (hi[boundary_mask(g).data != 0]).all()

    def test_parameter_errors(self):
        g = bin_grid(np.ones((3, 3, 3)))
        with pytest.raises(ParameterError):
            weight_map(g, d=-1.0)
        with pytest.raises(ParameterError):
            weight_map(g, d=1.0, w_hi=0.1, w_lo=0.1)
        with pytest.raises(EmptyGridError):
            weight_map(bin_grid(np.zeros((3, 3, 3))), d=1.0)


class TestRvol:
    def test_roundtrip_bytes(self, rng):
        g = VoxelGrid(rng.random((3, 4, 5)).astype(np.float32),
                      spacing=(0.5, 1.0, 2.0), origin=(-1.0, 2.0, 3.5))
        g2 = grid_from_bytes(grid_to_bytes(g))
        assert g2.dims == g.dims and g2.spacing == g.spacing and g2.origin == g.origin
        assert (g2.data == g.data).all()
        assert grid_to_bytes(g2) == grid_to_bytes(g)

    def test_layout(self):
        g = VoxelGrid(np.arange(8, dtype=np.float32).reshape(2, 2, 2))
        raw = grid_to_bytes(g)
        assert raw[:8] == b"RVOL0001"
        hdr_len = int.from_bytes(raw[8:12], "little")
        import json
        header = json.loads(raw[12:12 + hdr_len])
        assert header["dims"] == [2, 2, 2] and header["dtype"] == "float32"
        blob = np.frombuffer(raw[12 + hdr_len:], dtype="<f4")
        assert blob.tolist() == list(range(8))  # row-major little-endian

    def test_bad_magic(self):
        with pytest.raises(ParameterError, match="magic"):
            grid_from_bytes(b"NOTRVOL0" + b"\x00" * 16)

    def test_truncated_blob_reports_byte_counts(self):
        g = VoxelGrid(np.zeros((2, 2, 2), np.uint8))
        raw = grid_to_bytes(g)
        with pytest.raises(ParameterError, match="expected 8, got 7"):
            grid_from_bytes(raw[:-1])

    def test_bad_dtype(self):
        g = VoxelGrid(np.zeros((1, 1, 1), np.uint8))
        raw = bytearray(grid_to_bytes(g))
        raw = raw.replace(b'"uint8"', b'"int16"')
        with pytest.raises(ParameterError, match="dtype"):
            grid_from_bytes(bytes(raw))
