import numpy as np
import pytest

from voxatlas.grid import VoxelGrid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ellipsoid_grid(axes, dims=(64, 64, 64), center=None, spacing=(1.0, 1.0, 1.0),
                   origin=(0.0, 0.0, 0.0)):
    """Analytic ellipsoid occupancy by voxel center."""
    if center is None:
        center = [d / 2.0 for d in dims]
    idx = np.indices(dims, dtype=np.float64) + 0.5
    acc = np.zeros(dims)
    for d in range(3):
        phys = origin[d] + spacing[d] * idx[d]
        acc += ((phys - center[d]) / axes[d]) ** 2
    return VoxelGrid((acc <= 1.0).astype(np.uint8), spacing, origin)


def random_mask(rng, dims, p=0.15, ensure_nonempty=True):
    m = (rng.random(dims) < p).astype(np.uint8)
    if ensure_nonempty and not m.any():
        m[tuple(d // 2 for d in dims)] = 1
    return VoxelGrid(m)
