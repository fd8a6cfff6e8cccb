"""Template cross entropy, boundary-weighted reconstruction error, and their
analytic gradients.

All losses are sums over voxels (not means).  Accumulation happens in float64
with numpy's pairwise reduction, which is deterministic for a fixed shape.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .grid import VoxelGrid, WeightMap, ensure_binary, ensure_probability

CLAMP_EPS = 1e-7


@dataclass
class LossBreakdown:
    l_ce: float
    l_mse: float
    lam: float
    total: float

    def to_dict(self):
        return {
            "l_ce": self.l_ce,
            "l_mse": self.l_mse,
            "lambda": self.lam,
            "total": self.total,
        }


def _check_dims(a, b, what):
    if a.dims != b.dims:
        raise ShapeMismatchError(f"{what}: dims differ: {a.dims} vs {b.dims}")


# Array-level cores, shared with the variational optimizer which works on raw
# float64 arrays for speed.

def ce_sum(y, yhat, mask=None):
    """Two-class cross entropy sum with probabilities clamped to
    [CLAMP_EPS, 1 - CLAMP_EPS].  Optional per-voxel mask weights the terms."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(yhat, dtype=np.float64), CLAMP_EPS, 1.0 - CLAMP_EPS)
    terms = y * np.log(p) + (1.0 - y) * np.log1p(-p)
    if mask is not None:
        terms = terms * np.asarray(mask, dtype=np.float64)
    return -float(terms.sum())


def ce_grad_wrt_p(y, yhat, mask=None):
    """d(ce_sum)/d(yhat): -y/p + (1-y)/(1-p) on the clamped range, exactly 0
    where the clamp is active."""
    y = np.asarray(y, dtype=np.float64)
    raw = np.asarray(yhat, dtype=np.float64)
    p = np.clip(raw, CLAMP_EPS, 1.0 - CLAMP_EPS)
    g = -y / p + (1.0 - y) / (1.0 - p)
    g[(raw < CLAMP_EPS) | (raw > 1.0 - CLAMP_EPS)] = 0.0
    if mask is not None:
        g = g * np.asarray(mask, dtype=np.float64)
    return g


def wmse_sum(x, xhat, w):
    d = np.asarray(x, dtype=np.float64) - np.asarray(xhat, dtype=np.float64)
    return float((np.asarray(w, dtype=np.float64) * d * d).sum())


def wmse_grad_wrt_xhat(x, xhat, w):
    return 2.0 * np.asarray(w, dtype=np.float64) * (
        np.asarray(xhat, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    )


# Grid-level operations.

def cross_entropy(y: VoxelGrid, yhat: VoxelGrid) -> float:
    """-sum[Y log p + (1-Y) log(1-p)] over voxels, p clamped to
    [1e-7, 1-1e-7]."""
    _check_dims(y, yhat, "cross_entropy")
    ensure_binary(y, "y")
    ensure_probability(yhat, "yhat")
    return ce_sum(y.data, yhat.data)


def literal_cross_entropy(y: VoxelGrid, yhat: VoxelGrid) -> float:
    """One-term variant -sum Y log p.  Minimized by p == 1 everywhere, kept
    only for comparison; the two-term form is the default."""
    _check_dims(y, yhat, "literal_cross_entropy")
    ensure_binary(y, "y")
    ensure_probability(yhat, "yhat")
    p = np.clip(yhat.data.astype(np.float64), CLAMP_EPS, 1.0 - CLAMP_EPS)
    return -float((y.data.astype(np.float64) * np.log(p)).sum())


def weighted_mse(x: VoxelGrid, xhat: VoxelGrid, w: WeightMap) -> float:
    """sum W * (X - Xhat)^2 over voxels (a sum, not a mean)."""
    _check_dims(x, xhat, "weighted_mse")
    _check_dims(x, w.grid, "weighted_mse (weights)")
    return wmse_sum(x.data, xhat.data, w.grid.data)


def total_loss(y, yhat, x, xhat, w, lam) -> LossBreakdown:
    """Weighted sum: cross entropy plus lam times the weighted MSE."""
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    l_ce = cross_entropy(y, yhat)
    l_mse = weighted_mse(x, xhat, w)
    return LossBreakdown(l_ce=l_ce, l_mse=l_mse, lam=float(lam), total=l_ce + lam * l_mse)


def grad_cross_entropy(y: VoxelGrid, yhat: VoxelGrid) -> VoxelGrid:
    """Analytic d(cross_entropy)/d(yhat) as a float32 grid."""
    _check_dims(y, yhat, "grad_cross_entropy")
    ensure_binary(y, "y")
    ensure_probability(yhat, "yhat")
    g = ce_grad_wrt_p(y.data, yhat.data)
    return VoxelGrid(g.astype(np.float32), y.spacing, y.origin)


def grad_weighted_mse(x: VoxelGrid, xhat: VoxelGrid, w: WeightMap) -> VoxelGrid:
    """Analytic d(weighted_mse)/d(xhat) = 2 W (Xhat - X) as float32."""
    _check_dims(x, xhat, "grad_weighted_mse")
    g = wmse_grad_wrt_xhat(x.data, xhat.data, w.grid.data)
    return VoxelGrid(g.astype(np.float32), x.spacing, x.origin)
