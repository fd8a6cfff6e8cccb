"""voxatlas: point-driven template deformation and weakly-supervised
volumetric segmentation tools.

Submodules
----------
grid        dense voxel grids, IoU, distance transform, boundary weights
mesh        triangle meshes, icosphere templates, Laplacian operator
deform      template deformation from sparse surface points
rasterize   watertight mesh -> solid voxel mask, surface point extraction
losses      template cross entropy + boundary-weighted reconstruction error
annotate    annotator simulation (point spread / skill) and slice baseline
varseg      direct variational segmentation demonstrator on phantoms
bench       effort-vs-quality benchmark grids and iso-quality curves
service     HTTP session service for interactive annotation
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
