"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Grids passed to a binary operation have different dims."""


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


class EmptyGridError(ValueError):
    """An operation that needs foreground voxels got an empty grid."""


class MeshValidityError(ValueError):
    """Mesh violates a structural invariant (manifoldness, orientation...)."""


class NumericError(RuntimeError):
    """A numeric procedure failed (non-convergent solve, NaN loss...)."""
