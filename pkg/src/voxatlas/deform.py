"""Template deformation from sparse surface points.

Semi-implicit iteration: smoothness (membrane + thin-plate via Laplacian
powers) is treated implicitly, point-attraction forces explicitly.  Each step
solves, per coordinate,

    (I + tau*(alpha*L + beta*L^2)) (V_new - V_ref) = (V - V_ref) + tau*F(V)

where V_ref is the session's template.  Regularizing the displacement rather
than the positions keeps the template itself a fixed point of the iteration
(zero force => zero motion) while the system matrix still depends only on
(template, alpha, beta, tau) and is factored/preconditioned once per session.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from ._kernels import closest_points
from .errors import NumericError, ParameterError
from .mesh import TriMesh, require_valid, uniform_laplacian

CG_RTOL = 1e-8


@dataclass
class DeformParams:
    alpha: float = 0.05     # membrane weight
    beta: float = 0.01      # thin-plate weight
    tau: float = 1.0        # step size
    kappa: float = 1.0      # point-attraction strength
    max_iters: int = 200
    tol: float = 1e-4       # convergence threshold on mean displacement (mm)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be >= 0")
        if self.alpha + self.beta <= 0:
            raise ParameterError("need some regularization: alpha + beta > 0")
        if self.tau <= 0 or self.tol <= 0 or self.kappa <= 0:
            raise ParameterError("tau, tol and kappa must be > 0")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")


@dataclass
class DeformReport:
    iterations_used: int
    final_mean_displacement: float
    residuals: list = field(default_factory=list)  # mean point-to-surface, per iterate
    converged: bool = False

    def to_dict(self):
        return {
            "iterations_used": self.iterations_used,
            "final_mean_displacement": self.final_mean_displacement,
            "residuals": [float(r) for r in self.residuals],
            "converged": self.converged,
        }


def _point_array(points):
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64)
    pts = np.atleast_2d(pts)
    if pts.size == 0:
        raise ParameterError("point set is empty")
    if pts.shape[1] != 3:
        raise ParameterError(f"points must be (n, 3), got {pts.shape}")
    return pts


def _accumulate_forces(verts, faces, pts, fi, bary, kappa):
    tri = faces[fi]  # (n, 3)
    closest = (
        bary[:, 0, None] * verts[tri[:, 0]]
        + bary[:, 1, None] * verts[tri[:, 1]]
        + bary[:, 2, None] * verts[tri[:, 2]]
    )
    pull = kappa * (pts - closest)
    forces = np.zeros_like(verts)
    for corner in range(3):
        np.add.at(forces, tri[:, corner], bary[:, corner, None] * pull)
    return forces


def attraction_forces(mesh: TriMesh, points, kappa=1.0):
    """Per-vertex spring forces pulling the surface through the points.

    Each point pulls its closest surface point with kappa*(p - closest); the
    pull is split across the owning face's vertices by barycentric weight.
    Pulls accumulate, so for point sets much denser than the face count
    either refine the template or reduce kappa to keep the semi-implicit
    iteration contractive.
    """
    pts = _point_array(points)
    _, fi, bary = closest_points(mesh.vertices, mesh.faces, pts)
    return _accumulate_forces(mesh.vertices, mesh.faces, pts, fi, bary, kappa)


def center_template(points):
    """Initial sphere placement: centroid of the points and their mean
    distance to it."""
    pts = _point_array(points)
    if pts.shape[0] < 4:
        raise ParameterError(f"need at least 4 points to place a template, got {pts.shape[0]}")
    center = pts.mean(axis=0)
    radius = float(np.linalg.norm(pts - center, axis=1).mean())
    return center, radius


class DeformSolver:
    """Holds the factored smoothness system for one (template, params) pair so
    interactive sessions can deform repeatedly without re-assembly."""

    def __init__(self, template: TriMesh, params: DeformParams = None):
        require_valid(template)
        self.template = template
        self.params = params or DeformParams()
        lap = uniform_laplacian(template).matrix
        p = self.params
        n = template.n_vertices
        system = sp.identity(n, format="csr") + p.tau * (
            p.alpha * lap + p.beta * (lap @ lap)
        )
        self.system = system.tocsr()
        inv_diag = 1.0 / self.system.diagonal()
        self._precond = LinearOperator((n, n), matvec=lambda x: inv_diag * x)

    def _solve(self, rhs, x0):
        out = np.empty_like(rhs)
        for d in range(3):
            sol, info = cg(
                self.system, rhs[:, d], x0=x0[:, d], rtol=CG_RTOL, atol=0.0,
                M=self._precond,
            )
            if info != 0:
                raise NumericError(f"smoothness solve did not converge (info={info})")
            out[:, d] = sol
        return out

    def deform(self, points, start: TriMesh = None):
        """Iterate until mean vertex displacement < tol or max_iters.

        start lets a session continue from its previous deformed mesh; the
        smoothness stays anchored at the solver's template, so repeating a
        converged deform with unchanged points is a fixed point.
        """
        pts = _point_array(points)
        p = self.params
        base = start if start is not None else self.template
        if base.n_vertices != self.template.n_vertices:
            raise ParameterError("start mesh must share the template's connectivity")
        v_ref = self.template.vertices

        # Working in displacement coordinates (delta = V - V_ref) keeps the
        # linear solves translation-invariant to rounding.
        delta = base.vertices - v_ref
        mesh = base.with_vertices(v_ref + delta)
        residuals = []
        disp = np.inf
        converged = False
        iters = 0
        for _ in range(p.max_iters):
            d2, fi, bary = closest_points(mesh.vertices, mesh.faces, pts)
            residuals.append(float(np.sqrt(d2).mean()))
            forces = _accumulate_forces(mesh.vertices, mesh.faces, pts, fi, bary, p.kappa)
            rhs = delta + p.tau * forces
            new_delta = self._solve(rhs, x0=delta)
            disp = float(np.linalg.norm(new_delta - delta, axis=1).mean())
            delta = new_delta
            mesh = mesh.with_vertices(v_ref + delta)
            iters += 1
            if disp < p.tol:
                converged = True
                break
        d2, _, _ = closest_points(mesh.vertices, mesh.faces, pts)
        residuals.append(float(np.sqrt(d2).mean()))

        report = DeformReport(
            iterations_used=iters,
            final_mean_displacement=disp,
            residuals=residuals,
            converged=converged,
        )
        return mesh, report


def deform(template: TriMesh, points, params: DeformParams = None):
    """One-shot deformation of a template toward a point set."""
    solver = DeformSolver(template, params)
    return solver.deform(points)
