"""Finite element spaces, degree-of-freedom maps, and field evaluation.

Supported kinds:

* ``vector_p2``   continuous piecewise-quadratic velocity,
* ``vector_p1``   continuous piecewise-linear velocity,
* ``scalar_p1``   continuous piecewise-linear pressure,
* ``scalar_p0``   discontinuous piecewise-constant pressure.

Scalar nodes are vertices (P1), vertices plus edge midpoints (P2), or one
node per triangle (P0). Vector dofs interleave the two components of each
scalar node: dof 2n is the x-component at node n, dof 2n+1 the
y-component. P2 midpoint dofs are keyed by the global edge id, so
continuity across elements holds by construction.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mesh import locate_point

_FAMILIES = {
    "vector_p2": ("p2", True),
    "vector_p1": ("p1", True),
    "scalar_p1": ("p1", False),
    "scalar_p0": ("p0", False),
}

_GRAD_LAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def shape_values(family, pts):
    """Reference shape function values at pts (n, 2): returns (n, nl)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lam = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    if family == "p1":
        return lam
    if family == "p0":
        return np.ones((len(pts), 1))
    if family == "p2":
        l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
        return np.column_stack(
            [
                l0 * (2.0 * l0 - 1.0),
                l1 * (2.0 * l1 - 1.0),
                l2 * (2.0 * l2 - 1.0),
                4.0 * l1 * l2,
                4.0 * l2 * l0,
                4.0 * l0 * l1,
            ]
        )
    raise ValueError(f"unknown family {family!r}")


def shape_grads(family, pts):
    """Reference shape function gradients at pts: returns (n, nl, 2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = len(pts)
    if family == "p1":
        return np.broadcast_to(_GRAD_LAMBDA, (n, 3, 2)).copy()
    if family == "p0":
        return np.zeros((n, 1, 2))
    if family == "p2":
        lam = np.column_stack(
            [1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]]
        )
        grads = np.empty((n, 6, 2))
        for i in range(3):
            grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * _GRAD_LAMBDA[i]
        pairs = [(1, 2), (2, 0), (0, 1)]
        for k, (i, j) in enumerate(pairs):
            grads[:, 3 + k] = 4.0 * (
                lam[:, i, None] * _GRAD_LAMBDA[j]
                + lam[:, j, None] * _GRAD_LAMBDA[i]
            )
        return grads
    raise ValueError(f"unknown family {family!r}")


def shape_hessians(family):
    """Constant reference Hessians (nl, 2, 2); zero for P1 and P0."""
    if family == "p1":
        return np.zeros((3, 2, 2))
    if family == "p0":
        return np.zeros((1, 2, 2))
    if family == "p2":
        hess = np.empty((6, 2, 2))
        for i in range(3):
            hess[i] = 4.0 * np.outer(_GRAD_LAMBDA[i], _GRAD_LAMBDA[i])
        pairs = [(1, 2), (2, 0), (0, 1)]
        for k, (i, j) in enumerate(pairs):
            hess[3 + k] = 4.0 * (
                np.outer(_GRAD_LAMBDA[i], _GRAD_LAMBDA[j])
                + np.outer(_GRAD_LAMBDA[j], _GRAD_LAMBDA[i])
            )
        return hess
    raise ValueError(f"unknown family {family!r}")


def jacobians(mesh):
    """Affine element maps: J (nt,2,2), det (nt,), J^{-T} (nt,2,2)."""
    v = mesh.vertices[mesh.triangles]
    J = np.empty((mesh.num_triangles, 2, 2))
    J[:, :, 0] = v[:, 1] - v[:, 0]
    J[:, :, 1] = v[:, 2] - v[:, 0]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    JinvT = np.empty_like(J)
    JinvT[:, 0, 0] = J[:, 1, 1]
    JinvT[:, 0, 1] = -J[:, 1, 0]
    JinvT[:, 1, 0] = -J[:, 0, 1]
    JinvT[:, 1, 1] = J[:, 0, 0]
    JinvT /= det[:, None, None]
    return J, det, JinvT


@dataclass
class FeSpace:
    kind: str
    mesh: object
    family: str
    vector: bool
    num_scalar_nodes: int
    element_nodes: np.ndarray
    node_coords: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def ncomp(self):
        return 2 if self.vector else 1

    @property
    def ndof(self):
        return self.num_scalar_nodes * self.ncomp

    @property
    def element_dofs(self):
        """(nt, nl*ncomp) global dofs, components interleaved."""
        if not self.vector:
            return self.element_nodes
        nl = self.element_nodes.shape[1]
        dofs = np.empty((len(self.element_nodes), 2 * nl), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.element_nodes
        dofs[:, 1::2] = 2 * self.element_nodes + 1
        return dofs

    @property
    def boundary_dofs(self):
        if not self.vector:
            return self.boundary_nodes
        return np.sort(
            np.concatenate(
                [2 * self.boundary_nodes, 2 * self.boundary_nodes + 1]
            )
        )

    @property
    def num_interior_dofs(self):
        return self.ndof - len(self.boundary_dofs)


def build_space(mesh, kind):
    if kind not in _FAMILIES:
        raise ValueError(f"unknown space kind {kind!r}")
    family, vector = _FAMILIES[kind]
    if family == "p1":
        nsn = mesh.num_vertices
        element_nodes = mesh.triangles.copy()
        node_coords = mesh.vertices.copy()
        boundary = np.nonzero(mesh.boundary_vertices())[0]
    elif family == "p2":
        nsn = mesh.num_vertices + mesh.num_edges
        element_nodes = np.hstack(
            [mesh.triangles, mesh.num_vertices + mesh.tri_edges]
        )
        midpoints = 0.5 * (
            mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]
        )
        node_coords = np.vstack([mesh.vertices, midpoints])
        boundary = np.concatenate(
            [
                np.nonzero(mesh.boundary_vertices())[0],
                mesh.num_vertices + np.nonzero(mesh.boundary_edges)[0],
            ]
        )
    else:  # p0
        nsn = mesh.num_triangles
        element_nodes = np.arange(nsn, dtype=np.int64).reshape(-1, 1)
        node_coords = mesh.vertices[mesh.triangles].mean(axis=1)
        boundary = np.empty(0, dtype=np.int64)
    return FeSpace(
        kind=kind,
        mesh=mesh,
        family=family,
        vector=vector,
        num_scalar_nodes=nsn,
        element_nodes=element_nodes,
        node_coords=node_coords,
        boundary_nodes=np.sort(boundary),
    )


def eval_basis(space, tri_id, ref_pts):
    """Values and physical gradients of the local scalar basis on element
    tri_id at reference points (n, 2)."""
    values = shape_values(space.family, ref_pts)
    grads_ref = shape_grads(space.family, ref_pts)
    _, _, JinvT = jacobians(space.mesh)
    grads = np.einsum("ab,njb->nja", JinvT[tri_id], grads_ref)
    return values, grads


@dataclass
class DiscreteSolution:
    """Coefficients of a velocity/pressure pair on one mesh.

    velocity : (2 * scalar velocity nodes,) interleaved components.
    pressure : (pressure dofs,)
    multiplier : scalar enforcing the zero-mean pressure gauge.
    """

    velocity: np.ndarray
    pressure: np.ndarray
    multiplier: float
    velocity_space: FeSpace
    pressure_space: FeSpace

    @property
    def mesh(self):
        return self.velocity_space.mesh


class FieldValue(NamedTuple):
    velocity: np.ndarray
    pressure: float
    one_sided: bool


def _reference_coords(mesh, tri_id, x):
    v0 = mesh.vertices[mesh.triangles[tri_id, 0]]
    J, _, _ = jacobians(mesh)
    return np.linalg.solve(J[tri_id], np.asarray(x, dtype=float) - v0)


def eval_field(solution, x):
    """Velocity and pressure at a point of the closed domain.

    At inter-element points the continuous fields agree from both sides;
    a P0 pressure is taken from the lowest-indexed containing triangle
    and reported as one-sided.
    """
    mesh = solution.mesh
    tris = locate_point(mesh, x)
    tri = int(tris[0])
    xi = _reference_coords(mesh, tri, x)

    vspace = solution.velocity_space
    vvals = shape_values(vspace.family, xi[None, :])[0]
    nodes = vspace.element_nodes[tri]
    vel = np.array(
        [
            np.dot(solution.velocity[2 * nodes], vvals),
            np.dot(solution.velocity[2 * nodes + 1], vvals),
        ]
    )

    pspace = solution.pressure_space
    pvals = shape_values(pspace.family, xi[None, :])[0]
    pres = float(np.dot(solution.pressure[pspace.element_nodes[tri]], pvals))
    one_sided = pspace.family == "p0" and len(tris) > 1
    return FieldValue(velocity=vel, pressure=pres, one_sided=one_sided)


def boundary_values(space, g):
    """Nodal interpolation of g on the boundary dofs of a velocity space.

    g maps a coordinate pair to a 2-vector. Returns (dofs, values) sorted
    by dof. Raises ValueError when g is not finite at some node.
    """
    if not space.vector:
        raise ValueError("boundary interpolation expects a velocity space")
    nodes = space.boundary_nodes
    coords = space.node_coords[nodes]
    values = np.array([np.asarray(g(xy), dtype=float) for xy in coords])
    if values.shape != (len(nodes), 2):
        raise ValueError("boundary function must return 2-vectors")
    if not np.all(np.isfinite(values)):
        bad = int(np.nonzero(~np.isfinite(values).all(axis=1))[0][0])
        raise ValueError(
            f"boundary data is singular at node {coords[bad]}"
        )
    dofs = np.empty(2 * len(nodes), dtype=np.int64)
    dofs[0::2] = 2 * nodes
    dofs[1::2] = 2 * nodes + 1
    return dofs, values.ravel()


# -- batched element-wise evaluation ---------------------------------------
#
# The estimator and the error norms integrate fields of the discrete
# solution over every element at a shared set of reference points; these
# helpers produce the required element-batched arrays in one shot.


def velocity_coeff_tensor(solution):
    """Local velocity coefficients C (nt, nl, 2)."""
    vspace = solution.velocity_space
    nodes = vspace.element_nodes
    C = np.empty(nodes.shape + (2,))
    C[:, :, 0] = solution.velocity[2 * nodes]
    C[:, :, 1] = solution.velocity[2 * nodes + 1]
    return C, vspace


def velocity_at(solution, ref_pts):
    """Velocity on every element at shared reference points: (nt, nq, 2)."""
    C, vspace = velocity_coeff_tensor(solution)
    vals = shape_values(vspace.family, ref_pts)
    return np.einsum("tja,qj->tqa", C, vals)


def velocity_gradients_at(solution, ref_pts):
    """Velocity gradient (du_a/dx_b) per element and point: (nt,nq,2,2)."""
    C, vspace = velocity_coeff_tensor(solution)
    _, _, JinvT = jacobians(solution.mesh)
    ghat = shape_grads(vspace.family, ref_pts)
    # W[t,j,b] pairs coefficients with the physical direction b
    return np.einsum("tja,tbc,qjc->tqab", C, JinvT, ghat, optimize=True)


def velocity_divergence_at(solution, ref_pts):
    """div u per element and point: (nt, nq)."""
    C, vspace = velocity_coeff_tensor(solution)
    _, _, JinvT = jacobians(solution.mesh)
    ghat = shape_grads(vspace.family, ref_pts)
    W = np.einsum("tja,tab->tjb", C, JinvT)
    return np.einsum("tjb,qjb->tq", W, ghat, optimize=True)


def velocity_laplacians(solution):
    """Elementwise-constant Laplacian of the velocity: (nt, 2).

    Exact for P2 on affine elements; identically zero for P1.
    """
    C, vspace = velocity_coeff_tensor(solution)
    if vspace.family == "p1":
        return np.zeros((solution.mesh.num_triangles, 2))
    _, _, JinvT = jacobians(solution.mesh)
    hess = shape_hessians(vspace.family)
    Q = np.einsum("tac,tad->tcd", JinvT, JinvT)
    lap_basis = np.einsum("tcd,jcd->tj", Q, hess)
    return np.einsum("tja,tj->ta", C, lap_basis)


def pressure_at(solution, ref_pts):
    """Pressure per element and point: (nt, nq)."""
    pspace = solution.pressure_space
    vals = shape_values(pspace.family, ref_pts)
    coeffs = solution.pressure[pspace.element_nodes]
    return np.einsum("tk,qk->tq", coeffs, vals)


def pressure_gradients(solution):
    """Elementwise-constant pressure gradient: (nt, 2).

    Exact for P1; identically zero for P0.
    """
    pspace = solution.pressure_space
    if pspace.family == "p0":
        return np.zeros((solution.mesh.num_triangles, 2))
    _, _, JinvT = jacobians(solution.mesh)
    ghat = shape_grads("p1", np.array([[1.0 / 3.0, 1.0 / 3.0]]))[0]
    coeffs = solution.pressure[pspace.element_nodes]
    grad_ref = np.einsum("tk,kb->tb", coeffs, ghat)
    return np.einsum("tab,tb->ta", JinvT, grad_ref)
