"""Residual error indicators in L^p and the maximum marking strategy.

Each element T contributes the p-th power of its indicator,

    eta_T^p = h_T^p ||lap u_h - grad pi_h||_{L^p(T)}^p
            + h_T ||[(grad u_h - pi_h I) . nu]||_{L^p(dT \\ dOmega)}^p
            + (1 + tau_div^p) ||div u_h||_{L^p(T)}^p
            + sum_t h_T^{2-p} |f_t|^p,

where the last sum runs over the point forces contained in the closed
element, except those sitting (to a relative tolerance) on a Lagrange node
of the velocity space: vertices and edge midpoints for the quadratic
velocity, vertices for the linear one. The grad-div factor is only active
for the stabilized scheme; Taylor-Hood indicators use tau_div = 0.

Interior edges contribute to both adjacent elements, each weighted by its
own h_T. Nonpolynomial |.|^p integrands are evaluated with high-order
rules (degree 19 by default).
"""

from dataclasses import dataclass

import numpy as np

from .assembly import check_integrability
from .mesh import locate_point
from .quadrature import edge_rule, triangle_rule
from .spaces import (
    jacobians,
    pressure_gradients,
    shape_grads,
    shape_values,
    velocity_coeff_tensor,
    velocity_divergence_at,
    velocity_laplacians,
)

NODE_COINCIDENCE_TOL = 1e-12
_EDGE_CHUNK = 16384


@dataclass
class IndicatorField:
    """Per-element indicator components, stored as p-th powers."""

    p: float
    interior: np.ndarray
    jump: np.ndarray
    divergence: np.ndarray
    dirac: np.ndarray

    @property
    def eta_pow(self):
        return self.interior + self.jump + self.divergence + self.dirac

    @property
    def num_elements(self):
        return len(self.interior)


def _interior_term(solution, p, h, areas):
    residual = velocity_laplacians(solution) - pressure_gradients(solution)
    norm = np.hypot(residual[:, 0], residual[:, 1])
    return h**p * norm**p * areas


def _divergence_term(solution, p, rule, det):
    div = velocity_divergence_at(solution, rule.reference_coords())
    w = rule.weights[None, :] * det[:, None]
    return np.sum(w * np.abs(div) ** p, axis=1)


def _jump_term(solution, p, degree, h):
    mesh = solution.mesh
    rule = edge_rule(degree)
    s = rule.reference_coords()
    wk = rule.weights
    C, vspace = velocity_coeff_tensor(solution)
    pspace = solution.pressure_space
    pcoef = solution.pressure[pspace.element_nodes]
    J, _, JinvT = jacobians(mesh)
    v0 = mesh.vertices[mesh.triangles[:, 0]]

    ids_all = np.nonzero(~mesh.boundary_edges)[0]
    edge_integrals = np.zeros(mesh.num_edges)
    for start in range(0, len(ids_all), _EDGE_CHUNK):
        ids = ids_all[start: start + _EDGE_CHUNK]
        a = mesh.vertices[mesh.edges[ids, 0]]
        b = mesh.vertices[mesh.edges[ids, 1]]
        h_s = np.hypot(*(b - a).T)
        nu = np.column_stack([(b - a)[:, 1], -(b - a)[:, 0]]) / h_s[:, None]
        X = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]

        jumpvec = np.zeros((len(ids), len(s), 2))
        for side, sign in ((0, 1.0), (1, -1.0)):
            tri = mesh.edge_tris[ids, side]
            rel = X - v0[tri][:, None, :]
            # xi_c = sum_b JinvT[b, c] (x - v0)_b
            xi = np.einsum("ekb,ebc->ekc", rel, JinvT[tri])
            flat = xi.reshape(-1, 2)
            ghat = shape_grads(vspace.family, flat).reshape(
                len(ids), len(s), -1, 2
            )
            # normal component of the physical gradient, basis by basis
            wnu = np.einsum("eb,ebc->ec", nu, JinvT[tri])
            gn = np.einsum("ekjc,ec->ekj", ghat, wnu)
            flux = np.einsum("ekj,eja->eka", gn, C[tri])
            psi = shape_values(pspace.family, flat).reshape(
                len(ids), len(s), -1
            )
            pr = np.einsum("ekm,em->ek", psi, pcoef[tri])
            jumpvec += sign * (flux - pr[..., None] * nu[:, None, :])
        mag = np.hypot(jumpvec[..., 0], jumpvec[..., 1])
        edge_integrals[ids] = h_s * np.einsum("ek,k->e", mag**p, wk)

    per_elem = np.zeros(mesh.num_triangles)
    ids = ids_all
    np.add.at(per_elem, mesh.edge_tris[ids, 0], edge_integrals[ids])
    np.add.at(per_elem, mesh.edge_tris[ids, 1], edge_integrals[ids])
    return h * per_elem


def source_excluded(mesh, tri_id, point, family):
    """Node-coincidence rule suppressing the point-force term.

    True when the point lies on a velocity Lagrange node of the element:
    a vertex or an edge midpoint for quadratic velocity ("p2"), a vertex
    for linear velocity ("p1"). The tolerance is relative to h_T.
    """
    verts = mesh.vertices[mesh.triangles[tri_id]]
    nodes = [verts]
    if family == "p2":
        nodes.append(0.5 * (verts[[1, 2, 0]] + verts[[2, 0, 1]]))
    nodes = np.vstack(nodes)
    h = mesh.diameters()[tri_id]
    dist = np.hypot(*(nodes - np.asarray(point, dtype=float)).T)
    return bool(dist.min() <= NODE_COINCIDENCE_TOL * h)


def _dirac_term(solution, sources, p, h):
    mesh = solution.mesh
    family = solution.velocity_space.family
    dirac = np.zeros(mesh.num_triangles)
    for t, f in sources:
        fmag = np.hypot(*np.asarray(f, dtype=float))
        for tri in locate_point(mesh, t):
            if not source_excluded(mesh, tri, t, family):
                dirac[tri] += h[tri] ** (2.0 - p) * fmag**p
    return dirac


def compute_indicators(solution, sources, p, tau_div=0.0, degree=19):
    """Indicator components for every element of the solution's mesh."""
    check_integrability(p)
    mesh = solution.mesh
    h = mesh.diameters()
    _, det, _ = jacobians(mesh)
    areas = 0.5 * det
    rule = triangle_rule(degree)

    interior = _interior_term(solution, p, h, areas)
    divergence = _divergence_term(solution, p, rule, det)
    if solution.velocity_space.family == "p1":
        divergence = (1.0 + tau_div**p) * divergence
    jump = _jump_term(solution, p, degree, h)
    dirac = _dirac_term(solution, sources, p, h)
    return IndicatorField(
        p=p,
        interior=interior,
        jump=jump,
        divergence=divergence,
        dirac=dirac,
    )


def element_indicator(solution, sources, p, tri_id, tau_div=0.0, degree=19):
    """Component breakdown for a single element (p-th powers)."""
    field = compute_indicators(
        solution, sources, p, tau_div=tau_div, degree=degree
    )
    if not 0 <= tri_id < field.num_elements:
        raise IndexError(f"triangle id {tri_id} out of range")
    return {
        "interior": float(field.interior[tri_id]),
        "jump": float(field.jump[tri_id]),
        "divergence": float(field.divergence[tri_id]),
        "dirac": float(field.dirac[tri_id]),
        "total_pow": float(field.eta_pow[tri_id]),
    }


def global_estimator(field):
    """Aggregate (sum_T eta_T^p)^(1/p)."""
    return float(field.eta_pow.sum() ** (1.0 / field.p))


def mark(field, theta=0.5):
    """Elements with eta_T^p strictly above theta times the maximum.

    When the strict rule marks nothing (all indicators tied), the single
    largest-indicator element is marked so refinement always progresses.
    """
    if field.num_elements == 0:
        raise ValueError("cannot mark an empty indicator field")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"marking threshold must be in (0, 1), got {theta}")
    eta = field.eta_pow
    marked = np.nonzero(eta > theta * eta.max())[0]
    if marked.size == 0:
        marked = np.array([int(np.argmax(eta))])
    return marked


def write_indicator_csv(field, path):
    """Per-element breakdown: triangle id, four components, total."""
    with open(path, "w") as fh:
        fh.write("triangle,interior,jump,divergence,dirac,total\n")
        for t in range(field.num_elements):
            fh.write(
                f"{t},{field.interior[t]:.12e},{field.jump[t]:.12e},"
                f"{field.divergence[t]:.12e},{field.dirac[t]:.12e},"
                f"{field.eta_pow[t]:.12e}\n"
            )


def read_indicator_csv(path):
    """Inverse of `write_indicator_csv`: returns the total-power column."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.atleast_1d(data["total"])
