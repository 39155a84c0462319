"""Fixed numerical integration rules on reference triangles and edges.

Triangle rules are conical products of a Gauss-Legendre rule with a
Gauss-Jacobi rule (weight 1-t), which integrate every bivariate polynomial
up to the declared total degree exactly and carry only positive weights.
Edge rules are plain Gauss-Legendre on [0, 1].

Reference triangle: vertices (0,0), (1,0), (0,1), measure 1/2.
Reference edge: the unit interval, measure 1.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 19


@dataclass(frozen=True)
class QuadRule:
    """Quadrature points in barycentric coordinates with matching weights.

    points : (n, 3) array for triangles, (n, 2) for edges; rows sum to 1.
    weights : (n,) array summing to the reference-element measure.
    degree : every polynomial of total degree <= degree integrates exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def npoints(self):
        return self.weights.shape[0]

    def reference_coords(self):
        """Cartesian coordinates on the reference element.

        Triangles: (n, 2) coordinates (x, y) with barycentric
        (1-x-y, x, y). Edges: (n,) parameter values on [0, 1].
        """
        if self.points.shape[1] == 3:
            return self.points[:, 1:].copy()
        return self.points[:, 1].copy()


def _check_degree(degree):
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(
            f"quadrature degree {degree} outside supported range "
            f"[1, {MAX_DEGREE}]"
        )


def triangle_rule(degree):
    """Rule on the reference triangle exact for total degree <= degree."""
    _check_degree(degree)
    n = (degree + 2) // 2
    # Legendre direction on [0, 1]
    tg, wg = np.polynomial.legendre.leggauss(n)
    ug = 0.5 * (tg + 1.0)
    wg = 0.5 * wg
    # Jacobi direction absorbs the (1-v) Duffy Jacobian
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    vj = 0.5 * (tj + 1.0)
    wj = 0.25 * wj

    u, v = np.meshgrid(ug, vj, indexing="ij")
    x = (u * (1.0 - v)).ravel()
    y = v.ravel()
    w = np.outer(wg, wj).ravel()
    points = np.column_stack([1.0 - x - y, x, y])
    return QuadRule(points=points, weights=w, degree=degree)


def edge_rule(degree):
    """Gauss rule on the unit interval exact for degree <= degree."""
    _check_degree(degree)
    n = (degree + 2) // 2
    t, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (t + 1.0)
    points = np.column_stack([1.0 - s, s])
    return QuadRule(points=points, weights=0.5 * w, degree=degree)


def map_rule(rule, coords):
    """Push a reference rule onto a physical triangle or edge.

    coords is a (3, 2) array of triangle vertices or a (2, 2) array of
    edge endpoints. Returns (points, weights) with weights scaled by the
    affine Jacobian (twice the area for triangles, the length for edges).
    """
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (rule.points.shape[1], 2):
        raise ValueError(
            f"geometry shape {coords.shape} incompatible with rule arity "
            f"{rule.points.shape[1]}"
        )
    points = rule.points @ coords
    if coords.shape[0] == 3:
        e1 = coords[1] - coords[0]
        e2 = coords[2] - coords[0]
        jac = e1[0] * e2[1] - e1[1] * e2[0]
        if jac <= 0.0:
            raise ValueError("degenerate or negatively oriented triangle")
        # reference weights sum to 1/2; the Jacobian is twice the area
        weights = rule.weights * jac
    else:
        length = float(np.hypot(*(coords[1] - coords[0])))
        if length <= 0.0:
            raise ValueError("degenerate edge")
        weights = rule.weights * length
    return points, weights
