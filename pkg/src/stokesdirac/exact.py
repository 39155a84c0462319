"""Free-space Stokes flow driven by point forces, and error norms.

A superposition of point forces (t, f_t) induces the closed-form fields

    u(x) = sum_t -1/(4 pi) ( log|r| f_t - r (r . f_t) / |r|^2 ),
    pi(x) = sum_t  (r . f_t) / (2 pi |r|^2),          r = x - t,

which solve the homogeneous momentum and continuity equations away from
the sources. (Taking the divergence of the momentum equation forces the
pressure kernel sign: lap pi = div(f delta) gives pi = +(r.f)/(2 pi r^2)
for a unit point force; the pair below satisfies -lap u + grad pi = 0
away from every source, which the test suite checks by finite
differences.) With inhomogeneous Dirichlet data taken from u, the pair is
the exact solution of the point-force problem on any domain containing
the sources, which makes it the reference for error measurement.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .quadrature import triangle_rule
from .spaces import jacobians

_INV_4PI = 1.0 / (4.0 * np.pi)
_INV_2PI = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class StokesletField:
    """Point-force superposition: sources is a tuple of (point, force)."""

    sources: tuple

    def __init__(self, sources):
        clean = tuple(
            (
                np.array(t, dtype=float).reshape(2),
                np.array(f, dtype=float).reshape(2),
            )
            for t, f in sources
        )
        if not clean:
            raise ValueError("at least one source is required")
        for t, f in clean:
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
                raise ValueError("source points and forces must be finite")
        object.__setattr__(self, "sources", clean)


def velocity(field, X):
    """Velocity at points X (..., 2)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape)
    flat = out.reshape(-1, 2)
    P = X.reshape(-1, 2)
    for t, f in field.sources:
        r0 = P[:, 0] - t[0]
        r1 = P[:, 1] - t[1]
        inv = 1.0 / (r0 * r0 + r1 * r1)
        w = (f[0] * r0 + f[1] * r1) * inv
        log_r = -0.5 * np.log(inv)
        flat[:, 0] -= _INV_4PI * (log_r * f[0] - r0 * w)
        flat[:, 1] -= _INV_4PI * (log_r * f[1] - r1 * w)
    return out


def pressure(field, X):
    """Pressure at points X (..., 2)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[:-1])
    flat = out.reshape(-1)
    P = X.reshape(-1, 2)
    for t, f in field.sources:
        r0 = P[:, 0] - t[0]
        r1 = P[:, 1] - t[1]
        inv = 1.0 / (r0 * r0 + r1 * r1)
        flat += _INV_2PI * (f[0] * r0 + f[1] * r1) * inv
    return out


def velocity_gradient(field, X):
    """Gradient du_a/dx_b at points X: shape (..., 2, 2)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape + (2,))
    flat = out.reshape(-1, 2, 2)
    P = X.reshape(-1, 2)
    for t, f in field.sources:
        r0 = P[:, 0] - t[0]
        r1 = P[:, 1] - t[1]
        inv = 1.0 / (r0 * r0 + r1 * r1)
        w = (f[0] * r0 + f[1] * r1) * inv
        cross = inv * (r0 * r1 * (2.0 * w))
        flat[:, 0, 0] -= _INV_4PI * w * (2.0 * r0 * r0 * inv - 1.0)
        flat[:, 0, 1] -= _INV_4PI * (inv * (f[0] * r1 - f[1] * r0) + cross)
        flat[:, 1, 0] -= _INV_4PI * (inv * (f[1] * r0 - f[0] * r1) + cross)
        flat[:, 1, 1] -= _INV_4PI * w * (2.0 * r1 * r1 * inv - 1.0)
    return out


def pressure_gradient(field, X):
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape)
    flat = out.reshape(-1, 2)
    P = X.reshape(-1, 2)
    for t, f in field.sources:
        r0 = P[:, 0] - t[0]
        r1 = P[:, 1] - t[1]
        inv = 1.0 / (r0 * r0 + r1 * r1)
        w = (f[0] * r0 + f[1] * r1) * inv
        flat[:, 0] += _INV_2PI * inv * (f[0] - 2.0 * r0 * w)
        flat[:, 1] += _INV_2PI * inv * (f[1] - 2.0 * r1 * w)
    return out


def stokeslet_eval(field, x):
    """(velocity, pressure, velocity gradient) at a single point."""
    x = np.asarray(x, dtype=float)
    for t, _ in field.sources:
        if np.hypot(*(x - t)) == 0.0:
            raise ValueError(f"evaluation point coincides with source {t}")
    return velocity(field, x), float(pressure(field, x)), velocity_gradient(field, x)


def verify_pde(field, x, step=1e-6, guard=1e-3):
    """Residuals |-lap u + grad pi| and |div u| at x.

    The Laplacian is a central difference of the analytic gradient; the
    divergence is the trace of the analytic gradient. Points closer than
    `guard` to a source are rejected as too singular for differencing.
    """
    x = np.asarray(x, dtype=float)
    dists = [np.hypot(*(x - t)) for t, _ in field.sources]
    if min(dists) < guard:
        raise ValueError(
            f"point {tuple(x)} is within {guard} of a source; "
            "finite differences are unreliable there"
        )
    lap = np.zeros(2)
    for b in range(2):
        e = np.zeros(2)
        e[b] = step
        gp = velocity_gradient(field, x + e)
        gm = velocity_gradient(field, x - e)
        lap += (gp[:, b] - gm[:, b]) / (2.0 * step)
    momentum = np.linalg.norm(-lap + pressure_gradient(field, x))
    div = abs(np.trace(velocity_gradient(field, x)))
    return momentum, div


class ErrorNorms(NamedTuple):
    grad: float
    pressure: float
    total: float


def _guard_source_collisions(field, pts):
    """Move quadrature points off exact source locations.

    On meshes refined to the double-precision floor a strictly interior
    quadrature point can round onto a source vertex; an ulp-scale offset
    keeps the singular kernels finite. The affected elements are then so
    small that their weighted contribution is negligible.
    """
    for t, _ in field.sources:
        d2 = np.sum((pts - t) ** 2, axis=-1)
        shift = 64.0 * np.spacing(max(abs(t[0]), abs(t[1]), 1.0))
        hit = d2 < shift**2
        if np.any(hit):
            warnings.warn(
                f"quadrature point within ulps of source {tuple(t)}; "
                "shifting by an ulp-scale offset"
            )
            pts[hit] = t + shift
    return pts


_ELEMENT_CHUNK = 8192


def error_norms(solution, field, p, degree=19):
    """W^{1,p} x L^p errors against a reference field.

    field is a StokesletField, or any object with velocity_gradient(X) and
    pressure(X) methods (used to validate the norm pipeline on fields with
    exact discrete representations). Both pressures are reduced to their
    zero-mean representatives before comparison. Returns (grad error,
    pressure error, their sum). Elements are processed in chunks to bound
    memory on fine meshes.
    """
    if not 1.0 < p < 2.0:
        raise ValueError(f"integrability index p={p} outside (1, 2)")
    mesh = solution.mesh
    rule = triangle_rule(degree)
    ref = rule.reference_coords()
    lam = rule.points
    _, det, JinvT = jacobians(mesh)
    verts = mesh.vertices[mesh.triangles]

    from .spaces import shape_grads, shape_values, velocity_coeff_tensor

    C, vspace = velocity_coeff_tensor(solution)
    ghat = shape_grads(vspace.family, ref)
    pspace = solution.pressure_space
    psi = shape_values(pspace.family, ref)
    pcoef = solution.pressure[pspace.element_nodes]

    if isinstance(field, StokesletField):
        grad_ref_fn = lambda pts: velocity_gradient(field, pts)
        pres_ref_fn = lambda pts: pressure(field, pts)
        guard = lambda pts: _guard_source_collisions(field, pts)
    else:
        grad_ref_fn = field.velocity_gradient
        pres_ref_fn = field.pressure
        guard = lambda pts: pts

    nt = mesh.num_triangles
    nq = len(ref)
    grad_acc = 0.0
    p_diff = np.empty((nt, nq))
    weights = rule.weights[None, :] * det[:, None]
    for start in range(0, nt, _ELEMENT_CHUNK):
        sl = slice(start, min(start + _ELEMENT_CHUNK, nt))
        pts = guard(np.einsum("qi,tia->tqa", lam, verts[sl], optimize=True))
        grad_exact = grad_ref_fn(pts)
        inner = np.einsum("tja,qjc->tqac", C[sl], ghat, optimize=True)
        grad_disc = np.einsum("tqac,tbc->tqab", inner, JinvT[sl], optimize=True)
        diff = grad_exact - grad_disc
        mag = np.sum(diff**2, axis=(-2, -1))
        grad_acc += float(np.sum(weights[sl] * mag ** (p / 2.0)))
        p_diff[sl] = pres_ref_fn(pts) - np.einsum(
            "tk,qk->tq", pcoef[sl], psi
        )
    grad_err = grad_acc ** (1.0 / p)

    # comparing zero-mean representatives is the same as removing the mean
    # of the difference
    p_diff = remove_mean(p_diff, weights)
    pres_err = float(np.sum(weights * np.abs(p_diff) ** p) ** (1.0 / p))
    return ErrorNorms(grad=grad_err, pressure=pres_err, total=grad_err + pres_err)


def elementwise_error_powers(solution, field, p, degree=19):
    """Per-element p-th error powers: (int_T |grad e|^p, int_T |e_pi|^p).

    The pressure difference is reduced to its global zero-mean
    representative before taking powers, as in `error_norms`. Used by the
    local-efficiency diagnostics; meant for moderate mesh sizes.
    """
    mesh = solution.mesh
    rule = triangle_rule(degree)
    ref = rule.reference_coords()
    lam = rule.points
    _, det, _ = jacobians(mesh)
    verts = mesh.vertices[mesh.triangles]
    weights = rule.weights[None, :] * det[:, None]

    from .spaces import pressure_at, velocity_gradients_at

    pts = np.einsum("qi,tia->tqa", lam, verts, optimize=True)
    pts = _guard_source_collisions(field, pts)
    diff = velocity_gradient(field, pts) - velocity_gradients_at(solution, ref)
    grad_pow = np.sum(
        weights * np.sum(diff**2, axis=(-2, -1)) ** (p / 2.0), axis=1
    )
    p_diff = remove_mean(pressure(field, pts) - pressure_at(solution, ref), weights)
    pres_pow = np.sum(weights * np.abs(p_diff) ** p, axis=1)
    return grad_pow, pres_pow


def remove_mean(values, weights):
    """Weighted zero-mean representative of a sampled field; idempotent."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return values - np.sum(weights * values) / weights.sum()


def effectivity(estimator_value, total_error):
    """Ratio of the error estimator to the measured error."""
    if total_error <= 0.0:
        raise ValueError("effectivity undefined for zero error")
    return estimator_value / total_error
