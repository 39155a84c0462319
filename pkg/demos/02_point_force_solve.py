"""
Solving the point-force Stokes problem
======================================

Assemble and solve the Taylor-Hood discretization of

    -lap u + grad pi = f delta_t,   div u = 0,

with the exact point-force field supplying inhomogeneous Dirichlet data,
then inspect the solution.
"""

import numpy as np

from stokesdirac.assembly import (
    apply_dirichlet,
    assemble_taylor_hood,
    galerkin_residual,
    solve,
)
from stokesdirac.exact import StokesletField, error_norms, velocity
from stokesdirac.mesh import build_initial_mesh, refine
from stokesdirac.spaces import boundary_values, build_space, eval_field

# a single force of strength (1, 1) at an interior point
sources = [((0.4, 0.6), (1.0, 1.0))]
field = StokesletField(sources)

mesh = build_initial_mesh("unit_square")
for _ in range(4):
    mesh = refine(mesh, range(mesh.num_triangles))

velocity_space = build_space(mesh, "vector_p2")
pressure_space = build_space(mesh, "scalar_p1")
print(
    f"{mesh.num_triangles} triangles, "
    f"{velocity_space.ndof + pressure_space.ndof} dofs"
)

system = assemble_taylor_hood(velocity_space, pressure_space, sources)
data = boundary_values(velocity_space, lambda xy: velocity(field, xy))
solution = solve(apply_dirichlet(system, data))

# the discrete equations are satisfied to solver precision
momentum, continuity = galerkin_residual(system, solution)
print(f"Galerkin residuals: momentum {momentum:.1e}, continuity {continuity:.1e}")

# evaluate the discrete and exact velocity at a probe point
probe = np.array([0.75, 0.3])
approx = eval_field(solution, probe)
print("u_h(probe) =", approx.velocity.round(5))
print("u  (probe) =", velocity(field, probe).round(5))

# measure the error in the W^{1,p} x L^p norm used throughout
norms = error_norms(solution, field, p=1.4)
print(
    f"grad error {norms.grad:.4f}, pressure error {norms.pressure:.4f}, "
    f"total {norms.total:.4f}"
)
