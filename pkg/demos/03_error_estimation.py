"""
Residual indicators and marking
===============================

Compute the per-element error indicators for a point-force solve, look
at their composition, and apply the maximum marking rule.
"""

import numpy as np

from stokesdirac.assembly import apply_dirichlet, assemble_taylor_hood, solve
from stokesdirac.estimator import compute_indicators, global_estimator, mark
from stokesdirac.mesh import build_initial_mesh, locate_point, refine
from stokesdirac.spaces import build_space

p = 1.4
sources = [((0.25, 0.25), (1.0, 1.0)), ((0.75, 0.75), (-1.0, -1.0))]

mesh = build_initial_mesh("unit_square")
for _ in range(3):
    mesh = refine(mesh, range(mesh.num_triangles))


def solve_on(mesh):
    V = build_space(mesh, "vector_p2")
    P = build_space(mesh, "scalar_p1")
    system = assemble_taylor_hood(V, P, sources)
    return solve(apply_dirichlet(system, None))


solution = solve_on(mesh)
field = compute_indicators(solution, sources, p)

# the indicator of an element combines four residual contributions
print("component totals (p-th powers):")
print(f"  interior    {field.interior.sum():.4e}")
print(f"  jumps       {field.jump.sum():.4e}")
print(f"  divergence  {field.divergence.sum():.4e}")
print(f"  point force {field.dirac.sum():.4e}")
print(f"global estimator {global_estimator(field):.4f}")

# the point-force terms dominate on the coarse mesh, so the marked
# elements sit exactly at the sources
marked = mark(field, theta=0.5)
hit = set()
for t, _ in sources:
    hit.update(locate_point(mesh, t))
print(f"marked {len(marked)} elements; sources live in {sorted(hit)}")

# one solve-estimate-mark-refine sweep reduces the estimator
finer = refine(mesh, marked)
finer_field = compute_indicators(solve_on(finer), sources, p)
print(
    f"estimator after one refinement: {global_estimator(finer_field):.4f} "
    f"({mesh.num_triangles} -> {finer.num_triangles} triangles)"
)
