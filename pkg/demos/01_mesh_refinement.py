"""
Meshes and conforming bisection
===============================

Build the two built-in coarse meshes, refine one of them locally, and
export the result for visualization.
"""

import numpy as np

from stokesdirac.mesh import (
    build_initial_mesh,
    locate_point,
    mesh_stats,
    refine,
    write_vtk,
)

# the built-in domains: a criss-cross unit square and an L-shape made of
# three criss-crossed half-squares
square = build_initial_mesh("unit_square")
lshape = build_initial_mesh("l_shape")
print(square, "area", square.areas().sum())
print(lshape, "area", lshape.areas().sum())

# refine toward the reentrant corner of the L-shape: repeatedly mark
# every triangle whose closure contains the corner
mesh = lshape
corner = (0.5, 0.5)
for step in range(8):
    marked = locate_point(mesh, corner)
    mesh = refine(mesh, marked)
    nt, h_max, min_angle = mesh_stats(mesh)
    print(
        f"step {step}: {nt:4d} triangles, h_max {h_max:.3f}, "
        f"min angle {min_angle:.1f} deg"
    )

# bisection preserves the area exactly and keeps a positive angle bound
assert abs(mesh.areas().sum() - 0.75) < 1e-12
assert mesh.min_angles().min() > 0.2 * lshape.min_angles().min()

# every triangle knows its refinement generation; the corner patch is deep
depths = mesh.generation
print("max generation", depths.max(), "mean", depths.mean().round(2))

write_vtk(mesh, "corner_refined.vtk", cell_data={"generation": depths.astype(float)})
print("wrote corner_refined.vtk")
