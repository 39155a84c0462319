import numpy as np
import pytest

from stokesdirac.mesh import Mesh, build_initial_mesh, refine
from stokesdirac.spaces import (
    DiscreteSolution,
    boundary_values,
    build_space,
    eval_basis,
    eval_field,
    jacobians,
    pressure_gradients,
    shape_grads,
    shape_hessians,
    shape_values,
    velocity_divergence_at,
    velocity_gradients_at,
    velocity_laplacians,
)


def single_triangle():
    return Mesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
    )


def two_triangles():
    return Mesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        np.array([[0, 1, 2], [1, 3, 2]]),
    )


def make_solution(mesh, vkind="vector_p2", pkind="scalar_p1", seed=None):
    vspace = build_space(mesh, vkind)
    pspace = build_space(mesh, pkind)
    if seed is None:
        vel = np.zeros(vspace.ndof)
        pres = np.zeros(pspace.ndof)
    else:
        rng = np.random.default_rng(seed)
        vel = rng.standard_normal(vspace.ndof)
        pres = rng.standard_normal(pspace.ndof)
    return DiscreteSolution(
        velocity=vel,
        pressure=pres,
        multiplier=0.0,
        velocity_space=vspace,
        pressure_space=pspace,
    )


def test_dof_counts_single_triangle():
    mesh = single_triangle()
    assert build_space(mesh, "vector_p2").ndof == 12
    assert build_space(mesh, "scalar_p0").ndof == 1
    assert build_space(mesh, "vector_p1").ndof == 6
    assert build_space(mesh, "scalar_p1").ndof == 3


def test_dof_count_shared_edge_dedup():
    mesh = two_triangles()
    space = build_space(mesh, "scalar_p1")
    # oracle: deduplicate nodes by coordinates
    coords = {tuple(v) for v in mesh.vertices[mesh.triangles].reshape(-1, 2)}
    assert space.ndof == len(coords) == 4


def test_p2_shared_edge_dofs():
    mesh = two_triangles()
    space = build_space(mesh, "vector_p2")
    # 4 vertices + 5 edges, two components each
    assert space.ndof == 2 * (4 + 5)
    # the shared edge midpoint dof appears in both elements
    common = set(space.element_nodes[0]) & set(space.element_nodes[1])
    assert len(common) == 3  # two vertices and one midpoint


def test_p1_kronecker_property():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    vals = shape_values("p1", np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(vals, np.eye(3), atol=1e-15)


def test_p2_kronecker_at_nodes():
    nodes = np.array(
        [[0, 0], [1, 0], [0, 1], [0.5, 0.5], [0, 0.5], [0.5, 0]], dtype=float
    )
    vals = shape_values("p2", nodes)
    assert np.allclose(vals, np.eye(6), atol=1e-14)


@pytest.mark.parametrize("family,nl", [("p1", 3), ("p2", 6), ("p0", 1)])
def test_partition_of_unity(family, nl):
    rng = np.random.default_rng(11)
    pts = rng.dirichlet(np.ones(3), size=100)[:, 1:]
    vals = shape_values(family, pts)
    assert vals.shape == (100, nl)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-13)


@pytest.mark.parametrize("family", ["p1", "p2"])
def test_reference_gradients_match_finite_differences(family):
    rng = np.random.default_rng(5)
    pts = 0.8 * rng.dirichlet(np.ones(3), size=40)[:, 1:] + 0.05
    grads = shape_grads(family, pts)
    h = 1e-6
    for b in range(2):
        e = np.zeros(2)
        e[b] = h
        fd = (shape_values(family, pts + e) - shape_values(family, pts - e)) / (
            2 * h
        )
        assert np.abs(fd - grads[:, :, b]).max() < 1e-8


def test_physical_gradients_match_finite_differences():
    # skewed element exercises the inverse-Jacobian-transpose mapping
    mesh = Mesh(
        np.array([[0.2, -0.1], [1.3, 0.4], [0.1, 1.7]]),
        np.array([[0, 1, 2]]),
    )
    space = build_space(mesh, "scalar_p1")
    ref = np.array([[0.3, 0.2], [0.1, 0.6]])
    _, grads = eval_basis(space, 0, ref)
    J, _, _ = jacobians(mesh)
    v0 = mesh.vertices[0]
    h = 1e-6
    for q, xi in enumerate(ref):
        x = v0 + J[0] @ xi
        for b in range(2):
            e = np.zeros(2)
            e[b] = h
            xi_p = np.linalg.solve(J[0], x + e - v0)
            xi_m = np.linalg.solve(J[0], x - e - v0)
            fd = (
                shape_values("p1", xi_p[None, :])[0]
                - shape_values("p1", xi_m[None, :])[0]
            ) / (2 * h)
            assert np.abs(fd - grads[q, :, b]).max() < 1e-8


def test_p2_hessians_match_finite_differences():
    hess = shape_hessians("p2")
    pts = np.array([[0.25, 0.3]])
    h = 1e-4
    for b in range(2):
        for c in range(2):
            eb = np.zeros(2)
            ec = np.zeros(2)
            eb[b] = h
            ec[c] = h
            fd = (
                shape_values("p2", pts + eb + ec)
                - shape_values("p2", pts + eb - ec)
                - shape_values("p2", pts - eb + ec)
                + shape_values("p2", pts - eb - ec)
            ) / (4 * h * h)
            assert np.abs(fd[0] - hess[:, b, c]).max() < 1e-6


def test_eval_field_reproduces_linear():
    mesh = build_initial_mesh("unit_square")
    sol = make_solution(mesh)
    coords = sol.velocity_space.node_coords
    sol.velocity[0::2] = coords[:, 0]
    sol.velocity[1::2] = coords[:, 1]
    out = eval_field(sol, (0.3, 0.7))
    assert np.abs(out.velocity - [0.3, 0.7]).max() < 1e-13
    assert out.pressure == 0.0
    assert not out.one_sided


def test_eval_field_zero():
    mesh = single_triangle()
    sol = make_solution(mesh)
    out = eval_field(sol, (0.2, 0.2))
    assert np.all(out.velocity == 0.0) and out.pressure == 0.0


def test_eval_field_outside_domain():
    mesh = single_triangle()
    sol = make_solution(mesh)
    with pytest.raises(ValueError):
        eval_field(sol, (2.0, 2.0))


def test_two_sided_evaluation_agrees():
    mesh = two_triangles()
    sol = make_solution(mesh, seed=3)
    # points on the shared edge between vertices 1 and 2
    for s in (0.2, 0.5, 0.9):
        x = (1 - s) * mesh.vertices[1] + s * mesh.vertices[2]
        vspace = sol.velocity_space
        values = []
        J, _, _ = jacobians(mesh)
        for tri in (0, 1):
            v0 = mesh.vertices[mesh.triangles[tri, 0]]
            xi = np.linalg.solve(J[tri], x - v0)
            vals = shape_values("p2", xi[None, :])[0]
            nodes = vspace.element_nodes[tri]
            values.append(
                [
                    np.dot(sol.velocity[2 * nodes], vals),
                    np.dot(sol.velocity[2 * nodes + 1], vals),
                ]
            )
        assert np.abs(np.array(values[0]) - values[1]).max() < 1e-12


def test_p0_pressure_one_sided_flag():
    mesh = two_triangles()
    sol = make_solution(mesh, vkind="vector_p1", pkind="scalar_p0")
    sol.pressure[:] = [1.0, 5.0]
    mid = 0.5 * (mesh.vertices[1] + mesh.vertices[2])
    out = eval_field(sol, mid)
    assert out.one_sided
    assert out.pressure == 1.0  # lowest-indexed adjacent triangle
    inside = eval_field(sol, mesh.vertices[mesh.triangles[1]].mean(axis=0))
    assert not inside.one_sided
    assert inside.pressure == 5.0


def test_boundary_values_zero():
    mesh = build_initial_mesh("unit_square")
    space = build_space(mesh, "vector_p2")
    dofs, values = boundary_values(space, lambda xy: np.zeros(2))
    assert np.all(values == 0.0)
    assert set(dofs) == set(space.boundary_dofs)


def test_boundary_values_linear_exact_at_midpoints():
    mesh = build_initial_mesh("unit_square")
    space = build_space(mesh, "vector_p2")
    dofs, values = boundary_values(space, lambda xy: np.array([xy[0] + 2 * xy[1], -xy[1]]))
    coords = space.node_coords[dofs[0::2] // 2]
    assert np.abs(values[0::2] - (coords[:, 0] + 2 * coords[:, 1])).max() == 0.0
    assert np.abs(values[1::2] - (-coords[:, 1])).max() == 0.0


def test_boundary_values_interior_singularity_is_fine():
    from stokesdirac.exact import StokesletField, velocity

    mesh = build_initial_mesh("unit_square")
    space = build_space(mesh, "vector_p2")
    field = StokesletField([((0.25, 0.25), (1.0, 1.0))])
    _, values = boundary_values(space, lambda xy: velocity(field, xy))
    assert np.all(np.isfinite(values))


def test_boundary_values_rejects_singular_data():
    mesh = build_initial_mesh("unit_square")
    space = build_space(mesh, "vector_p2")

    def bad(xy):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.array([1.0 / (xy[0] + xy[1]), 0.0])

    with pytest.raises(ValueError):
        boundary_values(space, bad)


def test_continuity_across_shared_edges_random_coeffs():
    mesh = refine(build_initial_mesh("unit_square"), {0, 3, 7})
    for kind in ("vector_p2", "vector_p1"):
        sol = make_solution(
            mesh,
            vkind=kind,
            pkind="scalar_p1" if kind == "vector_p2" else "scalar_p0",
            seed=7,
        )
        J, _, _ = jacobians(mesh)
        interior = np.nonzero(~mesh.boundary_edges)[0][:10]
        for eid in interior:
            x = mesh.vertices[mesh.edges[eid]].mean(axis=0)
            vals = []
            for tri in mesh.edge_tris[eid]:
                v0 = mesh.vertices[mesh.triangles[tri, 0]]
                xi = np.linalg.solve(J[tri], x - v0)
                basis = shape_values(sol.velocity_space.family, xi[None, :])[0]
                nodes = sol.velocity_space.element_nodes[tri]
                vals.append(np.dot(sol.velocity[2 * nodes], basis))
            assert abs(vals[0] - vals[1]) < 1e-12


def test_batched_evaluators_match_pointwise():
    mesh = two_triangles()
    sol = make_solution(mesh, seed=13)
    ref = np.array([[0.2, 0.3], [0.5, 0.1]])
    grads = velocity_gradients_at(sol, ref)
    div = velocity_divergence_at(sol, ref)
    assert np.abs(grads[:, :, 0, 0] + grads[:, :, 1, 1] - div).max() < 1e-13
    # gradients against finite differences of the evaluated field
    J, _, _ = jacobians(mesh)
    h = 1e-6
    for tri in range(2):
        v0 = mesh.vertices[mesh.triangles[tri, 0]]
        for q, xi in enumerate(ref):
            x = v0 + J[tri] @ xi
            for b in range(2):
                e = np.zeros(2)
                e[b] = h
                up = eval_field(sol, x + e).velocity
                um = eval_field(sol, x - e).velocity
                fd = (up - um) / (2 * h)
                assert np.abs(fd - grads[tri, q, :, b]).max() < 1e-6


def test_laplacian_and_pressure_gradient_consistency():
    mesh = two_triangles()
    sol = make_solution(mesh, seed=21)
    # P2 velocity: compare against FD Laplacian at an interior point
    lap = velocity_laplacians(sol)
    J, _, _ = jacobians(mesh)
    h = 1e-4
    for tri in range(2):
        v0 = mesh.vertices[mesh.triangles[tri, 0]]
        x = v0 + J[tri] @ np.array([0.25, 0.25])
        fd = np.zeros(2)
        for b in range(2):
            e = np.zeros(2)
            e[b] = h
            fd += (
                eval_field(sol, x + e).velocity
                - 2 * eval_field(sol, x).velocity
                + eval_field(sol, x - e).velocity
            ) / h**2
        assert np.abs(fd - lap[tri]).max() < 1e-5
    grad_p = pressure_gradients(sol)
    for tri in range(2):
        v0 = mesh.vertices[mesh.triangles[tri, 0]]
        x = v0 + J[tri] @ np.array([0.3, 0.3])
        for b in range(2):
            e = np.zeros(2)
            e[b] = 1e-7
            fd = (
                eval_field(sol, x + e).pressure - eval_field(sol, x - e).pressure
            ) / 2e-7
            assert abs(fd - grad_p[tri, b]) < 1e-6


def test_unknown_kind():
    with pytest.raises(ValueError):
        build_space(single_triangle(), "vector_p3")
