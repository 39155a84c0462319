"""Conforming 2D triangular meshes with longest-edge bisection refinement.

A mesh is immutable after construction: `refine` returns a new mesh and
records the parent triangle of every new element, so refinement lineage
and shape regularity can be tracked across an adaptive run. Edges are
stored as sorted vertex pairs in lexicographic order, which fixes a global
edge numbering used to break ties when selecting refinement edges.
"""

from dataclasses import dataclass

import numpy as np

BARYCENTRIC_TOL = 1e-12


class MeshError(Exception):
    """Raised for invalid mesh topology or geometry."""


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _signed_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * _cross2(p1 - p0, p2 - p0)


class Mesh:
    """Triangulation of a polygonal domain.

    Attributes
    ----------
    vertices : (nv, 2) float array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Vertex indices per triangle, counterclockwise.
    edges : (ne, 2) int array
        Sorted vertex pairs, rows in lexicographic order.
    tri_edges : (nt, 3) int array
        Global edge index opposite each local vertex.
    edge_tris : (ne, 2) int array
        Adjacent triangles per edge; second entry -1 on the boundary.
    boundary_edges : (ne,) bool array
    refinement_edge : (nt,) int array
        Local index of the edge split first when the triangle is refined:
        the longest edge, ties broken by lowest global edge index.
    generation : (nt,) int array
        Number of bisections separating each triangle from the initial mesh.
    parent : (nt,) int array
        Triangle index in the mesh passed to `refine` (or -1 initially).
    """

    def __init__(self, vertices, triangles, generation=None, parent=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if triangles.size and (
            triangles.min() < 0 or triangles.max() >= len(vertices)
        ):
            raise MeshError("triangle vertex index out of range")
        areas = _signed_areas(vertices, triangles)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise MeshError(
                f"triangle {bad} has nonpositive signed area {areas[bad]:.3e}"
            )
        self.vertices = vertices
        self.triangles = triangles
        self.num_vertices = len(vertices)
        self.num_triangles = len(triangles)
        self._build_edges()
        self._select_refinement_edges()
        if generation is None:
            generation = np.zeros(self.num_triangles, dtype=np.int64)
        if parent is None:
            parent = np.full(self.num_triangles, -1, dtype=np.int64)
        self.generation = np.asarray(generation, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        for arr in (
            self.vertices,
            self.triangles,
            self.edges,
            self.tri_edges,
            self.edge_tris,
            self.boundary_edges,
            self.refinement_edge,
            self.generation,
            self.parent,
        ):
            arr.setflags(write=False)
        self._vertex_tris = None

    def _build_edges(self):
        tri = self.triangles
        # local edge i sits opposite local vertex i
        raw = np.concatenate(
            [tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=0
        )
        raw.sort(axis=1)
        edges, inverse = np.unique(raw, axis=0, return_inverse=True)
        tri_edges = inverse.reshape(3, -1).T.copy()
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        tids = np.tile(np.arange(self.num_triangles), 3)[order]
        eids = inverse[order]
        first = np.ones(len(eids), dtype=bool)
        first[1:] = eids[1:] != eids[:-1]
        edge_tris[eids[first], 0] = tids[first]
        second = ~first
        edge_tris[eids[second], 1] = tids[second]
        self.edges = edges
        self.tri_edges = tri_edges
        self.edge_tris = edge_tris
        self.boundary_edges = counts == 1
        self.num_edges = len(edges)

    def _select_refinement_edges(self):
        lengths = self.edge_lengths()[self.tri_edges]
        longest = lengths.max(axis=1)
        # ties resolved toward the lowest global edge index
        tied = lengths >= longest[:, None] * (1.0 - 1e-14)
        masked = np.where(tied, self.tri_edges, np.iinfo(np.int64).max)
        chosen = masked.min(axis=1)
        self.refinement_edge = np.argmax(
            self.tri_edges == chosen[:, None], axis=1
        ).astype(np.int64)

    # -- geometric queries ------------------------------------------------

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def areas(self):
        return _signed_areas(self.vertices, self.triangles)

    def diameters(self):
        return self.edge_lengths()[self.tri_edges].max(axis=1)

    def min_angles(self):
        """Smallest interior angle of each triangle, in degrees."""
        p = self.vertices[self.triangles]
        angles = np.empty((self.num_triangles, 3))
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.sum(a * b, axis=1) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles[:, i] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return angles.min(axis=1)

    def boundary_vertices(self):
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    def vertex_triangles(self):
        """CSR-style map vertex -> incident triangle ids."""
        if self._vertex_tris is None:
            flat = self.triangles.ravel()
            order = np.argsort(flat, kind="stable")
            tids = (np.arange(flat.size) // 3)[order]
            counts = np.bincount(flat, minlength=self.num_vertices)
            offsets = np.zeros(self.num_vertices + 1, dtype=np.int64)
            np.cumsum(counts, out=offsets[1:])
            self._vertex_tris = (offsets, tids)
        return self._vertex_tris

    def barycentric(self, x):
        """Barycentric coordinates of point x in every triangle: (nt, 3)."""
        x = np.asarray(x, dtype=float)
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        det = _cross2(p1 - p0, p2 - p0)
        l1 = _cross2(x - p0, p2 - p0) / det
        l2 = _cross2(p1 - p0, x - p0) / det
        return np.column_stack([1.0 - l1 - l2, l1, l2])

    def __repr__(self):
        return (
            f"Mesh({self.num_vertices} vertices, {self.num_triangles} "
            f"triangles, {self.num_edges} edges)"
        )


@dataclass(frozen=True)
class Patch:
    """Triangles around a center element.

    flavor "vertex": every triangle sharing at least a vertex with the
    center; flavor "edge": every triangle sharing at least an edge.
    The center belongs to both.
    """

    center: int
    members: np.ndarray
    flavor: str


def element_patch(mesh, tri_id, flavor="vertex"):
    if not 0 <= tri_id < mesh.num_triangles:
        raise IndexError(f"triangle id {tri_id} out of range")
    if flavor == "edge":
        neighbors = mesh.edge_tris[mesh.tri_edges[tri_id]].ravel()
        members = np.unique(neighbors[neighbors >= 0])
        members = np.union1d(members, [tri_id])
    elif flavor == "vertex":
        offsets, tids = mesh.vertex_triangles()
        chunks = [
            tids[offsets[v]: offsets[v + 1]] for v in mesh.triangles[tri_id]
        ]
        members = np.unique(np.concatenate(chunks))
    else:
        raise ValueError(f"unknown patch flavor {flavor!r}")
    return Patch(center=int(tri_id), members=members, flavor=flavor)


def locate_point(mesh, x, tol=BARYCENTRIC_TOL):
    """All triangles whose closed set contains x.

    Interior points give one triangle, edge points two, vertices as many
    as meet there. Membership uses barycentric coordinates with a relative
    tolerance. Raises ValueError outside the domain closure.
    """
    lam = mesh.barycentric(x)
    inside = np.all(lam >= -tol, axis=1)
    ids = np.nonzero(inside)[0]
    if ids.size == 0:
        raise ValueError(f"point {tuple(np.asarray(x, float))} outside the domain")
    return ids


def mesh_stats(mesh):
    """(number of triangles, h_max, minimum angle in degrees)."""
    return (
        mesh.num_triangles,
        float(mesh.diameters().max()),
        float(mesh.min_angles().min()),
    )


# -- refinement -----------------------------------------------------------


def refine(mesh, marked):
    """Bisect the marked triangles and close the mesh to conformity.

    Each affected triangle is cut across its refinement edge; a child is
    cut again when another of the parent's edges was split. The closure
    loop marks the refinement edge of any triangle with a split edge, so
    no hanging nodes remain.
    """
    marked = np.unique(np.asarray(list(marked), dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_triangles:
        raise IndexError("marked triangle id out of range")

    nt = mesh.num_triangles
    tri_edges = mesh.tri_edges
    ref_local = mesh.refinement_edge
    ref_edge = tri_edges[np.arange(nt), ref_local]

    split = np.zeros(mesh.num_edges, dtype=bool)
    split[ref_edge[marked]] = True
    while True:
        affected = split[tri_edges].any(axis=1)
        need = affected & ~split[ref_edge]
        if not need.any():
            break
        split[ref_edge[need]] = True

    split_ids = np.nonzero(split)[0]
    midpoint = np.full(mesh.num_edges, -1, dtype=np.int64)
    midpoint[split_ids] = mesh.num_vertices + np.arange(split_ids.size)
    new_vertices = 0.5 * (
        mesh.vertices[mesh.edges[split_ids, 0]]
        + mesh.vertices[mesh.edges[split_ids, 1]]
    )
    vertices = np.vstack([mesh.vertices, new_vertices])

    idx = np.arange(nt)
    r = ref_local
    tri = mesh.triangles
    P = tri[idx, r]
    Q = tri[idx, (r + 1) % 3]
    R = tri[idx, (r + 2) % 3]
    # edge (Q,R) is the refinement edge; (P,Q) is local r+2, (R,P) local r+1
    Mr = midpoint[tri_edges[idx, r]]
    Mpq = midpoint[tri_edges[idx, (r + 2) % 3]]
    Mrp = midpoint[tri_edges[idx, (r + 1) % 3]]

    s_ref = split[tri_edges[idx, r]]
    s_pq = split[tri_edges[idx, (r + 2) % 3]]
    s_rp = split[tri_edges[idx, (r + 1) % 3]]

    keep = ~s_ref
    gen = mesh.generation

    chunks_tri = [tri[keep]]
    chunks_gen = [gen[keep]]
    chunks_par = [idx[keep]]

    def emit(mask, cols, extra_gen):
        if not mask.any():
            return
        chunks_tri.append(
            np.column_stack([c[mask] for c in cols]).reshape(-1, 3)
        )
        chunks_gen.append(gen[mask] + extra_gen)
        chunks_par.append(idx[mask])

    def emit_children(mask, children):
        for cols, extra in children:
            emit(mask, cols, extra)

    only = s_ref & ~s_pq & ~s_rp
    emit_children(only, [((P, Q, Mr), 1), ((P, Mr, R), 1)])

    with_pq = s_ref & s_pq & ~s_rp
    emit_children(
        with_pq,
        [((Mr, P, Mpq), 2), ((Mr, Mpq, Q), 2), ((P, Mr, R), 1)],
    )

    with_rp = s_ref & ~s_pq & s_rp
    emit_children(
        with_rp,
        [((P, Q, Mr), 1), ((Mr, R, Mrp), 2), ((Mr, Mrp, P), 2)],
    )

    full = s_ref & s_pq & s_rp
    emit_children(
        full,
        [
            ((Mr, P, Mpq), 2),
            ((Mr, Mpq, Q), 2),
            ((Mr, R, Mrp), 2),
            ((Mr, Mrp, P), 2),
        ],
    )

    triangles = np.vstack(chunks_tri)
    generation = np.concatenate(chunks_gen)
    parent = np.concatenate(chunks_par)
    return Mesh(vertices, triangles, generation=generation, parent=parent)


# -- initial meshes and file formats ---------------------------------------


def _crisscross(cells, h):
    """Criss-cross triangulation of unit cells scaled by h."""
    coords = {}

    def vid(x, y):
        key = (round(x / h * 2) / 2, round(y / h * 2) / 2)
        if key not in coords:
            coords[key] = len(coords)
        return coords[key]

    triangles = []
    for (i, j) in cells:
        x0, y0 = i * h, j * h
        c = vid(x0 + 0.5 * h, y0 + 0.5 * h)
        v00 = vid(x0, y0)
        v10 = vid(x0 + h, y0)
        v11 = vid(x0 + h, y0 + h)
        v01 = vid(x0, y0 + h)
        triangles += [
            (v00, v10, c),
            (v10, v11, c),
            (v11, v01, c),
            (v01, v00, c),
        ]
    vertices = np.empty((len(coords), 2))
    for (kx, ky), vidx in coords.items():
        vertices[vidx] = (kx * h, ky * h)
    return Mesh(vertices, np.asarray(triangles, dtype=np.int64))


def build_initial_mesh(domain):
    """Coarse mesh of a supported polygon or of a mesh file.

    domain is "unit_square", "l_shape", or ("from_file", path). The unit
    square is (0,1)^2 criss-crossed in a 2x2 layout; the L-shape is
    (0,1)^2 minus [0.5,1)x(0,0.5], built from its three sub-squares.
    """
    if domain == "unit_square":
        return _crisscross([(i, j) for i in range(2) for j in range(2)], 0.5)
    if domain == "l_shape":
        return _crisscross([(0, 0), (0, 1), (1, 1)], 0.5)
    if (
        isinstance(domain, tuple)
        and len(domain) == 2
        and domain[0] == "from_file"
    ):
        return read_mesh_file(domain[1])
    raise ValueError(f"unsupported domain {domain!r}")


def read_mesh_file(path):
    """Read the ASCII mesh format (vertex list then 0-based triangles)."""
    try:
        with open(path) as fh:
            rows = [
                line.split("#", 1)[0].split()
                for line in fh
                if line.split("#", 1)[0].strip()
            ]
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc
    try:
        nv, nt = (int(tok) for tok in rows[0])
        vertices = np.array(
            [[float(t) for t in row] for row in rows[1: 1 + nv]]
        )
        triangles = np.array(
            [[int(t) for t in row] for row in rows[1 + nv: 1 + nv + nt]],
            dtype=np.int64,
        )
        if len(vertices) != nv or len(triangles) != nt:
            raise ValueError("truncated file")
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    mesh = Mesh(vertices, triangles)
    validate_mesh(mesh)
    return mesh


def write_mesh_file(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


def write_vtk(mesh, path, cell_data=None, point_data=None):
    """Legacy ASCII VTK export with optional cell and point fields.

    point_data values may be (nv,) scalars or (nv, 2) vectors.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        "stokesdirac mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    lines += [f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.vertices]
    lines.append(f"CELLS {mesh.num_triangles} {4 * mesh.num_triangles}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {mesh.num_triangles}")
    lines += ["5"] * mesh.num_triangles
    if cell_data:
        lines.append(f"CELL_DATA {mesh.num_triangles}")
        for name, values in cell_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{float(v)!r}" for v in np.asarray(values, dtype=float)]
    if point_data:
        lines.append(f"POINT_DATA {mesh.num_vertices}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{float(vx)!r} {float(vy)!r} 0.0" for vx, vy in values]
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [f"{float(v)!r}" for v in values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def validate_mesh(mesh):
    """Full conformity check, including geometric hanging nodes.

    Quadratic in the mesh size; meant for imported meshes and tests, not
    for the refinement loop (which preserves conformity by construction).
    """
    counts = (mesh.edge_tris >= 0).sum(axis=1)
    if not np.all((counts == 1) | (counts == 2)):
        raise MeshError("edge adjacency count outside {1, 2}")
    # boundary must form closed polygonal curves: two boundary edges
    # per boundary vertex
    bverts = mesh.edges[mesh.boundary_edges].ravel()
    if bverts.size:
        deg = np.bincount(bverts, minlength=mesh.num_vertices)
        mask = np.zeros(mesh.num_vertices, dtype=bool)
        mask[bverts] = True
        if not np.all(deg[mask] == 2):
            raise MeshError("boundary edges do not form closed curves")
    # no vertex may sit strictly inside another triangle's edge
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    ab = b - a
    ab_len2 = np.sum(ab**2, axis=1)
    for v in range(mesh.num_vertices):
        x = mesh.vertices[v]
        t = np.sum((x - a) * ab, axis=1) / ab_len2
        proj = a + t[:, None] * ab
        dist = np.hypot(*(x - proj).T)
        on_open_edge = (
            (dist < 1e-12)
            & (t > 1e-12)
            & (t < 1.0 - 1e-12)
            & (mesh.edges[:, 0] != v)
            & (mesh.edges[:, 1] != v)
        )
        if on_open_edge.any():
            raise MeshError(
                f"vertex {v} hangs on edge "
                f"{mesh.edges[int(np.nonzero(on_open_edge)[0][0])]}"
            )
    return True
