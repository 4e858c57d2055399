"""Constructors for simple meshes: box grids, tube meshes, icospheres,
and uniformly refined hexahedral hierarchies.

These are the synthetic geometries used throughout the test-suite and the
demo scripts; production shapes normally arrive through :mod:`shapeflow.io`.
"""

from __future__ import annotations

import numpy as np

from .meshes import HEX_CORNERS, HexHierarchy, HexMesh, SurfaceMesh

__all__ = [
    "box_grid",
    "tube_mesh",
    "icosphere",
    "ellipsoid",
    "refine_hex_mesh",
    "build_hierarchy",
    "hex_boundary_surface",
]


def box_grid(shape, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> HexMesh:
    """Structured grid of ``shape = (nx, ny, nz)`` cells on a box."""
    nx, ny, nz = shape
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    zs = np.linspace(lo[2], hi[2], nz + 1)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                corner = np.array([i, j, k])
                cells.append([vid(*(corner + c.astype(int))) for c in HEX_CORNERS])
    return HexMesh(verts, np.asarray(cells, dtype=np.int64))


def _square_to_disc(u, v):
    """Area-preserving-ish squircle map of [-1,1]^2 onto the unit disc."""
    x = u * np.sqrt(np.maximum(1.0 - v * v / 2.0, 0.0))
    y = v * np.sqrt(np.maximum(1.0 - u * u / 2.0, 0.0))
    return x, y


def tube_mesh(n_section: int, n_axial: int, radius: float = 1.0,
              length: float = 4.0) -> HexMesh:
    """All-hex straight tube of circular cross-section along +z.

    The cross-section is an ``n_section x n_section`` grid mapped onto the
    disc; boundary cross-section vertices land exactly on the circle.
    Boundary patches: ``inlet`` (z=0), ``outlet_1`` (z=length), ``wall``.
    """
    base = box_grid((n_section, n_section, n_axial),
                    lo=(-1.0, -1.0, 0.0), hi=(1.0, 1.0, length))
    verts = base.vertices.copy()
    x, y = _square_to_disc(verts[:, 0], verts[:, 1])
    verts[:, 0] = radius * x
    verts[:, 1] = radius * y
    mesh = HexMesh(verts, base.cells)
    faces = mesh.boundary_faces
    centers = mesh.vertices[faces].mean(axis=1)
    tol = 1e-9 * max(radius, length)
    inlet = np.flatnonzero(np.abs(centers[:, 2]) < tol)
    outlet = np.flatnonzero(np.abs(centers[:, 2] - length) < tol)
    wall = np.setdiff1d(np.arange(len(faces)), np.concatenate([inlet, outlet]))
    return HexMesh(mesh.vertices, mesh.cells, faces,
                   {"inlet": inlet, "outlet_1": outlet, "wall": wall})


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> SurfaceMesh:
    """Subdivided icosahedron; 642 vertices at 3 subdivisions."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    tris = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        verts, tris = _subdivide(verts, tris)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return SurfaceMesh(radius * verts, tris)


def _subdivide(verts, tris):
    verts = list(map(tuple, verts))
    cache = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            cache[key] = len(verts)
            verts.append(tuple((np.array(verts[i]) + np.array(verts[j])) / 2.0))
        return cache[key]

    out = []
    for a, b, c in tris:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.asarray(verts, dtype=float), np.asarray(out, dtype=np.int64)


def ellipsoid(axes, subdivisions: int = 2) -> SurfaceMesh:
    """Icosphere scaled anisotropically to semi-axes ``axes = (a, b, c)``."""
    sph = icosphere(subdivisions)
    return SurfaceMesh(sph.vertices * np.asarray(axes, dtype=float),
                       sph.triangles, dict(sph.patches))


def refine_hex_mesh(mesh: HexMesh):
    """Uniform 8-child refinement; inherited vertices keep exact coordinates.

    Returns ``(fine_mesh, parent_map)``.  New vertices are edge/face/cell
    midpoints of the coarse cells.  Midpoints are averaged over a
    canonically sorted corner set, so a vertex shared by several coarse
    cells comes out bit-identical in each and deduplicates exactly.
    """
    verts = [tuple(v) for v in mesh.vertices]
    lookup = {v: i for i, v in enumerate(verts)}

    def get(p):
        key = tuple(p)
        if key not in lookup:
            lookup[key] = len(verts)
            verts.append(key)
        return lookup[key]

    corner_bits = HEX_CORNERS.astype(int)
    fine_cells = []
    parents = []
    for ci, cell in enumerate(mesh.cells):
        corner = mesh.vertices[cell]  # (8, 3)
        lattice = {}
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    xi = np.array([a, b, c], dtype=float) / 2.0
                    lattice[(a, b, c)] = get(_lattice_point(corner, xi))
        for off in corner_bits:  # the 8 sub-cells, reference order
            sub = [tuple(off + bit) for bit in corner_bits]
            fine_cells.append([lattice[s] for s in sub])
            parents.append(ci)
    fine = HexMesh(np.asarray(verts, dtype=float),
                   np.asarray(fine_cells, dtype=np.int64))
    return fine, np.asarray(parents, dtype=np.int64)


def _lattice_point(corner, xi):
    """Half-integer lattice point of a cell, order-independent.

    Coarse corners are returned verbatim; edge/face/cell midpoints are the
    mean of the participating corners accumulated in lexicographic
    coordinate order, which makes the value independent of the local
    vertex numbering of the cell that computes it.
    """
    bits = np.round(xi * 2).astype(int)
    if np.all((bits == 0) | (bits == 2)):
        match = np.all(HEX_CORNERS == (bits / 2.0), axis=1)
        return corner[np.flatnonzero(match)[0]]
    w = np.where(HEX_CORNERS > 0.5, xi, 1.0 - xi).prod(axis=1)
    pts = corner[w > 0]
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    pts = pts[order]
    acc = pts[0].copy()
    for p in pts[1:]:
        acc = acc + p
    return acc / len(pts)


def build_hierarchy(coarse: HexMesh, n_levels: int) -> HexHierarchy:
    """Refine ``coarse`` uniformly ``n_levels - 1`` times."""
    levels = [coarse]
    maps = []
    for _ in range(n_levels - 1):
        fine, pm = refine_hex_mesh(levels[-1])
        levels.append(fine)
        maps.append(pm)
    return HexHierarchy(tuple(levels), tuple(maps))


def hex_boundary_surface(mesh: HexMesh) -> tuple[SurfaceMesh, np.ndarray]:
    """Triangulated boundary of a hex mesh.

    Returns ``(surface, vertex_map)`` where ``vertex_map[i]`` is the hex
    vertex index of surface vertex ``i``.  Boundary patches are inherited
    from the hex mesh (each quad contributes two triangles).
    """
    used = np.unique(mesh.boundary_faces.ravel())
    remap = -np.ones(mesh.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    quads = remap[mesh.boundary_faces]
    tris = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]], axis=0)
    patches = {}
    n_faces = len(mesh.boundary_faces)
    for name, fidx in mesh.boundary_patches.items():
        patches[name] = np.concatenate([fidx, fidx + n_faces])
    surf = SurfaceMesh(mesh.vertices[used], tris, patches)
    return surf, used
