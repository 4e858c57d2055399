"""Mesh and field containers shared by every other module.

All containers are immutable after construction: the backing numpy arrays
are marked read-only, so instances are safe to share across threads.
Coordinates are in millimeters by convention; units are carried as metadata
tags only and never converted automatically.

Hexahedral cells use a fixed reference-cube vertex ordering.  Local vertex
``i`` sits at the reference coordinates ``HEX_CORNERS[i]``::

    0:(0,0,0)  1:(1,0,0)  2:(1,1,0)  3:(0,1,0)
    4:(0,0,1)  5:(1,0,1)  6:(1,1,1)  7:(0,1,1)

i.e. the bottom face counterclockwise, then the top face in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HEX_CORNERS",
    "HEX_EDGES",
    "HEX_FACES",
    "SurfaceMesh",
    "HexMesh",
    "HexHierarchy",
    "CenterlineEncoding",
    "NodalField",
    "MeshError",
]

# Reference-cube corner coordinates, one row per local vertex.
HEX_CORNERS = np.array(
    [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ]
)
HEX_CORNERS.flags.writeable = False

# The 12 edges of the reference cube as local vertex pairs.
HEX_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)

# The 6 faces of the reference cube, outward-oriented for a positively
# oriented cell (counterclockwise seen from outside).
HEX_FACES = (
    (0, 3, 2, 1),  # z = 0
    (4, 5, 6, 7),  # z = 1
    (0, 1, 5, 4),  # y = 0
    (2, 3, 7, 6),  # y = 1
    (0, 4, 7, 3),  # x = 0
    (1, 2, 6, 5),  # x = 1
)

# Triangles with area below this threshold (mm^2) are rejected as degenerate.
DEGENERATE_AREA = 1e-12


class MeshError(ValueError):
    """Raised when a mesh violates a structural invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


def _as_points(arr, name: str) -> np.ndarray:
    pts = np.asarray(arr, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise MeshError(f"{name} must have shape (n, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise MeshError(f"{name} contains non-finite coordinates")
    return _freeze(pts)


def _as_index_array(arr, width: int, n_vertices: int, name: str) -> np.ndarray:
    idx = np.asarray(arr, dtype=np.int64)
    if idx.size == 0:
        idx = idx.reshape(0, width)
    if idx.ndim != 2 or idx.shape[1] != width:
        raise MeshError(f"{name} must have shape (m, {width}), got {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= n_vertices):
        raise MeshError(f"{name} references vertices outside [0, {n_vertices})")
    return _freeze(idx)


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Areas of the given triangles (vectorized cross-product formula)."""
    p = vertices[triangles]
    cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangulated boundary shape with per-patch triangle labels.

    Parameters
    ----------
    vertices : (n, 3) float array
    triangles : (m, 3) int array
    patches : dict mapping patch id (e.g. ``"wall"``, ``"inlet"``,
        ``"outlet_1"``) to an array of triangle indices.  The patch index
        sets must partition the triangle set.  If omitted, all triangles
        are labeled ``"wall"``.
    normals : optional (n, 3) per-vertex outward normals.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    patches: dict = field(default_factory=dict)
    normals: np.ndarray | None = None

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        object.__setattr__(self, "vertices", verts)
        tris = _as_index_array(self.triangles, 3, len(verts), "triangles")
        object.__setattr__(self, "triangles", tris)

        if tris.size:
            areas = triangle_areas(verts, tris)
            bad = np.flatnonzero(areas <= DEGENERATE_AREA)
            if bad.size:
                raise MeshError(
                    f"degenerate triangles (area <= {DEGENERATE_AREA} mm^2): "
                    f"{bad[:8].tolist()}"
                )

        patches = self.patches or {"wall": np.arange(len(tris))}
        clean = {}
        seen = np.zeros(len(tris), dtype=bool)
        for name, tri_idx in patches.items():
            tri_idx = np.asarray(tri_idx, dtype=np.int64).ravel()
            if tri_idx.size and (tri_idx.min() < 0 or tri_idx.max() >= len(tris)):
                raise MeshError(f"patch {name!r} references unknown triangles")
            if np.any(seen[tri_idx]):
                raise MeshError(f"patch {name!r} overlaps another patch")
            seen[tri_idx] = True
            clean[str(name)] = _freeze(np.sort(tri_idx))
        if len(tris) and not seen.all():
            raise MeshError("patches do not cover every triangle")
        object.__setattr__(self, "patches", clean)

        if self.normals is not None:
            nrm = _as_points(self.normals, "normals")
            if len(nrm) != len(verts):
                raise MeshError("normals must be per-vertex")
            object.__setattr__(self, "normals", nrm)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def patch_of_triangle(self) -> np.ndarray:
        """Per-triangle patch id as an object array."""
        out = np.empty(len(self.triangles), dtype=object)
        for name, idx in self.patches.items():
            out[idx] = name
        return out

    def with_vertices(self, vertices) -> "SurfaceMesh":
        return SurfaceMesh(vertices, self.triangles, dict(self.patches), self.normals)


@dataclass(frozen=True)
class HexMesh:
    """Hexahedral volume mesh.

    ``cells`` lists 8 vertex indices per cell in the reference-cube order
    documented at module level.  ``boundary_faces`` are quads (4 vertex
    indices, outward-oriented); ``boundary_patches`` maps patch ids to
    boundary-face indices and must partition the boundary faces.

    Orientation (positive trilinear Jacobian) is *not* enforced here:
    deliberately inverted meshes must be constructible so that
    :func:`shapeflow.geometry.detect_inverted_cells` has something to find.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_faces: np.ndarray | None = None
    boundary_patches: dict = field(default_factory=dict)

    def __post_init__(self):
        verts = _as_points(self.vertices, "vertices")
        object.__setattr__(self, "vertices", verts)
        cells = _as_index_array(self.cells, 8, len(verts), "cells")
        object.__setattr__(self, "cells", cells)

        if self.boundary_faces is None:
            faces = _extract_boundary_faces(cells)
        else:
            faces = np.asarray(self.boundary_faces, dtype=np.int64)
        faces = _as_index_array(faces, 4, len(verts), "boundary_faces")
        object.__setattr__(self, "boundary_faces", faces)

        patches = self.boundary_patches or {"wall": np.arange(len(faces))}
        clean = {}
        seen = np.zeros(len(faces), dtype=bool)
        for name, fidx in patches.items():
            fidx = np.asarray(fidx, dtype=np.int64).ravel()
            if fidx.size and (fidx.min() < 0 or fidx.max() >= len(faces)):
                raise MeshError(f"boundary patch {name!r} references unknown faces")
            if np.any(seen[fidx]):
                raise MeshError(f"boundary patch {name!r} overlaps another patch")
            seen[fidx] = True
            clean[str(name)] = _freeze(np.sort(fidx))
        if len(faces) and not seen.all():
            raise MeshError("boundary patches do not cover every boundary face")
        object.__setattr__(self, "boundary_patches", clean)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        if self.boundary_faces.size:
            mask[self.boundary_faces.ravel()] = True
        return mask

    def boundary_triangles(self) -> np.ndarray:
        """Boundary quads split into two triangles each, orientation kept."""
        q = self.boundary_faces
        if q.size == 0:
            return np.zeros((0, 3), dtype=np.int64)
        return np.concatenate([q[:, [0, 1, 2]], q[:, [0, 2, 3]]], axis=0)

    def with_vertices(self, vertices) -> "HexMesh":
        return HexMesh(vertices, self.cells, self.boundary_faces,
                       dict(self.boundary_patches))


def _extract_boundary_faces(cells: np.ndarray) -> np.ndarray:
    """Faces that belong to exactly one cell, outward-oriented."""
    if cells.size == 0:
        return np.zeros((0, 4), dtype=np.int64)
    face_local = np.array(HEX_FACES, dtype=np.int64)
    all_faces = cells[:, face_local].reshape(-1, 4)
    key = np.sort(all_faces, axis=1)
    _, inverse, counts = np.unique(
        key, axis=0, return_inverse=True, return_counts=True
    )
    return all_faces[counts[inverse] == 1]


@dataclass(frozen=True)
class HexHierarchy:
    """Nested hexahedral meshes, coarsest first.

    Each finer level refines its parent uniformly: exactly 8 child cells per
    parent cell, recorded in ``parent_maps[l]`` (child cell of level ``l+1``
    -> parent cell of level ``l``).  Wherever a coarse vertex coordinate is
    inherited by a finer level it must match bit-exactly.
    """

    levels: tuple
    parent_maps: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise MeshError("hierarchy needs at least one level")
        for lvl in levels:
            if not isinstance(lvl, HexMesh):
                raise MeshError("levels must be HexMesh instances")
        maps = tuple(_freeze(np.asarray(m, dtype=np.int64)) for m in self.parent_maps)
        if len(maps) != len(levels) - 1:
            raise MeshError("need one parent map per refinement")
        for l, pm in enumerate(maps):
            fine, coarse = levels[l + 1], levels[l]
            if pm.shape != (fine.n_cells,):
                raise MeshError(f"parent map {l} has wrong length")
            counts = np.bincount(pm, minlength=coarse.n_cells)
            if not np.all(counts == 8):
                raise MeshError(f"level {l + 1} is not a uniform 8-child refinement")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "parent_maps", maps)
        # shared-vertex invariant: every coarse vertex must appear, bit-exact,
        # in the next finer level.
        for l in range(len(levels) - 1):
            self.vertex_inheritance(l)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> HexMesh:
        return self.levels[-1]

    def vertex_inheritance(self, level: int) -> np.ndarray:
        """Map vertex index of ``level`` -> vertex index in ``level + 1``.

        Matching is by exact coordinate equality, which the nesting
        invariant guarantees.  Raises :class:`MeshError` when a coarse
        vertex has no bit-exact counterpart.
        """
        coarse, fine = self.levels[level], self.levels[level + 1]
        lookup = {v.tobytes(): i for i, v in enumerate(fine.vertices)}
        out = np.empty(coarse.n_vertices, dtype=np.int64)
        for i, v in enumerate(coarse.vertices):
            j = lookup.get(v.tobytes())
            if j is None:
                raise MeshError(
                    f"vertex {i} of level {level} is not inherited bit-exactly "
                    f"by level {level + 1}"
                )
            out[i] = j
        return out

    def vertex_map_to_finest(self, level: int) -> np.ndarray:
        """Map vertex index of ``level`` -> vertex index in the finest level."""
        idx = np.arange(self.levels[level].n_vertices)
        for l in range(level, self.n_levels - 1):
            idx = self.vertex_inheritance(l)[idx]
        return idx


@dataclass(frozen=True)
class CenterlineEncoding:
    """Ordered centerline control points with inscribed-sphere radii.

    This is the conditioning variable of the generative model: ``n_cntrl``
    3D points plus one strictly positive radius per point, flattened to a
    vector of length ``4 * n_cntrl`` when fed to a network.
    """

    points: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points, "points")
        radii = np.asarray(self.radii, dtype=float).ravel()
        if len(radii) != len(pts):
            raise MeshError("points and radii must have equal length")
        if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
            raise MeshError("radii must be strictly positive and finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "radii", _freeze(radii))

    @property
    def n_cntrl(self) -> int:
        return len(self.radii)

    def flatten(self) -> np.ndarray:
        """Concatenate coordinates and radii into a single vector."""
        return np.concatenate([self.points.ravel(), self.radii])


@dataclass(frozen=True)
class NodalField:
    """Per-vertex scalar or 3-vector values attached to a mesh.

    ``units`` is a free-form tag (``"m/s"``, ``"Pa"``, ``"mm"``,
    ``"dimensionless"``); no conversion is ever applied.
    """

    mesh: object
    values: np.ndarray
    units: str = "dimensionless"

    def __post_init__(self):
        if not isinstance(self.mesh, (SurfaceMesh, HexMesh)):
            raise MeshError("mesh must be a SurfaceMesh or HexMesh")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            pass
        elif vals.ndim == 2 and vals.shape[1] == 3:
            pass
        else:
            raise MeshError(f"values must be (n,) or (n, 3), got {vals.shape}")
        if len(vals) != self.mesh.n_vertices:
            raise MeshError(
                f"field has {len(vals)} values for {self.mesh.n_vertices} vertices"
            )
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2
