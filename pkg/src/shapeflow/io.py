"""File formats: OBJ surfaces, JSON schemas for volume/centerline/field
data and checkpoints, and RFC-4180 CSV tables.

All coordinates are serialized as full-precision decimal (Python ``repr``
of a float is the shortest digit string that round-trips exactly), so a
write-then-read round trip reproduces every value bit-exactly.

JSON schemas carried by this module:

``hexhierarchy-v1``
    ``{"schema": "hexhierarchy-v1", "levels": [{"vertices": [[x,y,z]...],
    "cells": [[v0..v7]...], "boundary_faces": [[v0..v3]...],
    "boundary_patches": {"wall": [face...], ...}}...],
    "parent_maps": [[parent...]...]}``

``centerline-v1``
    ``{"schema": "centerline-v1", "points": [[x,y,z]...], "radii": [r...]}``

``field-v1``
    ``{"schema": "field-v1", "mesh_kind": "hex"|"surface",
    "n_vertices": n, "units": "...", "values": [...]}``; the mesh itself is
    supplied separately when reading.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .meshes import CenterlineEncoding, HexHierarchy, HexMesh, NodalField, SurfaceMesh

__all__ = [
    "SchemaError",
    "ParseError",
    "read_obj",
    "write_obj",
    "write_hierarchy",
    "read_hierarchy",
    "write_centerline",
    "read_centerline",
    "write_field",
    "read_field",
    "write_csv",
    "read_csv",
    "save_json",
    "load_json",
]


class SchemaError(ValueError):
    """A JSON document carries the wrong or an unknown schema version."""


class ParseError(ValueError):
    """Malformed input file; the message carries line/offset context."""


# --- OBJ ---------------------------------------------------------------------

def write_obj(path, mesh: SurfaceMesh) -> None:
    """ASCII OBJ with "v"/"f" records, one "g" group per patch."""
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for name in sorted(mesh.patches):
            fh.write(f"g {name}\n")
            for tri in mesh.triangles[mesh.patches[name]]:
                fh.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")


def read_obj(path) -> SurfaceMesh:
    """Read a triangles-only ASCII OBJ; "g" groups become patches."""
    path = Path(path)
    verts = []
    tris = []
    patches: dict[str, list[int]] = {}
    group = "wall"
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from exc
            elif tag == "f":
                idx = parts[1:]
                if len(idx) != 3:
                    raise ParseError(
                        f"{path}:{lineno}: triangles only, got {len(idx)} vertices"
                    )
                try:
                    tri = [int(tok.split("/")[0]) - 1 for tok in idx]
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from exc
                patches.setdefault(group, []).append(len(tris))
                tris.append(tri)
            elif tag == "g":
                group = parts[1] if len(parts) > 1 else "wall"
            # vn/vt/usemtl and other records are ignored
    if not verts:
        raise ParseError(f"{path}: no vertices found")
    return SurfaceMesh(np.asarray(verts), np.asarray(tris, dtype=np.int64),
                       {k: np.asarray(v) for k, v in patches.items()})


# --- JSON helpers ------------------------------------------------------------

def save_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_json(path, schema: str) -> dict:
    path = Path(path)
    try:
        with path.open() as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}"
        ) from exc
    found = payload.get("schema")
    if found != schema:
        raise SchemaError(f"{path}: expected schema {schema!r}, found {found!r}")
    return payload


def _require(payload: dict, key: str, path) -> object:
    if key not in payload:
        raise SchemaError(f"{path}: missing required key {key!r}")
    return payload[key]


# --- hierarchy / centerline / field ------------------------------------------

def write_hierarchy(path, hierarchy: HexHierarchy) -> None:
    levels = []
    for lvl in hierarchy.levels:
        levels.append(
            {
                "vertices": lvl.vertices.tolist(),
                "cells": lvl.cells.tolist(),
                "boundary_faces": lvl.boundary_faces.tolist(),
                "boundary_patches": {
                    k: v.tolist() for k, v in lvl.boundary_patches.items()
                },
            }
        )
    save_json(path, {
        "schema": "hexhierarchy-v1",
        "levels": levels,
        "parent_maps": [m.tolist() for m in hierarchy.parent_maps],
    })


def read_hierarchy(path) -> HexHierarchy:
    payload = load_json(path, "hexhierarchy-v1")
    levels = []
    for entry in _require(payload, "levels", path):
        levels.append(
            HexMesh(
                np.asarray(_require(entry, "vertices", path), dtype=float),
                np.asarray(_require(entry, "cells", path), dtype=np.int64),
                np.asarray(entry.get("boundary_faces"), dtype=np.int64)
                if entry.get("boundary_faces") is not None else None,
                {k: np.asarray(v, dtype=np.int64)
                 for k, v in entry.get("boundary_patches", {}).items()},
            )
        )
    maps = [np.asarray(m, dtype=np.int64)
            for m in _require(payload, "parent_maps", path)]
    return HexHierarchy(tuple(levels), tuple(maps))


def write_centerline(path, enc: CenterlineEncoding) -> None:
    save_json(path, {
        "schema": "centerline-v1",
        "points": enc.points.tolist(),
        "radii": enc.radii.tolist(),
    })


def read_centerline(path) -> CenterlineEncoding:
    payload = load_json(path, "centerline-v1")
    return CenterlineEncoding(
        np.asarray(_require(payload, "points", path), dtype=float),
        np.asarray(_require(payload, "radii", path), dtype=float),
    )


def write_field(path, field: NodalField) -> None:
    kind = "hex" if isinstance(field.mesh, HexMesh) else "surface"
    save_json(path, {
        "schema": "field-v1",
        "mesh_kind": kind,
        "n_vertices": int(field.mesh.n_vertices),
        "units": field.units,
        "values": field.values.tolist(),
    })


def read_field(path, mesh) -> NodalField:
    payload = load_json(path, "field-v1")
    kind = "hex" if isinstance(mesh, HexMesh) else "surface"
    if payload.get("mesh_kind") != kind:
        raise SchemaError(
            f"{path}: field written for a {payload.get('mesh_kind')!r} mesh, "
            f"got a {kind!r} mesh"
        )
    if payload.get("n_vertices") != mesh.n_vertices:
        raise SchemaError(
            f"{path}: field has {payload.get('n_vertices')} values, mesh has "
            f"{mesh.n_vertices} vertices"
        )
    return NodalField(mesh, np.asarray(_require(payload, "values", path)),
                      payload.get("units", "dimensionless"))


# --- CSV ----------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    """CSV with a header row and RFC-4180 quoting; floats via repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def read_csv(path):
    """Returns ``(header, rows)`` with every cell as a string."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty CSV") from None
        return header, [row for row in reader]
