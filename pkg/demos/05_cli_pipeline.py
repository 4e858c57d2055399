#!/usr/bin/env python3
# The command-line pipeline end to end on generated toy data.
#
# Builds a box-shaped "vessel" hierarchy and three scaled target shapes,
# then drives register -> train -> sample -> extend -> analyze through the
# same entry point the `shapeflow` console script uses.  Everything lands
# in a temporary directory with a manifest per stage.

import tempfile
from pathlib import Path

import numpy as np

from shapeflow import io
from shapeflow.cli import main
from shapeflow.meshes import CenterlineEncoding
from shapeflow.primitives import box_grid, build_hierarchy, hex_boundary_surface

root = Path(tempfile.mkdtemp(prefix="shapeflow_demo_"))
print(f"working in {root}")
(root / "shapes").mkdir()

hierarchy = build_hierarchy(box_grid((2, 2, 2)), 2)
io.write_hierarchy(root / "template_hierarchy.json", hierarchy)
surface, _ = hex_boundary_surface(hierarchy.finest)
io.write_obj(root / "template.obj", surface)

center = surface.vertices.mean(axis=0)
for i in range(3):
    s = 1.0 + 0.06 * (i - 1)
    verts = center + (surface.vertices - center) * s
    io.write_obj(root / "shapes" / f"shape_{i:03d}.obj",
                 surface.with_vertices(verts))
    io.write_centerline(root / "shapes" / f"shape_{i:03d}.centerline.json",
                        CenterlineEncoding([[s, 0, 0], [0, s, 0], [0, 0, s]],
                                           [s, s, s]))

(root / "toy.ini").write_text(f"""
[paths]
template_surface = {root}/template.obj
template_hierarchy = {root}/template_hierarchy.json
shapes_dir = {root}/shapes
output_dir = {root}/out

[global]
seed = 7

[registration]
epochs = 80
n_steps = 4
hidden = 16,16
refine_epochs = 25,45,65

[training]
epochs = 150
n_cntrl = 3
n_fourier = 4
head_hidden = 16
trunk_hidden = 24,24
lr = 2e-3

[sampling]
n_samples = 8
time_steps = 20

[transport]
n_steps = 3

[analysis]
sections = 0.5,0.5,0.5/0,0,1
""")

config = str(root / "toy.ini")
for stage in (["register", "--config", config],
              ["train", "--config", config],
              ["sample", "--config", config, "--condition",
               str(root / "shapes" / "shape_001.centerline.json"),
               "--alpha-r", "1.0"],
              ["extend", "--config", config]):
    rc = main(stage)
    print(f"{stage[0]:<9s} exit code {rc}")
    assert rc == 0

# flow fields usually come from an external solver; here a synthetic
# pressure gradient and axial velocity stand in so analyze has data
from shapeflow.meshes import NodalField
mesh = io.read_hierarchy(root / "out" / "extend" / "batch_0" /
                         "hierarchy.json").finest
fields = root / "fields"
fields.mkdir()
io.write_field(fields / "batch_0.pressure.json",
               NodalField(mesh, 2000.0 - 400.0 * mesh.vertices[:, 2], "Pa"))
u = np.zeros((mesh.n_vertices, 3))
u[:, 2] = 0.4
io.write_field(fields / "batch_0.velocity.json", NodalField(mesh, u, "m/s"))
(root / "toy.ini").write_text(
    (root / "toy.ini").read_text().replace(
        "[paths]", f"[paths]\nfields_dir = {fields}"))

rc = main(["analyze", "--config", config])
print(f"analyze   exit code {rc}")
assert rc == 0

print("\noutputs:")
for p in sorted((root / "out").rglob("*")):
    if p.is_file():
        print("  ", p.relative_to(root))

header, rows = io.read_csv(root / "out" / "analyze" / "qoi.csv")
print("\nQoI table (", ", ".join(header), ")")
for row in rows:
    print("  ", row)
