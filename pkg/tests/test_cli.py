from pathlib import Path

import numpy as np
import pytest

from shapeflow import io
from shapeflow.cli import main
from shapeflow.meshes import CenterlineEncoding
from shapeflow.primitives import box_grid, build_hierarchy, hex_boundary_surface


def build_toy_inputs(root: Path, n_shapes=3):
    (root / "shapes").mkdir(parents=True, exist_ok=True)
    hierarchy = build_hierarchy(box_grid((2, 2, 2)), 2)
    io.write_hierarchy(root / "template_hierarchy.json", hierarchy)
    surf, _ = hex_boundary_surface(hierarchy.finest)
    io.write_obj(root / "template.obj", surf)
    center = surf.vertices.mean(axis=0)
    for i in range(n_shapes):
        s = 1.0 + 0.06 * (i - 1)
        verts = center + (surf.vertices - center) * s
        io.write_obj(root / "shapes" / f"shape_{i:03d}.obj",
                     surf.with_vertices(verts))
        cond = CenterlineEncoding([[s, 0, 0], [0, s, 0], [0, 0, s]],
                                  [s, s, s])
        io.write_centerline(root / "shapes" / f"shape_{i:03d}.centerline.json",
                            cond)
    return hierarchy, surf


def write_config(root: Path, seed=7) -> Path:
    text = f"""
[paths]
template_surface = {root}/template.obj
template_hierarchy = {root}/template_hierarchy.json
shapes_dir = {root}/shapes
output_dir = {root}/out

[global]
seed = {seed}

[registration]
epochs = 60
n_steps = 4
hidden = 16,16
refine_epochs = 20,35,50

[training]
epochs = 100
n_cntrl = 3
n_fourier = 4
head_hidden = 16
trunk_hidden = 24,24
lr = 2e-3
finetune_epochs = 20

[sampling]
n_samples = 4
time_steps = 10

[transport]
n_steps = 2

[analysis]
sections = 0.5,0.5,0.5/0,0,1
"""
    path = root / "toy.ini"
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    build_toy_inputs(root)
    cfg = write_config(root)
    for cmd in ("register", "train"):
        assert main([cmd, "--config", str(cfg)]) == 0
    assert main(["sample", "--config", str(cfg), "--condition",
                 str(root / "shapes" / "shape_001.centerline.json")]) == 0
    assert main(["extend", "--config", str(cfg)]) == 0
    assert main(["analyze", "--config", str(cfg)]) == 0
    return root, cfg


def test_dump_config_succeeds(capsys):
    assert main(["dump-config"]) == 0
    out = capsys.readouterr().out
    assert "[registration]" in out and "sigma_max" in out


def test_usage_error_exit_code_is_1(tmp_path):
    assert main(["register", "--config", str(tmp_path / "missing.ini")]) == 1
    assert main(["nonsense-command"]) == 1


def test_register_zero_shapes_is_ok(tmp_path):
    root = tmp_path
    build_toy_inputs(root, n_shapes=0)
    cfg = write_config(root)
    assert main(["register", "--config", str(cfg)]) == 0
    header, rows = io.read_csv(root / "out" / "register" /
                               "similarity_matrix.csv")
    assert rows == []


def test_register_outputs(pipeline):
    root, _ = pipeline
    out = root / "out" / "register"
    flows = sorted(out.glob("*.timeflow.json"))
    assert len(flows) == 3
    header, rows = io.read_csv(out / "similarity_matrix.csv")
    mat = np.array([[float(x) for x in row[1:]] for row in rows])
    assert mat.shape == (3, 3)
    assert np.allclose(mat, mat.T)
    assert np.allclose(np.diag(mat), 0.0)
    import json
    meta = json.loads((out / "manifest.json").read_text())
    assert meta["seed"] == 7 and meta["n_shapes"] == 3


def test_rerun_without_force_is_idempotent(pipeline):
    root, cfg = pipeline
    flow = root / "out" / "register" / "shape_000.timeflow.json"
    stamp = flow.stat().st_mtime_ns
    assert main(["register", "--config", str(cfg)]) == 0
    assert flow.stat().st_mtime_ns == stamp


def test_sample_alpha_r_scales_condition(pipeline, tmp_path):
    root, cfg = pipeline
    base = io.read_centerline(root / "shapes" / "shape_001.centerline.json")
    rc = main(["sample", "--config", str(cfg), "--force",
               "--condition",
               str(root / "shapes" / "shape_001.centerline.json"),
               "--alpha-r", "0.7"])
    assert rc == 0
    written = io.read_centerline(root / "out" / "sample" / "batch_0" /
                                 "condition.json")
    assert np.array_equal(written.radii, base.radii * 0.7)
    # restore the default-condition sample for downstream tests
    assert main(["sample", "--config", str(cfg), "--force", "--condition",
                 str(root / "shapes" / "shape_001.centerline.json")]) == 0


def test_extend_and_analyze_outputs(pipeline):
    root, _ = pipeline
    hier = io.read_hierarchy(root / "out" / "extend" / "batch_0" /
                             "hierarchy.json")
    assert hier.n_levels == 2
    header, rows = io.read_csv(root / "out" / "analyze" / "qoi.csv")
    assert header == ["qoi", "mu", "sigma", "se", "coverage"]
    import json
    meta = json.loads((root / "out" / "analyze" / "manifest.json").read_text())
    assert meta["n_samples"] >= 1


def test_manifest_has_no_timestamps(pipeline):
    root, _ = pipeline
    import json
    for name in ("register", "train"):
        meta = json.loads((root / "out" / name / "manifest.json").read_text())
        assert set(meta) <= {"config_sha256", "seed", "threads", "version",
                             "n_shapes", "failures", "epochs"}


def test_full_pipeline_byte_identical_reruns(tmp_path):
    def run(where: Path):
        build_toy_inputs(where)
        cfg = write_config(where)
        for cmd in ("register", "train"):
            assert main([cmd, "--config", str(cfg)]) == 0
        assert main(["sample", "--config", str(cfg), "--condition",
                     str(where / "shapes" / "shape_001.centerline.json")]) == 0
        assert main(["extend", "--config", str(cfg)]) == 0
        assert main(["analyze", "--config", str(cfg)]) == 0
        return {
            p.relative_to(where / "out"): p.read_bytes()
            for p in sorted((where / "out").rglob("*")) if p.is_file()
        }

    a = run(tmp_path / "a")
    b = run(tmp_path / "b")
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == b[key], f"output differs: {key}"


def test_analyze_constant_field_and_w1_self_compare(tmp_path):
    import json
    root = tmp_path
    hierarchy, surf = build_toy_inputs(root)
    cfg_path = write_config(root)
    for cmd in ("register", "train"):
        assert main([cmd, "--config", str(cfg_path)]) == 0
    assert main(["sample", "--config", str(cfg_path), "--condition",
                 str(root / "shapes" / "shape_001.centerline.json")]) == 0
    assert main(["extend", "--config", str(cfg_path)]) == 0
    assert main(["analyze", "--config", str(cfg_path)]) == 0

    # synthetic constant fields on the extended geometry
    from shapeflow.meshes import NodalField
    mesh = io.read_hierarchy(root / "out" / "extend" / "batch_0" /
                             "hierarchy.json").finest
    fields = root / "fields"
    fields.mkdir()
    p0 = 1234.5
    io.write_field(fields / "batch_0.pressure.json",
                   NodalField(mesh, np.full(mesh.n_vertices, p0), "Pa"))
    u = np.zeros((mesh.n_vertices, 3))
    u[:, 2] = 0.75
    io.write_field(fields / "batch_0.velocity.json",
                   NodalField(mesh, u, "m/s"))

    # rerun analyze with fields and a self-comparison: W1 columns all zero
    text = cfg_path.read_text().replace(
        "fields_dir =", "").replace("[paths]",
                                    f"[paths]\nfields_dir = {fields}")
    text = text.replace(
        "sections = 0.5,0.5,0.5/0,0,1",
        "sections = 0.5,0.5,0.5/0,0,1\ncompare = "
        + str(root / "out" / "analyze" / "qoi_samples.csv"))
    cfg_path.write_text(text)
    assert main(["analyze", "--config", str(cfg_path), "--force"]) == 0

    header, rows = io.read_csv(root / "out" / "analyze" / "qoi.csv")
    table = {row[0]: row[1:] for row in rows}
    mu, sigma_col = float(table["mean_pressure"][0]), float(
        table["mean_pressure"][1])
    assert mu == pytest.approx(p0, rel=1e-9)
    assert sigma_col == 0.0  # single constant field
    assert float(table["mean_wss"][0]) == pytest.approx(0.0, abs=1e-9)

    header, w1_rows = io.read_csv(root / "out" / "analyze" / "w1.csv")
    assert len(w1_rows) > 0
    for name, value in w1_rows:
        assert float(value) == 0.0


def test_sample_sigma_zero_deterministic_endpoint(tmp_path):
    root = tmp_path
    build_toy_inputs(root)
    cfg = write_config(root)
    for cmd in ("register", "train"):
        assert main([cmd, "--config", str(cfg)]) == 0
    cond = str(root / "shapes" / "shape_001.centerline.json")
    assert main(["sample", "--config", str(cfg), "--condition", cond,
                 "--n-samples", "1", "--sigma", "0"]) == 0
    first = (root / "out" / "sample" / "batch_0" /
             "displacement.json").read_bytes()
    assert main(["sample", "--config", str(cfg), "--force", "--condition",
                 cond, "--n-samples", "1", "--sigma", "0", "--seed",
                 "99"]) == 0
    second = (root / "out" / "sample" / "batch_0" /
              "displacement.json").read_bytes()
    # zero noise, one sample: the endpoint ignores the seed entirely
    assert first == second


def test_extend_excludes_invalid_geometry_without_failing(tmp_path):
    import json
    root = tmp_path
    hierarchy, surf = build_toy_inputs(root)
    cfg = write_config(root)
    for cmd in ("register", "train"):
        assert main([cmd, "--config", str(cfg)]) == 0
    assert main(["sample", "--config", str(cfg), "--condition",
                 str(root / "shapes" / "shape_001.centerline.json")]) == 0
    # fabricate an adversarial pinch batch: boundary collapses through itself
    from shapeflow.meshes import NodalField
    bad_dir = root / "out" / "sample" / "batch_pinch"
    bad_dir.mkdir(parents=True)
    center = surf.vertices.mean(axis=0)
    pinch = -1.4 * (surf.vertices - center)
    io.write_field(bad_dir / "displacement.json",
                   NodalField(surf, pinch, units="mm"))
    assert main(["extend", "--config", str(cfg)]) == 0  # batch still ok
    meta = json.loads((root / "out" / "extend" / "manifest.json").read_text())
    status = {g["tag"]: g for g in meta["geometries"]}
    assert status["batch_0"]["status"] == "ok"
    assert status["batch_pinch"]["status"] == "excluded"
    assert "inverted" in status["batch_pinch"]["reason"]
    assert not (root / "out" / "extend" / "batch_pinch").exists()
