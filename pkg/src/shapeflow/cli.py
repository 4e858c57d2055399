"""Pipeline driver: register -> train -> sample -> extend -> analyze.

Configuration lives in a human-readable INI file (see ``dump-config`` for
the full default set).  Every output directory receives a ``manifest.json``
recording the config hash, the seed, and the package version, and contains
no timestamps, so a rerun at thread count 1 reproduces every byte.
Subcommands skip work whose outputs already exist unless ``--force`` is
given.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .interpolant import (
    DriftNet,
    DriftNetConfig,
    SigmaSchedule,
    TrainingConfig,
    finetune,
    load_driftnet,
    perturb_condition,
    sample,
    save_driftnet,
    train,
)
from .meshes import NodalField
from .biomarkers import (
    batch_shape_stats,
    monte_carlo_estimate,
    nanmean_with_coverage,
    wall_shear_stress,
    wasserstein1,
    sfd,
    nfd,
)
from .geometry import cross_section, vertex_normals, EmptySectionError
from .primitives import hex_boundary_surface
from .registration import (
    RegistrationConfig,
    load_timeflow,
    register,
    save_timeflow,
    similarity_matrix,
)
from .transport import (
    ElasticExtensionConfig,
    InvalidVolumeMeshError,
    SmoothingConfig,
    extend_displacement,
    propagate_hierarchy,
)

_DEFAULTS = {
    "paths": {
        "template_surface": "",
        "template_hierarchy": "",
        "shapes_dir": "",
        "fields_dir": "",
        "output_dir": "out",
    },
    "global": {
        "seed": "0",
        "threads": "1",
    },
    "registration": {
        "epochs": "600",
        "n_steps": "8",
        "hidden": "32,32",
        "lr": "1e-3",
        "lambda_fid": "1.0",
        "lambda_grad": "0.1",
        "refine_epochs": "150,250,400",
        "stage_fractions": "0.25,0.5,1.0",
        "init_scale": "1e-2",
    },
    "training": {
        "epochs": "2750",
        "batch_size": "4",
        "lr": "1e-4",
        "plateau_patience": "100",
        "plateau_decay": "0.5",
        "finetune_epochs": "1750",
        "n_fourier": "8",
        "head_hidden": "128",
        "trunk_hidden": "64,64",
        "message_passing_rounds": "0",
        "k_neighbors": "12",
        "n_cntrl": "3",
    },
    "schedule": {
        "mode": "karras",
        "sigma_max": "0.002",
        "sigma_min": "0.001",
        "rho": "1.0",
        "sigma": "1.0",
    },
    "sampling": {
        "n_samples": "32",
        "time_steps": "50",
        "alpha_r": "1.0",
        "gauss_amplitude": "0.0",
        "gauss_length": "1.0",
        "batch_name": "batch_0",
    },
    "transport": {
        "n_steps": "8",
        "poisson": "0.3",
        "solver_tol": "1e-10",
        "solver_maxiter": "20000",
        "repair_passes": "20",
        "bad_fraction": "0.75",
        "stop_threshold": "100.0",
        "smooth_max_iters": "500",
    },
    "analysis": {
        "viscosity": "3.5e-3",
        "sections": "",
        "compare": "",
    },
}


class UsageError(Exception):
    pass


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


class PipelineConfig:
    """Validated view over the INI configuration."""

    def __init__(self, parser: configparser.ConfigParser):
        for section, keys in _DEFAULTS.items():
            if not parser.has_section(section):
                parser.add_section(section)
            for key, value in keys.items():
                if not parser.has_option(section, key):
                    parser.set(section, key, value)
        unknown = [
            f"{s}.{k}"
            for s in parser.sections()
            for k in parser[s]
            if s not in _DEFAULTS or k not in _DEFAULTS[s]
        ]
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        self.raw = parser
        g = parser["global"]
        self.seed = g.getint("seed")
        self.threads = int(os.environ.get("SHAPEFLOW_THREADS",
                                          g.get("threads")))
        p = parser["paths"]
        root = os.environ.get("SHAPEFLOW_OUTPUT_ROOT", "")
        self.output_dir = Path(root) / p.get("output_dir") if root \
            else Path(p.get("output_dir"))
        self.template_surface = p.get("template_surface")
        self.template_hierarchy = p.get("template_hierarchy")
        self.shapes_dir = p.get("shapes_dir")
        self.fields_dir = p.get("fields_dir")

    def digest(self) -> str:
        # paths identify the environment, not the computation: leaving them
        # out keeps reruns byte-identical wherever the data lives
        payload = []
        for section in sorted(self.raw.sections()):
            if section == "paths":
                continue
            for key in sorted(self.raw[section]):
                payload.append(f"{section}.{key}={self.raw[section][key]}")
        return hashlib.sha256("\n".join(payload).encode()).hexdigest()

    def registration_config(self) -> RegistrationConfig:
        r = self.raw["registration"]
        return RegistrationConfig(
            n_steps=r.getint("n_steps"),
            hidden=_ints(r.get("hidden")),
            lambda_fid=r.getfloat("lambda_fid"),
            lambda_grad=r.getfloat("lambda_grad"),
            epochs=r.getint("epochs"),
            lr=r.getfloat("lr"),
            refine_epochs=_ints(r.get("refine_epochs")),
            stage_fractions=_floats(r.get("stage_fractions")),
            seed=self.seed,
            init_scale=r.getfloat("init_scale"),
        )

    def schedule(self) -> SigmaSchedule:
        s = self.raw["schedule"]
        return SigmaSchedule(
            mode=s.get("mode"),
            sigma_max=s.getfloat("sigma_max"),
            sigma_min=s.getfloat("sigma_min"),
            rho=s.getfloat("rho"),
            sigma=s.getfloat("sigma"),
        )

    def training_config(self) -> TrainingConfig:
        t = self.raw["training"]
        return TrainingConfig(
            epochs=t.getint("epochs"),
            batch_size=t.getint("batch_size"),
            lr=t.getfloat("lr"),
            plateau_patience=t.getint("plateau_patience"),
            plateau_decay=t.getfloat("plateau_decay"),
            finetune_epochs=t.getint("finetune_epochs"),
            seed=self.seed,
            schedule=self.schedule(),
        )

    def driftnet_config(self) -> DriftNetConfig:
        t = self.raw["training"]
        return DriftNetConfig(
            n_cntrl=t.getint("n_cntrl"),
            n_fourier=t.getint("n_fourier"),
            head_hidden=t.getint("head_hidden"),
            trunk_hidden=_ints(t.get("trunk_hidden")),
            message_passing_rounds=t.getint("message_passing_rounds"),
            k_neighbors=t.getint("k_neighbors"),
        )

    def extension_config(self) -> ElasticExtensionConfig:
        t = self.raw["transport"]
        return ElasticExtensionConfig(
            n_steps=t.getint("n_steps"),
            poisson=t.getfloat("poisson"),
            solver_tol=t.getfloat("solver_tol"),
            solver_maxiter=t.getint("solver_maxiter"),
            repair_max_passes=t.getint("repair_passes"),
        )

    def smoothing_config(self) -> SmoothingConfig:
        t = self.raw["transport"]
        return SmoothingConfig(
            bad_fraction=t.getfloat("bad_fraction"),
            stop_threshold=t.getfloat("stop_threshold"),
            max_iters=t.getint("smooth_max_iters"),
        )


def load_config(path) -> PipelineConfig:
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise UsageError(f"cannot read config file {path}")
    return PipelineConfig(parser)


def _manifest(cfg: PipelineConfig, extra=None) -> dict:
    payload = {
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "version": __version__,
    }
    payload.update(extra or {})
    return payload


def _write_manifest(path, cfg, extra=None):
    io.save_json(path, _manifest(cfg, extra))


# --- subcommands -----------------------------------------------------------------

def cmd_register(cfg: PipelineConfig, force: bool) -> int:
    shapes_dir = Path(cfg.shapes_dir)
    if not cfg.template_surface or not Path(cfg.template_surface).exists():
        raise UsageError("paths.template_surface must point to an existing OBJ")
    template = io.read_obj(cfg.template_surface)
    out = cfg.output_dir / "register"
    out.mkdir(parents=True, exist_ok=True)
    shapes = sorted(shapes_dir.glob("*.obj")) if cfg.shapes_dir else []
    rcfg = cfg.registration_config()
    failures = []
    flows = []
    for path in shapes:
        dest = out / f"{path.stem}.timeflow.json"
        if dest.exists() and not force:
            flows.append(load_timeflow(dest))
            continue
        try:
            result = register(template, io.read_obj(path), rcfg)
        except Exception as exc:  # per-shape failure listed, batch continues
            failures.append((path.stem, str(exc)))
            continue
        save_timeflow(dest, result.flow)
        io.write_csv(out / f"{path.stem}.energy.csv", ["epoch", "energy"],
                     list(enumerate(result.energy_trace.tolist())))
        flows.append(result.flow)
    matrix_path = out / "similarity_matrix.csv"
    if force or not matrix_path.exists():
        if len(flows) >= 2:
            matrix = similarity_matrix(flows, template.vertices)
        else:
            matrix = np.zeros((len(flows), len(flows)))
        header = ["shape"] + [p.stem for p in shapes]
        rows = [[p.stem] + matrix[i].tolist() for i, p in enumerate(shapes)]
        io.write_csv(matrix_path, header, rows)
    _write_manifest(out / "manifest.json", cfg, {
        "n_shapes": len(shapes),
        "failures": [list(f) for f in failures],
    })
    if failures:
        for name, msg in failures:
            print(f"registration failed for {name}: {msg}", file=sys.stderr)
        return 2
    return 0


def _template_points(cfg: PipelineConfig):
    """Surface vertex set the generative model operates on."""
    if cfg.template_hierarchy and Path(cfg.template_hierarchy).exists():
        hierarchy = io.read_hierarchy(cfg.template_hierarchy)
        surf, vmap = hex_boundary_surface(hierarchy.finest)
        return surf, vmap, hierarchy
    if cfg.template_surface and Path(cfg.template_surface).exists():
        surf = io.read_obj(cfg.template_surface)
        return surf, np.arange(surf.n_vertices), None
    raise UsageError("need paths.template_hierarchy or paths.template_surface")


def _load_pairs(cfg: PipelineConfig):
    out = cfg.output_dir / "register"
    shapes_dir = Path(cfg.shapes_dir)
    pairs = []
    for flow_path in sorted(out.glob("*.timeflow.json")):
        stem = flow_path.name.replace(".timeflow.json", "")
        cond_path = shapes_dir / f"{stem}.centerline.json"
        if not cond_path.exists():
            raise UsageError(f"missing conditioning file {cond_path}")
        pairs.append((load_timeflow(flow_path), io.read_centerline(cond_path)))
    if not pairs:
        raise UsageError("no registered flows found; run `register` first")
    return pairs


def cmd_train(cfg: PipelineConfig, force: bool, finetuning: bool) -> int:
    stage = "finetune" if finetuning else "train"
    out = cfg.output_dir / stage
    dest = out / "driftnet.json"
    if dest.exists() and not force:
        return 0
    pairs = _load_pairs(cfg)
    surf, _, _ = _template_points(cfg)
    tcfg = cfg.training_config()
    if finetuning:
        source = cfg.output_dir / "train" / "driftnet.json"
        if not source.exists():
            raise UsageError("finetune needs a trained checkpoint; run `train`")
        net, _, _ = load_driftnet(source)
        net, trace = finetune(net, pairs, tcfg, surf.vertices)
    else:
        rng = np.random.default_rng(cfg.seed)
        net = DriftNet(cfg.driftnet_config(), surf.vertices, rng=rng)
        net, trace = train(pairs, surf.vertices, net, tcfg)
    out.mkdir(parents=True, exist_ok=True)
    save_driftnet(dest, net, seed=cfg.seed, loss_trace=trace)
    io.write_csv(out / "loss.csv", ["epoch", "loss"],
                 list(enumerate(trace)))
    _write_manifest(out / "manifest.json", cfg, {"epochs": len(trace)})
    return 0


def cmd_sample(cfg: PipelineConfig, force: bool, args) -> int:
    out = cfg.output_dir / "sample" / cfg.raw["sampling"]["batch_name"]
    if (out / "manifest.json").exists() and not force:
        return 0
    checkpoint = cfg.output_dir / "train" / "driftnet.json"
    fine = cfg.output_dir / "finetune" / "driftnet.json"
    if fine.exists():
        checkpoint = fine
    if not checkpoint.exists():
        raise UsageError("no drift checkpoint found; run `train` first")
    net, _, _ = load_driftnet(checkpoint)
    surf, _, _ = _template_points(cfg)
    s = cfg.raw["sampling"]
    seed = args.seed if args.seed is not None else cfg.seed
    n_samples = args.n_samples or s.getint("n_samples")
    n_steps = args.time_steps or s.getint("time_steps")
    alpha_r = args.alpha_r if args.alpha_r is not None else s.getfloat("alpha_r")
    amplitude = (args.gauss_amplitude if args.gauss_amplitude is not None
                 else s.getfloat("gauss_amplitude"))
    condition = io.read_centerline(args.condition) if args.condition else None
    if condition is None:
        raise UsageError("--condition <centerline-v1 json> is required")
    condition = perturb_condition(
        condition, alpha_r,
        (s.getfloat("gauss_length"), amplitude, seed) if amplitude else None,
    )
    grid = np.linspace(0.0, 1.0, n_steps + 1)
    schedule = cfg.schedule()
    if args.sigma is not None:
        import dataclasses
        schedule = dataclasses.replace(schedule, sigma_max=args.sigma,
                                       sigma_min=args.sigma, sigma=args.sigma)
    mean_endpoint, _ = sample(net, surf.vertices, condition, n_samples, grid,
                              schedule, seed=seed)
    displacement = mean_endpoint - surf.vertices
    out.mkdir(parents=True, exist_ok=True)
    io.write_field(out / "displacement.json",
                   NodalField(surf, displacement, units="mm"))
    io.write_centerline(out / "condition.json", condition)
    _write_manifest(out / "manifest.json", cfg, {
        "seed": seed,
        "n_samples": n_samples,
        "time_steps": n_steps,
        "alpha_r": alpha_r,
        "gauss_amplitude": amplitude,
        "schedule": {
            "mode": schedule.mode, "sigma_max": schedule.sigma_max,
            "sigma_min": schedule.sigma_min, "rho": schedule.rho,
            "sigma": schedule.sigma,
        },
        "checkpoint": checkpoint.name,
    })
    return 0


def cmd_extend(cfg: PipelineConfig, force: bool) -> int:
    surf, vmap, hierarchy = _template_points(cfg)
    if hierarchy is None:
        raise UsageError("extend needs paths.template_hierarchy")
    sample_root = cfg.output_dir / "sample"
    out_root = cfg.output_dir / "extend"
    out_root.mkdir(parents=True, exist_ok=True)
    ext_cfg = cfg.extension_config()
    smooth_cfg = cfg.smoothing_config()
    statuses = []
    finest = hierarchy.finest
    bverts = np.flatnonzero(finest.boundary_vertex_mask())
    order = {v: i for i, v in enumerate(bverts)}
    for disp_path in sorted(sample_root.glob("*/displacement.json")):
        tag = disp_path.parent.name
        dest = out_root / tag
        if (dest / "hierarchy.json").exists() and not force:
            statuses.append({"tag": tag, "status": "ok", "cached": True})
            continue
        field = io.read_field(disp_path, surf)
        disp = np.zeros((len(bverts), 3))
        disp[[order[v] for v in vmap]] = field.values
        try:
            _, accum, trace = extend_displacement(hierarchy, disp, ext_cfg)
            displaced = propagate_hierarchy(hierarchy, accum, smooth_cfg)
        except InvalidVolumeMeshError as exc:
            statuses.append({"tag": tag, "status": "excluded",
                             "reason": str(exc)})
            continue
        dest.mkdir(parents=True, exist_ok=True)
        io.write_hierarchy(dest / "hierarchy.json", displaced)
        rows = [(step, s, inv_before, inv_after)
                for step, s, inv_before, inv_after in trace]
        io.write_csv(dest / "quality.csv",
                     ["step", "schedule", "inversions_before",
                      "inversions_after"], rows)
        statuses.append({"tag": tag, "status": "ok"})
    _write_manifest(out_root / "manifest.json", cfg, {"geometries": statuses})
    return 0


def _parse_sections(spec: str):
    sections = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            point_text, normal_text = part.split("/")
            point = [float(x) for x in point_text.split(",")]
            normal = [float(x) for x in normal_text.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad section spec {part!r}: "
                             "expected 'x,y,z/nx,ny,nz'") from exc
        sections.append((np.asarray(point), np.asarray(normal)))
    return sections


def _sample_qois(mesh, velocity, pressure, sections, viscosity):
    """Scalar QoIs of one geometry; NaN marks unavailable entries."""
    qois = {}
    if velocity is not None:
        speed = np.linalg.norm(velocity.values, axis=1)
        qois["max_velocity"] = float(speed.max())
        surf, vmap = hex_boundary_surface(mesh)
        normals = vertex_normals(surf)
        tau, valid = wall_shear_stress(velocity, surf.vertices, normals,
                                       viscosity)
        mags = np.where(valid, np.linalg.norm(tau, axis=1), np.nan)
        qois["mean_wss"], _ = nanmean_with_coverage(mags)
    else:
        qois["max_velocity"] = float("nan")
        qois["mean_wss"] = float("nan")
    if pressure is not None:
        from .geometry import volume_mean
        qois["mean_pressure"] = float(volume_mean(pressure))
    else:
        qois["mean_pressure"] = float("nan")
    for k, (point, normal) in enumerate(sections):
        tag = f"section_{k + 1}"
        if velocity is None:
            qois[f"sfd_{tag}"] = float("nan")
            qois[f"nfd_{tag}"] = float("nan")
            qois[f"flow_{tag}"] = float("nan")
            continue
        try:
            sec = cross_section(mesh, velocity, point, normal)
        except EmptySectionError:
            qois[f"sfd_{tag}"] = float("nan")
            qois[f"nfd_{tag}"] = float("nan")
            qois[f"flow_{tag}"] = float("nan")
            continue
        qois[f"sfd_{tag}"] = sfd(sec)
        qois[f"nfd_{tag}"] = nfd(sec)
        qois[f"flow_{tag}"] = float(
            np.sum(sec.weights * (sec.values @ sec.normal)))
    return qois


def cmd_analyze(cfg: PipelineConfig, force: bool) -> int:
    out = cfg.output_dir / "analyze"
    if (out / "manifest.json").exists() and not force:
        return 0
    surf, vmap, _ = _template_points(cfg)
    sample_root = cfg.output_dir / "sample"
    extend_root = cfg.output_dir / "extend"
    fields_dir = Path(cfg.fields_dir) if cfg.fields_dir else None
    sections = _parse_sections(cfg.raw["analysis"]["sections"])
    viscosity = cfg.raw["analysis"].getfloat("viscosity")

    tags = sorted(p.parent.name for p in sample_root.glob("*/displacement.json"))
    if not tags:
        raise UsageError("nothing to analyze; run `sample` first")
    surfaces = []
    per_sample = {}
    for tag in tags:
        field = io.read_field(sample_root / tag / "displacement.json", surf)
        surfaces.append(surf.with_vertices(surf.vertices + field.values))
        mesh = None
        hier_path = extend_root / tag / "hierarchy.json"
        if hier_path.exists():
            mesh = io.read_hierarchy(hier_path).finest
        velocity = pressure = None
        if fields_dir is not None and mesh is not None:
            vel_path = fields_dir / f"{tag}.velocity.json"
            prs_path = fields_dir / f"{tag}.pressure.json"
            if vel_path.exists():
                velocity = io.read_field(vel_path, mesh)
            if prs_path.exists():
                pressure = io.read_field(prs_path, mesh)
        if mesh is not None:
            per_sample[tag] = _sample_qois(mesh, velocity, pressure,
                                           sections, viscosity)
        else:
            per_sample[tag] = {}

    out.mkdir(parents=True, exist_ok=True)
    if len(surfaces) >= 2:
        stats = batch_shape_stats(surfaces)
        io.write_csv(out / "batch_stats.csv",
                     ["n_shapes", "mean_pairwise_chamfer_mm",
                      "rms_vertex_std_mm"],
                     [[len(surfaces), stats.mean_pairwise_chamfer,
                       stats.rms_vertex_std]])

    qoi_names = sorted({k for q in per_sample.values() for k in q})
    sample_rows = []
    for tag in tags:
        for name in qoi_names:
            value = per_sample[tag].get(name, float("nan"))
            sample_rows.append([tag, name, value])
    io.write_csv(out / "qoi_samples.csv", ["sample", "qoi", "value"],
                 sample_rows)

    table_rows = []
    for name in qoi_names:
        values = np.array([per_sample[t].get(name, float("nan"))
                           for t in tags])
        good = values[np.isfinite(values)]
        if len(good) == 0:
            table_rows.append([name, float("nan"), float("nan"),
                               float("nan"), 0])
        else:
            mean, std, se = monte_carlo_estimate(good)
            table_rows.append([name, mean,
                               std if np.isfinite(std) else 0.0,
                               se if np.isfinite(se) else 0.0, len(good)])
    io.write_csv(out / "qoi.csv", ["qoi", "mu", "sigma", "se", "coverage"],
                 table_rows)

    compare = cfg.raw["analysis"]["compare"]
    if compare:
        other = _read_qoi_samples(Path(compare))
        mine = _read_qoi_samples(out / "qoi_samples.csv")
        rows = []
        for name in sorted(set(mine) & set(other)):
            a = [v for v in mine[name] if np.isfinite(v)]
            b = [v for v in other[name] if np.isfinite(v)]
            if a and b:
                rows.append([name, wasserstein1(a, b)])
        io.write_csv(out / "w1.csv", ["qoi", "w1"], rows)
    _write_manifest(out / "manifest.json", cfg, {"n_samples": len(tags)})
    return 0


def _read_qoi_samples(path):
    header, rows = io.read_csv(path)
    out = {}
    for _, name, value in rows:
        out.setdefault(name, []).append(float(value))
    return out


def cmd_dump_config() -> int:
    parser = configparser.ConfigParser()
    for section, keys in _DEFAULTS.items():
        parser[section] = dict(keys)
    parser.write(sys.stdout)
    return 0


# --- entry point --------------------------------------------------------------------

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="shapeflow",
        description="Shape generative modeling and mesh-transport pipeline",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("register", "train", "finetune", "extend", "analyze"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=False)
        p.add_argument("--force", action="store_true")
    p = sub.add_parser("sample")
    p.add_argument("--config", required=False)
    p.add_argument("--force", action="store_true")
    p.add_argument("--condition", help="centerline-v1 JSON conditioning file")
    p.add_argument("--alpha-r", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None,
                   help="override the noise amplitude (0 for deterministic)")
    p.add_argument("--gauss-amplitude", type=float, default=None)
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--time-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    sub.add_parser("dump-config")
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; remap to 1
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "dump-config":
            return cmd_dump_config()
        cfg = load_config(args.config)
        if args.command == "register":
            return cmd_register(cfg, args.force)
        if args.command == "train":
            return cmd_train(cfg, args.force, finetuning=False)
        if args.command == "finetune":
            return cmd_train(cfg, args.force, finetuning=True)
        if args.command == "sample":
            return cmd_sample(cfg, args.force, args)
        if args.command == "extend":
            return cmd_extend(cfg, args.force)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.force)
        raise UsageError(f"unknown command {args.command}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
