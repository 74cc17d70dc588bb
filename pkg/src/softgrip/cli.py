"""Pipeline command line: stage subcommands over one seeded config.

Each stage reads its upstream artifacts from the run directory and
writes its declared outputs there; reruns with the same config and seed
reproduce identical artifacts.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import codesign as cd
from .config import PipelineConfig, config_dict, load_config
from .datagen import (
    config_hash,
    generate_dataset,
    read_dataset,
    write_dataset,
    write_manifest,
)
from .errors import DivergenceError, MissingArtifactError, SoftgripError
from .fem.plate import run_plate_press
from .fem.scene import Scene
from .fem.sim import evaluate_success, run_episode
from .geometry.finger import build_gripper_mesh, save_obj
from .geometry.pointcloud import extract_partial_pointcloud
from .geometry.sdf import ShapeSDF
from .posegen import (
    GraspPose,
    InitWeights,
    PoseNoiseParams,
    perturb_pose,
    poses_from_jsonl,
    poses_to_jsonl,
    refine_pose,
    sample_candidate_poses,
)
from .reports import SvgChart
from .surrogate import (
    SurrogateModel,
    load_model,
    save_model,
    timing_ratio,
    train,
)
from .tendon import gripper_routes, route_to_json

STAGES = ("mesh", "route", "simulate", "poses", "gen-data", "train",
          "codesign", "select", "evaluate", "report")


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(path)
    return path


def _gripper(cfg: PipelineConfig):
    return build_gripper_mesh(cfg.finger, cfg.palm_span)


def _update_manifest(out: Path, stage: str, files: list[Path],
                     cfg: PipelineConfig) -> None:
    man_path = out / "run_manifest.json"
    manifest = {}
    if man_path.exists():
        manifest = json.loads(man_path.read_text())
    manifest.setdefault("stages", {})[stage] = {
        "files": sorted(str(f.relative_to(out)) for f in files),
    }
    manifest["seed"] = cfg.seed
    manifest["config_sha256"] = config_hash(config_dict(cfg))
    man_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))


def stage_mesh(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    obj_path = out / "gripper.obj"
    save_obj(obj_path, g.mesh.vertices, g.mesh.surface_tris)
    blocks_path = out / "blocks.json"
    vols = g.mesh.tet_volumes()
    blocks_path.write_text(json.dumps({
        "n_blocks": int(g.mesh.block_ids.max()) + 1,
        "tets_per_block": [int((g.mesh.block_ids == b).sum())
                           for b in range(g.n_blocks)],
        "volume_per_block": [float(vols[g.mesh.block_ids == b].sum())
                             for b in range(g.n_blocks)],
        "total_volume": float(vols.sum()),
    }, indent=1))
    return [obj_path, blocks_path]


def stage_route(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    files = []
    for i, route in enumerate(gripper_routes(g)):
        p = out / f"route_finger{i}.json"
        route_to_json(route, p)
        files.append(p)
    return files


def _valid_poses_for(cfg: PipelineConfig, obj: ShapeSDF, gripper,
                     seed: int, n: int) -> list[GraspPose]:
    noise = PoseNoiseParams()
    weights = InitWeights()
    cands = sample_candidate_poses(obj, gripper, n, seed)
    out = []
    for pi, cand in enumerate(cands):
        noisy = perturb_pose(cand, noise, seed + 131 * pi + 1)
        out.append(refine_pose(noisy, obj, gripper, weights))
    return out


def stage_simulate(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    density = float(cfg.evaluate.get("density", 8.0))
    obj = cfg.geometry_objects(density)[0]
    poses = [p for p in _valid_poses_for(cfg, obj, g, cfg.seed, 4) if p.valid]
    if not poses:
        raise SoftgripError("no valid demo pose found; adjust the config")
    k = np.full(22, 4e6)
    scene = Scene(g, obj=obj, params=cfg.sim)
    outcome, trace = run_episode(scene, k, poses[0].as_vector(), cfg.script)
    trace_path = out / "trace.csv"
    trace.to_csv(trace_path)
    outcome_path = out / "outcome.json"
    outcome_path.write_text(json.dumps({
        "wrench": outcome.wrench.tolist(),
        "dq": outcome.dq.tolist(),
        "c_g": outcome.ground_contact,
        "success": evaluate_success(trace),
        "pose": poses[0].as_vector().tolist(),
    }, indent=1))
    plate = {}
    for routing in ("law", "uniform"):
        r = run_plate_press(routing)
        plate[routing] = {
            "segment_forces": r.segment_forces.tolist(),
            "cv": r.cv,
            "tip_share": r.tip_share,
            "total_force": r.total_force,
        }
    plate_path = out / "plate.json"
    plate_path.write_text(json.dumps(plate, indent=1))
    return [trace_path, outcome_path, plate_path]


def stage_poses(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    files = []
    n = int(cfg.datagen.get("n_poses", 12))
    for i, (spec, density, name) in enumerate(cfg.object_variants()):
        obj = spec.build(density, name)
        poses = _valid_poses_for(cfg, obj, g, cfg.seed + 7919 * i, n)
        p = out / f"poses_{name}.jsonl"
        poses_to_jsonl(poses, p)
        files.append(p)
    return files


def stage_gen_data(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    objects = [spec.build(density, name)
               for spec, density, name in cfg.object_variants()]
    records, stats = generate_dataset(
        objects, g,
        n_poses=int(cfg.datagen.get("n_poses", 12)),
        n_stiffness=int(cfg.datagen.get("n_stiffness", 10)),
        script=cfg.script,
        seed=cfg.seed,
        sim_params=cfg.sim,
        distribution=cfg.datagen.get("distribution", "log-uniform"),
        n_points=int(cfg.datagen.get("n_points", 256)),
        workers=int(cfg.datagen.get("workers", 2)),
    )
    ds_path = out / "dataset.jsonl"
    write_dataset(records, ds_path)
    man_path = out / "dataset_manifest.json"
    write_manifest(man_path, cfg.seed, stats, config_dict(cfg))
    return [ds_path, man_path]


def stage_train(cfg: PipelineConfig, out: Path) -> list[Path]:
    records = read_dataset(_require(out / "dataset.jsonl"))
    model = SurrogateModel(seed=cfg.seed)
    result = train(model, records, cfg.train)
    model_path = out / "model.bin"
    save_model(model, model_path)
    losses_path = out / "losses.csv"
    with open(losses_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_l1", "val_l1"])
        w.writerow([0, "", result.untrained_val_l1])
        for e, (tr, va) in enumerate(zip(result.train_l1, result.val_l1), 1):
            w.writerow([e, tr, va])
    return [model_path, out / "model.bin.json", losses_path]


def _load_pose_sets(cfg: PipelineConfig, out: Path, gripper,
                    density_filter: float | None = None):
    """Valid pose candidates (with clouds) per object variant."""
    sets = []
    names = []
    for spec, density, name in cfg.object_variants():
        if density_filter is not None and density != density_filter:
            continue
        obj = spec.build(density, name)
        poses = [p for p in
                 poses_from_jsonl(_require(out / f"poses_{name}.jsonl"))
                 if p.valid]
        cands = []
        kept = []
        for pi, pose in enumerate(poses):
            lo, hi = gripper.aabb(pose.translation, pose.matrix(),
                                  pose.s1, pose.s2)
            try:
                cloud_w = extract_partial_pointcloud(
                    obj, (lo, hi), int(cfg.datagen.get("n_points", 256)),
                    cfg.seed + 977 * pi)
            except SoftgripError:
                continue
            rot = pose.matrix()
            cloud = (cloud_w - pose.translation) @ rot
            com = ((obj.com_world - pose.translation) @ rot)
            cands.append(cd.PoseCandidate(cloud=cloud, com=com,
                                          density=density,
                                          pose=pose.as_vector()))
            kept.append(pose)
        if cands:
            sets.append(cands)
            names.append((name, obj, kept))
    return sets, names


def stage_codesign(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    model = load_model(_require(out / "model.bin"))
    pose_sets, names = _load_pose_sets(cfg, out, g)
    usable = [(s, n) for s, n in zip(pose_sets, names)
              if len(s) >= cfg.codesign.top_b]
    if not usable:
        raise SoftgripError(
            f"no object has >= {cfg.codesign.top_b} valid poses"
        )
    pose_sets = [u[0] for u in usable]
    k0 = np.full(22, float(np.sqrt(0.7e6 * 24e6)))
    k_star, best, state = cd.joint_optimize_surrogate(
        model, pose_sets, k0, cfg.codesign)
    k_path = out / "k_star.json"
    cd.result_to_json(k_star, best, pose_sets, k_path)
    log_path = out / "codesign_log.csv"
    cd.history_to_csv(state, log_path)
    return [k_path, log_path]


def stage_select(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    model = load_model(_require(out / "model.bin"))
    k_star = np.array(json.loads(
        _require(out / "k_star.json").read_text())["k_star"])
    pose_sets, names = _load_pose_sets(cfg, out, g)
    selection = {}
    for cands, (name, _, poses) in zip(pose_sets, names):
        idx = cd.select_pose(model, cands, k_star,
                             cfg.codesign.w1, cfg.codesign.w2)
        selection[name] = {
            "index": idx,
            "pose": cands[idx].pose.tolist(),
        }
    sel_path = out / "selected_poses.json"
    sel_path.write_text(json.dumps(selection, indent=1, sort_keys=True))
    return [sel_path]


def stage_evaluate(cfg: PipelineConfig, out: Path) -> list[Path]:
    g = _gripper(cfg)
    model = load_model(_require(out / "model.bin"))
    k_star = np.array(json.loads(
        _require(out / "k_star.json").read_text())["k_star"])
    density = float(cfg.evaluate.get("density", 8.0))
    n_eval = int(cfg.evaluate.get("n_poses", 6))
    pose_sets, names = _load_pose_sets(cfg, out, g, density_filter=density)
    designs = {
        "codesign": k_star,
        "soft": np.full(22, 0.7e6),
        "stiff": np.full(22, 24e6),
    }
    rows = []
    per_design_success = {d: [0, 0] for d in designs}
    select_stats = {"selected": [0, 0], "first": [0, 0]}
    for cands, (name, obj, poses) in zip(pose_sets, names):
        cands = cands[:n_eval]
        poses = poses[:n_eval]
        outcomes = {}
        for dname, k in designs.items():
            flags = []
            for pose in poses:
                scene = Scene(g, obj=obj, params=cfg.sim)
                try:
                    _, trace = run_episode(scene, k, pose.as_vector(),
                                           cfg.script)
                    flags.append(evaluate_success(trace))
                except DivergenceError:
                    flags.append(False)
            outcomes[dname] = flags
            rows.append([name, dname, len(flags), sum(flags),
                         sum(flags) / len(flags)])
            per_design_success[dname][0] += sum(flags)
            per_design_success[dname][1] += len(flags)
        sel = cd.select_pose(model, cands, k_star,
                             cfg.codesign.w1, cfg.codesign.w2)
        select_stats["selected"][0] += outcomes["codesign"][sel]
        select_stats["selected"][1] += 1
        select_stats["first"][0] += outcomes["codesign"][0]
        select_stats["first"][1] += 1

    succ_path = out / "success.csv"
    with open(succ_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["object", "design", "n_poses", "successes", "rate"])
        w.writerows(rows)
        for dname, (s, n) in per_design_success.items():
            w.writerow(["ALL", dname, n, s, s / max(n, 1)])
        for mode, (s, n) in select_stats.items():
            w.writerow(["ALL", f"pose-{mode}", n, s, s / max(n, 1)])

    obj0 = names[0][1]
    pose0 = names[0][2][0]
    cand0 = pose_sets[0][0]
    scene = Scene(g, obj=obj0, params=cfg.sim)
    ratio = timing_ratio(model, scene, k_star, pose0.as_vector(), cfg.script,
                         cand0.cloud, cand0.com)
    timing_path = out / "timing.json"
    timing_path.write_text(json.dumps({"speedup": ratio}, indent=1))
    return [succ_path, timing_path]


def stage_report(cfg: PipelineConfig, out: Path) -> list[Path]:
    rep = out / "report"
    rep.mkdir(exist_ok=True)
    files = []

    losses = list(csv.DictReader(open(_require(out / "losses.csv"))))
    chart = SvgChart("Surrogate training", "epoch", "mean L1 (normalized)")
    epochs = [int(r["epoch"]) for r in losses if r["train_l1"]]
    chart.add_line("train", epochs,
                   [float(r["train_l1"]) for r in losses if r["train_l1"]])
    chart.add_line("validation", [int(r["epoch"]) for r in losses],
                   [float(r["val_l1"]) for r in losses])
    p = rep / "training_loss.svg"
    chart.save(p)
    files.append(p)

    log = list(csv.DictReader(open(_require(out / "codesign_log.csv"))))
    chart = SvgChart("Joint optimization", "iteration", "loss")
    its = [int(r["iteration"]) for r in log]
    chart.add_line("total", its, [float(r["l_total"]) for r in log])
    n_obj = sum(1 for key in log[0] if key.startswith("best_loss_"))
    for i in range(n_obj):
        chart.add_line(f"obj {i}", its,
                       [float(r[f"best_loss_{i}"]) for r in log])
    p = rep / "codesign_loss.svg"
    chart.save(p)
    files.append(p)

    chart = SvgChart("Stiffness gradient norm", "iteration", "|grad|")
    chart.add_line("grad", its, [float(r["grad_norm"]) for r in log])
    p = rep / "grad_norm.svg"
    chart.save(p)
    files.append(p)

    timing = json.loads(_require(out / "timing.json").read_text())
    chart = SvgChart("Evaluation time per grasp query", "", "relative time")
    chart.log_y = True
    chart.add_bar("FEM episode", timing["speedup"])
    chart.add_bar("surrogate", 1.0)
    p = rep / "timing.svg"
    chart.save(p)
    files.append(p)

    plate = json.loads(_require(out / "plate.json").read_text())
    chart = SvgChart("Per-segment plate force by routing", "segment",
                     "mean contact force (N)")
    segs = np.arange(1, len(plate["law"]["segment_forces"]) + 1)
    chart.add_line("quadratic law", segs, plate["law"]["segment_forces"])
    chart.add_line("uniform height", segs,
                   plate["uniform"]["segment_forces"])
    p = rep / "pressure_profile.svg"
    chart.save(p)
    files.append(p)

    success_rows = list(csv.reader(open(_require(out / "success.csv"))))
    summary = rep / "summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        w.writerow(["plate_cv_law", plate["law"]["cv"]])
        w.writerow(["plate_cv_uniform", plate["uniform"]["cv"]])
        w.writerow(["surrogate_speedup", timing["speedup"]])
        for row in success_rows[1:]:
            if row[0] == "ALL":
                w.writerow([f"success_{row[1]}", row[4]])
    files.append(summary)
    return files


_STAGE_FN = {
    "mesh": stage_mesh,
    "route": stage_route,
    "simulate": stage_simulate,
    "poses": stage_poses,
    "gen-data": stage_gen_data,
    "train": stage_train,
    "codesign": stage_codesign,
    "select": stage_select,
    "evaluate": stage_evaluate,
    "report": stage_report,
}

PIPELINE_ORDER = ("mesh", "route", "poses", "gen-data", "train", "codesign",
                  "select", "simulate", "evaluate", "report")


def run_stage(stage: str, cfg: PipelineConfig, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = _STAGE_FN[stage](cfg, out)
    for f in files:
        if not Path(f).exists():
            raise SoftgripError(f"stage {stage} failed to write {f}")
    _update_manifest(out, stage, [Path(f) for f in files], cfg)
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="softgrip",
        description="soft gripper stiffness/pose co-design pipeline",
    )
    parser.add_argument("stage", choices=STAGES + ("pipeline",))
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config path (defaults built in)")
    parser.add_argument("--seed", type=int, default=None,
                        help="root seed override")
    parser.add_argument("--out", type=Path, default=Path("runs/default"),
                        help="run directory for artifacts")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except (ValueError, OSError) as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    stages = PIPELINE_ORDER if args.stage == "pipeline" else (args.stage,)
    try:
        for stage in stages:
            files = run_stage(stage, cfg, args.out)
            for f in files:
                print(f"[{stage}] wrote {f}")
    except MissingArtifactError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except SoftgripError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
