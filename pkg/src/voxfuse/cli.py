"""Command-line pipeline: synth, voxelize, imu-bone, softargmax, eval.

Every subcommand accepts --config FILE (JSON, or TOML when available)
whose keys mirror the long option names; explicit flags win over config
values, which win over built-in defaults.  All commands are
deterministic given identical inputs, config, and --seed.

VOXFUSE_THREADS caps per-frame parallelism (0 or unset = one worker per
CPU, 1 = serial).  Logs go to stderr; data outputs go to files only.
"""

import argparse
import concurrent.futures
import json
import logging
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import io as vio
from .errors import AlignmentError, ConfigurationError, VoxfuseError
from .fusion import (
    DEFAULT_BONE_RADIUS,
    DEFAULT_THETA,
    hard_argmax_3d,
    imu_bone_stack,
    soft_argmax_3d,
)
from .geometry import all_points_visible
from .metrics import FrameResult, mpjpe, pa_mpjpe, per_frame_report
from .seeding import derive_rng
from .skeleton import Pose
from .synth import gaussian_heatmaps, generate_scene, render_silhouette
from .volume import (
    build_multichannel,
    center_grid_on,
    random_shut,
    rotate_scene,
    visual_hull,
)

log = logging.getLogger("voxfuse")

_SIL_RE = re.compile(r"cam(\d+)_frame(\d+)\.(pgm|png)$")


# ---------------------------------------------------------------------------
# option plumbing


def _load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid TOML: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc


def _merge_options(args, defaults):
    """Resolve each option: explicit flag > config file > default."""
    cfg = {}
    if getattr(args, "config", None):
        raw = _load_config(args.config)
        if not isinstance(raw, dict):
            raise ConfigurationError("config file must hold a table of options")
        cfg = {str(k).replace("-", "_"): v for k, v in raw.items()}
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
    out = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = cfg.get(key, default)
        out[key] = value
    return argparse.Namespace(**out)


def _require(opts, *names):
    for name in names:
        if getattr(opts, name) is None:
            raise ConfigurationError(f"--{name.replace('_', '-')} is required")


def _worker_count():
    raw = os.environ.get("VOXFUSE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"VOXFUSE_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ConfigurationError("VOXFUSE_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _parallel_map(fn, items):
    """Order-preserving map over frames, threaded when allowed."""
    items = list(items)
    workers = min(_worker_count(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _parse_image_size(text):
    m = re.fullmatch(r"(\d+)x(\d+)", text.strip())
    if not m:
        raise ConfigurationError(f"image size must look like 320x240, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _frame_name(frame):
    return f"frame{frame:06d}"


# ---------------------------------------------------------------------------
# synth


_SYNTH_DEFAULTS = {
    "out": None,
    "seed": 0,
    "cameras": 8,
    "frames": 5,
    "pose_spread": 300.0,
    "image_size": "320x240",
    "partial_every": 0,
    "partial_offset": 1800.0,
    "emit_heatmaps": False,
    "heatmap_dims": 32,
    "heatmap_voxel_size": 70.0,
    "imu_frame": "global",
}


def cmd_synth(args):
    opts = _merge_options(args, _SYNTH_DEFAULTS)
    _require(opts, "out")
    if opts.imu_frame not in ("global", "local"):
        raise ConfigurationError("--imu-frame must be 'global' or 'local'")
    width, height = _parse_image_size(opts.image_size)
    out = Path(opts.out)
    (out / "silhouettes").mkdir(parents=True, exist_ok=True)
    if opts.emit_heatmaps:
        (out / "heatmaps").mkdir(exist_ok=True)

    gt = {}
    imu_frames = {}
    frame_meta = []
    topology = None
    cameras = None
    for frame in range(int(opts.frames)):
        offset = (0.0, 0.0, 0.0)
        n = int(opts.partial_every)
        if n > 0 and frame % n == n - 1:
            offset = (float(opts.partial_offset), 0.0, 0.0)
        scene = generate_scene(
            int(opts.seed),
            num_cameras=int(opts.cameras),
            pose_spread=float(opts.pose_spread),
            frame=frame,
            image_size=(width, height),
            subject_offset=offset,
        )
        cameras = scene.cameras
        topology = scene.topology
        gt[frame] = scene.pose
        imu_frames[frame] = scene.imu_orientations
        for c in range(len(cameras)):
            mask = render_silhouette(scene, c)
            vio.write_silhouette_pgm(
                out / "silhouettes" / f"cam{c}_{_frame_name(frame)}.pgm", mask
            )
        if opts.emit_heatmaps:
            spec = center_grid_on(
                scene.subject_center,
                (int(opts.heatmap_dims),) * 3,
                float(opts.heatmap_voxel_size),
            )
            vio.write_heatmaps(
                out / "heatmaps" / f"{_frame_name(frame)}.hm3d",
                gaussian_heatmaps(scene.pose, spec),
            )
        full = all_points_visible(cameras, scene.pose.joints)
        frame_meta.append(
            {
                "frame": frame,
                "full": bool(full),
                "subject_center": [float(v) for v in scene.subject_center],
            }
        )
        log.info("synth frame %d: %s", frame, "full" if full else "partial")

    vio.save_cameras(out / "cameras.json", cameras)
    vio.save_topology(out / "topology.json", topology)
    vio.save_pose_csv(out / "gt.csv", gt)
    (out / "joint_names.json").write_text(
        json.dumps(list(gt[0].joint_names), indent=2) + "\n"
    )
    if opts.imu_frame == "local":
        rng = derive_rng(int(opts.seed), "imu-calib")
        from .geometry import quat_conjugate, quat_mul, random_unit_quaternion

        m = len(topology)
        l2g = random_unit_quaternion(rng, m)
        wear = random_unit_quaternion(rng, m)
        local = {
            f: quat_mul(wear, quat_mul(q, quat_conjugate(l2g)))
            for f, q in imu_frames.items()
        }
        vio.save_imu_csv(out / "imu.csv", local, mode="local", calibration=(l2g, wear))
    else:
        vio.save_imu_csv(out / "imu.csv", imu_frames, mode="global")
    scene_doc = {
        "seed": int(opts.seed),
        "num_cameras": int(opts.cameras),
        "image_size": [width, height],
        "imu_frame": opts.imu_frame,
        "frames": frame_meta,
    }
    (out / "scene.json").write_text(json.dumps(scene_doc, indent=2) + "\n")
    log.info("synth: wrote %d frames to %s", int(opts.frames), out)
    return 0


# ---------------------------------------------------------------------------
# voxelize


_VOXELIZE_DEFAULTS = {
    "out": None,
    "cameras": None,
    "silhouettes": None,
    "gt": None,
    "imu": None,
    "dims": 64,
    "voxel_size": 35.0,
    "center_mode": "gt",
    "random_shut": 0.0,
    "rotate": 0.0,
    "seed": 0,
}


def _discover_silhouettes(directory):
    """Map frame -> {camera index -> path} from cam<k>_frame<f>.<ext> names."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigurationError(f"silhouette directory not found: {directory}")
    found = {}
    for path in sorted(directory.iterdir()):
        m = _SIL_RE.fullmatch(path.name)
        if m:
            found.setdefault(int(m.group(2)), {})[int(m.group(1))] = path
    if not found:
        raise ConfigurationError(f"no silhouettes matching cam<k>_frame<f> in {directory}")
    return found


def _lookat_center(cameras):
    """Least-squares intersection point of the cameras' optical axes."""
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for cam in cameras:
        d = cam.extrinsics[2, :3]  # forward axis in world coordinates
        p = cam.position()
        m = np.eye(3) - np.outer(d, d)
        a += m
        b += m @ p
    return np.linalg.solve(a, b)


def cmd_voxelize(args):
    opts = _merge_options(args, _VOXELIZE_DEFAULTS)
    _require(opts, "out", "cameras", "silhouettes")
    if opts.center_mode not in ("gt", "hull"):
        raise ConfigurationError("--center-mode must be 'gt' or 'hull'")
    if opts.center_mode == "gt" or float(opts.rotate) > 0:
        _require(opts, "gt")
    cameras = vio.load_cameras(opts.cameras)
    sil_index = _discover_silhouettes(opts.silhouettes)
    gt = vio.load_pose_csv(opts.gt) if opts.gt else None
    imu = vio.load_imu_csv(opts.imu) if opts.imu else None
    dims = (int(opts.dims),) * 3
    voxel = float(opts.voxel_size)
    rotate_range = float(opts.rotate)
    shut_p = float(opts.random_shut)
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)

    errors = []
    entries = []
    rotated_gt = {}
    rotated_imu = {}
    t0 = time.perf_counter()

    def _process(frame):
        paths = sil_index[frame]
        missing = [c for c in range(len(cameras)) if c not in paths]
        if missing:
            raise ConfigurationError(
                f"frame {frame}: missing silhouettes for cameras {missing}"
            )
        sils = [vio.read_silhouette(paths[c]) for c in range(len(cameras))]
        frame_cams = cameras
        frame_gt = gt.get(frame) if gt else None
        frame_imu = imu.get(frame) if imu else None
        if gt is not None and frame_gt is None:
            raise AlignmentError(f"frame {frame}: present in silhouettes but not in gt")
        if imu is not None and frame_imu is None:
            raise AlignmentError(f"frame {frame}: present in silhouettes but not in imu")
        angle = 0.0
        if rotate_range > 0:
            rng = derive_rng(int(opts.seed), "rotate", frame)
            angle = float(rng.uniform(-rotate_range, rotate_range))
            frame_cams, frame_gt, frame_imu = rotate_scene(
                angle, cameras, frame_gt, frame_imu, frame_gt.root()
            )
        if opts.center_mode == "gt":
            center = frame_gt.root()
        else:
            coarse = center_grid_on(_lookat_center(frame_cams), dims, voxel * 4.0)
            hull = visual_hull(build_multichannel(frame_cams, sils, coarse))
            occ = np.argwhere(hull.data != 0)
            if occ.size == 0:
                raise ConfigurationError(f"frame {frame}: hull is empty, cannot center grid")
            center = coarse.voxel_center(occ.mean(axis=0))
        spec = center_grid_on(center, dims, voxel)
        vol = build_multichannel(frame_cams, sils, spec)
        dropped = []
        if shut_p > 0:
            # fold the frame id into the stream seed so frames drop independently
            vol, dropped = random_shut(vol, shut_p, (int(opts.seed) << 20) ^ frame)
        full = (
            all_points_visible(frame_cams, frame_gt.joints) if frame_gt is not None else None
        )
        vio.write_volume(out / f"{_frame_name(frame)}.mcv", vol)
        return frame, spec, dropped, full, angle, frame_gt, frame_imu

    def _guarded(frame):
        try:
            return _process(frame)
        except VoxfuseError as exc:
            return frame, exc

    results = []
    for item in _parallel_map(_guarded, sorted(sil_index)):
        if isinstance(item[1], VoxfuseError):
            errors.append(f"frame {item[0]}: {item[1]}")
            log.error("voxelize frame %d failed: %s", item[0], item[1])
        else:
            results.append(item)

    for frame, spec, dropped, full, angle, frame_gt, frame_imu in results:
        entries.append(
            {
                "frame": frame,
                "origin": [float(v) for v in spec.origin],
                "dropped_channels": dropped,
                "full": full,
                "rotation_rad": angle,
            }
        )
        if rotate_range > 0:
            rotated_gt[frame] = frame_gt
            if frame_imu is not None:
                rotated_imu[frame] = frame_imu

    elapsed = time.perf_counter() - t0
    manifest = {
        "grid": {"dims": list(dims), "voxel_size": voxel},
        "channels": len(cameras),
        "random_shut_p": shut_p,
        "rotate_range_rad": rotate_range,
        "seed": int(opts.seed),
        "frames": entries,
        # wall-clock diagnostics; excluded from determinism guarantees
        "timing": {
            "seconds_total": round(elapsed, 3),
            "seconds_per_frame": round(elapsed / max(len(results), 1), 3),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if rotated_gt:
        vio.save_pose_csv(out / "gt_rotated.csv", rotated_gt)
    if rotated_imu:
        vio.save_imu_csv(out / "imu_rotated.csv", rotated_imu, mode="global")
    log.info(
        "voxelize: %d frames ok, %d failed, %.2fs", len(results), len(errors), elapsed
    )
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# imu-bone


_IMUBONE_DEFAULTS = {
    "out": None,
    "poses": None,
    "imu": None,
    "topology": None,
    "manifest": None,
    "radius": DEFAULT_BONE_RADIUS,
    "dims": 32,
    "voxel_size": 70.0,
}


def cmd_imu_bone(args):
    opts = _merge_options(args, _IMUBONE_DEFAULTS)
    _require(opts, "out", "poses", "imu", "topology")
    poses = vio.load_pose_csv(opts.poses)
    imu = vio.load_imu_csv(opts.imu)
    topology = vio.load_topology(opts.topology)
    pose_frames = set(poses)
    imu_frames = set(imu)
    if pose_frames != imu_frames:
        only_p = sorted(pose_frames - imu_frames)[:5]
        only_i = sorted(imu_frames - pose_frames)[:5]
        raise AlignmentError(
            f"pose and IMU frame sets differ (pose-only {only_p}, imu-only {only_i})"
        )
    origins = None
    if opts.manifest:
        doc = json.loads(Path(opts.manifest).read_text())
        origins = {e["frame"]: np.asarray(e["origin"], dtype=np.float64) for e in doc["frames"]}
        missing = sorted(pose_frames - set(origins))
        if missing:
            raise AlignmentError(f"manifest lacks grid origins for frames {missing[:5]}")
    dims = (int(opts.dims),) * 3
    voxel = float(opts.voxel_size)
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)

    errors = []
    entries = []
    from .geometry import GridSpec

    def _process(frame):
        if origins is not None:
            spec = GridSpec(tuple(origins[frame]), dims, voxel)
        else:
            spec = center_grid_on(poses[frame].root(), dims, voxel)
        stack = imu_bone_stack(poses[frame], imu[frame], topology, float(opts.radius), spec)
        vio.write_volume(out / f"{_frame_name(frame)}.mcv", stack)
        return frame, spec

    for frame in sorted(poses):
        try:
            frame, spec = _process(frame)
            entries.append({"frame": frame, "origin": [float(v) for v in spec.origin]})
        except VoxfuseError as exc:
            errors.append(f"frame {frame}: {exc}")
            log.error("imu-bone frame %d failed: %s", frame, exc)

    manifest = {
        "grid": {"dims": list(dims), "voxel_size": voxel},
        "channels": len(topology),
        "radius": float(opts.radius),
        "frames": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("imu-bone: %d frames ok, %d failed", len(entries), len(errors))
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# softargmax


_SOFTARGMAX_DEFAULTS = {
    "out": None,
    "heatmaps": None,
    "theta": str(DEFAULT_THETA),
    "hard": False,
    "joints": None,
}


def _theta_list(text):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad --theta value {text!r}") from exc
    if not values:
        raise ConfigurationError("at least one temperature is required")
    return values


def cmd_softargmax(args):
    opts = _merge_options(args, _SOFTARGMAX_DEFAULTS)
    _require(opts, "out", "heatmaps")
    hm_dir = Path(opts.heatmaps)
    if not hm_dir.is_dir():
        raise ConfigurationError(f"heatmap directory not found: {hm_dir}")
    frame_files = {}
    for path in sorted(hm_dir.glob("frame*.hm3d")):
        m = re.fullmatch(r"frame(\d+)\.hm3d", path.name)
        if m:
            frame_files[int(m.group(1))] = path
    if not frame_files:
        raise ConfigurationError(f"no frame<f>.hm3d files in {hm_dir}")
    joint_names = None
    if opts.joints:
        joint_names = [str(n) for n in json.loads(Path(opts.joints).read_text())]
    thetas = _theta_list(opts.theta)
    out = Path(opts.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    def _names(count):
        if joint_names is not None:
            if len(joint_names) != count:
                raise ConfigurationError(
                    f"{len(joint_names)} joint names for {count} heatmap channels"
                )
            return tuple(joint_names)
        return tuple(f"joint{i:02d}" for i in range(count))

    errors = []

    def _read(frame):
        try:
            return frame, vio.read_heatmaps(frame_files[frame])
        except VoxfuseError as exc:
            return frame, exc

    loaded = _parallel_map(_read, sorted(frame_files))
    frames_ok = []
    for frame, result in loaded:
        if isinstance(result, VoxfuseError):
            errors.append(f"frame {frame}: {result}")
            log.error("softargmax frame %d failed: %s", frame, result)
        else:
            frames_ok.append((frame, result))

    if opts.hard:
        poses = {}
        for frame, heatmaps in frames_ok:
            coords = np.stack([hard_argmax_3d(h)[1] for h in heatmaps])
            poses[frame] = Pose(coords, _names(len(heatmaps)))
        vio.save_pose_csv(out, poses)
        written = [str(out)]
    else:
        written = []
        for theta in thetas:
            poses = {}
            for frame, heatmaps in frames_ok:
                coords = np.stack([soft_argmax_3d(h, theta=theta)[1] for h in heatmaps])
                poses[frame] = Pose(coords, _names(len(heatmaps)))
            if len(thetas) == 1:
                path = out
            else:
                path = out.with_name(f"{out.stem}_theta{theta:g}{out.suffix}")
            vio.save_pose_csv(path, poses)
            written.append(str(path))
    log.info("softargmax: wrote %s (%d frames, %d failed)",
             ", ".join(written), len(frames_ok), len(errors))
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# eval


_EVAL_DEFAULTS = {
    "out": None,
    "pred": None,
    "gt": None,
    "pa": False,
    "frame_classes": None,
    "figures": True,
}


def _load_frame_classes(path):
    doc = json.loads(Path(path).read_text())
    frames = doc.get("frames", doc if isinstance(doc, list) else [])
    classes = {}
    for entry in frames:
        if isinstance(entry, dict) and "frame" in entry:
            full = entry.get("full")
            classes[int(entry["frame"])] = True if full is None else bool(full)
    if not classes:
        raise ConfigurationError(f"{path}: no frame classes found")
    return classes


def _align_joints(pred, gt):
    """Reorder gt columns to the prediction's joint names."""
    if set(pred.joint_names) != set(gt.joint_names):
        missing = set(pred.joint_names) ^ set(gt.joint_names)
        raise AlignmentError(f"joint name mismatch: {sorted(missing)}")
    order = [gt.joint_names.index(n) for n in pred.joint_names]
    return Pose(gt.joints[order], pred.joint_names)


def cmd_eval(args):
    opts = _merge_options(args, _EVAL_DEFAULTS)
    _require(opts, "out", "pred", "gt")
    pred = vio.load_pose_csv(opts.pred)
    gt = vio.load_pose_csv(opts.gt)
    if set(pred) != set(gt):
        only_p = sorted(set(pred) - set(gt))[:5]
        only_g = sorted(set(gt) - set(pred))[:5]
        raise AlignmentError(
            f"prediction and gt frame sets differ (pred-only {only_p}, gt-only {only_g})"
        )
    classes = _load_frame_classes(opts.frame_classes) if opts.frame_classes else {}
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)

    results = []
    pa_results = []
    for frame in sorted(pred):
        gt_aligned = _align_joints(pred[frame], gt[frame])
        full = classes.get(frame, True)
        _, per_joint = mpjpe(pred[frame], gt_aligned)
        results.append(FrameResult(frame, per_joint, full))
        if opts.pa:
            _, pa_per_joint = pa_mpjpe(pred[frame], gt_aligned)
            pa_results.append(FrameResult(frame, pa_per_joint, full))

    report = per_frame_report(results)
    pa_report = per_frame_report(pa_results) if pa_results else None
    joint_names = pred[sorted(pred)[0]].joint_names

    from . import report as vreport

    vreport.write_report_json(out / "report.json", report, joint_names, pa_report)
    vreport.write_report_text(out / "report.txt", report, joint_names, pa_report)
    vreport.write_per_frame_csv(out / "per_frame.csv", report, pa_report)
    if opts.figures:
        vreport.render_per_frame_figure(out / "per_frame_error.png", report, pa_report)
        vreport.render_per_joint_figure(
            out / "per_joint_error.png", report, joint_names, pa_report
        )
    log.info(
        "eval: MPJPE %.2f mm over %d frames (%d full, %d partial)%s",
        report.overall_mean,
        len(report.frames),
        report.num_full,
        report.num_partial,
        f", PA-MPJPE {pa_report.overall_mean:.2f} mm" if pa_report else "",
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voxfuse",
        description=(
            "Multi-view voxel carving with IMU-driven bone volumes, a "
            "differentiable volumetric joint readout, and pose evaluation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="JSON or TOML file of option defaults")

    p = sub.add_parser("synth", help="generate a synthetic capsule-body scene")
    add_config(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master random seed (default 0)")
    p.add_argument("--cameras", type=int, help="ring camera count (default 8)")
    p.add_argument("--frames", type=int, help="number of frames (default 5)")
    p.add_argument("--pose-spread", type=float,
                   help="random pelvis placement range in mm (default 300)")
    p.add_argument("--image-size", help="silhouette resolution WxH (default 320x240)")
    p.add_argument("--partial-every", type=int,
                   help="every Nth frame walks the subject out of some views (default 0 = never)")
    p.add_argument("--partial-offset", type=float,
                   help="subject displacement for partial frames in mm (default 1800)")
    p.add_argument("--emit-heatmaps", action=argparse.BooleanOptionalAction,
                   help="also write ideal per-joint heatmap stacks")
    p.add_argument("--heatmap-dims", type=int, help="heatmap grid size (default 32)")
    p.add_argument("--heatmap-voxel-size", type=float,
                   help="heatmap voxel edge in mm (default 70)")
    p.add_argument("--imu-frame", choices=("global", "local"),
                   help="write bone orientations directly, or raw sensor readings "
                        "plus mounting calibration (default global)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("voxelize", help="carve per-camera occupancy volumes")
    add_config(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--cameras", help="camera calibration JSON")
    p.add_argument("--silhouettes", help="directory of cam<k>_frame<f>.pgm/.png masks")
    p.add_argument("--gt", help="ground-truth pose CSV (grid centering and frame classes)")
    p.add_argument("--imu", help="IMU CSV; carried through rotation augmentation")
    p.add_argument("--dims", type=int, help="voxels per grid edge (default 64)")
    p.add_argument("--voxel-size", type=float, help="voxel edge in mm (default 35)")
    p.add_argument("--center-mode", choices=("gt", "hull"),
                   help="grid centering: gt root joint, or visual-hull centroid (default gt)")
    p.add_argument("--random-shut", type=float, nargs="?", const=0.2,
                   help="per-channel drop probability; bare flag uses 0.2 (default off)")
    p.add_argument("--rotate", type=float, nargs="?", const=np.pi,
                   help="scene rotation range in radians about the vertical axis; "
                        "bare flag uses pi (default off)")
    p.add_argument("--seed", type=int, help="augmentation seed (default 0)")
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("imu-bone", help="rasterize IMU bone cylinders per sensor")
    add_config(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--poses", help="estimated pose CSV (cylinder start joints)")
    p.add_argument("--imu", help="IMU quaternion CSV")
    p.add_argument("--topology", help="sensor-to-bone topology JSON")
    p.add_argument("--manifest", help="voxelize manifest; reuse its per-frame grid origins")
    p.add_argument("--radius", type=float, help="cylinder radius in mm (default 70)")
    p.add_argument("--dims", type=int, help="voxels per grid edge (default 32)")
    p.add_argument("--voxel-size", type=float, help="voxel edge in mm (default 70)")
    p.set_defaults(func=cmd_imu_bone)

    p = sub.add_parser("softargmax", help="read joint positions out of heatmap stacks")
    add_config(p)
    p.add_argument("--out", help="output pose CSV path")
    p.add_argument("--heatmaps", help="directory of frame<f>.hm3d stacks")
    p.add_argument("--theta", help="softmax temperature, or comma list for a sweep (default 3)")
    p.add_argument("--hard", action=argparse.BooleanOptionalAction,
                   help="use the hard argmax instead")
    p.add_argument("--joints", help="JSON list of joint names for the output")
    p.set_defaults(func=cmd_softargmax)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    add_config(p)
    p.add_argument("--out", help="report output directory")
    p.add_argument("--pred", help="predicted pose CSV")
    p.add_argument("--gt", help="ground-truth pose CSV")
    p.add_argument("--pa", action=argparse.BooleanOptionalAction,
                   help="also report similarity-aligned (PA) error")
    p.add_argument("--frame-classes",
                   help="scene.json or voxelize manifest with full/partial flags")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   help="render PNG figures next to the reports (default on)")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VoxfuseError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
