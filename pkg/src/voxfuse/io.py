"""File formats: calibration, poses, IMU streams, volumes, silhouettes.

Binary layouts (all little-endian):

MCV1 multi-channel volume
    magic "MCV1", uint32 x4: channels, nx, ny, nz,
    float32 x4: origin x, y, z, voxel size (mm),
    then channels * nx*ny*nz bytes of uint8 occupancy, channel-major,
    x-fastest within each channel.

HM3D heatmap stack
    magic "HM3D", uint32 x4: nx, ny, nz, joint count,
    float32 x4: origin x, y, z, voxel size (mm),
    then joints * nx*ny*nz float32 activations, joint-major, x-fastest.

Text formats:

cameras: JSON array of {name, intrinsics (9, row-major), extrinsics
    (12, row-major), width, height}.
pose CSV: header ``frame,joint,x_mm,y_mm,z_mm``, one row per joint.
IMU CSV: ``# frame=global|local`` header, optional ``# calib,<index>,<8
    floats>`` lines (mounting calibration: local->global then wear
    offset, each scalar-first), then rows ``frame,imu_index,w,x,y,z``
    with optional per-row calibration override columns.  Local-frame
    streams are converted to bone orientations on load.
topology: JSON array of {imu_index, imu_name, proximal_joint,
    canonical_direction}.
silhouettes: PGM (P5) or PNG, grayscale; pixels >= 128 are foreground.
"""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError
from .fusion import HeatmapVolume
from .geometry import CameraModel, GridSpec
from .skeleton import BoneSensor, Pose, SkeletonTopology
from .volume import MultiChannelVolume, VoxelGrid

_MCV_MAGIC = b"MCV1"
_HM_MAGIC = b"HM3D"


# ---------------------------------------------------------------------------
# cameras


def save_cameras(path, cameras):
    payload = [
        {
            "name": cam.name,
            "intrinsics": [float(v) for v in cam.intrinsics.ravel()],
            "extrinsics": [float(v) for v in cam.extrinsics.ravel()],
            "width": cam.width,
            "height": cam.height,
        }
        for cam in cameras
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_cameras(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read camera file {path}: {exc}") from exc
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise FormatError(f"{path}: expected a non-empty JSON array of cameras")
    cameras = []
    for i, entry in enumerate(raw):
        try:
            intr = np.asarray(entry["intrinsics"], dtype=np.float64).reshape(3, 3)
            extr = np.asarray(entry["extrinsics"], dtype=np.float64).reshape(3, 4)
            cam = CameraModel(
                intr, extr, int(entry["width"]), int(entry["height"]),
                name=str(entry.get("name", f"cam{i}")),
            )
        except (KeyError, TypeError, ValueError, ConfigurationError) as exc:
            raise FormatError(f"{path}: camera entry {i} invalid: {exc}") from exc
        cameras.append(cam)
    return cameras


# ---------------------------------------------------------------------------
# binary volumes


def _pack_gridspec(spec):
    ox, oy, oz = spec.origin
    return struct.pack("<4f", ox, oy, oz, spec.voxel_size)


def write_volume(path, volume):
    """Write a MultiChannelVolume (or single VoxelGrid) as MCV1."""
    if isinstance(volume, VoxelGrid):
        volume = MultiChannelVolume(volume.spec, volume.data[None])
    data = volume.data
    if data.dtype != np.uint8 or not np.isin(data, (0, 1)).all():
        raise ConfigurationError("MCV1 stores strictly binary uint8 occupancy")
    nx, ny, nz = volume.spec.dims
    header = _MCV_MAGIC + struct.pack("<4I", volume.channels, nx, ny, nz)
    header += _pack_gridspec(volume.spec)
    # transpose so x varies fastest in the byte stream
    payload = np.ascontiguousarray(data.transpose(0, 3, 2, 1)).tobytes()
    Path(path).write_bytes(header + payload)


def read_volume(path):
    blob = Path(path).read_bytes()
    if len(blob) < 36 or blob[:4] != _MCV_MAGIC:
        raise FormatError(f"{path}: not an MCV1 volume")
    channels, nx, ny, nz = struct.unpack("<4I", blob[4:20])
    ox, oy, oz, voxel = struct.unpack("<4f", blob[20:36])
    expected = channels * nx * ny * nz
    body = blob[36:]
    if channels == 0 or len(body) != expected:
        raise FormatError(
            f"{path}: payload is {len(body)} bytes, header implies {expected}"
        )
    data = (
        np.frombuffer(body, dtype=np.uint8)
        .reshape(channels, nz, ny, nx)
        .transpose(0, 3, 2, 1)
        .copy()
    )
    if not np.isin(data, (0, 1)).all():
        raise FormatError(f"{path}: occupancy bytes must be 0 or 1")
    spec = GridSpec((ox, oy, oz), (nx, ny, nz), voxel)
    return MultiChannelVolume(spec, data)


def write_heatmaps(path, heatmaps):
    """Write a per-joint heatmap stack as HM3D (float32)."""
    if not heatmaps:
        raise ConfigurationError("heatmap stack must contain at least one joint")
    spec = heatmaps[0].spec
    for h in heatmaps[1:]:
        if h.spec != spec:
            raise ConfigurationError("all heatmaps in a stack must share one grid")
    nx, ny, nz = spec.dims
    header = _HM_MAGIC + struct.pack("<4I", nx, ny, nz, len(heatmaps))
    header += _pack_gridspec(spec)
    stack = np.stack([h.values for h in heatmaps]).astype(np.float32)
    payload = np.ascontiguousarray(stack.transpose(0, 3, 2, 1)).tobytes()
    Path(path).write_bytes(header + payload)


def read_heatmaps(path):
    blob = Path(path).read_bytes()
    if len(blob) < 36 or blob[:4] != _HM_MAGIC:
        raise FormatError(f"{path}: not an HM3D heatmap stack")
    nx, ny, nz, joints = struct.unpack("<4I", blob[4:20])
    ox, oy, oz, voxel = struct.unpack("<4f", blob[20:36])
    expected = 4 * joints * nx * ny * nz
    body = blob[36:]
    if joints == 0 or len(body) != expected:
        raise FormatError(
            f"{path}: payload is {len(body)} bytes, header implies {expected}"
        )
    stack = (
        np.frombuffer(body, dtype="<f4")
        .reshape(joints, nz, ny, nx)
        .transpose(0, 3, 2, 1)
        .astype(np.float64)
    )
    if not np.isfinite(stack).all():
        raise FormatError(f"{path}: heatmap values must be finite")
    spec = GridSpec((ox, oy, oz), (nx, ny, nz), voxel)
    return [HeatmapVolume(spec, stack[j]) for j in range(joints)]


# ---------------------------------------------------------------------------
# poses


def save_pose_csv(path, poses):
    """Write {frame: Pose} as frame,joint,x_mm,y_mm,z_mm rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "joint", "x_mm", "y_mm", "z_mm"])
        for frame in sorted(poses):
            pose = poses[frame]
            for name, xyz in zip(pose.joint_names, pose.joints):
                writer.writerow(
                    [frame, name, f"{xyz[0]:.6f}", f"{xyz[1]:.6f}", f"{xyz[2]:.6f}"]
                )


def load_pose_csv(path):
    """Read a pose CSV into {frame: Pose}; every frame must list the same joints."""
    frames = {}
    order = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:5]] != [
                "frame", "joint", "x_mm", "y_mm", "z_mm",
            ]:
                raise FormatError(f"{path}: expected header frame,joint,x_mm,y_mm,z_mm")
            for lineno, row in enumerate(reader, start=2):
                if not row or not "".join(row).strip():
                    continue
                try:
                    frame = int(row[0])
                    joint = row[1].strip()
                    xyz = (float(row[2]), float(row[3]), float(row[4]))
                except (IndexError, ValueError) as exc:
                    raise FormatError(f"{path}:{lineno}: bad pose row {row!r}") from exc
                bucket = frames.setdefault(frame, {})
                if joint in bucket:
                    raise FormatError(f"{path}:{lineno}: duplicate joint {joint!r} in frame {frame}")
                bucket[joint] = xyz
                order.setdefault(frame, []).append(joint)
    except OSError as exc:
        raise FormatError(f"cannot read pose file {path}: {exc}") from exc
    if not frames:
        raise FormatError(f"{path}: no pose rows found")
    names = None
    poses = {}
    for frame in sorted(frames):
        joint_names = tuple(order[frame])
        if names is None:
            names = joint_names
        elif set(joint_names) != set(names):
            raise FormatError(f"{path}: frame {frame} lists a different joint set")
        joints = np.array([frames[frame][n] for n in names])
        poses[frame] = Pose(joints, names)
    return poses


# ---------------------------------------------------------------------------
# IMU streams


def _fmt_quat(q):
    return [f"{v:.9f}" for v in q]


def save_imu_csv(path, frames, mode="global", calibration=None):
    """Write per-frame sensor quaternions.

    frames: {frame: (M,4) scalar-first quaternions}.  With mode="local"
    a `calibration` pair (local_to_global (M,4), wear (M,4)) is required
    and written as header lines; the rows are then raw sensor readings.
    """
    if mode not in ("global", "local"):
        raise ConfigurationError(f"imu mode must be 'global' or 'local', got {mode!r}")
    if mode == "local" and calibration is None:
        raise ConfigurationError("local-frame IMU files need a calibration pair")
    with open(path, "w", newline="") as fh:
        fh.write(f"# frame={mode}\n")
        if mode == "local":
            l2g, wear = (np.asarray(c, dtype=np.float64) for c in calibration)
            if l2g.shape != wear.shape or l2g.ndim != 2 or l2g.shape[1] != 4:
                raise ConfigurationError("calibration arrays must both be (M,4)")
            for idx in range(l2g.shape[0]):
                fields = ["# calib", str(idx)] + _fmt_quat(l2g[idx]) + _fmt_quat(wear[idx])
                fh.write(",".join(fields) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["frame", "imu_index", "w", "x", "y", "z"])
        for frame in sorted(frames):
            quats = np.asarray(frames[frame], dtype=np.float64)
            for idx in range(quats.shape[0]):
                writer.writerow([frame, idx] + _fmt_quat(quats[idx]))


def load_imu_csv(path):
    """Read an IMU CSV into {frame: (M,4) bone-frame quaternions}.

    Local-frame files are converted on load: each reading is composed
    with its local->global calibration, then the wear offset is removed.
    Per-row override columns (l2g then wear, 8 floats) take precedence
    over the header calibration for that row.
    """
    from .geometry import imu_apply_wear_offset, imu_local_to_global

    mode = None
    calib = {}
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line.lstrip("#").strip()
                    if body.startswith("frame="):
                        mode = body.split("=", 1)[1].strip()
                    elif body.startswith("calib"):
                        parts = [p.strip() for p in body.split(",")]
                        try:
                            idx = int(parts[1])
                            vals = [float(v) for v in parts[2:10]]
                            if len(vals) != 8:
                                raise ValueError("need 8 calibration floats")
                        except (IndexError, ValueError) as exc:
                            raise FormatError(f"{path}:{lineno}: bad calib line") from exc
                        calib[idx] = (np.array(vals[:4]), np.array(vals[4:]))
                    continue
                if line.startswith("frame,"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                if len(parts) not in (6, 14):
                    raise FormatError(
                        f"{path}:{lineno}: expected 6 or 14 columns, got {len(parts)}"
                    )
                try:
                    frame = int(parts[0])
                    idx = int(parts[1])
                    vals = [float(v) for v in parts[2:]]
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad IMU row") from exc
                rows.append((lineno, frame, idx, vals))
    except OSError as exc:
        raise FormatError(f"cannot read IMU file {path}: {exc}") from exc
    if mode not in ("global", "local"):
        raise FormatError(f"{path}: missing or invalid '# frame=' header")
    if not rows:
        raise FormatError(f"{path}: no IMU rows found")

    by_frame = {}
    for lineno, frame, idx, vals in rows:
        q = np.array(vals[:4])
        if mode == "local":
            if len(vals) == 12:
                l2g, wear = np.array(vals[4:8]), np.array(vals[8:12])
            elif idx in calib:
                l2g, wear = calib[idx]
            else:
                raise FormatError(
                    f"{path}:{lineno}: sensor {idx} has no calibration (header or inline)"
                )
            q = imu_apply_wear_offset(wear, imu_local_to_global(q, l2g))
        by_frame.setdefault(frame, {})[idx] = q

    out = {}
    for frame, sensors in sorted(by_frame.items()):
        count = len(sensors)
        if sorted(sensors) != list(range(count)):
            raise FormatError(f"{path}: frame {frame} sensor indices are not 0..M-1")
        out[frame] = np.stack([sensors[i] for i in range(count)])
    return out


# ---------------------------------------------------------------------------
# topology


def save_topology(path, topology):
    payload = [
        {
            "imu_index": s.imu_index,
            "imu_name": s.imu_name,
            "proximal_joint": s.proximal_joint,
            "canonical_direction": list(s.canonical_direction),
        }
        for s in topology
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_topology(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read topology file {path}: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise FormatError(f"{path}: expected a non-empty JSON array of sensors")
    sensors = []
    for i, entry in enumerate(raw):
        try:
            sensors.append(
                BoneSensor(
                    int(entry["imu_index"]),
                    str(entry["imu_name"]),
                    int(entry["proximal_joint"]),
                    tuple(float(v) for v in entry["canonical_direction"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: sensor entry {i} invalid: {exc}") from exc
    sensors.sort(key=lambda s: s.imu_index)
    try:
        return SkeletonTopology(tuple(sensors))
    except ConfigurationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# silhouettes


def write_silhouette_pgm(path, mask):
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ConfigurationError(f"silhouette must be 2-D, got shape {mask.shape}")
    h, w = mask.shape
    body = (np.where(mask != 0, 255, 0)).astype(np.uint8).tobytes()
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + body)


def _read_pgm(path):
    blob = Path(path).read_bytes()
    # header tokens: magic, width, height, maxval; '#' comments allowed
    pos = 0
    tokens = []
    while len(tokens) < 4:
        if pos >= len(blob):
            raise FormatError(f"{path}: truncated PGM header")
        ch = blob[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            start = pos
            while pos < len(blob) and not blob[pos : pos + 1].isspace():
                pos += 1
            tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary PGM (P5) is supported")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval <= 0 or maxval > 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    body = blob[pos : pos + w * h]
    if len(body) != w * h:
        raise FormatError(f"{path}: PGM payload is {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def read_silhouette(path):
    """Load a PGM or PNG mask; returns (H, W) uint8 with values 0/1."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"silhouette file not found: {path}")
    if path.suffix.lower() == ".png":
        from PIL import Image, UnidentifiedImageError

        try:
            with Image.open(path) as img:
                gray = np.asarray(img.convert("L"))
        except (OSError, UnidentifiedImageError) as exc:
            raise FormatError(f"{path}: cannot decode PNG: {exc}") from exc
    else:
        gray = _read_pgm(path)
    return (gray >= 128).astype(np.uint8)
