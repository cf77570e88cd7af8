"""Synthetic scenes with exact reference implementations.

Everything downstream can be exercised without trained weights: a capsule
body is posed from the kinematic tree, rendered to silhouettes by ray
casting, and carved into voxels, and the scene also provides consistent
ground-truth joints and per-bone IMU orientations.

This module also hosts the slow reference implementations used to verify
the fast paths: a scalar-loop voxel carver (compiled with numba so large
sweeps stay cheap) and a Monte Carlo probe of the voxel quantization
error floor.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigurationError
from .fusion import HeatmapVolume
from .geometry import (
    CameraModel,
    quat_from_axis_angle,
    quat_from_two_vectors,
    quat_mul,
    quat_rotate_vec,
)
from .seeding import derive_rng
from .skeleton import (
    JOINT_NAMES,
    SENSOR_LIMBS,
    SKELETON_TREE,
    T_POSE_OFFSETS,
    Pose,
    default_topology,
)
from .volume import VoxelGrid

# capsule radius (mm) for each kinematic-tree bone, keyed by child joint
_BONE_RADII = {
    "sternum": 120.0,
    "head": 85.0,
    "l_shoulder": 50.0,
    "r_shoulder": 50.0,
    "l_elbow": 45.0,
    "r_elbow": 45.0,
    "l_wrist": 40.0,
    "r_wrist": 40.0,
    "l_knee": 80.0,
    "r_knee": 80.0,
    "l_ankle": 70.0,
    "r_ankle": 70.0,
}
_HEAD_RADIUS = 95.0

DEFAULT_HEATMAP_SIGMA_VOXELS = 3.5
DEFAULT_HEATMAP_AMPLITUDE = 6.0


@dataclass
class BodyPrimitive:
    """Capsule between world points a and b; a == b degenerates to a sphere."""

    a: np.ndarray
    b: np.ndarray
    radius: float


@dataclass
class SyntheticScene:
    """One frame of the synthetic rig: cameras, body, and sensor readings."""

    cameras: list
    pose: Pose
    primitives: tuple
    imu_orientations: np.ndarray
    topology: object
    subject_center: np.ndarray
    frame: int = 0


def _look_at_extrinsics(position, target):
    """World->camera [R|t] for a camera at `position` looking at `target`."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    n = np.linalg.norm(right)
    if n < 1e-9:
        raise ConfigurationError("camera viewing direction is vertical; pick another position")
    right = right / n
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    t = -rot @ position
    return np.concatenate([rot, t[:, None]], axis=1)


def _ring_cameras(rng, num_cameras, target, ring_radius, image_size, focal):
    w, h = image_size
    k = np.array(
        [[focal, 0.0, (w - 1) / 2.0], [0.0, focal, (h - 1) / 2.0], [0.0, 0.0, 1.0]]
    )
    cameras = []
    for i in range(num_cameras):
        angle = 2.0 * np.pi * i / num_cameras + rng.uniform(-0.1, 0.1)
        radius = ring_radius + rng.uniform(-200.0, 200.0)
        height = target[2] + 400.0 + rng.uniform(-200.0, 300.0)
        pos = np.array(
            [
                target[0] + radius * np.cos(angle),
                target[1] + radius * np.sin(angle),
                height,
            ]
        )
        ext = _look_at_extrinsics(pos, target)
        cameras.append(CameraModel(k.copy(), ext, w, h, name=f"cam{i}"))
    return cameras


def _sample_pose(rng, pose_spread, center, subject_offset):
    """Jittered articulation of the reference stance around `center`."""
    name_to_idx = {n: i for i, n in enumerate(JOINT_NAMES)}
    pelvis = (
        np.asarray(center, dtype=np.float64)
        + np.asarray(subject_offset, dtype=np.float64)
        + np.array(
            [
                rng.uniform(-pose_spread, pose_spread),
                rng.uniform(-pose_spread, pose_spread),
                rng.uniform(-0.25 * pose_spread, 0.25 * pose_spread),
            ]
        )
    )
    yaw = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), rng.uniform(0.0, 2.0 * np.pi))
    joints = np.zeros((len(JOINT_NAMES), 3))
    joints[0] = pelvis
    for parent, child in SKELETON_TREE:
        offset = np.asarray(T_POSE_OFFSETS[child]) - np.asarray(T_POSE_OFFSETS[parent])
        stretch = 1.0 + rng.uniform(-0.08, 0.08)
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        wobble = quat_from_axis_angle(axis, rng.uniform(0.0, 0.3))
        bone = quat_rotate_vec(quat_mul(yaw, wobble), offset * stretch)
        joints[name_to_idx[child]] = joints[name_to_idx[parent]] + bone
    return Pose(joints, JOINT_NAMES)


def _body_primitives(pose):
    name_to_idx = {n: i for i, n in enumerate(JOINT_NAMES)}
    prims = []
    for parent, child in SKELETON_TREE:
        prims.append(
            BodyPrimitive(
                pose.joints[name_to_idx[parent]].copy(),
                pose.joints[name_to_idx[child]].copy(),
                _BONE_RADII[child],
            )
        )
    head = pose.joints[name_to_idx["head"]]
    prims.append(BodyPrimitive(head.copy(), head.copy(), _HEAD_RADIUS))
    return tuple(prims)


def _body_centroid(primitives):
    """Volume-weighted centroid of the capsule body.

    Capsule overlap at the joints is not subtracted; the approximation
    is well within the voxel-scale tolerance this value is used at.
    """
    total = 0.0
    accum = np.zeros(3)
    for prim in primitives:
        length = float(np.linalg.norm(prim.b - prim.a))
        vol = np.pi * prim.radius**2 * length + (4.0 / 3.0) * np.pi * prim.radius**3
        accum += vol * 0.5 * (prim.a + prim.b)
        total += vol
    return accum / total


def _sensor_orientations(rng, pose, topology):
    """Bone quaternion per sensor: canonical direction -> posed direction.

    Roll about the bone axis is unobservable from joint positions, so a
    random roll is mixed in to keep the quaternions generic.
    """
    name_to_idx = {n: i for i, n in enumerate(JOINT_NAMES)}
    quats = np.zeros((len(topology), 4))
    for sensor, (_, prox, dist) in zip(topology, SENSOR_LIMBS):
        actual = pose.joints[name_to_idx[dist]] - pose.joints[name_to_idx[prox]]
        actual = actual / np.linalg.norm(actual)
        swing = quat_from_two_vectors(sensor.direction_array, actual)
        roll = quat_from_axis_angle(actual, rng.uniform(0.0, 2.0 * np.pi))
        quats[sensor.imu_index] = quat_mul(roll, swing)
    return quats


def generate_scene(
    seed,
    num_cameras=8,
    pose_spread=300.0,
    frame=0,
    image_size=(320, 240),
    subject_offset=(0.0, 0.0, 0.0),
    ring_radius=4000.0,
    focal=260.0,
):
    """Deterministic synthetic frame.

    Cameras depend only on (seed, num_cameras); the body pose also mixes
    in `frame`, so a sequence shares one calibrated rig.  `pose_spread`
    scales the random pelvis placement around the rig target and
    `subject_offset` shifts it deterministically (used to stage frames
    where the subject leaves some views).
    """
    if num_cameras < 1:
        raise ConfigurationError("need at least one camera")
    target = np.array([0.0, 0.0, 1000.0])
    cameras = _ring_cameras(
        derive_rng(seed, "cameras"), num_cameras, target, ring_radius, image_size, focal
    )
    pose = _sample_pose(derive_rng(seed, "pose", frame), pose_spread, target, subject_offset)
    topology = default_topology()
    imu = _sensor_orientations(derive_rng(seed, "imu", frame), pose, topology)
    primitives = _body_primitives(pose)
    return SyntheticScene(
        cameras=cameras,
        pose=pose,
        primitives=primitives,
        imu_orientations=imu,
        topology=topology,
        subject_center=_body_centroid(primitives),
        frame=frame,
    )


# ---------------------------------------------------------------------------
# rendering


def _ray_capsule_hits(origin, dirs, prim):
    """Boolean hit mask for rays origin + s*dirs, s >= 0, against one capsule."""
    a = prim.a
    ab = prim.b - prim.a
    dd = float(ab @ ab)
    hits = np.zeros(dirs.shape[0], dtype=bool)

    def sphere(center, r):
        m = origin - center
        qa = (dirs * dirs).sum(axis=1)
        qb = 2.0 * dirs @ m
        qc = m @ m - r * r
        disc = qb * qb - 4.0 * qa * qc
        ok = disc >= 0.0
        root = np.sqrt(np.where(ok, disc, 0.0))
        s_far = (-qb + root) / (2.0 * qa)
        return ok & (s_far >= 0.0)

    hits |= sphere(prim.a, prim.radius)
    if dd < 1e-12:
        return hits
    hits |= sphere(prim.b, prim.radius)

    # infinite cylinder, then keep intersections between the caps
    m = origin - a
    nd = dirs @ ab
    md = float(m @ ab)
    qa = (dirs * dirs).sum(axis=1) - nd * nd / dd
    qb = 2.0 * (dirs @ m - md * nd / dd)
    qc = float(m @ m) - md * md / dd - prim.radius * prim.radius
    quad = qa > 1e-12
    disc = qb * qb - 4.0 * qa * qc
    ok = quad & (disc >= 0.0)
    root = np.sqrt(np.where(ok, disc, 0.0))
    denom = np.where(quad, 2.0 * qa, 1.0)
    for s in ((-qb - root) / denom, (-qb + root) / denom):
        axial = md + s * nd
        hits |= ok & (s >= 0.0) & (axial >= 0.0) & (axial <= dd)
    return hits


def render_silhouette(scene, camera_index):
    """Ray-cast the body capsules into a binary (H, W) mask for one camera."""
    cam = scene.cameras[camera_index]
    h, w = cam.height, cam.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pix = np.stack([us.ravel(), vs.ravel(), np.ones(w * h)], axis=0)
    dirs_cam = np.linalg.solve(cam.intrinsics, pix).T
    rot = cam.extrinsics[:, :3]
    dirs = dirs_cam @ rot  # rows rotated by R^T
    origin = cam.position()
    mask = np.zeros(w * h, dtype=bool)
    for prim in scene.primitives:
        mask |= _ray_capsule_hits(origin, dirs, prim)
    return mask.reshape(h, w).astype(np.uint8)


# ---------------------------------------------------------------------------
# reference implementations


@njit(cache=True)
def _carve_scalar(p, sil, ox, oy, oz, vs, width, height, out):
    nx, ny, nz = out.shape
    for i in range(nx):
        cx = ox + (i + 0.5) * vs
        for j in range(ny):
            cy = oy + (j + 0.5) * vs
            for k in range(nz):
                cz = oz + (k + 0.5) * vs
                uh = p[0, 0] * cx + p[0, 1] * cy + p[0, 2] * cz + p[0, 3]
                vh = p[1, 0] * cx + p[1, 1] * cy + p[1, 2] * cz + p[1, 3]
                wh = p[2, 0] * cx + p[2, 1] * cy + p[2, 2] * cz + p[2, 3]
                if wh > 0.0:
                    pu = math.floor(uh / wh + 0.5)
                    pv = math.floor(vh / wh + 0.5)
                    if 0.0 <= pu <= width - 1.0 and 0.0 <= pv <= height - 1.0:
                        if sil[int(pv), int(pu)] != 0:
                            out[i, j, k] = 1


def brute_force_voxelize(camera, silhouette, spec):
    """Scalar-loop reference carver; must match build_channel bit for bit.

    Kept as an independent code path on purpose: it shares only the
    projection-matrix composition and the documented center/rounding
    rules with the vectorized implementation.
    """
    sil = np.ascontiguousarray(np.asarray(silhouette), dtype=np.uint8)
    if sil.shape != (camera.height, camera.width):
        raise ConfigurationError(
            f"silhouette shape {sil.shape} does not match camera image size"
        )
    out = np.zeros(spec.dims, dtype=np.uint8)
    ox, oy, oz = spec.origin
    _carve_scalar(
        camera.projection_matrix(),
        sil,
        ox,
        oy,
        oz,
        spec.voxel_size,
        float(camera.width),
        float(camera.height),
        out,
    )
    return VoxelGrid(spec, out)


def quantization_error_mc(spec, trials=1_000_000, seed=0):
    """Monte Carlo mean distance from a uniform point to its voxel center.

    This is the resolution floor any voxel-grid readout inherits; for a
    cube of edge `a` it converges to about 0.4803 * a.
    """
    trials = int(trials)
    if trials < 1000:
        raise ConfigurationError(f"need at least 1000 trials, got {trials}")
    rng = derive_rng(seed, "quantization-mc")
    dims = np.asarray(spec.dims, dtype=np.float64)
    u = rng.random((trials, 3))
    points = spec.origin_array + u * spec.extent()
    idx = np.minimum(np.floor(u * dims), dims - 1.0)
    centers = spec.origin_array + (idx + 0.5) * spec.voxel_size
    return float(np.linalg.norm(points - centers, axis=1).mean())


def gaussian_heatmaps(pose, spec, sigma=None, amplitude=DEFAULT_HEATMAP_AMPLITUDE):
    """Ideal per-joint activation volumes: isotropic Gaussians at the joints.

    sigma is in mm (default 3.5 voxels).  Stands in for a trained
    network's output so the readout stage can be tested end to end.
    """
    if sigma is None:
        sigma = DEFAULT_HEATMAP_SIGMA_VOXELS * spec.voxel_size
    if sigma <= 0 or amplitude <= 0:
        raise ConfigurationError("sigma and amplitude must be positive")
    cx = spec.axis_centers(0)[:, None, None]
    cy = spec.axis_centers(1)[None, :, None]
    cz = spec.axis_centers(2)[None, None, :]
    heatmaps = []
    for joint in pose.joints:
        d2 = (cx - joint[0]) ** 2 + (cy - joint[1]) ** 2 + (cz - joint[2]) ** 2
        heatmaps.append(HeatmapVolume(spec, amplitude * np.exp(-d2 / (2.0 * sigma * sigma))))
    return heatmaps
