"""Differentiable joint readout and IMU-driven bone volumes.

The soft-argmax converts a per-joint activation volume into continuous
voxel coordinates:

    p_i = exp(theta * x_i - m) / sum_j exp(theta * x_j - m)
    coord_a = sum_i p_i * index_a(i)

with m = max_i theta * x_i subtracted for numerical stability (the shift
cancels in the ratio).  Its Jacobian has the closed form

    d coord_a / d x_j = theta * p_j * (index_a(j) - coord_a)

As theta grows the readout approaches the hard argmax.

An IMU-bone volume marks voxels within radius r of the half-line that
starts at an estimated joint and runs along the bone direction given by
the sensor quaternion, i.e. a half-infinite cylinder with a spherical
start cap.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .geometry import GridSpec, quat_rotate_vec
from .volume import MultiChannelVolume, VoxelGrid

DEFAULT_THETA = 3.0
DEFAULT_BONE_RADIUS = 70.0


@dataclass
class HeatmapVolume:
    """Scalar activation volume for one joint over a GridSpec."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.dims:
            raise ConfigurationError(
                f"heatmap shape {self.values.shape} does not match grid {self.spec.dims}"
            )


def _check_heatmap(heatmap, theta):
    if theta <= 0 or not np.isfinite(theta):
        raise InvalidInputError(f"temperature must be positive and finite, got {theta}")
    if not np.isfinite(heatmap.values).all():
        raise InvalidInputError("heatmap contains non-finite values")


def _softmax_weights(values, theta):
    z = theta * values
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def soft_argmax_3d(heatmap, theta=DEFAULT_THETA):
    """Expected voxel index under the tempered softmax of the heatmap.

    Returns (index_coords, world_coords): the continuous (x, y, z) voxel
    index and the same point in world mm (half-voxel center offset
    included).  Invariant to adding a constant to the heatmap.
    """
    _check_heatmap(heatmap, theta)
    p = _softmax_weights(heatmap.values, theta)
    nx, ny, nz = heatmap.spec.dims
    ix = float(p.sum(axis=(1, 2)) @ np.arange(nx))
    iy = float(p.sum(axis=(0, 2)) @ np.arange(ny))
    iz = float(p.sum(axis=(0, 1)) @ np.arange(nz))
    index = np.array([ix, iy, iz])
    world = heatmap.spec.origin_array + (index + 0.5) * heatmap.spec.voxel_size
    return index, world


def soft_argmax_gradient(heatmap, theta=DEFAULT_THETA):
    """Analytic Jacobian of the soft-argmax index coordinates.

    Returns (3, N) with N = nx*ny*nz; column j is the derivative of
    (ix, iy, iz) with respect to heatmap value j in x-fastest linear
    order (the package's flattening convention).
    """
    _check_heatmap(heatmap, theta)
    p = _softmax_weights(heatmap.values, theta)
    nx, ny, nz = heatmap.spec.dims
    gx, gy, gz = np.meshgrid(
        np.arange(nx, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nz, dtype=np.float64),
        indexing="ij",
    )
    mu = np.array(
        [float((p * gx).sum()), float((p * gy).sum()), float((p * gz).sum())]
    )
    flat_p = p.ravel(order="F")
    rows = []
    for axis_idx, mean in zip((gx, gy, gz), mu):
        rows.append(theta * flat_p * (axis_idx.ravel(order="F") - mean))
    return np.stack(rows)


def hard_argmax_3d(heatmap):
    """Index and world center of the maximum voxel.

    Ties break to the smallest linear index in x-fastest order.
    """
    _check_heatmap(heatmap, DEFAULT_THETA)
    flat = heatmap.values.ravel(order="F")
    lin = int(np.argmax(flat))
    idx = np.unravel_index(lin, heatmap.spec.dims, order="F")
    index = np.array(idx, dtype=np.int64)
    return index, heatmap.spec.voxel_center(index)


def imu_bone_volume(estimated_joint, bone_orientation, sensor, radius, spec):
    """Occupancy of the half-infinite bone cylinder for one sensor.

    The bone is the half-line from estimated_joint along the sensor's
    canonical direction rotated by bone_orientation.  A voxel is occupied
    iff the squared distance from its center to that half-line is at most
    radius**2; behind the start point the distance is taken to the joint
    itself, giving a spherical cap.
    """
    if radius <= 0 or not np.isfinite(radius):
        raise InvalidInputError(f"cylinder radius must be positive, got {radius}")
    q = np.asarray(bone_orientation, dtype=np.float64)
    if q.shape != (4,) or not np.isfinite(q).all():
        raise InvalidInputError("bone orientation must be a finite quaternion [w,x,y,z]")
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise InvalidInputError("bone orientation quaternion is not unit length")
    joint = np.asarray(estimated_joint, dtype=np.float64).reshape(3)
    if not np.isfinite(joint).all():
        raise InvalidInputError("estimated joint must be finite")

    d = quat_rotate_vec(q, sensor.direction_array)
    # Broadcast voxel-center offsets from the joint; expressions mirror the
    # scalar reference loop exactly.
    wx = spec.axis_centers(0)[:, None, None] - joint[0]
    wy = spec.axis_centers(1)[None, :, None] - joint[1]
    wz = spec.axis_centers(2)[None, None, :] - joint[2]
    t = wx * d[0] + wy * d[1] + wz * d[2]
    w2 = wx * wx + wy * wy + wz * wz
    dist2 = np.where(t >= 0.0, w2 - t * t, w2)
    occ = (dist2 <= radius * radius).astype(np.uint8)
    return VoxelGrid(spec, occ)


def imu_bone_stack(pose_estimate, imu_quaternions, topology, radius=DEFAULT_BONE_RADIUS, spec=None):
    """One cylinder channel per sensor, stacked in topology order."""
    quats = np.asarray(imu_quaternions, dtype=np.float64)
    if quats.ndim != 2 or quats.shape[1] != 4:
        raise ConfigurationError(f"imu quaternions must be (M,4), got {quats.shape}")
    if quats.shape[0] != len(topology):
        raise ConfigurationError(
            f"{quats.shape[0]} imu readings but topology has {len(topology)} sensors"
        )
    if spec is None:
        spec = GridSpec(dims=(32, 32, 32), voxel_size=70.0)
    channels = []
    for sensor, q in zip(topology, quats):
        if sensor.proximal_joint >= pose_estimate.num_joints:
            raise ConfigurationError(
                f"sensor {sensor.imu_name!r} references joint {sensor.proximal_joint} "
                f"but the pose has {pose_estimate.num_joints}"
            )
        joint = pose_estimate.joints[sensor.proximal_joint]
        channels.append(imu_bone_volume(joint, q, sensor, radius, spec).data)
    data = np.stack(channels)
    return MultiChannelVolume(spec, data, {"imu_bones": (0, data.shape[0])})


def concat_refinement_input(vision, heatmaps, imu_bones):
    """Channel-concatenate vision, heatmap, and IMU-bone volumes.

    All inputs must share the same grid.  Channel order is vision block,
    then one channel per heatmap, then the IMU-bone block; channel_groups
    on the result records the three ranges.  The heatmap list may be
    empty.  Values pass through unchanged as float64.
    """
    spec = vision.spec
    parts = [("vision", vision.spec), ("imu_bones", imu_bones.spec)]
    parts += [(f"heatmap {i}", h.spec) for i, h in enumerate(heatmaps)]
    for name, other in parts:
        if other.dims != spec.dims:
            raise ConfigurationError(
                f"{name} grid dims {other.dims} do not match vision dims {spec.dims}"
            )
        if (
            abs(other.voxel_size - spec.voxel_size) > 1e-6
            or np.abs(other.origin_array - spec.origin_array).max() > 1e-6
        ):
            raise ConfigurationError(f"{name} grid placement does not match vision grid")

    blocks = [vision.data.astype(np.float64)]
    if heatmaps:
        blocks.append(np.stack([h.values for h in heatmaps]))
    blocks.append(imu_bones.data.astype(np.float64))
    data = np.concatenate(blocks)
    kv = vision.channels
    kh = len(heatmaps)
    groups = {
        "vision": (0, kv),
        "heatmaps": (kv, kv + kh),
        "imu_bones": (kv + kh, kv + kh + imu_bones.channels),
    }
    return MultiChannelVolume(spec, data, groups)


def two_stage_loss(estimate, refined, ground_truth):
    """Sum of squared joint errors for both stages, in mm^2.

    Returns (total, (stage1, stage2)) where stage1 compares the initial
    estimate and stage2 the refined estimate against ground truth.
    """
    for pose, label in ((estimate, "estimate"), (refined, "refined")):
        if pose.num_joints != ground_truth.num_joints:
            raise ConfigurationError(
                f"{label} has {pose.num_joints} joints, ground truth has "
                f"{ground_truth.num_joints}"
            )
    stage1 = float(((estimate.joints - ground_truth.joints) ** 2).sum())
    stage2 = float(((refined.joints - ground_truth.joints) ** 2).sum())
    return stage1 + stage2, (stage1, stage2)
