"""Multi-channel voxel carving and scene-level augmentation.

Each camera contributes its own binary occupancy channel: a voxel is set
when its center projects onto a foreground silhouette pixel in front of
that camera.  Channels are never fused during construction; the visual
hull (channel-wise AND) exists only as a diagnostic.

Carving uses the voxel-center convention and nearest-pixel rounding
``floor(coord + 0.5)``; any change here must be mirrored in the
brute-force reference implementation, which asserts exact equality.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .geometry import (
    CameraModel,
    GridSpec,
    quat_mul,
    quat_to_matrix,
    vertical_axis_quaternion,
)
from .seeding import derive_rng
from .skeleton import Pose


@dataclass
class VoxelGrid:
    """Single-channel binary occupancy over a GridSpec."""

    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.shape != self.spec.dims:
            raise ConfigurationError(
                f"data shape {self.data.shape} does not match grid dims {self.spec.dims}"
            )

    @property
    def occupancy(self):
        return float(np.count_nonzero(self.data)) / self.spec.num_voxels


@dataclass
class MultiChannelVolume:
    """Stack of per-camera (or per-sensor) channels over one GridSpec.

    data is (channels, nx, ny, nz).  channel_groups optionally names
    half-open channel ranges, e.g. {"vision": (0, 8), "imu_bones": (8, 21)}.
    """

    spec: GridSpec
    data: np.ndarray
    channel_groups: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 4 or self.data.shape[1:] != self.spec.dims:
            raise ConfigurationError(
                f"data shape {self.data.shape} does not match (C,) + {self.spec.dims}"
            )
        for name, (lo, hi) in self.channel_groups.items():
            if not (0 <= lo <= hi <= self.data.shape[0]):
                raise ConfigurationError(f"channel group {name!r} out of range")

    @property
    def channels(self):
        return self.data.shape[0]

    def channel(self, index):
        return VoxelGrid(self.spec, self.data[index])

    def group(self, name):
        lo, hi = self.channel_groups[name]
        return self.data[lo:hi]


def center_grid_on(subject_center, dims=(64, 64, 64), voxel_size=35.0):
    """GridSpec whose volume is centered on subject_center."""
    c = np.asarray(subject_center, dtype=np.float64).reshape(3)
    dims = tuple(int(d) for d in dims)
    half = 0.5 * voxel_size * np.asarray(dims, dtype=np.float64)
    return GridSpec(tuple(c - half), dims, float(voxel_size))


def build_channel(camera, silhouette, spec):
    """Carve one camera's occupancy channel.

    A voxel is occupied iff its center lands in front of the camera, its
    nearest pixel floor(u + 0.5), floor(v + 0.5) is inside the image, and
    that silhouette pixel is foreground (nonzero).

    The projection is evaluated with explicit per-voxel multiply-adds so
    results are bit-identical to the scalar reference loop.
    """
    sil = np.asarray(silhouette)
    if sil.shape != (camera.height, camera.width):
        raise ConfigurationError(
            f"silhouette shape {sil.shape} does not match camera "
            f"{camera.name!r} image size {(camera.height, camera.width)}"
        )
    p = camera.projection_matrix()
    cx = spec.axis_centers(0)[:, None, None]
    cy = spec.axis_centers(1)[None, :, None]
    cz = spec.axis_centers(2)[None, None, :]
    uh = p[0, 0] * cx + p[0, 1] * cy + p[0, 2] * cz + p[0, 3]
    vh = p[1, 0] * cx + p[1, 1] * cy + p[1, 2] * cz + p[1, 3]
    wh = p[2, 0] * cx + p[2, 1] * cy + p[2, 2] * cz + p[2, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        pu = np.floor(uh / wh + 0.5)
        pv = np.floor(vh / wh + 0.5)
    inside = (
        (wh > 0.0)
        & (pu >= 0.0)
        & (pu <= camera.width - 1.0)
        & (pv >= 0.0)
        & (pv <= camera.height - 1.0)
    )
    occ = np.zeros(spec.dims, dtype=np.uint8)
    ui = pu[inside].astype(np.int64)
    vi = pv[inside].astype(np.int64)
    occ[inside] = (sil[vi, ui] != 0).astype(np.uint8)
    return VoxelGrid(spec, occ)


def build_multichannel(cameras, silhouettes, spec):
    """Stack per-camera channels; camera order defines channel order."""
    if len(cameras) != len(silhouettes):
        raise ConfigurationError(
            f"{len(cameras)} cameras but {len(silhouettes)} silhouettes"
        )
    if not cameras:
        raise ConfigurationError("at least one camera is required")
    channels = [build_channel(cam, sil, spec).data for cam, sil in zip(cameras, silhouettes)]
    data = np.stack(channels)
    return MultiChannelVolume(spec, data, {"vision": (0, data.shape[0])})


def random_shut(volume, probability, rng_seed):
    """Zero out each channel independently with the given probability.

    Deterministic in (volume, probability, rng_seed); the input volume is
    not modified.  Returns (augmented volume, list of dropped channels).
    """
    if not 0.0 <= probability <= 1.0:
        raise ConfigurationError(f"drop probability must be in [0,1], got {probability}")
    rng = derive_rng(rng_seed, "random-shut")
    draws = rng.random(volume.channels)
    dropped = [i for i in range(volume.channels) if draws[i] < probability]
    data = volume.data.copy()
    for i in dropped:
        data[i] = 0
    return MultiChannelVolume(volume.spec, data, dict(volume.channel_groups)), dropped


def rotate_scene(angle, cameras, gt_pose, imu_quaternions, center):
    """Rotate scene content about the vertical axis through ``center``.

    Joints move as p' = R (p - c) + c; camera extrinsics are compensated
    so every rotated world point projects to the same pixel as the
    original point did (silhouettes are reusable); IMU orientations are
    left-composed with the rotation.

    Returns (cameras, pose, quaternions) as new objects.
    """
    q = vertical_axis_quaternion(float(angle))
    rot = quat_to_matrix(q)
    c = np.asarray(center, dtype=np.float64).reshape(3)

    new_pose = None
    if gt_pose is not None:
        moved = (gt_pose.joints - c) @ rot.T + c
        new_pose = Pose(moved, gt_pose.joint_names)

    new_cameras = []
    for cam in cameras:
        r_e = cam.extrinsics[:, :3]
        t_e = cam.extrinsics[:, 3]
        r_new = r_e @ rot.T
        t_new = t_e + r_e @ (c - rot.T @ c)
        ext = np.concatenate([r_new, t_new[:, None]], axis=1)
        new_cameras.append(
            CameraModel(cam.intrinsics.copy(), ext, cam.width, cam.height, cam.name)
        )

    new_quats = None
    if imu_quaternions is not None:
        quats = np.asarray(imu_quaternions, dtype=np.float64)
        new_quats = quat_mul(q, quats)

    return new_cameras, new_pose, new_quats


def visual_hull(volume):
    """Channel-wise AND of all channels (diagnostic only)."""
    if volume.channels < 1:
        raise ConfigurationError("visual hull needs at least one channel")
    hull = (volume.data != 0).all(axis=0).astype(np.uint8)
    return VoxelGrid(volume.spec, hull)


def average_pool(volume, factor=2):
    """Downsample by block-averaging; binary input becomes fractional occupancy.

    Grid dims must divide evenly; voxel size scales by ``factor`` and the
    origin is unchanged.
    """
    factor = int(factor)
    if factor < 1:
        raise ConfigurationError(f"pool factor must be >= 1, got {factor}")
    nx, ny, nz = volume.spec.dims
    if nx % factor or ny % factor or nz % factor:
        raise ConfigurationError(f"grid dims {volume.spec.dims} not divisible by {factor}")
    k = volume.channels
    blocks = volume.data.astype(np.float64).reshape(
        k, nx // factor, factor, ny // factor, factor, nz // factor, factor
    )
    pooled = blocks.mean(axis=(2, 4, 6))
    spec = GridSpec(
        volume.spec.origin,
        (nx // factor, ny // factor, nz // factor),
        volume.spec.voxel_size * factor,
    )
    return MultiChannelVolume(spec, pooled, dict(volume.channel_groups))
