"""Geometric building blocks for multi-view + IMU 3D human pose estimation.

The package covers the non-learned parts of a volumetric pose pipeline:
per-camera voxel carving of silhouettes, IMU quaternion handling and
bone-cylinder volumes, a differentiable 3D soft-argmax readout with its
analytic Jacobian, scene-level augmentation, pose error metrics, and a
fully synthetic scene generator that makes every stage verifiable
without trained weights.
"""

from .errors import (
    AlignmentError,
    ConfigurationError,
    FormatError,
    InvalidInputError,
    ProjectionError,
    RankDeficiencyError,
    VoxfuseError,
)
from .fusion import (
    DEFAULT_BONE_RADIUS,
    DEFAULT_THETA,
    HeatmapVolume,
    concat_refinement_input,
    hard_argmax_3d,
    imu_bone_stack,
    imu_bone_volume,
    soft_argmax_3d,
    soft_argmax_gradient,
    two_stage_loss,
)
from .geometry import (
    CameraModel,
    GridSpec,
    all_points_visible,
    imu_apply_wear_offset,
    imu_local_to_global,
    project_point,
    project_points,
    quat_angle_between,
    quat_conjugate,
    quat_from_axis_angle,
    quat_from_two_vectors,
    quat_mul,
    quat_normalize,
    quat_rotate_vec,
    quat_to_matrix,
    random_unit_quaternion,
    vertical_axis_quaternion,
)
from .metrics import (
    FrameResult,
    PerFrameReport,
    SimilarityTransform,
    mpjpe,
    pa_mpjpe,
    per_frame_report,
    procrustes_align,
)
from .seeding import derive_rng
from .skeleton import (
    JOINT_NAMES,
    BoneSensor,
    Pose,
    SkeletonTopology,
    default_topology,
    t_pose,
)
from .synth import (
    BodyPrimitive,
    SyntheticScene,
    brute_force_voxelize,
    gaussian_heatmaps,
    generate_scene,
    quantization_error_mc,
    render_silhouette,
)
from .volume import (
    MultiChannelVolume,
    VoxelGrid,
    average_pool,
    build_channel,
    build_multichannel,
    center_grid_on,
    random_shut,
    rotate_scene,
    visual_hull,
)

__version__ = "0.1.0"
