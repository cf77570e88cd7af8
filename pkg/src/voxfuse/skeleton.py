"""Pose containers and the IMU-to-bone topology.

The default rig has 13 joints and 13 inertial sensors.  Each sensor is
tied to a bone by the joint at its proximal end plus the bone's unit
direction in the sensor's canonical (calibration) pose, so a measured
orientation quaternion turns into a world-space bone direction by
rotating the canonical direction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidInputError

JOINT_NAMES = (
    "pelvis",
    "sternum",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_knee",
    "l_ankle",
    "r_knee",
    "r_ankle",
)

# Reference stance offsets from the pelvis, mm.  +X left, +Y forward, +Z up.
T_POSE_OFFSETS = {
    "pelvis": (0.0, 0.0, 0.0),
    "sternum": (0.0, 0.0, 450.0),
    "head": (0.0, 0.0, 720.0),
    "l_shoulder": (190.0, 0.0, 430.0),
    "l_elbow": (480.0, 0.0, 430.0),
    "l_wrist": (740.0, 0.0, 430.0),
    "r_shoulder": (-190.0, 0.0, 430.0),
    "r_elbow": (-480.0, 0.0, 430.0),
    "r_wrist": (-740.0, 0.0, 430.0),
    "l_knee": (95.0, 0.0, -440.0),
    "l_ankle": (95.0, 0.0, -860.0),
    "r_knee": (-95.0, 0.0, -440.0),
    "r_ankle": (-95.0, 0.0, -860.0),
}

# Kinematic tree (parent, child) joint names; drives the pose sampler.
SKELETON_TREE = (
    ("pelvis", "sternum"),
    ("sternum", "head"),
    ("sternum", "l_shoulder"),
    ("l_shoulder", "l_elbow"),
    ("l_elbow", "l_wrist"),
    ("sternum", "r_shoulder"),
    ("r_shoulder", "r_elbow"),
    ("r_elbow", "r_wrist"),
    ("pelvis", "l_knee"),
    ("l_knee", "l_ankle"),
    ("pelvis", "r_knee"),
    ("r_knee", "r_ankle"),
)

# Sensor name -> (proximal joint, distal joint).  The spine sensor spans
# pelvis->head, a long-axis redundancy on top of the 12 tree bones.
SENSOR_LIMBS = (
    ("pelvis", "pelvis", "sternum"),
    ("sternum", "sternum", "head"),
    ("spine", "pelvis", "head"),
    ("l_clavicle", "sternum", "l_shoulder"),
    ("r_clavicle", "sternum", "r_shoulder"),
    ("l_upper_arm", "l_shoulder", "l_elbow"),
    ("l_forearm", "l_elbow", "l_wrist"),
    ("r_upper_arm", "r_shoulder", "r_elbow"),
    ("r_forearm", "r_elbow", "r_wrist"),
    ("l_thigh", "pelvis", "l_knee"),
    ("l_shin", "l_knee", "l_ankle"),
    ("r_thigh", "pelvis", "r_knee"),
    ("r_shin", "r_knee", "r_ankle"),
)


@dataclass(frozen=True)
class BoneSensor:
    """One IMU channel: sensor id, proximal joint index, canonical bone axis."""

    imu_index: int
    imu_name: str
    proximal_joint: int
    canonical_direction: tuple

    def __post_init__(self):
        d = np.asarray(self.canonical_direction, dtype=np.float64).reshape(3)
        object.__setattr__(self, "canonical_direction", tuple(float(v) for v in d))
        if self.imu_index < 0 or self.proximal_joint < 0:
            raise ConfigurationError("sensor indices must be non-negative")
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise InvalidInputError(
                f"sensor {self.imu_name!r}: canonical direction must be a unit vector"
            )

    @property
    def direction_array(self):
        return np.asarray(self.canonical_direction, dtype=np.float64)


@dataclass(frozen=True)
class SkeletonTopology:
    """Ordered sensor set; sensor i occupies channel i of the IMU-bone stack."""

    sensors: tuple

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if not self.sensors:
            raise ConfigurationError("topology must contain at least one sensor")
        indices = [s.imu_index for s in self.sensors]
        if indices != list(range(len(self.sensors))):
            raise ConfigurationError("sensor imu_index values must be 0..M-1 in order")

    def __len__(self):
        return len(self.sensors)

    def __iter__(self):
        return iter(self.sensors)

    def proximal_indices(self):
        return np.array([s.proximal_joint for s in self.sensors], dtype=np.int64)

    def directions(self):
        return np.stack([s.direction_array for s in self.sensors])


@dataclass
class Pose:
    """Joint positions (K,3) in world mm plus parallel joint names."""

    joints: np.ndarray
    joint_names: tuple = JOINT_NAMES

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        self.joint_names = tuple(self.joint_names)
        if self.joints.ndim != 2 or self.joints.shape[1] != 3:
            raise ConfigurationError(f"joints must be (K,3), got {self.joints.shape}")
        if len(self.joint_names) != self.joints.shape[0]:
            raise ConfigurationError(
                f"{self.joints.shape[0]} joints but {len(self.joint_names)} names"
            )
        if not np.isfinite(self.joints).all():
            raise InvalidInputError("joint positions must be finite")

    @property
    def num_joints(self):
        return self.joints.shape[0]

    def index_of(self, name):
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ConfigurationError(f"pose has no joint named {name!r}") from None

    def root(self):
        """Position of the root (first) joint."""
        return self.joints[0].copy()


def t_pose(root=(0.0, 0.0, 0.0)):
    """Reference stance as a Pose with the pelvis at ``root``."""
    root = np.asarray(root, dtype=np.float64)
    joints = np.array([T_POSE_OFFSETS[n] for n in JOINT_NAMES]) + root
    return Pose(joints, JOINT_NAMES)


def default_topology():
    """The 13-sensor rig with canonical directions from the reference stance."""
    name_to_idx = {n: i for i, n in enumerate(JOINT_NAMES)}
    sensors = []
    for imu_index, (imu_name, prox, dist) in enumerate(SENSOR_LIMBS):
        a = np.asarray(T_POSE_OFFSETS[prox])
        b = np.asarray(T_POSE_OFFSETS[dist])
        d = b - a
        d = d / np.linalg.norm(d)
        sensors.append(BoneSensor(imu_index, imu_name, name_to_idx[prox], tuple(d)))
    return SkeletonTopology(tuple(sensors))
