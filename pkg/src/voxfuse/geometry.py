"""Camera models, voxel-grid geometry, and quaternion algebra.

Conventions used throughout the package:

* World coordinates are millimeters in a right-handed frame with +Z up.
* Quaternions are scalar-first ``[w, x, y, z]`` Hamilton quaternions.
  ``q`` and ``-q`` encode the same rotation, so comparisons must be made
  on rotation actions (or up to sign), never on raw components.
* Camera extrinsics ``[R | t]`` map world points to camera coordinates;
  a world point C projects through ``intrinsics @ extrinsics @ [C; 1]``
  followed by perspective division.

Quaternion functions broadcast: arguments are arrays whose last axis has
length 4 (quaternions) or 3 (vectors), with any leading batch shape.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidInputError, ProjectionError

# ---------------------------------------------------------------------------
# quaternions


def _hamilton(a, b):
    """Raw Hamilton product a*b without renormalization.

    Used internally where one operand is a pure (non-unit) quaternion.
    """
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_normalize(q):
    """Scale q to unit norm.  Raises InvalidInputError on (near-)zero norm."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if not np.isfinite(q).all() or (norm < 1e-12).any():
        raise InvalidInputError("cannot normalize a zero or non-finite quaternion")
    return q / norm


def quat_mul(a, b):
    """Hamilton product of two unit quaternions, renormalized.

    Composition order matches rotation matrices: rotating by
    ``quat_mul(a, b)`` equals rotating by b first, then by a.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = _hamilton(a, b)
    if __debug__:
        drift = np.abs(np.linalg.norm(out, axis=-1) - 1.0)
        assert drift.max() < 1e-6, "unit quaternion product drifted beyond 1e-6"
    return quat_normalize(out)


def quat_conjugate(q):
    """Conjugate [w, -x, -y, -z]; the inverse for unit quaternions."""
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate_vec(q, v):
    """Rotate vector(s) v by unit quaternion(s) q.

    q is normalized before use; the vector norm is preserved.
    """
    q = quat_normalize(q)
    v = np.asarray(v, dtype=np.float64)
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_to_matrix(q):
    """Rotation matrix (...,3,3) acting on column vectors, from unit q."""
    q = quat_normalize(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def quat_from_axis_angle(axis, angle):
    """Unit quaternion for a rotation of `angle` radians about `axis`."""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis, axis=-1, keepdims=True)
    if (norm < 1e-12).any():
        raise InvalidInputError("rotation axis must be nonzero")
    axis = axis / norm
    angle = np.asarray(angle, dtype=np.float64)
    half = 0.5 * angle
    return np.concatenate(
        [np.cos(half)[..., None], np.sin(half)[..., None] * axis], axis=-1
    )


def vertical_axis_quaternion(angle):
    """Quaternion rotating by `angle` radians about the world up axis (+Z)."""
    return quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), angle)


def quat_from_two_vectors(a, b):
    """Minimal rotation taking direction a to direction b.

    For (anti)parallel inputs returns identity, or a half-turn about an
    arbitrary perpendicular axis.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise InvalidInputError("direction vectors must be nonzero")
    a = a / na
    b = b / nb
    c = np.cross(a, b)
    d = float(np.dot(a, b))
    if d > 1.0 - 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    if d < -1.0 + 1e-12:
        # pick any axis perpendicular to a
        helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        return quat_from_axis_angle(axis, np.pi)
    q = np.concatenate([[1.0 + d], c])
    return quat_normalize(q)


def quat_angle_between(a, b):
    """Rotation angle in radians between two unit quaternions (sign-safe)."""
    a = quat_normalize(a)
    b = quat_normalize(b)
    dot = np.clip(np.abs(np.sum(a * b, axis=-1)), 0.0, 1.0)
    return 2.0 * np.arccos(dot)


def random_unit_quaternion(rng, size=None):
    """Uniform random rotation(s) as unit quaternions.

    `size` may be an int or a shape tuple; the result gains a trailing
    axis of length 4.
    """
    if size is None:
        shape = (4,)
    elif np.isscalar(size):
        shape = (int(size), 4)
    else:
        shape = tuple(int(s) for s in size) + (4,)
    q = rng.standard_normal(shape)
    return quat_normalize(q)


# ---------------------------------------------------------------------------
# IMU frame handling


def imu_local_to_global(q_local, q_local_to_global):
    """Map sensor-local readings into the global frame.

    q_global = q_local * q_local_to_global, where q_local_to_global is the
    per-sensor calibration constant.
    """
    return quat_mul(q_local, q_local_to_global)


def imu_apply_wear_offset(q_wear, q_global):
    """Remove the mounting offset between sensor case and bone.

    Returns conj(q_wear) * q_global, the orientation of the underlying bone.
    """
    return quat_mul(quat_conjugate(np.asarray(q_wear, dtype=np.float64)), q_global)


# ---------------------------------------------------------------------------
# cameras


@dataclass
class CameraModel:
    """Calibrated pinhole camera.

    intrinsics: (3,3) upper-triangular, positive focal lengths.
    extrinsics: (3,4) ``[R | t]`` mapping world -> camera coordinates.
    width, height: image size in pixels.
    """

    intrinsics: np.ndarray
    extrinsics: np.ndarray
    width: int
    height: int
    name: str = ""

    def __post_init__(self):
        self.intrinsics = np.asarray(self.intrinsics, dtype=np.float64)
        self.extrinsics = np.asarray(self.extrinsics, dtype=np.float64)
        if self.intrinsics.shape != (3, 3):
            raise ConfigurationError(f"intrinsics must be 3x3, got {self.intrinsics.shape}")
        if self.extrinsics.shape != (3, 4):
            raise ConfigurationError(f"extrinsics must be 3x4, got {self.extrinsics.shape}")
        if not (np.isfinite(self.intrinsics).all() and np.isfinite(self.extrinsics).all()):
            raise ConfigurationError(f"camera {self.name!r} has non-finite calibration")
        k = self.intrinsics
        lower = np.abs([k[1, 0], k[2, 0], k[2, 1]]).max()
        if lower > 1e-9 * max(1.0, np.abs(k).max()):
            raise ConfigurationError(f"camera {self.name!r}: intrinsics not upper-triangular")
        if k[0, 0] <= 0 or k[1, 1] <= 0 or k[2, 2] <= 0:
            raise ConfigurationError(f"camera {self.name!r}: focal lengths must be positive")
        r = self.extrinsics[:, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-6 or np.linalg.det(r) < 0:
            raise ConfigurationError(
                f"camera {self.name!r}: rotation block is not right-handed orthonormal"
            )
        self.width = int(self.width)
        self.height = int(self.height)
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError(f"camera {self.name!r}: image size must be positive")

    def projection_matrix(self):
        """3x4 combined projection ``intrinsics @ extrinsics``."""
        return self.intrinsics @ self.extrinsics

    def position(self):
        """Camera center in world coordinates."""
        r = self.extrinsics[:, :3]
        t = self.extrinsics[:, 3]
        return -r.T @ t


def project_point(camera, point):
    """Project one world point; returns (u, v, in_front).

    Points behind the camera still yield coordinates (in_front False).
    Raises ProjectionError when the point lies on the camera plane
    (|depth| < 1e-9) and perspective division is undefined.
    """
    p = camera.projection_matrix()
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    uh = p[0, 0] * x + p[0, 1] * y + p[0, 2] * z + p[0, 3]
    vh = p[1, 0] * x + p[1, 1] * y + p[1, 2] * z + p[1, 3]
    wh = p[2, 0] * x + p[2, 1] * y + p[2, 2] * z + p[2, 3]
    if abs(wh) < 1e-9:
        raise ProjectionError(f"point {point!r} lies on the plane of camera {camera.name!r}")
    return uh / wh, vh / wh, wh > 0.0


def all_points_visible(cameras, points):
    """True iff every point projects inside every camera's image bounds.

    Uses the same nearest-pixel rounding as the voxel carver.  Frames
    where this holds are "full"; frames where body parts leave some view
    are "partial".
    """
    pts = np.asarray(points, dtype=np.float64)
    for cam in cameras:
        uv, depth = project_points(cam, pts)
        with np.errstate(invalid="ignore"):
            pu = np.floor(uv[:, 0] + 0.5)
            pv = np.floor(uv[:, 1] + 0.5)
        ok = (
            (depth > 0.0)
            & (pu >= 0.0)
            & (pu <= cam.width - 1.0)
            & (pv >= 0.0)
            & (pv <= cam.height - 1.0)
        )
        if not ok.all():
            return False
    return True


def project_points(camera, points):
    """Vectorized projection of (N,3) world points.

    Returns (uv, depth): (N,2) pixel coordinates and (N,) camera-frame
    depth.  No degeneracy check; callers mask on depth themselves.
    """
    p = camera.projection_matrix()
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    uh = p[0, 0] * x + p[0, 1] * y + p[0, 2] * z + p[0, 3]
    vh = p[1, 0] * x + p[1, 1] * y + p[1, 2] * z + p[1, 3]
    wh = p[2, 0] * x + p[2, 1] * y + p[2, 2] * z + p[2, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = np.stack([uh / wh, vh / wh], axis=-1)
    return uv, wh


# ---------------------------------------------------------------------------
# voxel grids


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel grid: origin corner (mm), voxel counts, edge length.

    Voxel (i, j, k) is the half-open cube
    ``origin + [i, i+1) x [j, j+1) x [k, k+1) * voxel_size``
    and its center sits at ``origin + (index + 0.5) * voxel_size``.
    Linear (flattened) order is x-fastest throughout the package.
    """

    origin: tuple = (0.0, 0.0, 0.0)
    dims: tuple = (64, 64, 64)
    voxel_size: float = 35.0

    def __post_init__(self):
        origin = tuple(float(v) for v in np.asarray(self.origin, dtype=np.float64).reshape(3))
        dims = tuple(int(v) for v in self.dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "voxel_size", float(self.voxel_size))
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ConfigurationError(f"grid dims must be three positive ints, got {self.dims}")
        if not self.voxel_size > 0:
            raise ConfigurationError(f"voxel size must be positive, got {self.voxel_size}")
        if not all(np.isfinite(origin)):
            raise ConfigurationError("grid origin must be finite")

    @property
    def origin_array(self):
        return np.asarray(self.origin, dtype=np.float64)

    @property
    def num_voxels(self):
        return self.dims[0] * self.dims[1] * self.dims[2]

    def extent(self):
        """Physical edge lengths (3,) in mm."""
        return np.asarray(self.dims, dtype=np.float64) * self.voxel_size

    def center(self):
        """Geometric center of the grid volume."""
        return self.origin_array + 0.5 * self.extent()

    def axis_centers(self, axis):
        """Voxel-center coordinates along one axis (0=x, 1=y, 2=z)."""
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n, dtype=np.float64) + 0.5) * self.voxel_size

    def voxel_center(self, index):
        """World coordinates of the center of voxel ``index`` (i, j, k)."""
        idx = np.asarray(index, dtype=np.float64)
        return self.origin_array + (idx + 0.5) * self.voxel_size
