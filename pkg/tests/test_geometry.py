"""Quaternion algebra, camera projection, and grid geometry."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import voxfuse as vf
from voxfuse.errors import ConfigurationError, InvalidInputError, ProjectionError

from conftest import identity_camera


def scipy_rotation(q):
    """Independent rotation-matrix oracle (scipy uses x,y,z,w order)."""
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w])


# ---------------------------------------------------------------------------
# quaternion basics


def test_identity_product():
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    q = vf.quat_normalize([0.3, -0.5, 0.1, 0.9])
    assert np.allclose(vf.quat_mul(ident, q), q)
    assert np.allclose(vf.quat_mul(q, ident), q)


def test_conjugate_is_inverse(rng):
    for q in vf.random_unit_quaternion(rng, 50):
        prod = vf.quat_mul(q, vf.quat_conjugate(q))
        assert vf.quat_angle_between(prod, [1, 0, 0, 0]) < 1e-9


def test_product_composes_like_matrices(rng):
    qz = vf.quat_from_axis_angle([0, 0, 1], np.pi / 2)
    qx = vf.quat_from_axis_angle([1, 0, 0], np.pi / 2)
    v = np.array([1.0, 2.0, 3.0])
    # explicit trig matrices, built independently
    rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    got = vf.quat_rotate_vec(vf.quat_mul(qz, qx), v)
    assert np.allclose(got, rz @ rx @ v, atol=1e-12)
    # random pairs against the scipy oracle
    qa = vf.random_unit_quaternion(rng, 30)
    qb = vf.random_unit_quaternion(rng, 30)
    for a, b in zip(qa, qb):
        expected = scipy_rotation(a).as_matrix() @ scipy_rotation(b).as_matrix()
        got = vf.quat_to_matrix(vf.quat_mul(a, b))
        assert np.abs(got - expected).max() < 1e-12


def test_rotation_matches_matrix_action(rng):
    qs = vf.random_unit_quaternion(rng, 10_000)
    vs = rng.uniform(-1.0, 1.0, size=(10_000, 3))
    got = vf.quat_rotate_vec(qs, vs)
    expected = np.einsum("nij,nj->ni", vf.quat_to_matrix(qs), vs)
    assert np.abs(got - expected).max() < 1e-9
    # spot-check the matrix itself against scipy
    for q, v in zip(qs[:100], vs[:100]):
        assert np.abs(scipy_rotation(q).apply(v) - vf.quat_rotate_vec(q, v)).max() < 1e-9


def test_product_is_associative(rng):
    a, b, c = (vf.random_unit_quaternion(rng, 200) for _ in range(3))
    left = vf.quat_mul(vf.quat_mul(a, b), c)
    right = vf.quat_mul(a, vf.quat_mul(b, c))
    # q and -q are the same rotation; compare up to sign
    diff = np.minimum(
        np.abs(left - right).max(axis=-1), np.abs(left + right).max(axis=-1)
    )
    assert diff.max() < 1e-9


def test_rotation_preserves_norm(rng):
    qs = vf.random_unit_quaternion(rng, 500)
    vs = rng.uniform(-1000.0, 1000.0, size=(500, 3))
    got = vf.quat_rotate_vec(qs, vs)
    assert np.abs(np.linalg.norm(got, axis=1) - np.linalg.norm(vs, axis=1)).max() < 1e-6


def test_normalize_rejects_degenerate():
    with pytest.raises(InvalidInputError):
        vf.quat_normalize([0.0, 0.0, 0.0, 0.0])
    with pytest.raises(InvalidInputError):
        vf.quat_normalize([np.nan, 0.0, 0.0, 1.0])


def test_product_drift_assertion():
    # grossly non-unit operands trip the debug drift check
    with pytest.raises(AssertionError):
        vf.quat_mul([2.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0])


def test_axis_angle_examples():
    q = vf.quat_from_axis_angle([0, 0, 1], np.pi / 2)
    assert np.allclose(vf.quat_rotate_vec(q, [1, 0, 0]), [0, 1, 0], atol=1e-12)
    assert np.allclose(vf.quat_rotate_vec(q, [0, 1, 0]), [-1, 0, 0], atol=1e-12)
    with pytest.raises(InvalidInputError):
        vf.quat_from_axis_angle([0, 0, 0], 1.0)


def test_vertical_axis_quaternion():
    assert np.allclose(vf.vertical_axis_quaternion(0.0), [1, 0, 0, 0])
    q = vf.vertical_axis_quaternion(np.pi / 2)
    assert np.allclose(vf.quat_rotate_vec(q, [1, 0, 0]), [0, 1, 0], atol=1e-12)
    # two half turns compose to the identity rotation
    twice = vf.quat_mul(vf.vertical_axis_quaternion(np.pi), vf.vertical_axis_quaternion(np.pi))
    assert vf.quat_angle_between(twice, [1, 0, 0, 0]) < 1e-9


def test_from_two_vectors(rng):
    for _ in range(100):
        a = rng.standard_normal(3)
        b = rng.standard_normal(3)
        q = vf.quat_from_two_vectors(a, b)
        got = vf.quat_rotate_vec(q, a / np.linalg.norm(a))
        assert np.abs(got - b / np.linalg.norm(b)).max() < 1e-9
    # parallel and antiparallel corner cases
    assert np.allclose(vf.quat_from_two_vectors([0, 0, 2], [0, 0, 5]), [1, 0, 0, 0])
    q = vf.quat_from_two_vectors([1, 0, 0], [-1, 0, 0])
    assert np.abs(vf.quat_rotate_vec(q, [1, 0, 0]) - [-1, 0, 0]).max() < 1e-9
    with pytest.raises(InvalidInputError):
        vf.quat_from_two_vectors([0, 0, 0], [1, 0, 0])


# ---------------------------------------------------------------------------
# IMU frame chain


def test_local_to_global_identity_calibration(rng):
    q = vf.random_unit_quaternion(rng, 20)
    ident = np.tile([1.0, 0.0, 0.0, 0.0], (20, 1))
    assert np.abs(vf.imu_local_to_global(q, ident) - q).max() < 1e-12
    assert np.abs(vf.imu_apply_wear_offset(ident, q) - q).max() < 1e-12


def test_frame_chain_matches_raw_hamilton(rng):
    """Same algebra written as one raw product chain in the test."""

    def hamilton(a, b):
        w1, x1, y1, z1 = a
        w2, x2, y2, z2 = b
        return np.array(
            [
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            ]
        )

    for _ in range(200):
        q_local = vf.random_unit_quaternion(rng)
        l2g = vf.random_unit_quaternion(rng)
        wear = vf.random_unit_quaternion(rng)
        got = vf.imu_apply_wear_offset(wear, vf.imu_local_to_global(q_local, l2g))
        conj_wear = wear * np.array([1.0, -1.0, -1.0, -1.0])
        expected = hamilton(conj_wear, hamilton(q_local, l2g))
        expected /= np.linalg.norm(expected)
        assert min(np.abs(got - expected).max(), np.abs(got + expected).max()) < 1e-9


def test_frame_chain_outputs_unit_quaternions(rng):
    q = vf.random_unit_quaternion(rng, 1000)
    l2g = vf.random_unit_quaternion(rng, 1000)
    wear = vf.random_unit_quaternion(rng, 1000)
    out = vf.imu_apply_wear_offset(wear, vf.imu_local_to_global(q, l2g))
    assert np.abs(np.linalg.norm(out, axis=-1) - 1.0).max() < 1e-6


# ---------------------------------------------------------------------------
# cameras


def test_projection_hand_example():
    cam = identity_camera(width=641, height=481, focal=1000.0)
    u, v, front = vf.project_point(cam, [100.0, 0.0, 1000.0])
    assert front
    assert abs(u - (100.0 + 320.0)) < 1e-9
    assert abs(v - 240.0) < 1e-9
    u, v, front = vf.project_point(cam, [0.0, 0.0, 1000.0])
    assert (u, v, front) == (320.0, 240.0, True)


def test_projection_behind_camera():
    cam = identity_camera()
    _, _, front = vf.project_point(cam, [0.0, 0.0, -1000.0])
    assert not front


def test_projection_degenerate_raises():
    cam = identity_camera()
    with pytest.raises(ProjectionError):
        vf.project_point(cam, [10.0, 5.0, 0.0])


def test_projection_scale_invariant_along_ray(rng):
    cam = identity_camera()
    for _ in range(50):
        p = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2.0)])
        u1, v1, _ = vf.project_point(cam, p * 100.0)
        u2, v2, _ = vf.project_point(cam, p * 4321.0)
        assert abs(u1 - u2) < 1e-9 and abs(v1 - v2) < 1e-9


def test_project_points_matches_scalar(rng, small_scene):
    cam = small_scene.cameras[0]
    pts = rng.uniform(-2000, 2000, size=(200, 3)) + [0, 0, 1000]
    uv, depth = vf.project_points(cam, pts)
    for i in range(200):
        u, v, front = vf.project_point(cam, pts[i])
        assert abs(uv[i, 0] - u) < 1e-12 and abs(uv[i, 1] - v) < 1e-12
        assert front == (depth[i] > 0)


def test_camera_validation():
    k = np.array([[500.0, 0, 320], [0, 500.0, 240], [0, 0, 1.0]])
    ext = np.concatenate([np.eye(3), np.zeros((3, 1))], axis=1)
    with pytest.raises(ConfigurationError):
        vf.CameraModel(k[:2], ext, 640, 480)
    bad_k = k.copy()
    bad_k[1, 0] = 3.0
    with pytest.raises(ConfigurationError):
        vf.CameraModel(bad_k, ext, 640, 480)
    neg_k = k.copy()
    neg_k[0, 0] = -500.0
    with pytest.raises(ConfigurationError):
        vf.CameraModel(neg_k, ext, 640, 480)
    bad_ext = ext.copy()
    bad_ext[0, 0] = 2.0
    with pytest.raises(ConfigurationError):
        vf.CameraModel(k, bad_ext, 640, 480)
    # reflection is rejected even though it is orthonormal
    refl = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ConfigurationError):
        vf.CameraModel(k, np.concatenate([refl, np.zeros((3, 1))], axis=1), 640, 480)


def test_camera_position():
    cam = identity_camera()
    assert np.allclose(cam.position(), [0, 0, 0])
    rot = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]])
    pos = np.array([100.0, -50.0, 30.0])
    ext = np.concatenate([rot, (-rot @ pos)[:, None]], axis=1)
    cam = vf.CameraModel(cam.intrinsics, ext, 640, 480)
    assert np.allclose(cam.position(), pos, atol=1e-9)


def test_all_points_visible(small_scene):
    assert vf.all_points_visible(small_scene.cameras, small_scene.pose.joints)
    far_away = small_scene.pose.joints + np.array([50_000.0, 0.0, 0.0])
    assert not vf.all_points_visible(small_scene.cameras, far_away)


# ---------------------------------------------------------------------------
# grid


def test_gridspec_centers():
    spec = vf.GridSpec((0.0, 0.0, 0.0), (4, 4, 4), 10.0)
    assert np.allclose(spec.axis_centers(0), [5.0, 15.0, 25.0, 35.0])
    assert np.allclose(spec.voxel_center((0, 0, 0)), [5.0, 5.0, 5.0])
    assert np.allclose(spec.center(), [20.0, 20.0, 20.0])
    assert np.allclose(spec.extent(), [40.0, 40.0, 40.0])
    assert spec.num_voxels == 64


def test_gridspec_validation():
    with pytest.raises(ConfigurationError):
        vf.GridSpec((0, 0, 0), (0, 4, 4), 10.0)
    with pytest.raises(ConfigurationError):
        vf.GridSpec((0, 0, 0), (4, 4, 4), -1.0)
    with pytest.raises(ConfigurationError):
        vf.GridSpec((np.inf, 0, 0), (4, 4, 4), 10.0)


def test_gridspec_hashable_and_comparable():
    a = vf.GridSpec((1.0, 2.0, 3.0), (8, 8, 8), 35.0)
    b = vf.GridSpec((1.0, 2.0, 3.0), (8, 8, 8), 35.0)
    assert a == b and hash(a) == hash(b)
