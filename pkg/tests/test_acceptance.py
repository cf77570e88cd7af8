"""The ten headline guarantees, each with a wall-clock budget.

Every test appends one PASS/FAIL line (via the acceptance_record fixture)
that the terminal hook in conftest prints after the run.  Checks compute
their verdict first, record it, then assert, so a failing criterion still
shows up in the summary.
"""

import json
import time

import numpy as np
import pytest
from numba import njit

import voxfuse as vf
from voxfuse import io as vio
from voxfuse.cli import main as cli_main
from voxfuse.fusion import imu_bone_volume, soft_argmax_3d, soft_argmax_gradient
from voxfuse.skeleton import BoneSensor
from voxfuse.synth import brute_force_voxelize, generate_scene, render_silhouette
from voxfuse.volume import build_channel, random_shut

# Mean distance from a uniform point in a unit cube to the cube center
# (three-fold quadrature, abs error < 1e-9).  The hard-argmax readout
# inherits this times the voxel edge as its resolution floor.
CUBE_MEAN_DISTANCE = 0.4802959782


def test_01_voxel_carver_matches_scalar_reference(acceptance_record):
    """50 random scenes x 8 cameras at 64^3: carve both routes, bit equal."""
    # warm the jitted reference so compilation stays out of the budget
    warm = generate_scene(seed=999, num_cameras=2, image_size=(64, 48))
    warm_spec = vf.center_grid_on(warm.subject_center, (8, 8, 8), 280.0)
    brute_force_voxelize(warm.cameras[0], render_silhouette(warm, 0), warm_spec)

    t0 = time.perf_counter()
    mismatched = 0
    occupied = 0
    for seed in range(50):
        scene = generate_scene(seed=seed, num_cameras=8, image_size=(192, 144))
        spec = vf.center_grid_on(scene.subject_center)
        for c in range(8):
            sil = render_silhouette(scene, c)
            fast = build_channel(scene.cameras[c], sil, spec)
            slow = brute_force_voxelize(scene.cameras[c], sil, spec)
            if not np.array_equal(fast.data, slow.data):
                mismatched += 1
            occupied += int(fast.data.sum())
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and occupied > 0 and elapsed < 60.0
    acceptance_record(1, "voxel carver equals per-voxel scalar reference", ok, elapsed)
    assert mismatched == 0
    assert occupied > 0  # the comparison saw real content, not empty grids
    assert elapsed < 60.0


def _batched_index_readout(batch, theta):
    """Soft-argmax index coords for a (B, nx, ny, nz) stack at once."""
    z = theta * batch
    z = z - z.max(axis=(1, 2, 3), keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=(1, 2, 3), keepdims=True)
    nx, ny, nz = batch.shape[1:]
    ix = np.einsum("bxyz,x->b", p, np.arange(nx, dtype=np.float64))
    iy = np.einsum("bxyz,y->b", p, np.arange(ny, dtype=np.float64))
    iz = np.einsum("bxyz,z->b", p, np.arange(nz, dtype=np.float64))
    return np.stack([ix, iy, iz])


def _fd_jacobian(values, theta, step=1e-5):
    """Central differences of the index readout, columns x-fastest."""
    n = values.size
    pert = np.zeros((n, n))
    np.fill_diagonal(pert, step)
    flat = values.ravel()
    plus = (flat[None, :] + pert).reshape((n,) + values.shape)
    minus = (flat[None, :] - pert).reshape((n,) + values.shape)
    jac = (_batched_index_readout(plus, theta) - _batched_index_readout(minus, theta))
    jac /= 2.0 * step
    # perturbations above iterate C-style; reorder columns to x-fastest
    perm = np.arange(n).reshape(values.shape).ravel(order="F")
    return jac[:, perm]


def test_02_soft_argmax_jacobian_matches_finite_differences(acceptance_record):
    """100 random 8^3 heatmaps, theta in {1, 3, 10}, rel error < 1e-4."""
    rng = vf.derive_rng(2, "jacobian")
    spec = vf.center_grid_on((0.0, 0.0, 0.0), (8, 8, 8), 70.0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        values = rng.uniform(0.0, 1.0, (8, 8, 8))
        heatmap = vf.HeatmapVolume(spec, values)
        for theta in (1.0, 3.0, 10.0):
            analytic = soft_argmax_gradient(heatmap, theta=theta)
            numeric = _fd_jacobian(values, theta)
            rel = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-12)
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 10.0
    acceptance_record(2, "soft-argmax Jacobian matches finite differences", ok, elapsed)
    assert worst < 1e-4, f"worst relative error {worst:.3e}"
    assert elapsed < 10.0


def test_03_high_temperature_readout_approaches_hard_argmax(acceptance_record):
    """At theta=500 the soft readout sits within 0.01 voxel of the peak."""
    rng = vf.derive_rng(3, "temperature")
    spec = vf.center_grid_on((0.0, 0.0, 0.0), (16, 16, 16), 70.0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        values = rng.uniform(0.0, 1.0, (16, 16, 16))
        peak = tuple(rng.integers(0, 16, 3))
        values[peak] += 2.0  # unique max with margin >= 1 over the rest
        heatmap = vf.HeatmapVolume(spec, values)
        soft_idx, _ = soft_argmax_3d(heatmap, theta=500.0)
        hard_idx, _ = vf.hard_argmax_3d(heatmap)
        assert tuple(hard_idx) == peak
        worst = max(worst, np.abs(soft_idx - hard_idx).max())
    elapsed = time.perf_counter() - t0
    ok = worst < 0.01 and elapsed < 5.0
    acceptance_record(3, "high-temperature readout approaches hard argmax", ok, elapsed)
    assert worst < 0.01, f"worst deviation {worst:.4f} voxels"
    assert elapsed < 5.0


def test_04_hard_readout_quantization_floor(acceptance_record):
    """Monte-Carlo center-snap error at 70 mm voxels: 0.4803 x voxel +-0.5%."""
    spec = vf.center_grid_on((0.0, 0.0, 0.0), (32, 32, 32), 70.0)
    expected = CUBE_MEAN_DISTANCE * 70.0
    t0 = time.perf_counter()
    measured = vf.quantization_error_mc(spec, trials=1_000_000, seed=0)
    elapsed = time.perf_counter() - t0
    rel = abs(measured - expected) / expected
    ok = rel < 0.005 and elapsed < 10.0
    acceptance_record(4, "hard-readout quantization floor at 70 mm voxels", ok, elapsed)
    assert rel < 0.005, f"measured {measured:.3f} mm vs expected {expected:.3f} mm"
    assert 33.0 < measured < 34.3  # the absolute scale, not just the ratio
    assert elapsed < 10.0


def test_05_imu_calibration_round_trip_recovers_limb_directions(acceptance_record):
    """Encode/decode through mounting calibration, 10,000 frames, 1e-6."""
    topology = vf.default_topology()
    canonical = topology.directions()
    rng = vf.derive_rng(5, "imu-roundtrip")
    num_sensors = len(topology)
    t0 = time.perf_counter()
    l2g = vf.random_unit_quaternion(rng, num_sensors)
    wear = vf.random_unit_quaternion(rng, num_sensors)
    true_global = vf.random_unit_quaternion(rng, (10_000, num_sensors))
    # sensor-local reading for a bone at true_global under this mounting
    local = vf.quat_mul(wear, vf.quat_mul(true_global, vf.quat_conjugate(l2g)))
    recovered = vf.imu_apply_wear_offset(wear, vf.imu_local_to_global(local, l2g))
    want = vf.quat_rotate_vec(true_global, canonical)
    got = vf.quat_rotate_vec(recovered, canonical)
    worst = np.abs(got - want).max()
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 10.0
    acceptance_record(5, "IMU calibration round trip recovers limb directions", ok, elapsed)
    assert worst < 1e-6, f"worst direction error {worst:.3e}"
    assert elapsed < 10.0


@njit(cache=True)
def _half_line_classify(cx, cy, cz, jx, jy, jz, dx, dy, dz, radius):
    """Reference: explicit closest point on the half-line, per voxel."""
    out = np.zeros((cx.shape[0], cy.shape[0], cz.shape[0]), dtype=np.uint8)
    r2 = radius * radius
    for i in range(cx.shape[0]):
        wx = cx[i] - jx
        for j in range(cy.shape[0]):
            wy = cy[j] - jy
            for k in range(cz.shape[0]):
                wz = cz[k] - jz
                t = wx * dx + wy * dy + wz * dz
                if t < 0.0:
                    t = 0.0
                px = wx - t * dx
                py = wy - t * dy
                pz = wz - t * dz
                if px * px + py * py + pz * pz <= r2:
                    out[i, j, k] = 1
    return out


def test_06_bone_cylinder_matches_exhaustive_classification(acceptance_record):
    """100 random (joint, orientation, radius) triples at 32^3, exact."""
    rng = vf.derive_rng(6, "bone-exact")
    spec = vf.center_grid_on((0.0, 0.0, 0.0), (32, 32, 32), 70.0)
    cx, cy, cz = (spec.axis_centers(a) for a in range(3))
    # warm the jitted reference outside the budget
    _half_line_classify(cx, cy, cz, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 70.0)

    t0 = time.perf_counter()
    mismatched = 0
    occupied = 0
    for trial in range(100):
        joint = rng.uniform(-600.0, 600.0, 3)
        q = vf.random_unit_quaternion(rng)
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        radius = float(rng.uniform(30.0, 120.0))
        sensor = BoneSensor(0, "probe", 0, tuple(axis))
        fast = imu_bone_volume(joint, q, sensor, radius, spec)
        d = vf.quat_rotate_vec(q, sensor.direction_array)
        slow = _half_line_classify(
            cx, cy, cz, joint[0], joint[1], joint[2], d[0], d[1], d[2], radius
        )
        if not np.array_equal(fast.data, slow):
            mismatched += 1
        occupied += int(fast.data.sum())
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and occupied > 0 and elapsed < 30.0
    acceptance_record(6, "bone cylinder equals exhaustive classification", ok, elapsed)
    assert mismatched == 0
    assert occupied > 0
    assert elapsed < 30.0


def test_07_similarity_alignment_properties(acceptance_record):
    """Zero aligned error under similarity maps; aligned <= raw error."""
    rng = vf.derive_rng(7, "procrustes")
    names = tuple(f"j{i:02d}" for i in range(13))
    t0 = time.perf_counter()
    worst_zero = 0.0
    for _ in range(1000):
        pts = rng.uniform(-800.0, 800.0, (13, 3))
        pred = vf.Pose(pts, names)
        q = vf.random_unit_quaternion(rng)
        rot = vf.quat_to_matrix(q)
        scale = float(rng.uniform(0.5, 2.0))
        shift = rng.uniform(-500.0, 500.0, 3)
        gt = vf.Pose(scale * pts @ rot.T + shift, names)
        aligned_err, _ = vf.pa_mpjpe(pred, gt)
        worst_zero = max(worst_zero, aligned_err)
    violations = 0
    for _ in range(1000):
        pred = vf.Pose(rng.uniform(-800.0, 800.0, (13, 3)), names)
        gt = vf.Pose(rng.uniform(-800.0, 800.0, (13, 3)), names)
        raw, _ = vf.mpjpe(pred, gt)
        aligned, _ = vf.pa_mpjpe(pred, gt)
        if aligned > raw + 1e-9:
            violations += 1
    elapsed = time.perf_counter() - t0
    ok = worst_zero < 1e-6 and violations == 0 and elapsed < 5.0
    acceptance_record(7, "similarity-aligned error properties", ok, elapsed)
    assert worst_zero < 1e-6, f"residual after alignment {worst_zero:.3e} mm"
    assert violations == 0
    assert elapsed < 5.0


def test_08_channel_drop_rate_and_reproducibility(acceptance_record):
    """p=0.2 over 10,000 frames: rate within 0.20 +- 0.01, reruns identical."""
    spec = vf.center_grid_on((0.0, 0.0, 0.0), (4, 4, 4), 70.0)
    base = vf.MultiChannelVolume(spec, np.ones((8, 4, 4, 4), dtype=np.uint8))
    t0 = time.perf_counter()
    dropped_total = 0
    first_run = []
    for frame in range(10_000):
        vol, dropped = random_shut(base, 0.2, frame)
        dropped_total += len(dropped)
        first_run.append((tuple(dropped), vol.data.tobytes()))
    rate = dropped_total / (10_000 * 8)
    identical = all(
        (tuple(d), v.data.tobytes()) == first_run[frame]
        for frame in range(10_000)
        for v, d in [random_shut(base, 0.2, frame)]
    )
    elapsed = time.perf_counter() - t0
    ok = abs(rate - 0.2) < 0.01 and identical and elapsed < 5.0
    acceptance_record(8, "channel drop rate and rerun reproducibility", ok, elapsed)
    assert abs(rate - 0.2) < 0.01, f"measured drop rate {rate:.4f}"
    assert identical
    assert elapsed < 5.0


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Full command-line chain at default sizes, shared by tests 9 and 10."""
    base = tmp_path_factory.mktemp("pipeline")
    scene = base / "scene"
    t0 = time.perf_counter()
    assert cli_main([
        "synth", "--out", str(scene), "--seed", "21", "--cameras", "8",
        "--frames", "5", "--image-size", "320x240", "--emit-heatmaps",
    ]) == 0
    assert cli_main([
        "voxelize", "--out", str(base / "vox"),
        "--cameras", str(scene / "cameras.json"),
        "--silhouettes", str(scene / "silhouettes"),
        "--gt", str(scene / "gt.csv"),
    ]) == 0
    assert cli_main([
        "softargmax", "--out", str(base / "pred.csv"),
        "--heatmaps", str(scene / "heatmaps"), "--theta", "3",
        "--joints", str(scene / "joint_names.json"),
    ]) == 0
    assert cli_main([
        "imu-bone", "--out", str(base / "bones"),
        "--poses", str(base / "pred.csv"), "--imu", str(scene / "imu.csv"),
        "--topology", str(scene / "topology.json"),
    ]) == 0
    assert cli_main([
        "eval", "--out", str(base / "report"), "--pred", str(base / "pred.csv"),
        "--gt", str(scene / "gt.csv"), "--pa",
        "--frame-classes", str(scene / "scene.json"),
    ]) == 0
    elapsed = time.perf_counter() - t0
    return {"base": base, "elapsed": elapsed}


def test_09_pipeline_error_under_quantization_budget(pipeline, acceptance_record):
    """synth -> voxelize -> heatmaps -> readout -> eval lands far under 2x floor."""
    budget = 2.0 * CUBE_MEAN_DISTANCE * 70.0  # twice the 70 mm voxel floor
    doc = json.loads((pipeline["base"] / "report" / "report.json").read_text())
    measured = doc["mpjpe"]["overall_mean_mm"]
    elapsed = pipeline["elapsed"]
    ok = measured < budget and elapsed < 120.0
    acceptance_record(9, "pipeline closure error under quantization budget", ok, elapsed)
    assert measured < budget, f"MPJPE {measured:.2f} mm vs budget {budget:.2f} mm"
    assert elapsed < 120.0


def test_10_default_pipeline_shape_contracts(pipeline, acceptance_record):
    """Vision volumes are 8 x 64^3; bone stacks are 13 x 32^3; both binary."""
    base = pipeline["base"]
    t0 = time.perf_counter()
    ok = True
    for frame in range(5):
        vision = vio.read_volume(base / "vox" / f"frame{frame:06d}.mcv")
        bones = vio.read_volume(base / "bones" / f"frame{frame:06d}.mcv")
        ok &= vision.data.shape == (8, 64, 64, 64)
        ok &= bones.data.shape == (13, 32, 32, 32)
        ok &= bool(np.isin(vision.data, (0, 1)).all())
        ok &= bool(np.isin(bones.data, (0, 1)).all())
        ok &= vision.spec.voxel_size == 35.0
        ok &= bones.spec.voxel_size == 70.0
    elapsed = time.perf_counter() - t0
    acceptance_record(10, "default pipeline shape contracts", ok, elapsed)
    vision = vio.read_volume(base / "vox" / "frame000000.mcv")
    bones = vio.read_volume(base / "bones" / "frame000000.mcv")
    assert vision.data.shape == (8, 64, 64, 64)
    assert bones.data.shape == (13, 32, 32, 32)
    assert vision.spec.voxel_size == 35.0 and bones.spec.voxel_size == 70.0
    assert ok
