"""Shared fixtures and the acceptance summary hook."""

import numpy as np
import pytest

import voxfuse as vf

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_record():
    """Append one PASS/FAIL summary line for an acceptance check."""

    def _record(number, name, ok, seconds):
        verdict = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(
            f"[acceptance] {number:02d} {name}: {verdict} ({seconds:.1f}s)"
        )

    return _record


@pytest.fixture
def rng():
    return vf.derive_rng(2024, "tests")


@pytest.fixture(scope="session")
def small_scene():
    """One deterministic 8-camera scene shared by read-only tests."""
    return vf.generate_scene(seed=7, num_cameras=8, image_size=(192, 144))


@pytest.fixture(scope="session")
def small_scene_silhouettes(small_scene):
    return [vf.render_silhouette(small_scene, c) for c in range(len(small_scene.cameras))]


def identity_camera(width=640, height=480, focal=500.0):
    """Camera at the origin looking down +Z with centered principal point."""
    k = np.array(
        [[focal, 0.0, (width - 1) / 2.0], [0.0, focal, (height - 1) / 2.0], [0.0, 0.0, 1.0]]
    )
    ext = np.concatenate([np.eye(3), np.zeros((3, 1))], axis=1)
    return vf.CameraModel(k, ext, width, height, name="ident")
