import numpy as np
import pytest

from dispmodal import DisparityMap, backend


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: release acceptance criteria")


@pytest.fixture(params=["numba", "numpy"] if backend.HAS_NUMBA else ["numpy"])
def both_backends(request):
    """Run a test under each kernel backend."""
    previous = backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)


def make_step_map(width=32, height=8, left=20.0, right=60.0, edge=None):
    """Vertical step edge: columns < edge get `left`, the rest `right`."""
    edge = width // 2 if edge is None else edge
    vals = np.full((height, width), right, dtype=np.float32)
    vals[:, :edge] = left
    return DisparityMap(vals, np.ones_like(vals, dtype=bool))


def make_random_map(rng, height=24, width=32, lo=0.0, hi=180.0, valid_fraction=1.0):
    vals = rng.uniform(lo, hi, (height, width)).astype(np.float32)
    valid = rng.random((height, width)) < valid_fraction
    return DisparityMap(np.where(valid, vals, 0).astype(np.float32), valid)


@pytest.fixture
def step_map():
    return make_step_map()


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile (or load from cache) the numba kernels once per session."""
    if not backend.HAS_NUMBA:
        return
    from dispmodal import (
        ModelParams,
        WindowConfig,
        build_gt_volume_with_counts,
        estimate_volume,
        modal_statistics,
        volume_loss,
    )

    gt = make_step_map(width=12, height=3)
    cfg = WindowConfig(1, 3, 3.0, 1)
    vol, skip, kmap = build_gt_volume_with_counts(gt, cfg, ModelParams(0.8, 0.8, 16))
    for method in ("softargmax", "sme", "dme"):
        estimate_volume(vol, method)
    volume_loss(vol, skip, vol, kmap >= 2)
    modal_statistics(vol, gt, kmap >= 2)
