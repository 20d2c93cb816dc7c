"""The numba kernels and their numpy fallbacks must agree."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rearrange_bench import kernels


def _rots(rng, n):
    return Rotation.random(n, random_state=rng).as_matrix()


def test_ede_batch_parity(rng):
    n = 500
    half = rng.uniform(0.1, 20, n)
    args = (half, _rots(rng, n), rng.uniform(-50, 50, (n, 3)), _rots(rng, n), rng.uniform(-50, 50, (n, 3)))
    np.testing.assert_allclose(kernels.ede_batch_jit(*args), kernels.ede_batch_np(*args), rtol=1e-13, atol=1e-12)


def test_sat_matrix_parity(rng):
    for _ in range(20):
        n = int(rng.integers(1, 8))
        args = (rng.uniform(-15, 15, (n, 3)), _rots(rng, n), rng.uniform(0.5, 10, (n, 3)))
        a, b = kernels.sat_matrix_jit(*args), kernels.sat_matrix_np(*args)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(a, a.T)
        assert np.all(np.diag(a) == 0)


def test_sat_matrix_axis_aligned_cases():
    eye = np.stack([np.eye(3)] * 2)
    halves = np.ones((2, 3))
    for fn in (kernels.sat_matrix_jit, kernels.sat_matrix_np):
        touching = fn(np.array([[0.0, 0, 0], [2.0, 0, 0]]), eye, halves)
        assert touching[0, 1] == pytest.approx(0.0, abs=1e-12)
        gap = fn(np.array([[0.0, 0, 0], [5.0, 0, 0]]), eye, halves)
        assert gap[0, 1] == pytest.approx(-3.0)
        deep = fn(np.array([[0.0, 0, 0], [0.5, 0, 0]]), eye, halves)
        assert deep[0, 1] == pytest.approx(1.5)


def test_overlap_count_parity(rng):
    unit = rng.uniform(-1, 1, (20000, 3))
    for _ in range(10):
        ca, cb = rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3)
        ra, rb = _rots(rng, 2)
        ha, hb = rng.uniform(0.5, 4, 3), rng.uniform(0.5, 4, 3)
        args = (unit, ca, ra, ha, cb, rb, hb)
        assert kernels.count_overlap_samples_jit(*args) == kernels.count_overlap_samples_np(*args)


def test_backend_flag_is_reported():
    assert kernels.BACKEND in ("numba", "numpy")
