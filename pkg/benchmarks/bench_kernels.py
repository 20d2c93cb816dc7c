"""Compare the numba and numpy variants of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Both variants are timed in one process; the first numba call (compilation or
cache load) is excluded. Setting REARRANGE_BENCH_DISABLE_JIT=1 only changes
which variant the library dispatches to, not what this script measures.
"""

import argparse
import time

import numpy as np
from scipy.spatial.transform import Rotation

from rearrange_bench import kernels
from rearrange_bench._jit import HAVE_NUMBA


def _best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(rng, scale):
    n_ede = int(200_000 * scale)
    ede_args = (
        rng.uniform(0.5, 20, n_ede),
        Rotation.random(n_ede, random_state=rng).as_matrix(),
        rng.uniform(-50, 50, (n_ede, 3)),
        Rotation.random(n_ede, random_state=rng).as_matrix(),
        rng.uniform(-50, 50, (n_ede, 3)),
    )
    n_box = max(2, int(60 * scale))
    sat_args = (
        rng.uniform(-40, 40, (n_box, 3)),
        Rotation.random(n_box, random_state=rng).as_matrix(),
        rng.uniform(1, 10, (n_box, 3)),
    )
    n_pts = int(1_000_000 * scale)
    oracle_args = (
        rng.uniform(-1, 1, (n_pts, 3)),
        np.zeros(3), np.eye(3), np.array([4.0, 3.0, 2.0]),
        np.array([3.0, 1.0, 0.5]), Rotation.from_euler("z", 30, degrees=True).as_matrix(), np.array([2.0, 2.0, 2.0]),
    )
    return [
        (f"ede_batch ({n_ede} poses)", kernels.ede_batch_jit, kernels.ede_batch_np, ede_args),
        (f"sat_matrix ({n_box} boxes)", kernels.sat_matrix_jit, kernels.sat_matrix_np, sat_args),
        (f"count_overlap_samples ({n_pts} pts)", kernels.count_overlap_samples_jit,
         kernels.count_overlap_samples_np, oracle_args),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    print(f"library dispatch: {kernels.BACKEND}")
    print(f"{'kernel':<40} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, jit_fn, np_fn, fn_args in _cases(np.random.default_rng(args.seed), args.scale):
        jit_fn(*fn_args)  # compile or load from cache
        a, b = np.asarray(jit_fn(*fn_args)), np.asarray(np_fn(*fn_args))
        if not np.allclose(a, b, rtol=1e-9, atol=1e-9):
            raise SystemExit(f"{name}: variants disagree")
        t_jit = _best_of(jit_fn, fn_args, args.repeat)
        t_np = _best_of(np_fn, fn_args, args.repeat)
        print(f"{name:<40} {1e3 * t_jit:>10.2f} {1e3 * t_np:>10.2f} {t_np / t_jit:>7.1f}x")


if __name__ == "__main__":
    main()
