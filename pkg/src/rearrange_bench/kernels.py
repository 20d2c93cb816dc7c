"""Hot numeric kernels.

Each kernel exists twice: a numba-compiled loop (``*_jit``) and a vectorised
numpy equivalent (``*_np``). The public names dispatch on
:data:`rearrange_bench._jit.USE_NUMBA`. Both variants take and return plain
float64 arrays so they can be swapped freely; results agree to rounding, not
bit-for-bit.
"""

import numpy as np

from ._jit import USE_NUMBA, njit

# Cube vertex sign triples, lexicographic with - before +.
SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)],
    dtype=np.float64,
)

_AXIS_EPS = 1e-9


# ---------------------------------------------------------------- EDE


@njit(cache=True)
def ede_batch_jit(half_edges, rot_a, trans_a, rot_b, trans_b):
    n = half_edges.shape[0]
    out = np.empty(n, dtype=np.float64)
    for k in range(n):
        h = half_edges[k]
        total = 0.0
        for v in range(8):
            px = SIGNS[v, 0] * h
            py = SIGNS[v, 1] * h
            pz = SIGNS[v, 2] * h
            sq = 0.0
            for i in range(3):
                d = (
                    (rot_a[k, i, 0] - rot_b[k, i, 0]) * px
                    + (rot_a[k, i, 1] - rot_b[k, i, 1]) * py
                    + (rot_a[k, i, 2] - rot_b[k, i, 2]) * pz
                    + (trans_a[k, i] - trans_b[k, i])
                )
                sq += d * d
            total += np.sqrt(sq)
        out[k] = total / 8.0
    return out


def ede_batch_np(half_edges, rot_a, trans_a, rot_b, trans_b):
    pts = half_edges[:, None, None] * SIGNS[None, :, :]
    disp = np.einsum("nij,nvj->nvi", rot_a - rot_b, pts) + (trans_a - trans_b)[:, None, :]
    return np.sqrt((disp * disp).sum(axis=2)).sum(axis=1) / 8.0


# ---------------------------------------------------------------- SAT


@njit(cache=True)
def _sat_pair_jit(ca, ra, ha, cb, rb, hb):
    # Returns min over candidate axes of (ra + rb - |t.L|).
    t0 = cb[0] - ca[0]
    t1 = cb[1] - ca[1]
    t2 = cb[2] - ca[2]
    best = np.inf
    axis = np.empty(3)
    for k in range(15):
        if k < 3:
            axis[0] = ra[0, k]
            axis[1] = ra[1, k]
            axis[2] = ra[2, k]
        elif k < 6:
            axis[0] = rb[0, k - 3]
            axis[1] = rb[1, k - 3]
            axis[2] = rb[2, k - 3]
        else:
            i = (k - 6) // 3
            j = (k - 6) % 3
            axis[0] = ra[1, i] * rb[2, j] - ra[2, i] * rb[1, j]
            axis[1] = ra[2, i] * rb[0, j] - ra[0, i] * rb[2, j]
            axis[2] = ra[0, i] * rb[1, j] - ra[1, i] * rb[0, j]
        norm = np.sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2])
        if norm < _AXIS_EPS:
            continue
        lx = axis[0] / norm
        ly = axis[1] / norm
        lz = axis[2] / norm
        rad = 0.0
        for m in range(3):
            rad += ha[m] * abs(ra[0, m] * lx + ra[1, m] * ly + ra[2, m] * lz)
            rad += hb[m] * abs(rb[0, m] * lx + rb[1, m] * ly + rb[2, m] * lz)
        ov = rad - abs(t0 * lx + t1 * ly + t2 * lz)
        if ov < best:
            best = ov
    return best


@njit(cache=True)
def sat_matrix_jit(centers, rots, halves):
    n = centers.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    for a in range(n):
        for b in range(a + 1, n):
            v = _sat_pair_jit(centers[a], rots[a], halves[a], centers[b], rots[b], halves[b])
            out[a, b] = v
            out[b, a] = v
    return out


def _sat_pairs_np(ca, ra, ha, cb, rb, hb):
    # Vectorised over a leading pair axis P.
    face_a = np.swapaxes(ra, 1, 2)  # (P, 3, 3) rows are box axes
    face_b = np.swapaxes(rb, 1, 2)
    cross = np.cross(face_a[:, :, None, :], face_b[:, None, :, :]).reshape(-1, 9, 3)
    axes = np.concatenate([face_a, face_b, cross], axis=1)  # (P, 15, 3)
    norms = np.linalg.norm(axes, axis=2)
    valid = norms >= _AXIS_EPS
    unit = axes / np.where(valid, norms, 1.0)[:, :, None]
    proj_a = np.abs(np.einsum("pkj,pmj->pkm", unit, face_a)) @ ha[:, :, None]
    proj_b = np.abs(np.einsum("pkj,pmj->pkm", unit, face_b)) @ hb[:, :, None]
    dist = np.abs(np.einsum("pkj,pj->pk", unit, cb - ca))
    ov = proj_a[:, :, 0] + proj_b[:, :, 0] - dist
    return np.where(valid, ov, np.inf).min(axis=1)


def sat_matrix_np(centers, rots, halves):
    n = centers.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    if n < 2:
        return out
    ia, ib = np.triu_indices(n, k=1)
    vals = _sat_pairs_np(centers[ia], rots[ia], halves[ia], centers[ib], rots[ib], halves[ib])
    out[ia, ib] = vals
    out[ib, ia] = vals
    return out


# ---------------------------------------------------------------- point sampling


@njit(cache=True)
def count_overlap_samples_jit(unit_samples, ca, ra, ha, cb, rb, hb):
    count = 0
    for s in range(unit_samples.shape[0]):
        lx = unit_samples[s, 0] * ha[0]
        ly = unit_samples[s, 1] * ha[1]
        lz = unit_samples[s, 2] * ha[2]
        inside = True
        for i in range(3):
            # world point, then coordinate along box b's axis i
            acc = 0.0
            for r in range(3):
                w = ra[r, 0] * lx + ra[r, 1] * ly + ra[r, 2] * lz + ca[r] - cb[r]
                acc += rb[r, i] * w
            if abs(acc) >= hb[i]:
                inside = False
                break
        if inside:
            count += 1
    return count


def count_overlap_samples_np(unit_samples, ca, ra, ha, cb, rb, hb):
    world = (unit_samples * ha) @ ra.T + ca
    local = (world - cb) @ rb
    return int(np.all(np.abs(local) < hb, axis=1).sum())


if USE_NUMBA:
    ede_batch = ede_batch_jit
    sat_matrix = sat_matrix_jit
    count_overlap_samples = count_overlap_samples_jit
else:
    ede_batch = ede_batch_np
    sat_matrix = sat_matrix_np
    count_overlap_samples = count_overlap_samples_np

BACKEND = "numba" if USE_NUMBA else "numpy"
