"""Independent reference computations used to check the library.

Each oracle takes a different route from the code it checks: explicit
loops instead of vectorized numpy, quaternion eigenproblems instead of
SVD, normal equations instead of pseudoinverses.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def brute_mpjpe(a, b):
    total = 0.0
    for p, q in zip(a, b):
        total += math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(p, q)))
    return total / len(a)


def horn_similarity(src, dst):
    """Closed-form similarity via Horn's unit-quaternion method.

    Returns (scale, R, t, residual_sum_of_squares).
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    mx, my = src.mean(axis=0), dst.mean(axis=0)
    x, y = src - mx, dst - my
    S = x.T @ y
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = S
    N = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )
    w, V = np.linalg.eigh(N)
    q0, qx, qy, qz = V[:, np.argmax(w)]
    R = np.array(
        [
            [q0 * q0 + qx * qx - qy * qy - qz * qz, 2 * (qx * qy - q0 * qz), 2 * (qx * qz + q0 * qy)],
            [2 * (qy * qx + q0 * qz), q0 * q0 - qx * qx + qy * qy - qz * qz, 2 * (qy * qz - q0 * qx)],
            [2 * (qz * qx - q0 * qy), 2 * (qz * qy + q0 * qx), q0 * q0 - qx * qx - qy * qy + qz * qz],
        ]
    )
    scale = float(np.sum(y * (x @ R.T)) / np.sum(x * x))
    t = my - scale * R @ mx
    residual = float(np.sum((scale * src @ R.T + t - dst) ** 2))
    return scale, R, t, residual


def savgol_normal_equations(window, polyorder):
    """Row 0 of (A^T A)^-1 A^T in exact rational arithmetic."""
    h = (window - 1) // 2
    n = polyorder + 1
    A = [[Fraction(i) ** k for k in range(n)] for i in range(-h, h + 1)]
    M = [[sum(row[r] * row[c] for row in A) for c in range(n)] for r in range(n)]
    # Gauss-Jordan on [M | I]
    aug = [M[r] + [Fraction(int(r == c)) for c in range(n)] for r in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    inv_row0 = aug[0][n:]
    return np.array([float(sum(inv_row0[k] * row[k] for k in range(n))) for row in A])


def sliding_polyfit(x, window, polyorder):
    """Interior smoothed values by an explicit least-squares fit per window."""
    h = (window - 1) // 2
    out = {}
    t = np.arange(-h, h + 1, dtype=float)
    for i in range(h, len(x) - h):
        coef = np.polyfit(t, x[i - h : i + h + 1], polyorder)
        out[i] = np.polyval(coef, 0.0)
    return out


def merge_oracle(views, prev, threshold, pa_fn, fallback_all=False):
    """Exhaustive enumeration of the multi-view merge rule.

    ``views`` maps view id -> J x 3 array. Returns (joints or None, branch,
    pair, chosen_view).
    """
    ids = sorted(views)
    if not ids:
        return None, "missing", None, None
    if len(ids) == 1:
        return views[ids[0]], "passthrough", None, ids[0]
    scored = []
    for vi, vj in itertools.combinations(ids, 2):
        err = float(np.mean(np.linalg.norm(views[vi] - views[vj], axis=1)))
        scored.append((err, vi, vj))
    scored.sort()
    err, vi, vj = scored[0]
    if err < threshold or prev is None:
        return (views[vi] + views[vj]) * 0.5, "mean_of_pair", (vi, vj), None
    cands = ids if fallback_all else [vi, vj]
    best = sorted((pa_fn(views[v], prev), v) for v in cands)[0][1]
    return views[best], "temporal_fallback", (vi, vj), best
