"""Hot loops of the circle-mean scheme.

A diametral pair of samples at radii ``r1, r2`` contributes the linear
interpolant of its two values at the centre, weighted by ``1 / (r1 r2)``;
this keeps the mean exact for quadratics along each diameter when a sample
is pulled in to a boundary crossing.

Each kernel has a numba version and a numpy version with identical
arithmetic order per node, so results do not depend on the backend's thread
count.  Interpolation corners are node independent: sample ``(d, k)`` of
node ``i`` reads lattice nodes ``flat[i] + corner_off[d, k, c]`` with
weights ``corner_w[d, k, c]``.
"""
import numpy as np

from ._accel import njit, prange, use_numba


@njit(parallel=True, cache=True)
def _apply_nb(vals, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, radius, out):
    n_int, D = out.shape
    Q = corner_off.shape[1]
    C = corner_off.shape[2]
    half = Q // 2
    for i in prange(n_int):
        sv = np.empty(Q)
        sr = np.empty(Q)
        for d in range(D):
            for k in range(Q):
                c = cross_idx[i, d, k]
                if c >= 0:
                    sv[k] = cross_val[c]
                    sr[k] = cross_r[c]
                else:
                    acc = 0.0
                    for m in range(C):
                        w = corner_w[d, k, m]
                        if w != 0.0:
                            acc += w * vals[node_of[flat[i] + corner_off[d, k, m]]]
                    sv[k] = acc
                    sr[k] = radius
            tot = 0.0
            norm = 0.0
            for k in range(half):
                r1 = sr[k]
                r2 = sr[k + half]
                pw = 1.0 / (r1 * r2)
                tot += pw * (r2 * sv[k] + r1 * sv[k + half]) / (r1 + r2)
                norm += pw
            out[i, d] = tot / norm
    return out


def _apply_np(vals, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, radius, out):
    n_int, D = out.shape
    Q = corner_off.shape[1]
    C = corner_off.shape[2]
    half = Q // 2
    for d in range(D):
        sv = np.empty((n_int, Q))
        sr = np.empty((n_int, Q))
        for k in range(Q):
            acc = np.zeros(n_int)
            for m in range(C):
                w = corner_w[d, k, m]
                if w != 0.0:
                    nodes = node_of[flat + corner_off[d, k, m]]
                    acc += w * vals[np.where(nodes >= 0, nodes, 0)]
            c = cross_idx[:, d, k]
            hit = c >= 0
            sv[:, k] = np.where(hit, cross_val[np.where(hit, c, 0)] if cross_val.size else 0.0, acc)
            sr[:, k] = np.where(hit, cross_r[np.where(hit, c, 0)] if cross_r.size else radius, radius)
        tot = np.zeros(n_int)
        norm = np.zeros(n_int)
        for k in range(half):
            r1 = sr[:, k]
            r2 = sr[:, k + half]
            pw = 1.0 / (r1 * r2)
            tot += pw * (r2 * sv[:, k] + r1 * sv[:, k + half]) / (r1 + r2)
            norm += pw
        out[:, d] = tot / norm
    return out


@njit(parallel=True, cache=True)
def _assemble_nb(policy, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, radius,
                 bvals, n_int, cols, weights, rhs):
    """Row ``i`` of ``u = W u + rhs`` for the direction ``policy[i]``.

    ``cols``/``weights`` have shape ``(n_int, Q * C)``; unused slots get col -1.
    """
    Q = corner_off.shape[1]
    C = corner_off.shape[2]
    half = Q // 2
    for i in prange(n_int):
        d = policy[i]
        sr = np.empty(Q)
        for k in range(Q):
            c = cross_idx[i, d, k]
            sr[k] = cross_r[c] if c >= 0 else radius
        norm = 0.0
        for k in range(half):
            norm += 1.0 / (sr[k] * sr[k + half])
        b = 0.0
        for k in range(Q):
            kk = k + half if k < half else k - half
            pw = sr[kk] / (sr[k] + sr[kk]) / (sr[k] * sr[kk]) / norm
            c = cross_idx[i, d, k]
            base = k * C
            if c >= 0:
                b += pw * cross_val[c]
                for m in range(C):
                    cols[i, base + m] = -1
                    weights[i, base + m] = 0.0
            else:
                for m in range(C):
                    w = corner_w[d, k, m]
                    j = node_of[flat[i] + corner_off[d, k, m]] if w != 0.0 else -1
                    if j < 0:
                        cols[i, base + m] = -1
                        weights[i, base + m] = 0.0
                    elif j >= n_int:
                        b += pw * w * bvals[j - n_int]
                        cols[i, base + m] = -1
                        weights[i, base + m] = 0.0
                    else:
                        cols[i, base + m] = j
                        weights[i, base + m] = pw * w
        rhs[i] = b


def _assemble_np(policy, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, radius,
                 bvals, n_int, cols, weights, rhs):
    Q = corner_off.shape[1]
    C = corner_off.shape[2]
    half = Q // 2
    rows = np.arange(n_int)
    cidx = cross_idx[rows, policy]  # (n_int, Q)
    hit = cidx >= 0
    sr = np.where(hit, cross_r[np.where(hit, cidx, 0)] if cross_r.size else radius, radius)
    rhs[:] = 0.0
    norm = np.zeros(n_int)
    for k in range(half):
        norm += 1.0 / (sr[:, k] * sr[:, k + half])
    for k in range(Q):
        kk = k + half if k < half else k - half
        pw = sr[:, kk] / (sr[:, k] + sr[:, kk]) / (sr[:, k] * sr[:, kk]) / norm
        cv = cross_val[np.where(hit[:, k], cidx[:, k], 0)] if cross_val.size else np.zeros(n_int)
        rhs += np.where(hit[:, k], pw * cv, 0.0)
        for m in range(C):
            w = corner_w[policy, k, m]
            live = w != 0.0
            j = np.where(live, node_of[np.where(live, flat + corner_off[policy, k, m], 0)], -1)
            j = np.where(hit[:, k], -1, j)
            bnd = j >= n_int
            rhs += np.where(bnd, pw * w * bvals[np.where(bnd, j - n_int, 0)], 0.0)
            keep = (j >= 0) & ~bnd
            cols[:, k * C + m] = np.where(keep, j, -1)
            weights[:, k * C + m] = np.where(keep, pw * w, 0.0)


def apply_operator(vals, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, radius, D):
    """All directional circle means ``S[i, d]`` of the node values ``vals``."""
    out = np.empty((flat.size, D))
    fn = _apply_nb if use_numba() else _apply_np
    return fn(vals, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, float(radius), out)


def assemble_policy(policy, node_of, flat, corner_off, corner_w, cross_idx, cross_val, cross_r, radius,
                    bvals):
    n_int = flat.size
    Q, C = corner_off.shape[1], corner_off.shape[2]
    cols = np.empty((n_int, Q * C), dtype=np.int64)
    weights = np.empty((n_int, Q * C))
    rhs = np.empty(n_int)
    fn = _assemble_nb if use_numba() else _assemble_np
    fn(np.ascontiguousarray(policy, dtype=np.int64), node_of, flat, corner_off, corner_w, cross_idx,
       cross_val, cross_r, float(radius), bvals, n_int, cols, weights, rhs)
    return cols, weights, rhs
