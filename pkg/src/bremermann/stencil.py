"""Circle stencils: sampled complex directions, frames, and per-sample
interpolation or boundary-crossing data for every Interior node."""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .errors import StencilOutOfDomain
from .geometry import BND, EXT, INT, first_crossing


def complex_directions(n, count):
    """Deterministic unit vectors of C^n, one per complex line, axes first."""
    if n == 1:
        return np.exp(1j * np.pi * np.arange(count) / count).reshape(-1, 1)
    dirs = [np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)]
    m = count - 2
    golden = math.pi * (3 - math.sqrt(5))
    for j in range(m):
        # Fibonacci points on the Riemann sphere CP^1, poles excluded
        c = 1 - 2 * (j + 0.5) / m
        theta = math.acos(c)
        phi = golden * j
        dirs.append(np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)]))
    return np.array(dirs[:count])


def complex_frames(n, q, count=16):
    """Orthonormal complex (q+1)-frames as index lists into an extended direction set.

    Returns ``(directions, frames)`` where ``frames`` is a list of index arrays.
    For ``q = 0`` every direction is its own frame; for ``q = n - 1`` a single
    frame spans C^n and holds every direction.
    """
    if q == 0:
        dirs = complex_directions(n, 8 if n == 1 else 24)
        return dirs, [np.array([i]) for i in range(dirs.shape[0])]
    if q == n - 1:
        dirs = complex_directions(n, 8 if n == 1 else 24)
        return dirs, [np.arange(dirs.shape[0])]
    raise ValueError("frames only implemented for n <= 2")


def real_offsets(dirs, quad_points, delta_cells):
    """Sample offsets in cell units, shape ``(D, Q, 2n)``."""
    theta = 2 * np.pi * np.arange(quad_points) / quad_points
    rot = np.exp(1j * theta)
    Z = dirs[:, None, :] * rot[None, :, None]
    out = np.empty(Z.shape[:2] + (2 * dirs.shape[1],))
    out[..., 0::2] = Z.real
    out[..., 1::2] = Z.imag
    return delta_cells * out


def _corner_tables(offc):
    D, Q, dim = offc.shape
    f = np.floor(offc)
    t = offc - f
    bits = ((np.arange(2**dim)[:, None] >> np.arange(dim)[::-1][None, :]) & 1).astype(np.int64)
    w = np.ones((D, Q, bits.shape[0]))
    for j in range(dim):
        w *= np.where(bits[None, None, :, j] == 1, t[:, :, None, j], 1 - t[:, :, None, j])
    w[np.abs(w) < 1e-14] = 0.0
    shift = f.astype(np.int64)[:, :, None, :] + bits[None, None, :, :]
    return shift, w


@dataclass(eq=False)
class Stencil:
    dirs: np.ndarray
    offc: np.ndarray
    shift: np.ndarray
    corner_off: np.ndarray
    corner_w: np.ndarray
    cross_idx: np.ndarray
    cross_r: np.ndarray
    cross_pts: np.ndarray
    radius: float
    node_of: np.ndarray
    flat: np.ndarray

    @property
    def D(self):
        return self.dirs.shape[0]

    @property
    def Q(self):
        return self.offc.shape[1]


def _classify_samples(grid, shift, corner_w, flat):
    """0: all weighted corners Interior; 1: Interior or Boundary; 2: otherwise."""
    mi = grid.multi_index(flat)
    shape = np.array(grid.shape)
    strides = grid.strides
    D, Q, C, dim = shift.shape
    code = np.zeros((mi.shape[0], D, Q), dtype=np.int8)
    for d in range(D):
        for k in range(Q):
            worst = np.zeros(mi.shape[0], dtype=np.int8)
            for m in range(C):
                if corner_w[d, k, m] == 0.0:
                    continue
                cm = mi + shift[d, k, m]
                ok = np.all((cm >= 0) & (cm < shape), axis=1)
                cl = np.where(ok, grid.cls[np.where(ok, cm @ strides, 0)], EXT)
                worst = np.maximum(worst, np.where(cl == INT, 0, np.where(cl == BND, 1, 2)).astype(np.int8))
            code[:, d, k] = worst
    return code


def build_stencil(grid, dirs, quad_points, delta_cells, nodes=None, chunk=400_000):
    """Stencil of the Interior nodes ``grid.interior[nodes]`` (all by default)."""
    flat = grid.interior if nodes is None else grid.interior[np.asarray(nodes).reshape(-1)]
    if quad_points % 2:
        raise ValueError("quad_points must be even")
    offc = real_offsets(dirs, quad_points, delta_cells)
    shift, corner_w = _corner_tables(offc)
    corner_off = shift @ grid.strides
    code = _classify_samples(grid, shift, corner_w, flat)
    h = grid.spacing
    radius = delta_cells * h
    cross_idx = np.full(code.shape, -1, dtype=np.int32)
    I, Dd, K = np.nonzero(code > 0)
    X = grid.lattice_points(flat)
    unit = offc / delta_cells
    r_all = np.full(I.size, np.nan)
    reach = radius + 1.5 * math.sqrt(grid.dim) * h
    for s in range(0, I.size, chunk):
        sl = slice(s, s + chunk)
        r_all[sl] = first_crossing(grid.domain, X[I[sl]], unit[Dd[sl], K[sl]], tmax=reach,
                                   step=h / 4, tol=1e-12 * max(h, 1e-3))
    cod = code[I, Dd, K]
    lost = ~np.isfinite(r_all)
    if lost.any():
        # tangential rays: take the first crossing however far out it lies
        diag = float(np.linalg.norm(np.array(grid.shape) * h))
        li = np.nonzero(lost)[0]
        r_all[li] = first_crossing(grid.domain, X[I[li]], unit[Dd[li], K[li]], tmax=diag, step=h / 2)
        bad = (cod == 2) & ~np.isfinite(r_all)
        if bad.any():
            j = int(np.nonzero(bad)[0][0])
            raise StencilOutOfDomain(f"circle sample of node {int(flat[I[j]])} leaves the grid")
    use_cross = np.isfinite(r_all)
    sel = np.nonzero(use_cross)[0]
    cross_r = r_all[sel]
    cross_pts = X[I[sel]] + cross_r[:, None] * unit[Dd[sel], K[sel]]
    cross_idx[I[sel], Dd[sel], K[sel]] = np.arange(sel.size, dtype=np.int32)
    node_of = np.full(grid.cls.size, -1, dtype=np.int64)
    node_of[grid.interior] = np.arange(grid.n_interior)
    node_of[grid.boundary] = grid.n_interior + np.arange(grid.n_boundary)
    return Stencil(dirs=dirs, offc=offc, shift=shift, corner_off=np.ascontiguousarray(corner_off),
                   corner_w=np.ascontiguousarray(corner_w), cross_idx=cross_idx, cross_r=cross_r,
                   cross_pts=cross_pts, radius=radius, node_of=node_of,
                   flat=np.ascontiguousarray(flat.astype(np.int64)))


_CACHE = weakref.WeakKeyDictionary()


def stencil_for(grid, dirs, quad_points, delta_cells):
    key = (dirs.tobytes(), dirs.shape, int(quad_points), float(delta_cells))
    per_grid = _CACHE.setdefault(grid, {})
    if key not in per_grid:
        per_grid[key] = build_stencil(grid, dirs, quad_points, delta_cells)
    return per_grid[key]
