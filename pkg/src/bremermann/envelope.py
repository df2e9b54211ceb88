"""Perron-Bremermann envelopes on bounded grids.

The plurisubharmonic envelope is the largest node function ``u`` with
Boundary values ``h`` and ``u(z) <= M_a u(z)`` for every sampled complex
direction ``a``, where ``M_a`` is the circle mean of radius ``delta`` cells
in the complex line ``z + C a``.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import ndimage

from .errors import (
    BarrierNotPsh,
    GlueHypothesisFailed,
    InvalidQ,
    NoConvergence,
    UnboundedComponent,
)
from .fields import BoundaryTrace, EnvelopeConfig, ScalarField
from .geometry import Intersection
from .scheme import Scheme, reduce_means, solve_fixed_point, solve_sparse
from .stencil import build_stencil, complex_directions, complex_frames


def _cfg(cfg, grid):
    return (cfg or EnvelopeConfig()).validate(grid.n)


def _directions(cfg, n):
    return complex_directions(n, cfg.directions_for(n))


def _trace(grid, trace):
    if isinstance(trace, BoundaryTrace):
        return trace
    if callable(trace):
        return BoundaryTrace.from_function(grid, trace)
    if np.isscalar(trace):
        return BoundaryTrace.constant(grid, trace)
    return BoundaryTrace(grid, trace)


def _negative_allowed(cfg, grid):
    return cfg.allow_negative or (grid.bounded and not grid.truncated)


def scheme_for(grid, trace, cfg, dirs=None):
    trace = _trace(grid, trace)
    dirs = _directions(cfg, grid.n) if dirs is None else dirs
    return Scheme(grid, dirs, cfg.quad_points, cfg.delta, trace.evaluate, trace.values)


def field_scheme(field, cfg, dirs=None):
    """Scheme whose Boundary data are the field's own boundary values."""
    dirs = _directions(cfg, field.grid.n) if dirs is None else dirs
    return Scheme(field.grid, dirs, cfg.quad_points, cfg.delta, field.crossing_values, field.on_boundary)


def _solve(grid, trace, cfg, sense, frames=None, dirs=None):
    cfg = _cfg(cfg, grid)
    trace = _trace(grid, trace)
    trace.check_nonnegative(_negative_allowed(cfg, grid))
    tol = cfg.tolerance(trace.values)
    sch = scheme_for(grid, trace, cfg, dirs)
    top = float(trace.values.max()) if trace.values.size else 0.0
    u0 = np.full(grid.n_interior, top)
    u, info = solve_fixed_point(sch, u0, tol, sense=sense, frames=frames, method=cfg.method,
                                max_iter=cfg.max_iter)
    info["tol_iter"] = tol
    return ScalarField.from_parts(grid, u, trace.values, boundary=trace.evaluate), info


def psh_envelope(grid, trace, cfg=None):
    """Discrete Perron-Bremermann envelope of ``trace``."""
    f, info = _solve(grid, trace, cfg, "min")
    f.meta.update(info, kind="psh")
    return f


def psuperh_envelope(grid, trace, cfg=None):
    """Minimal plurisuperharmonic extension, ``-psh_envelope(-trace)``."""
    cfg = _cfg(cfg, grid).with_(allow_negative=True)
    neg = -_trace(grid, trace)
    f = psh_envelope(grid, neg, cfg)
    out = -f
    out.meta.update(f.meta, kind="psuperh")
    return out


def q_psh_envelope(grid, trace, q, cfg=None):
    """Envelope of functions whose circle means satisfy the (q+1)-frame test."""
    if not 0 <= q <= grid.n - 1:
        raise InvalidQ(f"q={q} outside [0, {grid.n - 1}]")
    cfg = _cfg(cfg, grid)
    dirs, frames = complex_frames(grid.n, q)
    if cfg.directions is not None:
        dirs = _directions(cfg, grid.n)
        frames = [np.array([i]) for i in range(dirs.shape[0])] if q == 0 else [np.arange(dirs.shape[0])]
    sense = "min" if q == 0 else ("max" if len(frames) == 1 else "frames")
    f, info = _solve(grid, trace, cfg, sense, frames=frames, dirs=dirs)
    f.meta.update(info, kind="q-psh", q=q, frames=len(frames))
    return f


def harmonic_solution(grid, trace, cfg=None):
    """Dirichlet solution of the averaged coordinate-axis circle-mean Laplacian.

    The operator is ``(1/n) sum_j M_{e_j}``, so every envelope of the same
    scheme is a sub- or supersolution of it.
    """
    cfg = _cfg(cfg, grid)
    trace = _trace(grid, trace)
    tol = cfg.tolerance(trace.values)
    sch = scheme_for(grid, trace, cfg)
    n_int = grid.n_interior
    if n_int == 0:
        return ScalarField.from_parts(grid, np.zeros(0), trace.values, boundary=trace.evaluate)
    A = None
    b = np.zeros(n_int)
    for j in range(grid.n):  # axis directions come first in the direction set
        Aj, bj = sch.matrix(np.full(n_int, j, dtype=np.int64))
        A = Aj if A is None else A + Aj
        b += bj
    A = A / grid.n
    b /= grid.n
    u = solve_sparse(A, b, direct=grid.dim == 2)
    res = float(np.max(np.abs(A @ u - b)))
    if res > tol:
        raise NoConvergence("harmonic residual above tolerance", residual=res)
    f = ScalarField.from_parts(grid, u, trace.values, boundary=trace.evaluate)
    f.meta.update(kind="harmonic", residual=res, tol_iter=tol)
    return f


# ---------------------------------------------------------------------------
# discrete tests


def circle_mean(field, z, a, delta=None, cfg=None):
    """Circle mean of ``field`` around the Interior node nearest to ``z`` in direction ``a``."""
    cfg = _cfg(cfg, field.grid)
    g = field.grid
    delta = cfg.delta if delta is None else float(delta)
    node = interior_position(g, z)
    a = np.asarray(a, dtype=complex).reshape(1, -1)
    a = a / np.linalg.norm(a)
    st = build_stencil(g, a, cfg.quad_points, delta, nodes=[node])
    from ._kernels import apply_operator

    vals = field.values
    cross = field.crossing_values(st.cross_pts) if st.cross_pts.shape[0] else np.zeros(0)
    S = apply_operator(vals, st.node_of, st.flat, st.corner_off, st.corner_w, st.cross_idx, cross,
                       st.cross_r, st.radius, 1)
    return float(S[0, 0])


def interior_position(grid, z):
    z = np.asarray(z, dtype=float).reshape(-1)
    key = np.rint(z / grid.spacing).astype(np.int64) - grid.lo
    if np.any(key < 0) or np.any(key >= np.array(grid.shape)):
        raise ValueError("point outside the grid box")
    flat = int(key @ grid.strides)
    pos = int(grid.index[flat])
    if pos < 0:
        raise ValueError("point is not an Interior node")
    return pos


def psh_defect(field, cfg=None, sense="min", frames=None, dirs=None):
    """Per-node ``u - G(u)``; the field passes the discrete test where this is ``<= tol``.

    ``sense="max"`` tests the (n-1)-frame condition, ``"super"`` the
    plurisuperharmonic inequality ``u >= M_a u`` for all ``a``.
    """
    cfg = _cfg(cfg, field.grid)
    sch = field_scheme(field, cfg, dirs)
    S = sch.means(field.interior)
    if sense == "super":
        return np.max(S, axis=1) - field.interior
    return field.interior - reduce_means(S, frames, sense)


def psh_test(field, cfg=None, tol=None, sense="min"):
    cfg = _cfg(cfg, field.grid)
    tol = cfg.tolerance(field.on_boundary) if tol is None else tol
    d = psh_defect(field, cfg, sense)
    w = int(np.argmax(d)) if d.size else -1
    worst = float(d[w]) if d.size else 0.0
    return {"pass": bool(worst <= tol), "worst_defect": worst, "worst_node": w, "tol": tol}


def sweep_residual(field, cfg=None):
    """Change produced by one Jacobi sweep ``u <- min(u, min_a M_a u)`` applied to ``field``."""
    cfg = _cfg(cfg, field.grid)
    sch = field_scheme(field, cfg)
    u = field.interior
    new = np.minimum(u, sch.means(u).min(axis=1))
    return float(np.max(np.abs(new - u))) if u.size else 0.0


# ---------------------------------------------------------------------------
# glueing and slices


def _v_boundary(grid, V_mask):
    """Nodes of the mask with a Chebyshev neighbour outside it."""
    flat = grid.node_flat
    full = np.zeros(grid.cls.size, dtype=bool)
    full[flat[V_mask]] = True
    full = full.reshape(grid.shape)
    inner = ndimage.binary_erosion(full, structure=np.ones((3,) * grid.dim, dtype=bool), border_value=0)
    edge = (full & ~inner).reshape(-1)
    return V_mask & edge[flat]


def max_glue(u, v, V_mask, cfg=None, tol=None):
    """``max(u, v)`` on the masked nodes and ``u`` elsewhere, with both hypothesis checks."""
    g = u.grid
    cfg = _cfg(cfg, g)
    tol = cfg.tolerance(u.on_boundary) if tol is None else tol
    V_mask = np.asarray(V_mask, dtype=bool)
    bV = _v_boundary(g, V_mask)
    gap = np.where(bV, v.values - u.values, -np.inf)
    w = int(np.argmax(gap))
    if gap[w] > tol:
        raise GlueHypothesisFailed(f"v exceeds u by {gap[w]:.3e} on the boundary of V", worst_node=w)
    psi = np.where(V_mask, np.maximum(u.values, v.values), u.values)
    out = ScalarField(g, psi, boundary=u.boundary)
    check = psh_test(out, cfg, tol)
    out.meta.update(glue_psh=check)
    if not check["pass"]:
        raise GlueHypothesisFailed(f"glued field fails the psh test by {check['worst_defect']:.3e}",
                                   worst_node=check["worst_node"])
    return out


def slice_max_check(field, domain=None, hyperplane=None, tol=None):
    """Maximum over the cut component versus the maximum over its curved boundary.

    ``hyperplane = (normal, offset)`` cuts ``{<x, normal> >= offset}``.
    """
    g = field.grid
    if g.n < 2:
        raise ValueError("slice test needs n >= 2")
    normal, offset = hyperplane
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    tol = field.meta.get("tol_iter", 1e-8) if tol is None else tol
    height = g.node_points @ normal
    side = height >= offset - 1e-12
    full = np.zeros(g.cls.size, dtype=bool)
    full[g.node_flat[side]] = True
    labels, count = ndimage.label(full.reshape(g.shape), structure=np.ones((3,) * g.dim, dtype=bool))
    if count == 0:
        raise UnboundedComponent("cut component is empty at this resolution")
    lab = labels.reshape(-1)[g.node_flat]
    sizes = np.bincount(lab[side], minlength=count + 1)
    sizes[0] = 0
    comp = side & (lab == int(np.argmax(sizes)))
    n_int = g.n_interior
    is_bnd = np.arange(g.node_flat.size) >= n_int
    part = np.concatenate([np.zeros(n_int, dtype=np.int8), g.boundary_part])
    if np.any(comp & is_bnd & (part != 0)):
        raise UnboundedComponent("cut component reaches the truncation boundary")
    sigma = comp & is_bnd & (part == 0)
    if not sigma.any():
        raise UnboundedComponent("cut component has no curved boundary nodes")
    m1 = float(field.values[comp].max())
    ms = float(field.values[sigma].max())
    return {"max_on_component": m1, "max_on_sigma": ms, "excess": m1 - ms, "pass": bool(m1 <= ms + tol),
            "tol": tol, "nodes": int(comp.sum()), "sigma_nodes": int(sigma.sum())}


# ---------------------------------------------------------------------------
# Lipschitz certificate


def _offsets(dim, radius_cells):
    r = int(math.floor(radius_cells))
    out = []
    for o in itertools.product(range(-r, r + 1), repeat=dim):
        o = np.array(o)
        if 0 < o @ o <= radius_cells**2 + 1e-9:
            nz = np.nonzero(o)[0][0]
            if o[nz] > 0:  # one of each antipodal pair
                out.append(o)
    return out


def _pair_slopes(field_values, grid, radius_cells=3.0):
    """Largest ``|f(a) - f(b)| / |a - b|`` over node pairs within ``radius_cells`` cells."""
    flat = grid.node_flat
    pos = np.full(grid.cls.size, -1, dtype=np.int64)
    pos[flat] = np.arange(flat.size)
    mi = grid.multi_index(flat)
    pts = grid.node_points
    shape = np.array(grid.shape)
    best = 0.0
    for o in _offsets(grid.dim, radius_cells):
        nb = mi + o
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        j = np.full(flat.size, -1)
        j[ok] = pos[nb[ok] @ grid.strides]
        sel = j >= 0
        if not sel.any():
            continue
        a, b = np.nonzero(sel)[0], j[sel]
        dist = np.linalg.norm(pts[a] - pts[b], axis=1)
        good = dist > 1e-3 * grid.spacing
        if good.any():
            best = max(best, float(np.max(np.abs(field_values[a] - field_values[b])[good] / dist[good])))
    return best


def _pairs_ok(values, grid, k, tol, radius_cells=3.0):
    flat = grid.node_flat
    pos = np.full(grid.cls.size, -1, dtype=np.int64)
    pos[flat] = np.arange(flat.size)
    mi = grid.multi_index(flat)
    pts = grid.node_points
    shape = np.array(grid.shape)
    worst = -np.inf
    for o in _offsets(grid.dim, radius_cells):
        nb = mi + o
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        j = np.full(flat.size, -1)
        j[ok] = pos[nb[ok] @ grid.strides]
        sel = j >= 0
        if sel.any():
            a, b = np.nonzero(sel)[0], j[sel]
            excess = np.abs(values[a] - values[b]) - k * np.linalg.norm(pts[a] - pts[b], axis=1)
            worst = max(worst, float(excess.max()))
    return worst <= tol, worst


def lipschitz_certificate(grid, h_extension, rho=None, a=1.0, cfg=None, a_max=2.0**16, u=None):
    """Barrier sandwich ``h + a rho <= u <= h - a rho`` and a pairwise Lipschitz bound.

    ``h_extension`` and ``rho`` are callables on real point arrays; ``rho``
    defaults to the defining function of the grid's domain.
    """
    cfg = _cfg(cfg, grid)
    if rho is None:
        base = grid.domain.parts[0] if isinstance(grid.domain, Intersection) else grid.domain
        rho = base.rho
    trace = BoundaryTrace.from_function(grid, h_extension)
    tol = cfg.tolerance(trace.values)
    a = float(a)
    while True:
        lo = ScalarField.from_function(grid, lambda X, a=a: h_extension(X) + a * rho(X))
        hi = ScalarField.from_function(grid, lambda X, a=a: h_extension(X) - a * rho(X))
        lo_ok = psh_test(lo, cfg, tol)["pass"]
        hi_ok = psh_test(hi, cfg, tol, sense="super")["pass"]
        if lo_ok and hi_ok:
            break
        a *= 2
        if a > a_max:
            raise BarrierNotPsh(f"barriers fail the discrete tests up to a = {a_max:g}")
    if u is None:
        u = psh_envelope(grid, trace, cfg)
    k = max(_pair_slopes(lo.values, grid), _pair_slopes(hi.values, grid))
    pairs_ok, pair_excess = _pairs_ok(u.values, grid, k, tol)
    sandwich = float(max(np.max(lo.values - u.values), np.max(u.values - hi.values)))
    return {
        "k": k,
        "a": a,
        "verified": bool(pairs_ok and sandwich <= tol),
        "measured_constant_u": _pair_slopes(u.values, grid),
        "pair_excess": pair_excess,
        "sandwich_excess": sandwich,
        "tol": tol,
        "pair_radius_cells": 3.0,
    }


# ---------------------------------------------------------------------------
# property suite


def pb_properties_suite(grid, h1, h2, c, cfg=None, sequence=None, tol=None, tol_iv=1e-2):
    """Residuals of the envelope properties: shift, monotonicity, maximum, contraction, continuity."""
    cfg = _cfg(cfg, grid)
    t1, t2 = _trace(grid, h1), _trace(grid, h2)
    tol_iter = cfg.tolerance(t1.values)
    cfg = cfg.with_(tol_iter=tol_iter)
    tol = 2 * tol_iter if tol is None else tol
    u1 = psh_envelope(grid, t1, cfg)
    u2 = psh_envelope(grid, t2, cfg)
    uc = psh_envelope(grid, t1 + float(c), cfg)
    tmax = BoundaryTrace(grid, np.maximum(t1.values, t2.values),
                         lambda X: np.maximum(t1.evaluate(X), t2.evaluate(X)))
    um = psh_envelope(grid, tmax, cfg)
    report = {"tol": tol, "tol_iter": tol_iter, "tol_iv": tol_iv, "c": float(c)}
    r1 = float(np.max(np.abs(uc.values - (u1.values + c))))
    report["i"] = {"residual": r1, "pass": r1 <= tol}
    ordered = bool(np.all(t1.values <= t2.values))
    r2 = float(max(0.0, np.max(u1.values - u2.values)))
    report["ii"] = {"applicable": ordered, "residual": r2, "pass": (not ordered) or r2 <= tol}
    r3 = float(max(0.0, np.max(np.maximum(u1.values, u2.values) - um.values)))
    gap3 = float(np.max(um.values - np.maximum(u1.values, u2.values)))
    report["iii"] = {"residual": r3, "gap_above_max": gap3, "pass": r3 <= tol}
    lhs = float(np.max(np.abs(u1.values - u2.values)))
    rhs = float(np.max(np.abs(t1.values - t2.values)))
    report["iv"] = {"field_gap": lhs, "trace_gap": rhs, "residual": abs(lhs - rhs), "pass": abs(lhs - rhs) <= tol_iv}
    if sequence is None:
        diff = BoundaryTrace(grid, t2.values - t1.values, lambda X: t2.evaluate(X) - t1.evaluate(X))
        sequence = [BoundaryTrace(grid, t1.values + diff.values / 2**k,
                                  lambda X, k=k: t1.evaluate(X) + diff.evaluate(X) / 2**k) for k in range(1, 4)]
    errs, bounds = [], []
    for tk in sequence:
        tk = _trace(grid, tk)
        uk = psh_envelope(grid, tk, cfg)
        errs.append(float(np.max(np.abs(uk.values - u1.values))))
        bounds.append(float(np.max(np.abs(tk.values - t1.values))))
    conv = all(e <= b + tol_iv for e, b in zip(errs, bounds)) and all(
        errs[i + 1] <= errs[i] + tol for i in range(len(errs) - 1))
    report["v"] = {"errors": errs, "trace_errors": bounds, "pass": conv}
    report["pass"] = all(report[k]["pass"] for k in ("i", "ii", "iii", "iv", "v"))
    return report
