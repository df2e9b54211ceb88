"""Unbounded convex domains: exhaustion, maximal solution, patches and barriers.

The domain is assumed normalized so that the recession direction is the
first real axis and the tangent hyperplane orthogonal to it is ``x1 = 0``.
Traces here are plain callables on real coordinates.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import _cfg, psh_defect, psh_envelope
from .errors import (
    CapEscalationDiverged,
    DefiningFunctionFailure,
    EmptyDiscretization,
    EmptyPrefix,
    InsufficientTail,
    NegativeTrace,
    PatchCollarViolation,
    RegionContainmentFailed,
    SchemeInconsistency,
)
from .fields import BoundaryTrace, ScalarField
from .geometry import DomainSpec, Intersection, build_grid

SURFACE = 0  # boundary part of the domain itself
SPHERE = 1  # boundary part on the cutting ball


def _ball(n, radius, center=None):
    center = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)
    return DomainSpec("ball", n, {"center": center.tolist(), "radius": float(radius)})


def _as_callable(trace):
    if callable(trace):
        return trace
    c = float(trace)
    return lambda X: np.full(np.atleast_2d(X).shape[0], c)


def _nonneg(values, what="trace"):
    if values.size and np.min(values) < 0:
        raise NegativeTrace(f"{what} takes the negative value {float(np.min(values))!r}")


# ---------------------------------------------------------------------------
# exhaustion


def exhaustion_grid(domain, plan, nu, spacing):
    """Grid of ``Omega ∩ B(0, c_nu)``; surface nodes carry part 0, sphere nodes part 1."""
    c = plan.c[nu - 1]
    pad = c + 2 * spacing
    box = np.tile([-pad, pad], (2 * domain.n, 1))
    return build_grid(domain, box, spacing, cuts=(_ball(domain.n, c),))


def _sphere_distance(domain, X):
    """Approximate distance from points of the cut sphere to the domain boundary."""
    if X.shape[0] == 0:
        return np.zeros(0)
    g = np.linalg.norm(domain.grad(X), axis=1)
    return np.maximum(-domain.rho(X), 0.0) / np.maximum(g, 1e-300)


def boundary_family(plan, nu, grid, trace, M, collar):
    """Boundary data on ``b Omega_nu``: ``h`` on the surface, cap ``M`` on the sphere.

    Sphere points within ``collar`` of the surface interpolate linearly
    between ``h`` and ``M``.  The family is nondecreasing in ``M``.
    """
    h = _as_callable(trace)
    base = grid.domain.base if isinstance(grid.domain, Intersection) else grid.domain
    eff = grid.domain

    def func(X):
        X = np.atleast_2d(X)
        out = np.asarray(h(X), dtype=float).reshape(-1).copy()
        on_sphere = eff.part(X) != SURFACE if isinstance(eff, Intersection) else np.zeros(X.shape[0], bool)
        if on_sphere.any():
            d = _sphere_distance(base, X[on_sphere])
            t = np.ones_like(d) if collar <= 0 else np.clip(d / collar, 0.0, 1.0)
            t = np.where(d <= 0, 0.0, t)
            out[on_sphere] = (1 - t) * out[on_sphere] + t * M
        return out

    values = func(grid.boundary_points)
    if collar <= 0:
        # exact indicator on nodes: the surface/sphere label decides
        sph = grid.boundary_part != SURFACE
        values = np.where(sph, M, np.asarray(h(grid.boundary_points), dtype=float))
    return BoundaryTrace(grid, values, func)


def _slab_nodes(grid, plan, nu):
    return plan.slab_mask(grid.node_points, nu)


def _surface_slab(grid, plan, nu):
    mask = np.zeros(grid.n_interior + grid.n_boundary, dtype=bool)
    surf = grid.boundary_part == SURFACE
    mask[grid.n_interior:] = surf & plan.slab_mask(grid.boundary_points, nu)
    return mask


def envelope_sup_over_extensions(plan, nu, trace, cfg=None, cap_schedule=None, *, domain=None,
                                 spacing=None, grid=None, collar=None, max_caps=16, tol=None):
    """``Phi*_nu``: capped envelopes on ``Omega_nu`` increased until they settle on the slab.

    Returns the last envelope (on the full ``Omega_nu`` grid); ``meta['slab']``
    marks the nodes of ``Omega'_nu`` where it is meaningful.
    """
    if grid is None:
        grid = exhaustion_grid(domain, plan, nu, spacing)
    cfg = _cfg(cfg, grid)
    h = _as_callable(trace)
    hb = np.asarray(h(grid.boundary_points), dtype=float)
    surf = grid.boundary_part == SURFACE
    _nonneg(hb[surf])
    slab = _slab_nodes(grid, plan, nu)
    sslab = _surface_slab(grid, plan, nu)[grid.n_interior:]
    bound = float(hb[sslab].max()) if sslab.any() else 0.0
    top = float(hb[surf].max()) if surf.any() else 0.0
    if collar is None:
        collar = 2.0 * grid.spacing
    if cap_schedule is None:
        cap_schedule = [(1.0 + bound) * 2.0**k for k in range(max_caps)]
    caps = [float(M) for M in cap_schedule if M >= top] or [top]
    if tol is None:
        tol = cfg.tolerance(hb[surf & sslab] if (surf & sslab).any() else np.zeros(1))
    prev = None
    history = []
    out = None
    for M in caps:
        tr = boundary_family(plan, nu, grid, h, M, collar)
        u = psh_envelope(grid, tr, cfg)
        cur = u.values[slab]
        if prev is not None:
            change = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
            drop = float(np.max(prev - cur)) if cur.size else 0.0
            history.append({"cap": M, "change": change, "decrease": drop})
            if change < tol:
                out = u
                break
        else:
            history.append({"cap": M, "change": None, "decrease": 0.0})
        prev = cur
    if out is None:
        raise CapEscalationDiverged(
            f"slab restriction still moving after {len(caps)} caps (last change {history[-1]['change']})")
    excess = float(np.max(out.values[slab] - bound)) if slab.any() else 0.0
    out.meta.update(kind="phi_star", nu=nu, slab=slab, slab_bound=bound, caps=history,
                    cap_tol=tol, bound_excess=excess, bound_ok=bool(excess <= tol + out.meta["tol_iter"]))
    return out


def _global_keys(grid):
    return grid.lattice_keys(grid.node_flat)


def maximal_solution(domain, trace, plan, cfg=None, *, spacing, competitors=(), tol=None, collar=None):
    """Node-wise infimum over ``nu`` of the slab envelopes ``Phi*_nu``.

    The result lives on the grid of the last exhaustion level; ``meta['defined']``
    marks the nodes of ``Omega'_{nu_max}``.  ``competitors`` are callables whose
    domination is checked on every level where they pass the discrete psh test.
    """
    h = _as_callable(trace)
    fields_ = []
    for nu in range(1, plan.nu_max + 1):
        g = exhaustion_grid(domain, plan, nu, spacing)
        fields_.append(envelope_sup_over_extensions(plan, nu, h, cfg, grid=g, collar=collar))
    last = fields_[-1]
    G = last.grid
    if tol is None:
        tol = max(f.meta["tol_iter"] + f.meta["cap_tol"] for f in fields_)
    keys = _global_keys(G)
    index = {k: i for i, k in enumerate(map(tuple, keys))}
    phi = last.values.copy()
    defined = last.meta["slab"].copy()
    mono = []
    for k, f in enumerate(fields_[:-1]):
        fk = _global_keys(f.grid)
        sel = np.flatnonzero(f.meta["slab"])
        pos = np.array([index.get(tuple(fk[i]), -1) for i in sel], dtype=np.int64)
        ok = pos >= 0
        sel, pos = sel[ok], pos[ok]
        phi[pos] = np.minimum(phi[pos], f.values[sel])
        nxt = fields_[k + 1]
        nk = {t: i for i, t in enumerate(map(tuple, _global_keys(nxt.grid)))}
        pn = np.array([nk.get(tuple(fk[i]), -1) for i in sel], dtype=np.int64)
        m = pn >= 0
        rise = float(np.max(nxt.values[pn[m]] - f.values[sel[m]])) if m.any() else 0.0
        mono.append(rise)
    worst_rise = max(mono) if mono else 0.0
    if worst_rise > 10 * tol:
        raise SchemeInconsistency(f"Phi*_nu increased by {worst_rise!r} from one level to the next")
    surf = np.zeros_like(defined)
    surf[G.n_interior:] = G.boundary_part == SURFACE
    hv = np.asarray(h(G.node_points), dtype=float)
    bres = float(np.max(np.abs(phi[surf & defined] - hv[surf & defined]))) if (surf & defined).any() else 0.0
    out = ScalarField(G, phi, boundary=last.boundary)
    report = {
        "levels": len(fields_),
        "monotone_rise": mono,
        "monotone_ok": bool(worst_rise <= tol),
        "boundary_residual": bres,
        "boundary_ok": bool(bres <= tol),
        "min_value": float(phi[defined].min()) if defined.any() else 0.0,
        "nonnegative": bool(not defined.any() or phi[defined].min() >= -tol),
        "tol": tol,
        "level_residual": _level_residual(fields_),
        "boundary_agreement": _boundary_agreement(fields_, h),
    }
    report["competitors"] = [_competitor_report(fields_, c, out, defined, tol) for c in competitors]
    out.meta.update(kind="maximal", defined=defined, levels=fields_, report=report)
    return out


def _level_residual(fields_):
    """Max change between the last two levels on the slab of the earlier one."""
    if len(fields_) < 2:
        return 0.0
    a, b = fields_[-2], fields_[-1]
    bk = {t: i for i, t in enumerate(map(tuple, _global_keys(b.grid)))}
    ak = _global_keys(a.grid)
    sel = np.flatnonzero(a.meta["slab"])
    pos = np.array([bk.get(tuple(ak[i]), -1) for i in sel], dtype=np.int64)
    m = pos >= 0
    return float(np.max(np.abs(b.values[pos[m]] - a.values[sel[m]]))) if m.any() else 0.0


def _boundary_agreement(fields_, h):
    """``max |Phi*_{nu+1} - h|`` over the surface nodes of level ``nu``."""
    out = []
    for a, b in zip(fields_[:-1], fields_[1:]):
        ga = a.grid
        surf = np.flatnonzero(ga.boundary_part == SURFACE)
        keys = ga.lattice_keys(ga.boundary[surf])
        bk = {t: i for i, t in enumerate(map(tuple, _global_keys(b.grid)))}
        pos = np.array([bk.get(tuple(k), -1) for k in keys], dtype=np.int64)
        m = pos >= 0
        # compare only sites that are the same point in both grids; rim sites and
        # sites that turn Interior one level up sit a fraction of a cell apart
        pa = ga.boundary_points[surf]
        pb = b.grid.node_points[np.maximum(pos, 0)]
        moved = m & (np.linalg.norm(pa - pb, axis=1) > 1e-9 * (1.0 + ga.spacing))
        m &= ~moved
        hv = np.asarray(h(pa), dtype=float)
        gap = np.abs(b.values[np.maximum(pos, 0)] - hv)
        res = float(np.max(gap[m])) if m.any() else 0.0
        out.append({"nu": a.meta["nu"], "residual": res, "nodes": int(m.sum()),
                    "moved": int(moved.sum()), "moved_residual": float(np.max(gap[moved])) if moved.any() else 0.0,
                    "missing": int((pos < 0).sum())})
    return out


def _competitor_report(fields_, comp, phi, defined, tol):
    """Domination of one competitor: it must be psh and below the data on every level."""
    admissible = True
    for f in fields_:
        g = f.grid
        w = ScalarField.from_function(g, comp)
        below = np.all(w.on_boundary[g.boundary_part == SURFACE]
                       <= f.on_boundary[g.boundary_part == SURFACE] + tol)
        defect = psh_defect(w)
        if not below or (defect.size and defect.max() > tol):
            admissible = False
            break
    w = np.asarray(comp(phi.grid.node_points), dtype=float)
    gap = float(np.max(w[defined] - phi.values[defined])) if defined.any() else -np.inf
    return {"admissible": admissible, "max_excess": gap, "dominated": bool(gap <= tol)}


# ---------------------------------------------------------------------------
# growth profile and barrier certificates


@dataclass
class GrowthProfile:
    """``g(x) = max{h(z) : z on the boundary, x1 <= x}`` sampled at ``xs``."""

    xs: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float).reshape(-1)
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        if self.xs.shape != self.g.shape:
            raise ValueError("xs and g differ in length")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if not np.all(np.isfinite(self.g)):
            raise ValueError("g is not finite on every sample")

    @classmethod
    def from_function(cls, xs, fn):
        """Profile from a closed form; a running max keeps it nondecreasing."""
        xs = np.asarray(xs, dtype=float)
        return cls(xs, np.maximum.accumulate(np.asarray(fn(xs), dtype=float)))

    def to_dict(self):
        return {"xs": self.xs.tolist(), "g": self.g.tolist()}


def growth_profile(domain, trace, xs):
    """Running maximum of the trace over surface Boundary nodes of a grid.

    ``domain`` is a grid of the normalized domain (truncated or an exhaustion level).
    """
    grid = domain
    h = _as_callable(trace)
    xs = np.asarray(xs, dtype=float).reshape(-1)
    surf = grid.boundary_part == SURFACE
    pts = grid.boundary_points[surf]
    if pts.shape[0] == 0:
        raise EmptyPrefix("grid has no surface Boundary nodes")
    vals = np.asarray(h(pts), dtype=float)
    _nonneg(vals)
    order = np.argsort(pts[:, 0], kind="stable")
    x1 = pts[order, 0]
    run = np.maximum.accumulate(vals[order])
    if xs.size == 0 or xs.min() < x1[0]:
        raise EmptyPrefix(f"no boundary node has x1 <= {float(xs.min()) if xs.size else float('nan')!r}")
    idx = np.searchsorted(x1, xs, side="right") - 1
    return GrowthProfile(xs, run[idx])


def _barrier_constant(kind, eps, z0, params):
    z0 = np.asarray(z0, dtype=float)
    xi, zeta = float(z0[0]), float(z0[1])
    if kind == "linear":
        if xi <= 0:
            raise ValueError("the linear barrier needs xi_1 > 0")
        return eps / (2 * xi)
    if kind == "polynomial":
        m, a = int(params["m"]), float(params["a"])
        X0 = xi + params.get("alpha", 0.0) + a
        Y0 = zeta + params.get("beta", 0.0)
        den = 2 * X0 ** (2 * m) - 2 * m * (2 * m - 1) * Y0**2 * X0 ** (2 * m - 2)
        if den <= 0:
            raise ValueError("z0 is not inside the shifted cone")
        return eps / den
    if kind == "exponential":
        al = float(params["alpha"])
        den = 4 - 2 * al**2 * zeta**2
        if den <= 0:
            raise ValueError("alpha^2 zeta_1^2 must stay below 2")
        return eps * math.exp(-al * xi) / den
    raise ValueError(f"unknown barrier kind {kind!r}")


def barrier_value(kind, params, eps, X):
    """``R`` at the rows of ``X`` (real coordinates; only ``x1, y1`` matter)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x, y = X[:, 0], X[:, 1]
    k = params["k"]
    if kind == "linear":
        return -k * x - eps / 2
    if kind == "polynomial":
        m = int(params["m"])
        Xs = x + params.get("alpha", 0.0) + params["a"]
        Ys = y + params.get("beta", 0.0)
        return k * (m * (2 * m - 1) * Ys**2 * Xs ** (2 * m - 2) - Xs ** (2 * m)) - eps / 2
    al = params["alpha"]
    return k * np.exp(al * x) * (al**2 * y**2 - 2) - eps / 2


def barrier_tail(kind, params, eps, x):
    """Upper bound of ``R`` over the region at abscissa ``x1 = x``."""
    x = np.asarray(x, dtype=float)
    k = params["k"]
    if kind == "linear":
        return -k * x - eps / 2
    if kind == "polynomial":
        m, a = int(params["m"]), params["a"]
        Xs = x + params.get("alpha", 0.0) + a
        return -k * (2 * a * Xs ** (2 * m - 1) - a**2 * Xs ** (2 * m - 2)) - eps / 2
    al, a = params["alpha"], params["a"]
    return 2 * k * (al**2 / a**2 - 1) * np.exp(al * x) - eps / 2


def _weight(kind, params, x):
    if kind == "linear":
        return x
    if kind == "polynomial":
        return x ** (2 * int(params["m"]) - 1)
    return np.exp(params["alpha"] * x)


def _tail_coefficient(kind, params):
    """``-lim T(x) / w(x)``: the margin the growth ratio must fall below."""
    k = params["k"]
    if kind == "linear":
        return k
    if kind == "polynomial":
        return 2 * params["a"] * k
    return 2 * k * (1 - params["alpha"] ** 2 / params["a"] ** 2)


def _laplacian_z1(kind, params, eps, P):
    """Fourth-order five-point Laplacian of ``R`` in the ``z1`` plane."""
    s = 1e-2 / max(1.0, float(params.get("alpha", 1.0)))
    lap = np.zeros(P.shape[0])
    for ax in (0, 1):
        e = np.zeros(P.shape[1])
        e[ax] = s
        f = [barrier_value(kind, params, eps, P + j * e) for j in (-2, -1, 0, 1, 2)]
        lap += (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * s * s)
    return lap


def _evaluate_checks(kind, eps, z0, params, samples, tol):
    """The four certificate flags, computed from stored data only (used for replay)."""
    P = np.asarray(samples["laplacian_points"], dtype=float)
    Rg = np.asarray(samples["region_points"], dtype=float)
    xs = np.asarray(samples["tail_xs"], dtype=float)
    g = np.asarray(samples["tail_g"], dtype=float)
    lap = _laplacian_z1(kind, params, eps, P)
    scale = 1.0 + float(np.max(np.abs(barrier_value(kind, params, eps, P)))) if P.size else 1.0
    psh_tol = tol["psh"] * scale
    r0 = float(barrier_value(kind, params, eps, np.asarray(z0, dtype=float)[None])[0])
    region = barrier_value(kind, params, eps, Rg) if Rg.size else np.zeros(0)
    q = max(2, int(math.ceil(xs.size / 4)))
    xt, gt = xs[-q:], g[-q:]
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = gt / _weight(kind, params, xt)
        D = gt + barrier_tail(kind, params, eps, xt)
    coef = _tail_coefficient(kind, params)
    finite = bool(np.all(np.isfinite(ratio)) and np.all(np.isfinite(D)))
    ratio_ok = finite and bool(np.all(np.diff(ratio) <= tol["ratio"] * np.abs(ratio[:-1]))) \
        and bool(ratio[-1] < coef)
    d_ok = finite and bool(np.all(np.diff(D) < 0)) and bool(D[-1] < 0)
    alpha_ok = kind != "exponential" or params["alpha"] < params["a"]
    # the fixed-threshold rule, reported for reference only
    thr = 1e-3 * (1 + float(g.max())) / float(_weight(kind, params, xs[-1])) if finite else float("nan")
    checks = {
        "psh_ok": bool(lap.size == 0 or lap.min() >= -psh_tol),
        "value_at_z0_ok": bool(abs(r0 + eps) <= tol["value"] * max(1.0, eps)),
        "region_bound_ok": bool(region.size == 0 or np.all(region < -eps / 2)),
        "growth_domination_ok": bool(alpha_ok and ratio_ok and d_ok),
    }
    details = {
        "laplacian_min": float(lap.min()) if lap.size else 0.0,
        "psh_tol": psh_tol,
        "R_z0": r0,
        "region_max": float(region.max()) if region.size else None,
        "tail_ratio_last": float(ratio[-1]) if finite else None,
        "tail_coefficient": coef,
        "tail_sum_last": float(D[-1]) if finite else None,
        "ratio_nonincreasing_below_coefficient": ratio_ok,
        "tail_sum_decreasing_negative": d_ok,
        "alpha_below_a": bool(alpha_ok),
        "fixed_threshold": thr,
        "fixed_threshold_rule": bool(finite and np.all(ratio <= thr)),
    }
    return checks, details


DEFAULT_TOL = {"psh": 1e-10, "value": 1e-12, "ratio": 1e-12}


@dataclass
class BarrierCertificate:
    kind: str
    eps: float
    z0: list
    params: dict
    checks: dict
    samples: dict = field(repr=False)
    details: dict = field(default_factory=dict)
    tol: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    notes: list = field(default_factory=list)

    @property
    def granted(self):
        return all(self.checks.values())

    def to_dict(self):
        return {
            "kind": self.kind,
            "eps": self.eps,
            "z0": list(self.z0),
            "params": self.params,
            "checks": self.checks,
            "granted": self.granted,
            "details": self.details,
            "tol": self.tol,
            "notes": self.notes,
            "samples": self.samples,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["kind"], float(doc["eps"]), list(doc["z0"]), dict(doc["params"]), dict(doc["checks"]),
                   dict(doc["samples"]), dict(doc.get("details", {})), dict(doc.get("tol", DEFAULT_TOL)),
                   list(doc.get("notes", [])))

    def replay(self):
        """Recompute the flags from the stored samples; returns ``(checks, agrees)``."""
        checks, _ = _evaluate_checks(self.kind, self.eps, self.z0, self.params, self.samples, self.tol)
        return checks, checks == self.checks


def _region_samples(domain, count=512, extent=6.0, step=None):
    """Deterministic lattice sample of domain points with ``0 < x1 <= extent``."""
    dim = 2 * domain.n
    step = step or (0.25 if dim == 2 else 0.5)
    x1 = np.arange(step, extent + 1e-12, step)
    tr = np.arange(-extent, extent + 1e-12, step)
    pts = np.stack(np.meshgrid(x1, *([tr] * (dim - 1)), indexing="ij"), -1).reshape(-1, dim)
    pts = pts[domain.rho(pts) < 0]
    if pts.shape[0] > count:
        pts = pts[np.linspace(0, pts.shape[0] - 1, count).astype(np.int64)]
    return pts


def _containment(kind, params, pts):
    """Mask of sampled points violating the region hypothesis."""
    if kind == "polynomial":
        m = int(params["m"])
        X = pts[:, 0] + params.get("alpha", 0.0)
        Y = pts[:, 1] + params.get("beta", 0.0)
        return ~((m * (2 * m - 1) * Y**2 - X**2 < 0) & (X > 0))
    if kind == "exponential":
        return ~(np.abs(pts[:, 1]) < math.sqrt(2) / params["a"])
    return np.zeros(pts.shape[0], dtype=bool)


def continuity_certificate(domain, profile, kind, eps, z0, params=None, *, samples=None, tol=None):
    """Barrier-backed evidence that the maximal solution is continuous.

    ``params``: ``m, a, alpha, beta`` for the cone barrier, ``a, alpha`` for the
    strip barrier.  ``k`` is filled in from ``eps`` and ``z0``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if profile.xs.size < 8:
        raise InsufficientTail(f"profile has {profile.xs.size} samples; at least 8 are needed")
    params = {key: float(v) for key, v in dict(params or {}).items()}
    if kind == "polynomial":
        params["m"] = int(params.get("m", 2))
        params.setdefault("a", 1.0)
        params.setdefault("alpha", 0.0)
        params.setdefault("beta", 0.0)
    elif kind == "exponential":
        if "a" not in params or "alpha" not in params:
            raise ValueError("the strip barrier needs params a and alpha")
    z0 = [float(v) for v in np.asarray(z0, dtype=float).reshape(-1)]
    tol = dict(DEFAULT_TOL, **(tol or {}))
    pts = _region_samples(domain) if samples is None else np.asarray(samples, dtype=float)
    bad = _containment(kind, params, pts)
    if bad.any():
        raise RegionContainmentFailed(f"sampled point outside the {kind} region", witness=pts[bad][0].tolist())
    notes = []
    if kind == "exponential" and params["alpha"] >= params["a"]:
        notes.append("alpha >= a: the strip barrier hypothesis fails")
    params["k"] = _barrier_constant(kind, eps, z0, params)
    if kind == "exponential":
        al, zeta, xi = params["alpha"], z0[1], z0[0]
        den = 2 * al**2 * zeta**2 - 4
        if den != 0:
            kp = eps * math.exp(-al * xi) / den
            r0 = kp * math.exp(al * xi) * (al**2 * zeta**2 - 2) - eps / 2
            notes.append(f"k={kp!r} with the opposite sign convention gives R(z0)={r0!r}; sign corrected")
    lap_pts = np.vstack([np.asarray(z0)[None], pts])
    data = {
        "laplacian_points": lap_pts.tolist(),
        "region_points": pts.tolist(),
        "tail_xs": profile.xs.tolist(),
        "tail_g": profile.g.tolist(),
    }
    checks, details = _evaluate_checks(kind, eps, z0, params, data, tol)
    return BarrierCertificate(kind, float(eps), z0, params, checks, data, details, tol, notes)


# ---------------------------------------------------------------------------
# continuous solution by a partition of unity


def _patch_centres(points, core):
    """Greedy centres so that every boundary node lies within ``core`` of one."""
    centres = []
    dist = np.full(points.shape[0], np.inf)
    for i in range(points.shape[0]):
        if dist[i] > core:
            centres.append(points[i])
            dist = np.minimum(dist, np.linalg.norm(points - points[i], axis=1))
    return np.array(centres)


def _bumps(X, centres, core, support):
    """Hat functions: 1 within ``core`` of a centre, 0 beyond ``support``."""
    d = np.linalg.norm(X[:, None, :] - centres[None, :, :], axis=2)
    if support <= core:
        return (d <= core).astype(float)
    return np.clip((support - d) / (support - core), 0.0, 1.0)


def _patch_solution(grid, h, centres, j, R, core, support, cfg, collar, max_k=24):
    """Local solution ``psi_j >= 0`` on ``Omega ∩ B(z_j, R)``, zero near the sphere."""
    z = centres[j]
    dim = grid.dim
    sp = grid.spacing
    box = np.stack([z - R - 2 * sp, z + R + 2 * sp], axis=1)
    try:
        G = build_grid(grid.domain, box, sp, cuts=(_ball(grid.n, R, z),))
    except EmptyDiscretization:
        return None

    def share(X):
        X = np.atleast_2d(X)
        tau = _bumps(X, centres, core, support)
        tot = tau.sum(axis=1)
        w = np.where(tot > 0, tau[:, j] / np.where(tot > 0, tot, 1.0), 0.0)
        return w * np.asarray(h(X), dtype=float).reshape(-1)

    top = float(np.max(share(G.boundary_points[G.boundary_part == SURFACE]), initial=0.0))
    if top <= 0:
        return G, np.zeros(G.n_interior), 0.0
    far = np.linalg.norm(G.interior_points - z, axis=1) > R - collar
    cfg = cfg.with_(allow_negative=True)
    for k in range(-1, max_k):
        K = 0.0 if k < 0 else top * 2.0**k

        def data(X, K=K):
            X = np.atleast_2d(X)
            return np.where(G.domain.part(X) == SURFACE, share(X), -K)

        u = psh_envelope(G, BoundaryTrace(G, data(G.boundary_points), data), cfg)
        psi = np.maximum(u.interior, 0.0)
        if not far.any() or psi[far].max() <= u.meta["tol_iter"]:
            psi[far] = 0.0
            return G, psi, K
    raise PatchCollarViolation(j, f"local solution stays positive near the sphere of patch {j}")


def continuous_solution(domain, trace, patch_radius=None, cfg=None, *, min_radius=None):
    """Sum of local envelopes of a partition of the data, on a grid of a convex domain.

    ``domain`` is a grid; all its Boundary nodes (truncation faces included)
    are treated as boundary of the effective domain.  The default patch
    radius is 16 cells; on a collar violation it is halved down to 2 cells.
    """
    grid = domain
    cfg = _cfg(cfg, grid)
    h = _as_callable(trace)
    hb = np.asarray(h(grid.boundary_points), dtype=float)
    _nonneg(hb)
    sp = grid.spacing
    R = 16 * sp if patch_radius is None else float(patch_radius)
    min_radius = 2 * sp if min_radius is None else min_radius
    collar = (cfg.delta + 1.0) * sp
    while True:
        try:
            return _assemble(grid, h, hb, R, cfg, collar)
        except PatchCollarViolation:
            if R / 2 < min_radius - 1e-12:
                raise
            R /= 2


def _assemble(grid, h, hb, R, cfg, collar):
    sp = grid.spacing
    core = R / 2
    support = max(core, R - collar - sp)
    centres = _patch_centres(grid.boundary_points, core)
    shape = np.array(grid.shape)
    u = np.zeros(grid.n_interior)
    caps = []
    for j in range(centres.shape[0]):
        res = _patch_solution(grid, h, centres, j, R, core, support, cfg, collar)
        if res is None:
            continue
        G, psi, K = res
        caps.append(K)
        if not psi.size:
            continue
        key = G.lattice_keys(G.interior) - grid.lo
        ok = np.all((key >= 0) & (key < shape), axis=1)
        flat = key[ok] @ grid.strides
        pos = grid.index[flat]
        hit = pos >= 0
        np.add.at(u, pos[hit], psi[ok][hit])
    out = ScalarField.from_parts(grid, u, hb, boundary=h)
    defect = psh_defect(out, cfg)
    tol = cfg.tolerance(hb)
    out.meta.update(
        kind="continuous",
        patch_radius=R,
        patches=int(centres.shape[0]),
        sphere_levels=caps,
        psh_defect=float(defect.max()) if defect.size else 0.0,
        psh_ok=bool(not defect.size or defect.max() <= 10 * tol),
        boundary_residual=0.0,
        min_value=float(out.values.min()),
        tol=tol,
    )
    return out


def defining_function(domain, cfg=None, patch_radius=None):
    """``u - 1`` where ``u`` is the continuous solution with data ``1``."""
    u = continuous_solution(domain, 1.0, patch_radius, cfg)
    phi = ScalarField(u.grid, u.values - 1.0, boundary=lambda X: np.zeros(np.atleast_2d(X).shape[0]))
    worst = float(phi.interior.max()) if phi.interior.size else -np.inf
    if worst >= 0:
        raise DefiningFunctionFailure(f"interior value {worst!r} >= 0")
    phi.meta.update(u.meta, kind="defining", interior_max=worst)
    return phi
