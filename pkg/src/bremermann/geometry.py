"""Domains of C^n as sublevel sets, lattice discretization, recession
directions, slab/ball exhaustions and the Lupacciolu sample check.

Points of C^n are stored as real vectors ``(x1, y1, ..., xn, yn)`` with
``z_j = x_j + i y_j``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize, special

from .errors import (
    ArithmeticOverflow,
    EmptyDiscretization,
    InvalidDomain,
    NestingViolation,
    NoRecessionDirection,
    UnboundedSlab,
)

INTERIOR, BOUNDARY, EXTERIOR = "Interior", "Boundary", "Exterior"
EXT, INT, BND = 0, 1, 2
CLASS_NAMES = {EXT: EXTERIOR, INT: INTERIOR, BND: BOUNDARY}

TOL_GEOM = 0.5
KINDS = ("ball", "halfspace", "paraboloid", "ellipsoid", "strip_convex", "poly_sublevel")
CONVEX_KINDS = ("ball", "halfspace", "paraboloid", "ellipsoid", "strip_convex")
_LOG_FLOOR = 1e-300


def to_complex(X):
    X = np.asarray(X, dtype=float)
    return X[..., 0::2] + 1j * X[..., 1::2]


def to_real(Z):
    Z = np.asarray(Z, dtype=complex)
    out = np.empty(Z.shape[:-1] + (2 * Z.shape[-1],))
    out[..., 0::2] = Z.real
    out[..., 1::2] = Z.imag
    return out


def _vec(value, size, name):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.size == 1 and size > 1:
        arr = np.full(size, float(arr[0]))
    if arr.size != size:
        raise InvalidDomain(f"{name}: expected {size} entries, got {arr.size}")
    return arr


def _complex_coef(c):
    if isinstance(c, (list, tuple)):
        return complex(float(c[0]), float(c[1]) if len(c) > 1 else 0.0)
    return complex(c)


def eval_complex_poly(terms, Z):
    """Evaluate ``sum c * z^e`` for ``terms = [(c, exps), ...]`` at rows of ``Z``."""
    Z = np.atleast_2d(Z)
    out = np.zeros(Z.shape[0], dtype=complex)
    for coef, exps in terms:
        mono = np.full(Z.shape[0], _complex_coef(coef), dtype=complex)
        for j, e in enumerate(exps):
            if e:
                mono = mono * Z[:, j] ** int(e)
        out += mono
    return out


def poly_degree(terms):
    degs = [sum(int(e) for e in exps) for c, exps in terms if _complex_coef(c) != 0]
    return max(degs) if degs else 0


class Domain:
    """A domain ``{rho < 0}`` in C^n."""

    n: int
    convex: bool
    bounded: bool

    def rho(self, X):
        raise NotImplementedError

    def part(self, X):
        """Label of the boundary piece active at ``X`` (0 for the base surface)."""
        return np.zeros(np.atleast_2d(X).shape[0], dtype=np.int8)

    def grad(self, X, step=1e-6):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        G = np.empty_like(X)
        for i in range(X.shape[1]):
            E = np.zeros(X.shape[1])
            E[i] = step
            G[:, i] = (self.rho(X + E) - self.rho(X - E)) / (2 * step)
        return G

    @property
    def base(self):
        return self


@dataclass(frozen=True, eq=False)
class DomainSpec(Domain):
    kind: str
    n: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDomain(f"unknown domain kind {self.kind!r}")
        if self.n not in (1, 2):
            raise InvalidDomain("complex dimension must be 1 or 2")
        if self.kind == "paraboloid" and self.n < 1:
            raise InvalidDomain("paraboloid needs n >= 1")

    @property
    def convex(self):
        return self.kind in CONVEX_KINDS

    @property
    def bounded(self):
        if self.kind in ("ball", "ellipsoid"):
            return True
        if self.kind == "poly_sublevel":
            return bool(self.params.get("bounded", False))
        return False

    def rho(self, X):
        X = np.asarray(X, dtype=float)
        d = 2 * self.n
        p = self.params
        if self.kind == "ball":
            c = _vec(p.get("center", 0.0), d, "center")
            r = float(p.get("radius", 1.0))
            return np.sum((X - c) ** 2, axis=-1) - r * r
        if self.kind == "ellipsoid":
            c = _vec(p.get("center", 0.0), d, "center")
            a = _vec(p.get("axes", 1.0), d, "axes")
            return np.sum(((X - c) / a) ** 2, axis=-1) - 1.0
        if self.kind == "halfspace":
            nv = _vec(p.get("normal", [1.0] + [0.0] * (d - 1)), d, "normal")
            norm = np.linalg.norm(nv)
            if norm == 0:
                raise InvalidDomain("halfspace normal is zero")
            return (float(p.get("offset", 0.0)) - X @ nv) / norm
        if self.kind == "paraboloid":
            s = float(p.get("scale", 1.0))
            q = np.sum(X[..., : d - 2] ** 2, axis=-1) + X[..., d - 2] ** 2
            return s * q - X[..., d - 1]
        if self.kind == "strip_convex":
            w = float(p.get("width", 1.0))
            x0 = float(p.get("apex", 0.0))
            t = float(p.get("transverse", 1.0))
            pieces = [x0 - X[..., 0], np.abs(X[..., 1]) - w]
            if self.n > 1:
                pieces.append(t * np.sum(X[..., 2:] ** 2, axis=-1) - (X[..., 0] - x0))
            return np.maximum.reduce(pieces)
        # poly_sublevel
        out = np.zeros(X.shape[:-1])
        for coef, exps in p.get("terms", []):
            mono = np.full(X.shape[:-1], float(coef))
            for i, e in enumerate(exps):
                if e:
                    mono = mono * X[..., i] ** int(e)
            out = out + mono
        if p.get("log_q"):
            Zf = to_complex(X).reshape(-1, self.n)
            q2 = np.abs(eval_complex_poly(p["log_q"], Zf)) ** 2
            out = out + np.log(np.maximum(q2, _LOG_FLOOR)).reshape(X.shape[:-1])
        return out - float(p.get("level", 0.0))

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "params": _jsonable(self.params)}

    @classmethod
    def from_dict(cls, doc):
        unknown = set(doc) - {"kind", "n", "params"}
        if unknown:
            raise InvalidDomain(f"unknown domain keys: {sorted(unknown)}")
        try:
            return cls(kind=doc["kind"], n=int(doc["n"]), params=dict(doc.get("params", {})))
        except KeyError as exc:
            raise InvalidDomain(f"missing domain key {exc}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass(frozen=True, eq=False)
class BoxRegion(Domain):
    lo: np.ndarray
    hi: np.ndarray

    @property
    def n(self):
        return len(self.lo) // 2

    convex = True
    bounded = True

    def rho(self, X):
        X = np.asarray(X, dtype=float)
        c = (self.lo + self.hi) / 2
        half = (self.hi - self.lo) / 2
        return np.max(np.abs(X - c) - half, axis=-1)


@dataclass(frozen=True, eq=False)
class Intersection(Domain):
    """``base ∩ cut_1 ∩ ...``; boundary pieces are labelled 0 (base), 1, 2, ..."""

    parts: tuple

    @property
    def n(self):
        return self.parts[0].n

    @property
    def convex(self):
        return all(p.convex for p in self.parts)

    @property
    def bounded(self):
        return any(p.bounded for p in self.parts)

    @property
    def base(self):
        return self.parts[0].base

    def rho(self, X):
        return np.maximum.reduce([p.rho(X) for p in self.parts])

    def part(self, X):
        vals = np.stack([p.rho(np.atleast_2d(X)) for p in self.parts])
        return np.argmax(vals, axis=0).astype(np.int8)


@dataclass(frozen=True, eq=False)
class Transformed(Domain):
    """Image of ``base`` under ``z' = U (z - shift)`` with ``U`` unitary."""

    base_domain: Domain
    U: np.ndarray
    shift: np.ndarray

    @property
    def n(self):
        return self.base_domain.n

    @property
    def convex(self):
        return self.base_domain.convex

    @property
    def bounded(self):
        return self.base_domain.bounded

    @property
    def base(self):
        return self

    def to_original(self, X):
        Zp = to_complex(X)
        Z = Zp @ self.U.conj()  # rows: U^H z'
        return to_real(Z) + self.shift

    def from_original(self, X):
        Z = to_complex(np.asarray(X, dtype=float) - self.shift)
        return to_real(Z @ self.U.T)

    def rho(self, X):
        X = np.asarray(X, dtype=float)
        return self.base_domain.rho(self.to_original(X.reshape(-1, X.shape[-1]))).reshape(X.shape[:-1])


def classify_point(domain, z, spacing, tol_geom=TOL_GEOM):
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    r = float(np.asarray(domain.rho(np.atleast_2d(np.asarray(z, dtype=float))))[0])
    if not math.isfinite(r):
        raise InvalidDomain(f"defining function is not finite at {z!r}")
    if r < -tol_geom * spacing:
        return INTERIOR
    if r > tol_geom * spacing:
        return EXTERIOR
    return BOUNDARY


def first_crossing(domain, origins, dirs, tmax, step, tol=1e-12):
    """First ``t in (0, tmax]`` with ``rho(origin + t dir) >= 0`` (nan if none).

    ``origins`` must lie in ``{rho < 0}``; the root is refined by bisection.
    """
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    m = origins.shape[0]
    tmax = np.broadcast_to(np.asarray(tmax, dtype=float), (m,))
    lo = np.zeros(m)
    hi = np.full(m, np.nan)
    todo = np.arange(m)
    t = 0.0
    while todo.size:
        t += step
        tt = np.minimum(t, tmax[todo])
        vals = domain.rho(origins[todo] + tt[:, None] * dirs[todo])
        hit = vals >= 0
        hi[todo[hit]] = tt[hit]
        lo[todo[~hit]] = tt[~hit]
        todo = todo[~hit & (tt < tmax[todo])]
    ok = ~np.isnan(hi)
    idx = np.nonzero(ok)[0]
    a, b = lo[idx], hi[idx]
    for _ in range(200):
        if idx.size == 0 or np.max(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        pos = domain.rho(origins[idx] + mid[:, None] * dirs[idx]) >= 0
        b = np.where(pos, mid, b)
        a = np.where(pos, a, mid)
    out = np.full(m, np.nan)
    out[idx] = b
    return out


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice ``x = spacing * (lo + I)`` with an Interior/Boundary/Exterior mask."""

    domain: Domain
    n: int
    spacing: float
    lo: np.ndarray
    shape: tuple
    cls: np.ndarray
    index: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    boundary_points: np.ndarray
    boundary_part: np.ndarray
    truncated: bool

    @property
    def dim(self):
        return 2 * self.n

    @property
    def bounded(self):
        return self.domain.bounded

    @property
    def n_interior(self):
        return self.interior.size

    @property
    def n_boundary(self):
        return self.boundary.size

    @property
    def strides(self):
        s = np.ones(self.dim, dtype=np.int64)
        for i in range(self.dim - 2, -1, -1):
            s[i] = s[i + 1] * self.shape[i + 1]
        return s

    def multi_index(self, flat):
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def lattice_points(self, flat):
        return self.spacing * (self.lo + self.multi_index(flat))

    @property
    def interior_points(self):
        return self.lattice_points(self.interior)

    @property
    def node_flat(self):
        """Interior followed by Boundary flat indices (solver node order)."""
        return np.concatenate([self.interior, self.boundary])

    @property
    def node_points(self):
        """Coordinates of Interior (lattice) then Boundary (snapped) nodes."""
        return np.concatenate([self.interior_points, self.boundary_points])

    def lattice_keys(self, flat):
        """Global integer lattice coordinates, comparable across grids of equal spacing."""
        return self.lo + self.multi_index(flat)

    def surface_mask(self):
        """Boundary nodes lying on the base domain's surface (not on a truncation cut)."""
        return self.boundary_part == 0

    def class_of(self, flat):
        return [CLASS_NAMES[int(c)] for c in self.cls[np.asarray(flat)]]


def _neighbor_offsets(dim):
    axis = []
    for i in range(dim):
        for s in (-1, 1):
            o = np.zeros(dim, dtype=np.int64)
            o[i] = s
            axis.append(o)
    cheb = [np.array(o, dtype=np.int64) for o in itertools.product((-1, 0, 1), repeat=dim)
            if any(o) and sum(map(abs, o)) > 1]
    return axis + cheb


def build_grid(domain, box, spacing, tol_geom=TOL_GEOM, cuts=()):
    """Discretize ``domain ∩ cuts`` on the lattice ``spacing * Z^{2n}`` inside ``box``.

    ``box`` is a ``(2n, 2)`` array of real bounds.  When the domain is not
    contained in the box the outermost lattice layer is cut off by a box face
    and the grid is flagged ``truncated``.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    dim = 2 * domain.n
    box = np.asarray(box, dtype=float).reshape(dim, 2)
    lo = np.ceil(box[:, 0] / spacing - 1e-9).astype(np.int64)
    hi = np.floor(box[:, 1] / spacing + 1e-9).astype(np.int64)
    shape = tuple(int(v) for v in hi - lo + 1)
    if min(shape) < 3:
        raise EmptyDiscretization("box holds fewer than three lattice layers per axis")
    eff = Intersection((domain,) + tuple(cuts)) if cuts else domain
    axes = [spacing * np.arange(lo[i], hi[i] + 1) for i in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    rho = eff.rho(pts)
    edge = np.zeros(shape, dtype=bool)
    for i in range(dim):
        sl = [slice(None)] * dim
        sl[i] = 0
        edge[tuple(sl)] = True
        sl[i] = -1
        edge[tuple(sl)] = True
    edge = edge.reshape(-1)
    truncated = bool(np.any(rho[edge] < 0)) or not domain.bounded
    if truncated:
        face = BoxRegion(spacing * (lo + 1.0), spacing * (hi - 1.0))
        eff = Intersection((domain,) + tuple(cuts) + (face,))
        rho = eff.rho(pts)
    bad = ~np.isfinite(rho)
    inside = (rho < -tol_geom * spacing) & ~edge & ~bad
    if not inside.any():
        raise EmptyDiscretization("no Interior node in the box")
    grown = ndimage.binary_dilation(inside.reshape(shape), structure=np.ones((3,) * dim, dtype=bool))
    bnd = grown.reshape(-1) & ~inside & ~bad
    cls = np.full(pts.shape[0], EXT, dtype=np.int8)
    cls[inside] = INT
    cls[bnd] = BND
    interior = np.nonzero(inside)[0]
    boundary = np.nonzero(bnd)[0]
    index = np.full(pts.shape[0], -1, dtype=np.int32)
    index[interior] = np.arange(interior.size, dtype=np.int32)
    index[boundary] = -2 - np.arange(boundary.size, dtype=np.int32)

    # snap each boundary node along the segment from a chosen interior neighbour
    strides = np.ones(dim, dtype=np.int64)
    for i in range(dim - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    midx = np.stack(np.unravel_index(boundary, shape), axis=-1)
    origin = np.full(boundary.size, -1, dtype=np.int64)
    for off in _neighbor_offsets(dim):
        todo = origin < 0
        if not todo.any():
            break
        nb = midx[todo] + off
        ok = np.all((nb >= 0) & (nb < np.array(shape)), axis=1)
        flat = np.where(ok, nb @ strides, 0)
        good = ok & inside[flat]
        sel = np.nonzero(todo)[0][good]
        origin[sel] = flat[good]
    a = pts[origin]
    b = pts[boundary]
    t = first_crossing(eff, a, b - a, tmax=4.0, step=0.125, tol=1e-10 * spacing / max(spacing, 1.0))
    snapped = np.where(np.isnan(t)[:, None], b, a + np.nan_to_num(t)[:, None] * (b - a))
    snapped = _project(eff, b, snapped, spacing)
    if eff is not domain:
        # prefer the foot on the uncut surface when it stays inside the cuts
        foot = _project(domain, b, snapped, spacing)
        keep = eff.rho(foot) <= 1e-9 * max(1.0, spacing)
        snapped = np.where(keep[:, None], foot, snapped)
    part = eff.part(snapped) if isinstance(eff, Intersection) else np.zeros(boundary.size, dtype=np.int8)
    if isinstance(eff, Intersection) and not cuts and truncated:
        part = np.where(part == 1, 1, part).astype(np.int8)
    return Grid(
        domain=eff,
        n=domain.n,
        spacing=float(spacing),
        lo=lo,
        shape=shape,
        cls=cls,
        index=index,
        interior=interior,
        boundary=boundary,
        boundary_points=snapped,
        boundary_part=part.astype(np.int8),
        truncated=truncated,
    )


def _project(domain, X, fallback, spacing, iters=40):
    """Newton projection of lattice sites onto ``rho = 0``.

    The result depends only on the site and the defining function, so a
    site shared by two grids of the same domain snaps to the same point.
    Sites where the iteration stalls keep the ``fallback`` position.
    """
    P = np.array(X, dtype=float)
    step = 1e-6 * max(1.0, spacing)
    tol = 1e-12 * max(1.0, spacing)
    for _ in range(iters):
        r = domain.rho(P)
        if np.all(np.abs(r) <= tol):
            break
        G = domain.grad(P, step=step)
        gg = np.sum(G * G, axis=1)
        move = np.where((gg > 1e-24) & (np.abs(r) > tol), r / np.where(gg > 1e-24, gg, 1.0), 0.0)
        P = P - move[:, None] * G
    r = domain.rho(P)
    ok = (np.abs(r) <= 1e3 * tol) & (np.linalg.norm(P - X, axis=1) <= spacing * math.sqrt(X.shape[1]))
    return np.where(ok[:, None], P, fallback)


def boundary_residuals(grid):
    """``rho`` at the snapped Boundary nodes (zero up to bisection tolerance)."""
    return grid.domain.rho(grid.boundary_points)


def gradient_diagnostics(grid):
    """Smallest gradient norm of the base defining function over snapped surface nodes."""
    base = grid.domain.parts[0] if isinstance(grid.domain, Intersection) else grid.domain
    pts = grid.boundary_points[grid.surface_mask()]
    if pts.size == 0:
        return {"min_grad_norm": float("nan"), "degenerate": 0}
    g = np.linalg.norm(base.grad(pts), axis=1)
    return {"min_grad_norm": float(g.min()), "degenerate": int(np.sum(g < 1e-8))}


# ---------------------------------------------------------------------------
# recession directions and normalization


def _kronecker_sphere(count, dim):
    """Deterministic low-discrepancy directions on S^{dim-1} (R_d Kronecker lattice)."""
    phi = 2.0
    for _ in range(60):
        phi = (1 + phi) ** (1.0 / (dim + 1))
    alpha = np.array([phi ** -(k + 1) for k in range(dim)]) % 1.0
    j = np.arange(1, count + 1)[:, None]
    u = (0.5 + j * alpha) % 1.0
    g = special.ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _interior_samples(domain, count=32, half=2.0, step=0.5):
    dim = 2 * domain.n
    for _ in range(6):
        ax = np.arange(-half, half + 1e-9, step)
        pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), -1).reshape(-1, dim)
        inside = pts[domain.rho(pts) < 0]
        if inside.shape[0]:
            stride = max(1, inside.shape[0] // count)
            return inside[::stride][:count]
        half *= 2
        step *= 2
    raise InvalidDomain("could not find interior sample points")


def _k_schedule(probe_radius):
    ks = [1.0]
    while ks[-1] * 2 <= probe_radius:
        ks.append(ks[-1] * 2)
    if ks[-1] < probe_radius:
        ks.append(float(probe_radius))
    return np.array(ks)


def _recession_score(domain, v, Z, ks):
    P = Z[:, None, :] + ks[None, :, None] * v[None, None, :]
    r = domain.rho(P.reshape(-1, Z.shape[1])).reshape(Z.shape[0], ks.size)
    if not np.all(r < 0):
        return -np.inf
    return float(np.min(-r / ks[None, :]))


def recession_direction(domain, probe_radius=1e3, samples=64, return_witness=False):
    """Unit complex vector ``v`` with ``z + k v`` in the domain for all tested ``z, k``."""
    if domain.bounded:
        raise NoRecessionDirection("bounded domain contains no half-line")
    if not domain.convex:
        raise NoRecessionDirection("recession search needs a convex domain")
    dim = 2 * domain.n
    Z = _interior_samples(domain)
    ks = _k_schedule(probe_radius)
    cands = np.concatenate([np.eye(dim), -np.eye(dim), _kronecker_sphere(samples, dim)])
    scores = np.array([_recession_score(domain, c, Z, ks) for c in cands])
    best = int(np.argmax(scores))
    if not np.isfinite(scores[best]):
        raise NoRecessionDirection("no sampled direction survives the containment test")
    v, s = cands[best].copy(), scores[best]
    step = 0.25
    while step > 1e-9:
        improved = False
        for i in range(dim):
            for sign in (1, -1):
                w = v.copy()
                w[i] += sign * step
                w /= np.linalg.norm(w)
                sw = _recession_score(domain, w, Z, ks)
                if sw > s + 1e-15:
                    v, s, improved = w, sw, True
        if not improved:
            step /= 2
    v[np.abs(v) < 1e-7] = 0.0
    v /= np.linalg.norm(v)
    vc = to_complex(v)
    if return_witness:
        return vc, {"samples": Z, "ks": ks, "score": s}
    return vc


def unitary_to_first_axis(v):
    """Unitary ``U`` with ``U v = e_1``."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    n = v.size
    M = np.column_stack([v] + [np.eye(n, dtype=complex)[:, i] for i in range(n)])
    Q, _ = np.linalg.qr(M)
    Q = Q[:, :n]
    Q[:, 0] = v
    # re-orthonormalize the remaining columns against v (Gram-Schmidt)
    for j in range(1, n):
        q = Q[:, j]
        for i in range(j):
            q = q - np.vdot(Q[:, i], q) * Q[:, i]
        Q[:, j] = q / np.linalg.norm(q)
    return Q.conj().T


def normalize_domain(domain, v=None, k0=None):
    """Unitary change of coordinates taking the recession direction to the first
    real axis and the tangent hyperplane orthogonal to it to ``x1 = 0``."""
    if v is None:
        v = recession_direction(domain)
    U = unitary_to_first_axis(v)
    rot = Transformed(domain, U, np.zeros(2 * domain.n))
    if k0 is None:
        k0 = _min_first_coordinate(rot)
    shift_prime = np.zeros(2 * domain.n)
    shift_prime[0] = k0
    # z' = U z - k0 e1  <=>  z' = U (z - U^H k0 e1)
    shift = to_real(to_complex(shift_prime) @ U.conj())
    return Transformed(domain, U, shift.reshape(-1))


def _min_first_coordinate(dom):
    dim = 2 * dom.n
    Z = _interior_samples(dom)
    lift = float(np.max(np.abs(Z[:, 0]))) + 1.0

    def foot(w):
        start = np.concatenate([[lift], w])
        x = start.copy()
        up = 1.0
        while dom.rho(x[None])[0] >= 0 and up < 1e8:
            x[0] += up
            up *= 2
        t = first_crossing(dom, x[None], -np.eye(dim)[:1], tmax=1e9, step=max(1.0, abs(x[0])) / 64)[0]
        return x[0] - t if np.isfinite(t) else np.inf

    starts = Z[:, 1:]
    vals = [foot(w) for w in starts]
    w0 = starts[int(np.argmin(vals))]
    res = optimize.minimize(foot, w0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    return float(min(res.fun, min(vals)))


# ---------------------------------------------------------------------------
# exhaustion


@dataclass(frozen=True)
class ExhaustionPlan:
    v: np.ndarray
    c_prime: tuple
    c: tuple
    nu_max: int
    slab_step: float
    scan_spacing: float

    def slab_mask(self, X, nu):
        return np.asarray(X)[..., 0] < self.c_prime[nu - 1]

    def ball_mask(self, X, nu):
        return np.linalg.norm(np.asarray(X), axis=-1) < self.c[nu - 1]

    def check_nesting(self, domain, X):
        """Node-level check of slab_nu ⊂ ball_nu ⊂ slab_{nu+1} on domain points ``X``."""
        X = np.atleast_2d(X)
        inside = domain.rho(X) < 0
        worst = []
        for nu in range(1, self.nu_max + 1):
            a = inside & self.slab_mask(X, nu) & ~self.ball_mask(X, nu)
            ok = not a.any()
            if nu < self.nu_max:
                b = inside & self.ball_mask(X, nu) & ~self.slab_mask(X, nu + 1)
                ok = ok and not b.any()
            worst.append(ok)
        return all(worst), worst

    def to_dict(self):
        return {
            "v": _jsonable(np.asarray(self.v, dtype=complex)),
            "c_prime": list(self.c_prime),
            "c": list(self.c),
            "nu_max": self.nu_max,
            "slab_step": self.slab_step,
            "scan_spacing": self.scan_spacing,
        }


def _scan(domain, x_hi, half, s, x_lo=None):
    dim = 2 * domain.n
    if x_lo is None:
        x_lo = -half
    x1 = np.arange(math.floor(x_lo / s) * s, x_hi + 1e-12, s)
    tr = np.arange(-math.floor(half / s) * s, half + 1e-12, s)
    pts = np.stack(np.meshgrid(x1, *([tr] * (dim - 1)), indexing="ij"), -1).reshape(-1, dim)
    return pts


def build_exhaustion(domain, nu_max=6, slab_step=1.0, scan_spacing=None, margin=None,
                     v=None, max_points=2_000_000):
    """Slab cuts ``c'_nu = nu * slab_step`` and enclosing ball radii ``c_nu``.

    ``domain`` must already be normalized (recession direction = first real axis).
    """
    dim = 2 * domain.n
    if v is None:
        v = np.eye(domain.n, dtype=complex)[0]
    s = scan_spacing if scan_spacing is not None else slab_step / 8.0
    if margin is None:
        margin = s * math.sqrt(dim)
    if domain.bounded:
        half = 1.0
        while True:
            pts = _scan(domain, half, half, s)
            ins = pts[domain.rho(pts) <= 0]
            if ins.size and np.all(np.max(np.abs(ins), axis=0) < half - s):
                break
            half *= 2
            if half > 1e4:
                raise InvalidDomain("bounded domain not found within scan range")
        cp = float(ins[:, 0].max()) + margin
        c = float(np.linalg.norm(ins, axis=1).max()) + margin
        return ExhaustionPlan(np.asarray(v), (cp,), (c,), 1, float(slab_step), float(s))

    cps = [slab_step * (nu + 1) for nu in range(nu_max + 1)]
    radii = []
    for nu in range(1, nu_max + 1):
        cp = cps[nu - 1]
        half = max(1.0, cp)
        s_nu = s
        while True:
            while _scan_count(cp, half, s_nu, dim) > max_points:
                s_nu *= 1.5
            pts = _scan(domain, cp, half, s_nu, x_lo=min(-s_nu, -half))
            sel = (domain.rho(pts) <= 0) & (pts[:, 0] <= cp + 1e-12)
            ins = pts[sel]
            if ins.size == 0:
                half *= 2
                if half > 1e3:
                    raise UnboundedSlab(f"slab {nu} is empty")
                continue
            touch = np.any(np.abs(ins[:, 1:]) > half - 1.5 * s_nu) or ins[:, 0].min() < -half + 1.5 * s_nu
            if not touch:
                break
            half *= 2
            if half > 64 * max(1.0, cp):
                raise UnboundedSlab(f"slab x1 < {cp} meets the domain in an unbounded set")
        radii.append(float(np.linalg.norm(ins, axis=1).max()) + max(margin, s_nu * math.sqrt(dim)))
    plan = ExhaustionPlan(np.asarray(v), tuple(cps[:nu_max]), tuple(radii), nu_max,
                          float(slab_step), float(s))
    for r in radii:
        if not np.isfinite(r):
            raise UnboundedSlab("non-finite enclosing radius")
    # nesting: B(0, c_nu) ∩ Ω ⊂ {x1 < c'_{nu+1}}
    for nu in range(1, nu_max):
        r = radii[nu - 1]
        ss = s
        while _scan_count(r, r, ss, dim) > max_points:
            ss *= 1.5
        pts = _scan(domain, r, r, ss)
        bad = (domain.rho(pts) < 0) & (np.linalg.norm(pts, axis=1) < r) & (pts[:, 0] >= cps[nu])
        if bad.any():
            raise NestingViolation(f"ball {nu} leaves slab {nu + 1}; increase slab_step")
    return plan


def _scan_count(x_hi, half, s, dim):
    return (x_hi + half) / s * (2 * half / s + 1) ** (dim - 1)


# ---------------------------------------------------------------------------
# Lupacciolu condition, Veronese dimension


def lupacciolu_check(P, domain, sample_points=256, grid=None, far_field=True):
    """Sample check of ``|P(z)|^2 > (1 + |z|^2)^{deg P}`` over points of the domain."""
    if sample_points < 1:
        raise ValueError("sample_points must be >= 1")
    if grid is not None:
        X = grid.node_points
    else:
        dim = 2 * domain.n
        half, step = 3.0, 0.25 if domain.n == 1 else 0.5
        ax = np.arange(-half, half + 1e-9, step)
        pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), -1).reshape(-1, dim)
        X = pts[domain.rho(pts) <= 0]
    stride = max(1, X.shape[0] // sample_points)
    X = X[::stride][:sample_points]
    notes = []
    if far_field and not domain.bounded and domain.convex and X.shape[0]:
        try:
            v = to_real(recession_direction(domain, probe_radius=1e3))
            ks = _k_schedule(1024.0)
            X = np.concatenate([X, X[0] + ks[:, None] * v[None, :]])
        except NoRecessionDirection:
            notes.append("no recession direction; far-field rays skipped")
    deg = poly_degree(P)
    Z = to_complex(X)
    margin = np.abs(eval_complex_poly(P, Z)) ** 2 - (1 + np.sum(np.abs(Z) ** 2, axis=1)) ** deg
    w = int(np.argmin(margin))
    return {
        "holds": bool(np.all(margin > 0)),
        "worst_margin": float(margin[w]),
        "witness": X[w].tolist(),
        "degree": deg,
        "samples": int(X.shape[0]),
        "note": "sample-based check: holds=true is evidence, not proof",
        **({"diagnostics": notes} if notes else {}),
    }


def veronese_dimension(n, d):
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    N = math.comb(n + d, d) - 1
    if N > np.iinfo(np.int64).max:
        raise ArithmeticOverflow(f"binomial({n + d}, {d}) - 1 exceeds int64")
    return N
