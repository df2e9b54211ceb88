"""Node-valued fields, boundary traces, solver configuration and CSV output."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import BremermannError, NegativeTrace
from .geometry import CLASS_NAMES


@dataclass(frozen=True)
class EnvelopeConfig:
    """Discretization parameters of the circle-mean scheme.

    ``directions=None`` picks 8 directions in C^1 and 24 in C^2.
    ``tol_iter=None`` resolves to ``1e-8 * (trace range + 1)``.
    ``method`` is ``"howard"`` (policy iteration) or ``"sweep"`` (Jacobi).
    """

    directions: int | None = None
    quad_points: int = 16
    delta: float = 2.0
    tol_iter: float | None = None
    max_iter: int = 100_000
    method: str = "howard"
    allow_negative: bool = False

    def validate(self, n):
        d = self.directions_for(n)
        if d < 2 * n:
            raise ValueError(f"directions must be >= {2 * n}")
        if self.quad_points < 8 or self.quad_points % 2:
            raise ValueError("quad_points must be an even number >= 8")
        if not 1.0 <= self.delta <= 3.0:
            raise ValueError("delta must lie in [1, 3] cells")
        if self.tol_iter is not None and self.tol_iter <= 0:
            raise ValueError("tol_iter must be positive")
        if self.method not in ("howard", "sweep"):
            raise ValueError("method must be 'howard' or 'sweep'")
        return self

    def directions_for(self, n):
        if self.directions is not None:
            return int(self.directions)
        return 8 if n == 1 else 24

    def tolerance(self, trace_values):
        if self.tol_iter is not None:
            return float(self.tol_iter)
        v = np.asarray(trace_values, dtype=float)
        spread = float(v.max() - v.min()) if v.size else 0.0
        return 1e-8 * (spread + 1.0)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown cfg keys: {sorted(unknown)}")
        return cls(**doc)

    def with_(self, **kw):
        return replace(self, **kw)


class BoundaryTrace:
    """Values on the Boundary nodes of a grid, optionally backed by a function
    that also supplies values at off-lattice boundary crossings."""

    def __init__(self, grid, values, func=None):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != grid.n_boundary:
            raise ValueError("trace size does not match the Boundary node count")
        if not np.all(np.isfinite(values)):
            raise BremermannError("trace is not finite on every Boundary node")
        self.grid = grid
        self.values = values
        self.func = func
        self._tree = None

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, np.asarray(func(grid.boundary_points), dtype=float), func)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.n_boundary, float(c)), lambda X: np.full(np.atleast_2d(X).shape[0], float(c)))

    def evaluate(self, X):
        X = np.atleast_2d(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        if self.func is not None:
            return np.asarray(self.func(X), dtype=float).reshape(-1)
        if self._tree is None:
            self._tree = cKDTree(self.grid.boundary_points)
        _, j = self._tree.query(X)
        return self.values[j]

    def map(self, fn):
        """Pointwise transform ``fn(values)`` applied to nodes and crossings alike."""
        base = self.evaluate
        return BoundaryTrace(self.grid, fn(self.values), lambda X: fn(base(X)))

    def __neg__(self):
        return self.map(lambda v: -v)

    def __add__(self, c):
        return self.map(lambda v: v + c)

    def check_nonnegative(self, allow_negative=False):
        if allow_negative and self.grid.bounded and not self.grid.truncated:
            return
        if np.any(self.values < 0):
            j = int(np.argmin(self.values))
            raise NegativeTrace(f"trace value {self.values[j]!r} < 0 at boundary node {j}")


@dataclass(eq=False)
class ScalarField:
    """Values on Interior nodes followed by Boundary nodes (solver order)."""

    grid: object
    values: np.ndarray
    boundary: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.grid.n_interior + self.grid.n_boundary:
            raise ValueError("field size does not match the grid")

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, np.asarray(func(grid.node_points), dtype=float), boundary=func)

    @classmethod
    def from_parts(cls, grid, interior, boundary_values, boundary=None):
        return cls(grid, np.concatenate([interior, boundary_values]), boundary=boundary)

    @property
    def interior(self):
        return self.values[: self.grid.n_interior]

    @property
    def on_boundary(self):
        return self.values[self.grid.n_interior:]

    def crossing_values(self, X):
        """Field values at off-lattice boundary crossings."""
        if self.boundary is not None:
            return np.asarray(self.boundary(np.atleast_2d(X)), dtype=float).reshape(-1)
        return BoundaryTrace(self.grid, self.on_boundary).evaluate(X)

    def trace(self):
        return BoundaryTrace(self.grid, self.on_boundary, self.boundary)

    def sup_norm(self, other=None, mask=None):
        v = self.values if other is None else self.values - _values(other)
        if mask is not None:
            v = v[mask]
        return float(np.max(np.abs(v))) if v.size else 0.0

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _values(other))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _values(other))

    def __neg__(self):
        b = self.boundary
        return ScalarField(self.grid, -self.values, None if b is None else (lambda X: -b(X)))

    def to_csv(self, path=None):
        text = field_csv(self)
        if path is not None:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _values(x):
    return x.values if isinstance(x, ScalarField) else np.asarray(x, dtype=float)


def field_csv(f):
    """CSV rows for Interior and Boundary nodes in lattice order; shortest round-trip floats."""
    g = f.grid
    flat = g.node_flat
    order = np.argsort(flat, kind="stable")
    keys = g.lattice_keys(flat)
    pts = g.node_points
    dim = g.dim
    names = [f"{'x' if j % 2 == 0 else 'y'}{j // 2 + 1}" for j in range(dim)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i"] + [f"i_{c}" for c in names] + names + ["class", "value"])
    cls = g.cls[flat]
    for row, p in enumerate(order):
        w.writerow([int(flat[p])] + [int(v) for v in keys[p]] + [repr(float(v)) for v in pts[p]]
                   + [CLASS_NAMES[int(cls[p])], repr(float(f.values[p]))])
    return buf.getvalue()


def read_field_csv(path):
    """Return ``(flat, classes, coordinates, values)`` arrays from a field CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    dim = (len(head) - 3) // 2
    flat = np.array([int(r[0]) for r in body])
    coords = np.array([[float(v) for v in r[1 + dim:1 + 2 * dim]] for r in body])
    classes = [r[-2] for r in body]
    values = np.array([float(r[-1]) for r in body])
    return flat, classes, coords, values
