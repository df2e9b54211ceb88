"""Monotone circle-mean scheme on a fixed grid and its fixed-point solvers."""
from __future__ import annotations

import numpy as np
import pyamg
from scipy import sparse
from scipy.sparse import linalg as spla

from ._kernels import apply_operator, assemble_policy
from .errors import NoConvergence
from .stencil import stencil_for


class Scheme:
    """Directional circle means ``M_d u`` with Boundary values held fixed.

    ``bvals`` are the Boundary node values and ``cross_val`` the values at the
    boundary crossings of the stencil; both come from the same trace.
    """

    def __init__(self, grid, dirs, quad_points, delta_cells, trace_eval, bvals):
        self.grid = grid
        self.st = stencil_for(grid, dirs, quad_points, delta_cells)
        self.bvals = np.ascontiguousarray(bvals, dtype=float)
        self.cross_val = np.ascontiguousarray(trace_eval(self.st.cross_pts), dtype=float) \
            if self.st.cross_pts.shape[0] else np.zeros(0)
        self.n_int = grid.n_interior

    @property
    def D(self):
        return self.st.D

    def means(self, u_int):
        vals = np.concatenate([u_int, self.bvals])
        st = self.st
        return apply_operator(vals, st.node_of, st.flat, st.corner_off, st.corner_w, st.cross_idx,
                              self.cross_val, st.cross_r, st.radius, st.D)

    def matrix(self, policy):
        st = self.st
        cols, w, rhs = assemble_policy(policy, st.node_of, st.flat, st.corner_off, st.corner_w,
                                       st.cross_idx, self.cross_val, st.cross_r, st.radius, self.bvals)
        n = self.n_int
        keep = cols >= 0
        rows = np.broadcast_to(np.arange(n)[:, None], cols.shape)[keep]
        W = sparse.csr_matrix((w[keep], (rows, cols[keep])), shape=(n, n))
        return sparse.identity(n, format="csr") - W, rhs


def reduce_means(S, frames, sense):
    """Combine directional means: ``min``/``max`` over all, or min over frames of max in frame."""
    if sense == "min":
        return S.min(axis=1)
    if sense == "max":
        return S.max(axis=1)
    return np.min(np.stack([S[:, f].max(axis=1) for f in frames], axis=1), axis=1)


def solve_sparse(A, b, x0=None, direct=True, rtol=1e-14):
    """Solve ``A x = b`` for an M-matrix ``A``.

    Sparse LU in the plane; in C^2 smoothed-aggregation AMG accelerated by
    BiCGSTAB, with an ILU-preconditioned Krylov fallback.
    """
    if direct:
        return spla.splu(A.tocsc(), permc_spec="COLAMD").solve(b)
    A = A.tocsr()
    scale = max(1.0, float(np.max(np.abs(b))))
    # local weighting avoids the randomized spectral-radius estimate
    ml = pyamg.smoothed_aggregation_solver(A, smooth=("jacobi", {"weighting": "local"}))
    x = ml.solve(b, x0=x0, tol=rtol, accel="bicgstab", maxiter=400)
    if float(np.max(np.abs(A @ x - b))) <= 1e-12 * scale:
        return x
    ilu = spla.spilu(A.tocsc(), drop_tol=1e-4, fill_factor=5)
    M = spla.LinearOperator(A.shape, ilu.solve)
    x, info = spla.gmres(A, b, x0=x, M=M, rtol=rtol, atol=0.0, restart=80, maxiter=200)
    if info != 0:
        raise NoConvergence("linear solve did not converge", residual=float(np.abs(A @ x - b).max()))
    return x


def solve_fixed_point(scheme, u0, tol, sense="min", frames=None, method="howard", max_iter=100_000,
                      max_policy=200):
    """Largest ``u <= u0`` with ``u <= G(u)`` where ``G`` reduces the directional means.

    Returns ``(u, info)``.  ``info`` records iterations and the final residual
    ``max |G(u) - u|``.
    """
    u = np.array(u0, dtype=float)
    info = {"method": method, "policy_iterations": 0, "sweeps": 0}
    if scheme.n_int == 0:
        info["residual"] = 0.0
        return u, info
    if method == "howard" and sense in ("min", "max"):
        S = scheme.means(u)
        pick = np.argmin if sense == "min" else np.argmax
        policy = np.zeros(scheme.n_int, dtype=np.int64)
        for it in range(max_policy):
            A, b = scheme.matrix(policy)
            u = solve_sparse(A, b, u, direct=scheme.grid.dim == 2)
            S = scheme.means(u)
            G = reduce_means(S, frames, sense)
            res = float(np.max(np.abs(G - u)))
            info["policy_iterations"] = it + 1
            if res < tol:
                break
            best = pick(S, axis=1)
            cur = S[np.arange(S.shape[0]), policy]
            gap = np.abs(cur - S[np.arange(S.shape[0]), best])
            policy = np.where(gap > 1e-13 * (1.0 + np.abs(cur)), best, policy)
        # Jacobi polish from the policy solution
        for _ in range(max_iter):
            new = np.minimum(u, reduce_means(scheme.means(u), frames, sense))
            info["sweeps"] += 1
            change = float(np.max(np.abs(new - u)))
            u = new
            if change < tol:
                break
    else:
        for k in range(max_iter):
            new = np.minimum(u, reduce_means(scheme.means(u), frames, sense))
            change = float(np.max(np.abs(new - u)))
            u = new
            info["sweeps"] = k + 1
            if change < tol:
                break
        else:
            raise NoConvergence(f"no convergence after {max_iter} sweeps", residual=change)
    G = reduce_means(scheme.means(u), frames, sense)
    info["residual"] = float(np.max(np.abs(G - u)))
    info["subsolution_defect"] = float(max(0.0, np.max(u - G)))
    return u, info
