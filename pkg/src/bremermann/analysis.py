"""Sandwich of envelopes, q-Bremermann tests and discrete Levi spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelope import _cfg, harmonic_solution, psh_defect, psh_envelope, psuperh_envelope
from .errors import InvalidQ, StencilOutOfDomain
from .fields import ScalarField
from .geometry import INT
from .stencil import complex_frames


@dataclass
class SandwichReport:
    phi: ScalarField
    eta: ScalarField
    chi: ScalarField
    max_gap: float
    pluriharmonic: bool
    order_phi_eta: float
    order_eta_chi: float
    center_gap: float
    tol: float
    tol_pluri: float

    def to_dict(self):
        return {
            "max_gap": self.max_gap,
            "pluriharmonic": self.pluriharmonic,
            "order_phi_eta": self.order_phi_eta,
            "order_eta_chi": self.order_eta_chi,
            "center_gap": self.center_gap,
            "tol": self.tol,
            "tol_pluri": self.tol_pluri,
        }


def pluriharmonic_sandwich(grid, trace, cfg=None):
    """Envelope ``phi``, harmonic ``eta`` and plurisuperharmonic ``chi`` of the same data."""
    cfg = _cfg(cfg, grid).with_(allow_negative=True)
    phi = psh_envelope(grid, trace, cfg)
    tol = phi.meta["tol_iter"]
    cfg = cfg.with_(tol_iter=tol)
    eta = harmonic_solution(grid, trace, cfg)
    chi = psuperh_envelope(grid, trace, cfg)
    gap = chi.interior - phi.interior
    max_gap = float(np.max(np.abs(gap))) if gap.size else 0.0
    centre = int(np.argmin(np.linalg.norm(grid.interior_points, axis=1))) if gap.size else None
    tol_pluri = 10 * tol
    return SandwichReport(
        phi=phi,
        eta=eta,
        chi=chi,
        max_gap=max_gap,
        pluriharmonic=bool(max_gap <= tol_pluri),
        order_phi_eta=float(np.max(phi.values - eta.values)),
        order_eta_chi=float(np.max(eta.values - chi.values)),
        center_gap=float(gap[centre]) if centre is not None else 0.0,
        tol=tol,
        tol_pluri=tol_pluri,
    )


def _frame_test(field, q, cfg):
    n = field.grid.n
    dirs, frames = complex_frames(n, q)
    sense = "min" if q == 0 else ("max" if len(frames) == 1 else "frames")
    return psh_defect(field, cfg, sense=sense, frames=frames, dirs=dirs)


def q_bremermann_check(field, q, cfg=None, tol=None):
    """Both halves of the q-Bremermann condition, via the circle-mean frame tests."""
    n = field.grid.n
    if not 0 <= q <= n - 1:
        raise InvalidQ(f"q={q} outside [0, {n - 1}]")
    cfg = _cfg(cfg, field.grid)
    if tol is None:
        tol = 10 * cfg.tolerance(field.on_boundary)
    d_sub = _frame_test(field, q, cfg)
    d_sup = _frame_test(-field, n - q - 1, cfg)
    w_sub = float(d_sub.max()) if d_sub.size else 0.0
    w_sup = float(d_sup.max()) if d_sup.size else 0.0
    report = {
        "q": q,
        "is_q_psh": bool(w_sub <= tol),
        "is_nq1_psuperh": bool(w_sup <= tol),
        "worst_q_psh_defect": w_sub,
        "worst_psuperh_defect": w_sup,
        "worst_nodes": [int(np.argmax(d_sub)) if d_sub.size else -1, int(np.argmax(d_sup)) if d_sup.size else -1],
        "tol": tol,
        "frames": {"q": len(complex_frames(n, q)[1]), "n-q-1": len(complex_frames(n, n - q - 1)[1])},
    }
    report["pass"] = report["is_q_psh"] and report["is_nq1_psuperh"]
    return report


def discrete_levi_spectrum(field, z):
    """Eigenvalues (ascending) of the centred-difference complex Hessian at an Interior node."""
    g = field.grid
    z = np.asarray(z, dtype=float).reshape(-1)
    key = np.rint(z / g.spacing).astype(np.int64) - g.lo
    shape = np.array(g.shape)
    dim = g.dim
    pos = np.full(g.cls.size, -1, dtype=np.int64)
    pos[g.node_flat] = np.arange(g.node_flat.size)

    def val(offset):
        k = key + offset
        if np.any(k < 0) or np.any(k >= shape):
            raise StencilOutOfDomain("difference stencil leaves the grid box")
        flat = int(k @ g.strides)
        if g.cls[flat] != INT:
            if field.boundary is not None and g.cls[flat] != 0:
                return float(field.boundary(g.spacing * (g.lo + k)[None])[0])
            raise StencilOutOfDomain("difference stencil reaches a non-Interior node")
        return float(field.values[pos[flat]])

    if g.cls[int(key @ g.strides)] != INT:
        raise StencilOutOfDomain("Levi spectrum needs an Interior node")
    h = g.spacing
    E = np.eye(dim, dtype=np.int64)
    u0 = val(np.zeros(dim, dtype=np.int64))
    D2 = np.empty((dim, dim))
    for a in range(dim):
        D2[a, a] = (val(E[a]) - 2 * u0 + val(-E[a])) / h**2
        for b in range(a + 1, dim):
            D2[a, b] = D2[b, a] = (val(E[a] + E[b]) - val(E[a] - E[b]) - val(-E[a] + E[b])
                                   + val(-E[a] - E[b])) / (4 * h**2)
    n = g.n
    H = np.empty((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            H[j, k] = 0.25 * (D2[xj, xk] + D2[yj, yk] + 1j * (D2[xj, yk] - D2[yj, xk]))
    return np.linalg.eigvalsh(0.5 * (H + H.conj().T))
