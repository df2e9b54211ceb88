"""The twelve acceptance criteria, each at its stated tolerance.

Every test prints one ``CRITERION k [PASS|FAIL]`` line; the lines are
repeated in the terminal summary.
"""
import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from bremermann import (
    BarrierCertificate,
    DomainSpec,
    EnvelopeConfig,
    GrowthProfile,
    build_exhaustion,
    build_grid,
    continuity_certificate,
    continuous_solution,
    defining_function,
    discrete_levi_spectrum,
    growth_profile,
    harmonic_solution,
    maximal_solution,
    normalize_domain,
    pb_properties_suite,
    pluriharmonic_sandwich,
    psh_envelope,
    q_bremermann_check,
    q_psh_envelope,
    slice_max_check,
)
from bremermann.envelope import sweep_residual
from bremermann.unbounded import barrier_value

DISC = DomainSpec("ball", 1, {"center": [0, 0], "radius": 1.0})
BALL = DomainSpec("ball", 2, {"center": [0, 0, 0, 0], "radius": 1.0})


def re_z(X):
    return X[:, 0]


def abs_z1_sq(X):
    return X[:, 0] ** 2 + X[:, 1] ** 2


@pytest.fixture(scope="module")
def ball_run():
    """C^2 unit ball at spacing 0.1 with trace |z1|^2 (shared by criteria 2, 4, 9, 10)."""
    t0 = time.perf_counter()
    g = build_grid(BALL, np.tile([-1.2, 1.2], (4, 1)), 0.1)
    phi = psh_envelope(g, abs_z1_sq)
    return g, phi, time.perf_counter() - t0


@pytest.fixture(scope="module")
def paraboloid_run():
    """Maximal solution on the normalized C^2 paraboloid, trace 1/(1+|z|^2), nu_max = 4."""
    dom = normalize_domain(DomainSpec("paraboloid", 2, {"scale": 1.0}))
    plan = build_exhaustion(dom, nu_max=4, slab_step=1.0)

    def h(X):
        return 1.0 / (1.0 + np.sum(np.atleast_2d(X) ** 2, axis=1))

    # 0.5 * (lower bound of h over the largest ball): admissible constant
    m0 = 0.5 / (1.0 + plan.c[-1] ** 2)
    big = plan.c[-1] ** 2 + 1.0
    competitors = [
        lambda X: np.zeros(np.atleast_2d(X).shape[0]),
        lambda X: np.full(np.atleast_2d(X).shape[0], m0),
        lambda X: -np.atleast_2d(X)[:, 0],
        lambda X: 0.01 * (np.sum(np.atleast_2d(X) ** 2, axis=1) - big),
        lambda X: np.maximum(m0 - 0.05 * np.atleast_2d(X)[:, 0], 0.3 * m0),
    ]
    phi = maximal_solution(dom, h, plan, spacing=0.25, competitors=competitors)
    return dom, plan, h, phi


def test_criterion_01_disc_harmonic_oracle(criterion):
    t0 = time.perf_counter()
    g = build_grid(DISC, [[-1.2, 1.2], [-1.2, 1.2]], 0.0125)
    phi = psh_envelope(g, re_z)
    elapsed = time.perf_counter() - t0
    eta = harmonic_solution(g, re_z)
    err = phi.sup_norm(eta)
    ok = err <= 1e-2 and elapsed < 60 and g.shape == (193, 193)
    criterion(1, "C1 disc psh envelope vs harmonic solution", ok,
              f"sup diff {err:.2e} <= 1e-2, envelope time {elapsed:.1f}s < 60s, box {g.shape}")
    assert ok


def test_criterion_02_ball_exact_solution(criterion, ball_run):
    g, phi, elapsed = ball_run
    exact = abs_z1_sq(g.node_points)
    err = phi.sup_norm(exact)
    from bremermann import ScalarField

    cand = ScalarField.from_function(g, abs_z1_sq)
    sweep = sweep_residual(cand)
    # multilinear interpolation of x^2 + y^2 errs by at most h^2/2; the 16-point rule is exact
    bound = g.spacing**2 / 2
    ok = err <= 5e-2 and sweep <= 2 * bound and elapsed < 600
    criterion(2, "C2 ball envelope of |z1|^2", ok,
              f"sup err {err:.2e} <= 5e-2, sweep change {sweep:.2e} <= 2*{bound:.2e}, "
              f"{g.n_interior} interior nodes, {elapsed:.0f}s < 600s")
    assert ok


def test_criterion_03_envelope_properties(criterion):
    g = build_grid(DISC, [[-1.2, 1.2], [-1.2, 1.2]], 0.05)

    def h1(X):
        return X[:, 0] + 1.0

    def h2(X):
        return h1(X) + 0.3 * np.sin(np.arctan2(X[:, 1], X[:, 0])) ** 2

    rep = pb_properties_suite(g, h1, h2, 3.0)
    t = 2 * rep["tol_iter"]
    iv = rep["iv"]
    ok = all(rep[k]["residual"] <= t for k in ("i", "ii", "iii")) and iv["pass"]
    criterion(3, "shift / monotonicity / maximum / continuity suite", ok,
              f"(i) {rep['i']['residual']:.1e} (ii) {rep['ii']['residual']:.1e} "
              f"(iii) {rep['iii']['residual']:.1e} <= {t:.1e}; (iv) {json.dumps(iv, sort_keys=True)}")
    assert ok


def test_criterion_04_slice_maximum(criterion, ball_run):
    g, phi, _ = ball_run
    cuts = [([1, 0, 0, 0], 0.3), ([0, 0, 0, 1], 0.5), ([1, 1, 0, 0], 0.4)]
    reps = [slice_max_check(phi, hyperplane=c, tol=1e-3) for c in cuts]
    worst = max(r["excess"] for r in reps)
    ok = all(r["pass"] for r in reps)
    criterion(4, "slice maximum principle on three cuts", ok, f"worst excess {worst:.2e} <= 1e-3")
    assert ok


def test_criterion_05_exhaustion(criterion, paraboloid_run):
    _, plan, _, phi = paraboloid_run
    rep = phi.meta["report"]
    rise = max(rep["monotone_rise"])
    ba = rep["boundary_agreement"]
    agree = max(b["residual"] for b in ba)
    ok = rise <= 1e-6 and agree <= 1e-2 and plan.nu_max == 4 and all(b["nodes"] > 0 for b in ba)
    criterion(5, "exhaustion monotonicity and boundary agreement", ok,
              f"max rise {rise:.1e} <= 1e-6, boundary residual {agree:.1e} <= 1e-2 over "
              f"{sum(b['nodes'] for b in ba)} shared nodes ({sum(b['moved'] for b in ba)} shifted sites, "
              f"max {max(b['moved_residual'] for b in ba):.1e})")
    assert ok


def test_criterion_06_maximality(criterion, paraboloid_run):
    *_, phi = paraboloid_run
    comps = phi.meta["report"]["competitors"]
    ok = len(comps) == 5 and all(c["admissible"] for c in comps) and all(c["max_excess"] <= 1e-6 for c in comps)
    criterion(6, "domination of five admissible competitors", ok,
              "excess " + ", ".join(f"{c['max_excess']:.1e}" for c in comps) + " <= 1e-6")
    assert ok


def _replays(cert):
    again = BarrierCertificate.from_dict(json.loads(cert.to_json()))
    checks, same = again.replay()
    return same and checks == cert.checks


def _certificates(paraboloid_run):
    dom, plan, h, phi = paraboloid_run
    # bounded trace: the grid profile, continued by the bound sup h = 1
    grid = phi.grid
    xs0 = np.linspace(0.25, plan.c_prime[-1], 12)
    prof = growth_profile(grid, h, xs0)
    tail = np.linspace(plan.c_prime[-1] + 1, 1000.0, 52)
    bounded = GrowthProfile(np.concatenate([xs0, tail]), np.concatenate([prof.g, np.ones_like(tail)]))
    lin = continuity_certificate(dom, bounded, "linear", 0.1, [1.0, 0, 0, 0])
    xs = np.geomspace(1.0, 1e5, 64)
    par1 = normalize_domain(DomainSpec("paraboloid", 1, {"scale": 1.0}))
    poly = continuity_certificate(par1, GrowthProfile.from_function(xs, lambda x: x**2), "polynomial", 0.1,
                                  [1.0, 0.0], {"m": 2, "a": 1.0, "alpha": 2.0})
    strip = normalize_domain(DomainSpec("strip_convex", 1, {}))
    xe = np.linspace(1.0, 200.0, 64)
    expo = continuity_certificate(strip, GrowthProfile.from_function(xe, lambda x: np.exp(2 * x)), "exponential",
                                  0.1, [1.0, 0.0], {"a": 1.0, "alpha": 0.9})
    return lin, poly, expo


def test_criterion_07_continuity_certificates(criterion, paraboloid_run):
    lin, poly, expo = _certificates(paraboloid_run)
    ok = (lin.granted and poly.granted and all(poly.checks.values())
          and poly.details["laplacian_min"] >= -1e-10
          and not expo.granted and not expo.checks["growth_domination_ok"]
          and all(_replays(c) for c in (lin, poly, expo)))
    criterion(7, "linear granted, polynomial granted, exponential rejected, all replayable", ok,
              f"linear {lin.granted}, polynomial {poly.granted} (min lap {poly.details['laplacian_min']:.1e}), "
              f"exponential {expo.granted}")
    assert ok


def test_criterion_08_barrier_anchors(criterion, paraboloid_run):
    lin, poly, expo = _certificates(paraboloid_run)
    r = [float(barrier_value(c.kind, c.params, c.eps, np.array([c.z0]))[0]) for c in (lin, poly, expo)]
    flipped = any("R(z0)=0.0" in n for n in expo.notes)
    ok = r[0] == -lin.eps and abs(r[1] + poly.eps) <= 1e-12 and abs(r[2] + expo.eps) <= 1e-12 and flipped
    criterion(8, "barrier values at z0", ok,
              f"linear {r[0]!r}, polynomial {r[1] + poly.eps:.1e}, exponential {r[2] + expo.eps:.1e}; "
              f"opposite-sign constant documented: {flipped}")
    assert ok


def test_criterion_09_sandwich(criterion, ball_run):
    g, _, _ = ball_run
    rep = pluriharmonic_sandwich(g, abs_z1_sq)
    lin = pluriharmonic_sandwich(g, lambda X: X[:, 0])
    ok = (rep.order_phi_eta <= 1e-6 and rep.order_eta_chi <= 1e-6 and abs(rep.center_gap - 1) <= 5e-2
          and lin.pluriharmonic and lin.max_gap <= 1e-2)
    criterion(9, "pluriharmonic sandwich", ok,
              f"phi-eta {rep.order_phi_eta:.1e}, eta-chi {rep.order_eta_chi:.1e}, centre gap {rep.center_gap:.4f}; "
              f"Re z1 gap {lin.max_gap:.1e}")
    assert ok


def test_criterion_10_q_suite(criterion, ball_run):
    g, phi0, _ = ball_run
    phi1 = q_psh_envelope(g, abs_z1_sq, 1)
    mono = float(np.max(phi0.values - phi1.values))
    rep = q_bremermann_check(phi0, 0)
    from bremermann import ScalarField

    fine = build_grid(BALL, np.tile([-1.2, 1.2], (4, 1)), 0.1)
    z = np.array([0.2, 0.1, -0.1, 0.2])
    targets = {
        "|z1|^2": (abs_z1_sq, (0.0, 1.0)),
        "Re z1^2": (lambda X: X[:, 0] ** 2 - X[:, 1] ** 2, (0.0, 0.0)),
        "|z|^2": (lambda X: np.sum(X**2, axis=1), (1.0, 1.0)),
    }
    errs = {}
    for name, (fn, ev) in targets.items():
        lam = discrete_levi_spectrum(ScalarField.from_function(fine, fn), z)
        errs[name] = float(np.max(np.abs(lam - np.array(ev))))
    lev_ok = all(e <= 5 * fine.spacing**2 for e in errs.values())
    ok = mono <= 1e-6 and rep["pass"] and lev_ok
    criterion(10, "q-monotonicity, 0-Bremermann envelope, Levi spectra", ok,
              f"max(phi_q0 - phi_q1) {mono:.1e} <= 1e-6, q-check {rep['pass']}, Levi errors "
              + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def test_criterion_11_continuous_solution(criterion):
    half = DomainSpec("halfspace", 1, {"normal": [1, 0], "offset": 0.0})
    g = build_grid(half, [[-0.1, 4.2], [-2.6, 2.6]], 0.05)
    u = continuous_solution(g, 1.0)
    R = u.meta["patch_radius"]
    bres = float(np.max(np.abs(u.on_boundary - 1.0)))
    bp = g.boundary_points
    X = g.interior_points
    depth = np.min(np.linalg.norm(X[:, None, :] - bp[None, :, :], axis=2), axis=1)
    deep = depth > 2 * R
    worst = float(np.max(u.interior[deep] - 1.0)) if deep.any() else math.inf
    phi = defining_function(g)
    ok = bres <= 1e-2 and deep.any() and worst < -1e-4 and phi.interior.max() < 0
    criterion(11, "continuous solution and defining function on a truncated halfplane", ok,
              f"boundary residual {bres:.1e}, max(u-1) deeper than 2R={2 * R:.2f}: {worst:.3f} "
              f"({int(deep.sum())} nodes), max phi {phi.interior.max():.3f}")
    assert ok


def _cli_run(tmp, name, doc, workers):
    path = os.path.join(tmp, f"{name}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    out = os.path.join(tmp, f"{name}_w{workers}")
    env = dict(os.environ, NUMBA_NUM_THREADS=str(workers))
    cmd = [sys.executable, "-m", "bremermann.cli", "solve-bounded", "--manifest", path, "--out", out,
           "--workers", str(workers)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, timeout=1800)
    assert res.returncode == 0, res.stderr
    with open(os.path.join(out, "phi.csv"), "rb") as fh:
        return fh.read()


def test_criterion_12_determinism(criterion, tmp_path):
    runs = {
        "disc": {"command": "solve-bounded", "domain": DISC.to_dict(), "trace_expr": "re(z1)",
                 "spacing": 0.0125, "box": [[-1.2, 1.2]] * 2},
        "ball": {"command": "solve-bounded", "domain": BALL.to_dict(), "trace_expr": "x1^2 + y1^2",
                 "spacing": 0.1, "box": [[-1.2, 1.2]] * 4},
    }
    same = {}
    for name, doc in runs.items():
        a = _cli_run(str(tmp_path), name, doc, 1)
        b = _cli_run(str(tmp_path), name, doc, 8)
        same[name] = a == b and len(a) > 0
    ok = all(same.values())
    criterion(12, "byte-identical field CSVs with 1 and 8 workers", ok,
              ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok
