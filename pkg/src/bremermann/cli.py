"""Command line driver: ``bremermann <subcommand> --manifest run.json``.

Exit status 0 on success, 2 when a continuity certificate is rejected and 1
on any error.  Every output directory receives the resolved manifest.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import _accel
from .analysis import pluriharmonic_sandwich, q_bremermann_check
from .envelope import harmonic_solution, pb_properties_suite, psh_envelope, psh_test, q_psh_envelope
from .errors import BremermannError, ManifestError, NegativeTrace
from .expr import parse_trace_expr
from .geometry import build_exhaustion, build_grid, lupacciolu_check, normalize_domain
from .manifest import COMMANDS, RunManifest
from .unbounded import (
    GrowthProfile,
    continuity_certificate,
    continuous_solution,
    exhaustion_grid,
    growth_profile,
    maximal_solution,
)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _say(stage, msg):
    print(f"[{stage}] {msg}", flush=True)


def _box(m, domain, h):
    if m.box is not None:
        return np.asarray(m.box, dtype=float)
    if not domain.bounded:
        raise ManifestError("unbounded domain: the manifest needs an explicit 'box'")
    c = build_exhaustion(domain).c[0]
    return np.tile([-c - 2 * h, c + 2 * h], (2 * domain.n, 1))


def _grid(m):
    domain = m.domain_spec()
    return build_grid(domain, _box(m, domain, m.spacing), m.spacing)


def _fields_summary(f):
    keep = ("kind", "method", "policy_iterations", "sweeps", "residual", "subsolution_defect", "tol_iter")
    return {k: f.meta[k] for k in keep if k in f.meta}


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve_bounded(m, out):
    grid = _grid(m)
    cfg = m.envelope_config()
    h = parse_trace_expr(m.trace_expr, grid.n)
    _say("grid", f"{grid.n_interior} interior, {grid.n_boundary} boundary nodes")
    phi = psh_envelope(grid, h, cfg)
    phi.to_csv(os.path.join(out, "phi.csv"))
    eta = harmonic_solution(grid, h, cfg.with_(tol_iter=phi.meta["tol_iter"]))
    test = psh_test(phi, cfg)
    report = {
        "solve": _fields_summary(phi),
        "psh_test": test,
        "harmonic_oracle": {
            "max_phi_minus_eta": float(np.max(phi.values - eta.values)),
            "sup_gap": phi.sup_norm(eta),
            "note": "in C^1 the envelope is the harmonic solution; in C^n it lies below it",
        },
        "nodes": {"interior": grid.n_interior, "boundary": grid.n_boundary, "truncated": grid.truncated},
    }
    _write_json(os.path.join(out, "report.json"), report)
    _say("solve", f"residual {phi.meta['residual']:.3e}, harmonic gap {report['harmonic_oracle']['sup_gap']:.3e}")
    return 0


def _normalized(m):
    dom = m.domain_spec()
    norm = normalize_domain(dom)
    plan = build_exhaustion(norm, nu_max=int(m.plan.get("nu_max", 6)),
                            slab_step=float(m.plan.get("slab_step", 1.0)),
                            scan_spacing=m.plan.get("scan_spacing"))
    return norm, plan


def _unbounded_trace(m, norm):
    """Trace written in the original coordinates, evaluated on normalized points."""
    h = parse_trace_expr(m.trace_expr, norm.n)
    return lambda X: h(norm.to_original(np.atleast_2d(X)))


def cmd_solve_unbounded(m, out):
    norm, plan = _normalized(m)
    _say("plan", f"nu_max={plan.nu_max}, c'={list(plan.c_prime)}")
    h = _unbounded_trace(m, norm)
    phi = maximal_solution(norm, h, plan, m.envelope_config(), spacing=m.spacing)
    for f in phi.meta["levels"]:
        f.to_csv(os.path.join(out, f"phi_nu{f.meta['nu']}.csv"))
        _say("level", f"nu={f.meta['nu']}: {f.grid.n_interior} interior nodes, caps {len(f.meta['caps'])}")
    phi.to_csv(os.path.join(out, "phi.csv"))
    report = dict(phi.meta["report"])
    report["plan"] = plan.to_dict()
    report["levels_detail"] = [{"nu": f.meta["nu"], "caps": f.meta["caps"], "slab_bound": f.meta["slab_bound"],
                                "bound_excess": f.meta["bound_excess"]} for f in phi.meta["levels"]]
    report["modeling_note"] = "the capped-extension limit is taken as the supremum over all extensions"
    _write_json(os.path.join(out, "convergence.json"), report)
    _say("maximal", f"level residual {report['level_residual']:.3e}, monotone {report['monotone_ok']}")
    return 0


def cmd_continuous(m, out):
    grid = _grid(m)
    h = parse_trace_expr(m.trace_expr, grid.n)
    vals = h(grid.boundary_points)
    if np.any(vals < 0):
        raise NegativeTrace("trace is negative on a Boundary node")
    u = continuous_solution(grid, h, m.patch_radius, m.envelope_config())
    u.to_csv(os.path.join(out, "u.csv"))
    keep = ("patch_radius", "patches", "sphere_levels", "psh_defect", "psh_ok", "boundary_residual",
            "min_value", "tol")
    _write_json(os.path.join(out, "report.json"), {k: u.meta[k] for k in keep})
    _say("patches", f"{u.meta['patches']} patches of radius {u.meta['patch_radius']}, psh defect "
                    f"{u.meta['psh_defect']:.3e}")
    return 0


def _profile(m, norm, h):
    cert = m.certificate
    if "growth_expr" in cert:
        g = parse_trace_expr(cert["growth_expr"], 1)
        xs = np.asarray(cert.get("xs") or np.linspace(1.0, 100.0, 64).tolist(), dtype=float)
        return GrowthProfile.from_function(xs, lambda x: g(np.stack([x, np.zeros_like(x)], axis=1)))
    plan = build_exhaustion(norm, nu_max=int(m.plan.get("nu_max", 3)),
                            slab_step=float(m.plan.get("slab_step", 1.0)))
    grid = exhaustion_grid(norm, plan, plan.nu_max, m.spacing)
    xs = cert.get("xs") or np.linspace(0.0, plan.c_prime[-1], 32).tolist()
    return growth_profile(grid, h, xs)


def cmd_certify(m, out):
    dom = m.domain_spec()
    norm = normalize_domain(dom)
    h = _unbounded_trace(m, norm)
    cert = m.certificate
    prof = _profile(m, norm, h)
    c = continuity_certificate(norm, prof, cert.get("kind", "linear"), float(cert.get("eps", 0.1)),
                               cert.get("z0", [1.0] + [0.0] * (2 * dom.n - 1)), cert.get("params", {}))
    with open(os.path.join(out, "certificate.json"), "w", encoding="utf-8") as fh:
        fh.write(c.to_json() + "\n")
    _say("certificate", f"{c.kind}: {'granted' if c.granted else 'rejected'} {c.checks}")
    return 0 if c.granted else 2


def cmd_lupacciolu(m, out):
    dom = m.domain_spec()
    terms = m.lupacciolu.get("terms")
    if not terms:
        raise ManifestError("check-lupacciolu needs lupacciolu.terms")
    rep = lupacciolu_check(terms, dom, sample_points=int(m.lupacciolu.get("sample_points", 256)))
    _write_json(os.path.join(out, "lupacciolu.json"), rep)
    _say("lupacciolu", f"holds={rep['holds']}, worst margin {rep['worst_margin']:.3e}")
    return 0


def cmd_sandwich(m, out):
    grid = _grid(m)
    h = parse_trace_expr(m.trace_expr, grid.n)
    rep = pluriharmonic_sandwich(grid, h, m.envelope_config())
    for name in ("phi", "eta", "chi"):
        getattr(rep, name).to_csv(os.path.join(out, f"{name}.csv"))
    _write_json(os.path.join(out, "sandwich.json"), rep.to_dict())
    _say("sandwich", f"max gap {rep.max_gap:.3e}, pluriharmonic={rep.pluriharmonic}")
    return 0


def cmd_properties(m, out):
    grid = _grid(m)
    h1 = parse_trace_expr(m.trace_expr, grid.n)
    h2 = parse_trace_expr(m.properties.get("h2_expr", m.trace_expr), grid.n)
    rep = pb_properties_suite(grid, h1, h2, float(m.properties.get("c", 1.0)), m.envelope_config())
    _write_json(os.path.join(out, "properties.json"), rep)
    _say("properties", f"pass={rep['pass']}")
    return 0


def cmd_qsolve(m, out):
    grid = _grid(m)
    h = parse_trace_expr(m.trace_expr, grid.n)
    cfg = m.envelope_config()
    u = q_psh_envelope(grid, h, m.q, cfg)
    u.to_csv(os.path.join(out, f"u_q{m.q}.csv"))
    rep = q_bremermann_check(u, m.q, cfg)
    rep["solve"] = _fields_summary(u)
    _write_json(os.path.join(out, "qcheck.json"), rep)
    _say("qsolve", f"q={m.q}: is_q_psh={rep['is_q_psh']}, is_nq1_psuperh={rep['is_nq1_psuperh']}")
    return 0


HANDLERS = {
    "solve-bounded": cmd_solve_bounded,
    "solve-unbounded": cmd_solve_unbounded,
    "continuous-solution": cmd_continuous,
    "certify-continuity": cmd_certify,
    "check-lupacciolu": cmd_lupacciolu,
    "sandwich": cmd_sandwich,
    "properties": cmd_properties,
    "qsolve": cmd_qsolve,
}


def build_parser():
    p = argparse.ArgumentParser(prog="bremermann", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--manifest", required=True, help="run manifest (JSON)")
        s.add_argument("--out", help="output directory (overrides output_dir)")
        s.add_argument("--spacing", type=float)
        s.add_argument("--tol", type=float, help="iteration tolerance")
        s.add_argument("--nu-max", type=int, dest="nu_max")
        s.add_argument("--q", type=int)
        s.add_argument("--workers", type=int)
    return p


def resolve(args):
    """Manifest with command line overrides applied."""
    with open(args.manifest, encoding="utf-8") as fh:
        text = fh.read()
    doc = RunManifest.from_json(text).to_dict()
    if doc["command"] != args.command:
        raise ManifestError(f"manifest command {doc['command']!r} does not match {args.command!r}")
    if args.out:
        doc["output_dir"] = args.out
    if args.spacing is not None:
        doc["spacing"] = args.spacing
    if args.tol is not None:
        doc["cfg"] = dict(doc["cfg"], tol_iter=args.tol)
    if args.nu_max is not None:
        doc["plan"] = dict(doc["plan"], nu_max=args.nu_max)
    if args.q is not None:
        doc["q"] = args.q
    if args.workers is not None:
        doc["workers"] = args.workers
    return RunManifest.from_dict(doc)


def run(manifest):
    out = manifest.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    _accel.set_workers(manifest.workers)
    return HANDLERS[manifest.command](manifest, out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        manifest = resolve(args)
        return run(manifest)
    except BremermannError as err:
        print(f"error: {err.name}: {err}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
