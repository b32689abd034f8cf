"""Command line front end.

Subcommands:
  spectrum      boundary operator spectrum report
  vortex        solve the torus vortex equations / inspect a divisor
  adm-function  admissible coordinate function on the cylinder
  sw-cylinder   Seiberg-Witten solve on [-T,T] x torus
  verify        re-check a stored cylinder solution, optionally sweeping r
  run           full pipeline into an output directory
  dim           expected moduli dimension bookkeeping
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import cylinder, estimates, fieldio, harmonic, lattice, pipeline, spectrum, vortex


def _add_torus_args(p, n_default=64):
    p.add_argument("--N", type=int, default=n_default, help="sites per side")
    p.add_argument("--L", type=float, default=2.0 * np.pi, help="torus period")


def cmd_spectrum(args):
    geom = lattice.build_torus(args.L, args.L, args.N, args.N)
    rep = spectrum.spectrum_report(geom, k_max=args.k_max)
    payload = rep.to_dict()
    if args.out:
        fieldio.dump_json(args.out, payload)
    print(json.dumps({"eps0": payload["eps0"], "eps": payload["eps"],
                      "kernel_dim": payload["kernel_dim"],
                      "method": payload["method"]}, indent=2))
    return 0


def cmd_vortex_solve(args):
    geom = lattice.build_torus(args.L, args.L, args.N, args.N)
    prob = vortex.VortexProblem(geom, args.d, args.r, tol=args.tol,
                                max_iter=args.max_iter, seed=args.seed)
    sol = vortex.solve_vortex(prob)
    if args.out:
        fieldio.save_vortex_solution(args.out, sol)
    print(f"converged={sol.converged} iterations={sol.iterations} "
          f"residual={sol.final_residual:.3e}")
    if sol.message:
        print(sol.message)
    return 0 if (sol.converged or args.d < 0) else 1


def cmd_vortex_divisor(args):
    sol = fieldio.load_vortex_solution(args.input)
    try:
        div = vortex.extract_divisor(sol.gauge, sol.alpha.values, sol.problem.degree,
                                     threshold=args.threshold)
    except vortex.IndeterminateZeroError as e:
        print(f"indeterminate: {e}", file=sys.stderr)
        return 2
    for (i, j), w in div.points:
        x, y = (i + 0.5) * sol.gauge.geom.h1, (j + 0.5) * sol.gauge.geom.h2
        print(f"plaquette ({i},{j}) center ({x:.6f},{y:.6f}) multiplicity {w}")
    print(f"total={div.total} degree={div.degree} matches={div.matches_degree}")
    return 0 if div.matches_degree else 1


def cmd_adm_function(args):
    geom = lattice.build_torus(args.L, args.L, args.N, args.N)
    cyl = harmonic.CylinderGeometry(torus=geom, T=args.T, Nt=args.Nt,
                                    bump_amplitude=args.bump,
                                    bump_width=args.width)
    rep = harmonic.solve_admissible_function(cyl, tol=args.tol)
    if args.out:
        fieldio.dump_json(args.out, rep.to_dict())
    rate = rep.decay.rate if rep.decay else float("nan")
    print(f"converged={rep.converged} iterations={rep.iterations} "
          f"residual={rep.residual_sup:.3e} decay_rate={rate:.6f} "
          f"min_grad={rep.min_grad_norm:.6f}")
    return 0 if rep.converged else 1


def _solve_sw_from_args(args):
    geom = lattice.build_torus(args.L, args.L, args.N, args.N)
    cyl = harmonic.CylinderGeometry(torus=geom, T=args.T, Nt=args.Nt)
    if args.boundary:
        vsol = fieldio.load_vortex_solution(args.boundary)
        if vsol.gauge.geom.shape != geom.shape:
            raise SystemExit("boundary vortex grid does not match --N")
    else:
        vprob = vortex.VortexProblem(geom, args.d, args.r, tol=args.tol,
                                     seed=args.seed)
        vsol = vortex.solve_vortex(vprob)
        if not vsol.converged:
            raise SystemExit("vortex boundary solve did not converge")
    bdata = cylinder.boundary_from_vortex(vsol, beta_amp=args.perturb_beta,
                                          alpha_amp=args.perturb_alpha,
                                          seed=args.seed)
    prob = cylinder.SWCylinderProblem(cyl=cyl, degree=args.d, r=args.r,
                                      boundary_minus=bdata, boundary_plus=bdata,
                                      tol=args.tol, max_iter=args.max_iter)
    return cylinder.solve_sw_cylinder(prob)


def cmd_sw_cylinder(args):
    sol = _solve_sw_from_args(args)
    if args.out:
        fieldio.save_sw_state(args.out, sol.state, extra_meta={
            "seed": args.seed, "perturb_beta": args.perturb_beta,
            "perturb_alpha": args.perturb_alpha, "vortex_tol": args.tol,
            "sw_tol": args.tol, "sw_max_iter": args.max_iter,
            "converged": bool(sol.converged)})
    print(f"converged={sol.converged} iterations={sol.iterations} "
          f"residual={sol.final_residual:.3e}")
    for k, v in cylinder.sw_residual(sol.state).sup_by_block().items():
        print(f"  sup {k}: {v:.3e}")
    return 0 if sol.converged else 1


def cmd_verify(args):
    state, meta = fieldio.load_sw_state(args.input)
    res = cylinder.sw_residual(state)
    spec_rep = None
    if args.spectrum:
        with open(args.spectrum) as fh:
            spec_rep = json.load(fh)
    else:
        spec_rep = spectrum.spectrum_report(state.cyl.torus, k_max=40).to_dict()
    eps = spec_rep["eps"]
    lam_max = max(abs(v) for v in spec_rep["eigenvalues"])

    z_prime = estimates.fit_z_prime(state)
    c_beta, zeta0 = estimates.fit_beta_constants(state)
    zeta_p, zeta_pp = estimates.fit_grad_constants(state)
    z_pp_f = estimates.fit_curvature_constant(state)
    checks = [estimates.CheckResult(
        name="stored_residual", passed=res.sup <= meta.get("sw_tol", 1e-8) * 10,
        measured=res.sup, bound=meta.get("sw_tol", 1e-8) * 10).to_dict()]

    def validate(st, rv):
        for cr in (estimates.check_psi_linf(st, z_prime),
                   estimates.check_beta_pointwise(st, c_beta, zeta0),
                   estimates.check_grad_bound(st, zeta_p, zeta_pp),
                   estimates.check_curvature(st, z_pp_f)):
            d = cr.to_dict()
            d["r"] = float(rv)
            checks.append(d)

    m_pairs = [(state.r, estimates.m_value(state))]
    validate(state, state.r)

    geom = state.cyl.torus
    for rv in args.sweep:
        if abs(rv - state.r) < 1e-12:
            continue
        vprob = vortex.VortexProblem(geom, state.degree, rv,
                                     tol=meta.get("vortex_tol", 1e-8),
                                     seed=meta.get("seed", 0))
        vsol = vortex.solve_vortex(vprob)
        bdata = cylinder.boundary_from_vortex(
            vsol, beta_amp=meta.get("perturb_beta", 0.0),
            alpha_amp=meta.get("perturb_alpha", 0.0), seed=meta.get("seed", 0))
        prob = cylinder.SWCylinderProblem(
            cyl=state.cyl, degree=state.degree, r=rv,
            boundary_minus=bdata, boundary_plus=bdata,
            tol=meta.get("sw_tol", 1e-8),
            max_iter=meta.get("sw_max_iter", 400))
        ssol = cylinder.solve_sw_cylinder(prob)
        validate(ssol.state, rv)
        m_pairs.append((rv, estimates.m_value(ssol.state)))

    m_pairs.sort(key=lambda p: p[0])
    if len(m_pairs) > 1:
        checks.append(estimates.check_m_monotone(m_pairs).to_dict())

    fits = estimates.beta_decay_fits(state)
    for cr in estimates.check_decay_rates(fits, eps):
        checks.append(cr.to_dict())
    rates = [fits[e]["beta_sq"].rate for e in ("minus", "plus")]
    checks.append(estimates.check_spectral_ceiling(rates, lam_max).to_dict())

    report = {
        "input": os.path.basename(args.input),
        "meta": meta,
        "constants": {"z_prime": z_prime, "c": c_beta, "zeta0": zeta0,
                      "zeta_prime": zeta_p, "zeta_doubleprime": zeta_pp,
                      "z_doubleprime_F": z_pp_f},
        "m_table": [[float(r), float(m)] for r, m in m_pairs],
        "decay_fits": {e: {k: f.to_dict() for k, f in d.items()}
                       for e, d in fits.items()},
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
    if args.report:
        fieldio.dump_json(args.report, report)
    for c in checks:
        tag = "PASS" if c["passed"] else "FAIL"
        extra = f" r={c['r']:g}" if "r" in c else ""
        print(f"[{tag}] {c['name']}{extra}: measured={c['measured']:.6g} "
              f"bound={c['bound']:.6g}")
    print(f"all_passed={report['all_passed']}")
    return 0 if report["all_passed"] else 1


def cmd_run(args):
    out_root = args.out_root or os.environ.get("SWCYL_OUT_ROOT") or "runs/latest"
    cfg = pipeline.RunConfig(
        L=args.L, N=args.N, Nt=args.Nt, T=args.T, degree=args.d, r=args.r,
        seed=args.seed, k_max=args.k_max, bump=args.bump,
        perturb_beta=args.perturb_beta, perturb_alpha=args.perturb_alpha,
        sweep=tuple(args.sweep))
    manifest = pipeline.run_pipeline(cfg, out_root)
    print(f"wrote {out_root} ({manifest['wall_seconds']}s, "
          f"backend={manifest['backend']})")
    for s in manifest["stages"]:
        print(f"  {s['name']}: {s['seconds']}s")
    return 0


def cmd_dim(args):
    if args.table:
        print("g-,g+,g_min,d,d-,d+,dim,empty")
        for row in estimates.reference_table():
            print(f"{row['genus_minus']},{row['genus_plus']},"
                  f"{row['genus_min']},{row['degree']},{row['d_minus']},"
                  f"{row['d_plus']},{row['dim']},{row['empty']}")
        return 0
    md = estimates.moduli_dimension(args.genus_minus, args.genus_plus,
                                    args.genus_min, args.d)
    print(json.dumps(md.to_dict(), indent=2))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="swcyl", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="boundary operator spectrum")
    _add_torus_args(p, n_default=32)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--out", default=None, help="write full report JSON here")
    p.set_defaults(fn=cmd_spectrum)

    pv = sub.add_parser("vortex", help="torus vortex equations")
    vsub = pv.add_subparsers(dest="vcommand", required=True)
    p = vsub.add_parser("solve")
    _add_torus_args(p)
    p.add_argument("--d", type=int, default=2, help="line bundle degree")
    p.add_argument("--r", type=float, default=10.0, help="coupling")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="field dump path")
    p.set_defaults(fn=cmd_vortex_solve)
    p = vsub.add_parser("divisor")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--threshold", type=float, default=0.1)
    p.set_defaults(fn=cmd_vortex_divisor)

    p = sub.add_parser("adm-function", help="admissible coordinate function")
    _add_torus_args(p, n_default=48)
    p.add_argument("--Nt", type=int, default=128)
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--bump", type=float, default=0.2)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_adm_function)

    p = sub.add_parser("sw-cylinder", help="Seiberg-Witten cylinder solve")
    _add_torus_args(p, n_default=48)
    p.add_argument("--Nt", type=int, default=128)
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--r", type=float, default=10.0)
    p.add_argument("--perturb-beta", type=float, default=0.0)
    p.add_argument("--perturb-alpha", type=float, default=0.0)
    p.add_argument("--boundary", default=None,
                   help="vortex field dump to take boundary data from")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sw_cylinder)

    p = sub.add_parser("verify", help="re-check a stored cylinder solution")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--spectrum", default=None,
                   help="spectrum report JSON (recomputed when omitted)")
    p.add_argument("--sweep", type=lambda s: [float(v) for v in s.split(",")],
                   default=[], help="comma separated coupling values")
    p.add_argument("--report", default=None, help="write checks JSON here")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("run", help="full pipeline")
    _add_torus_args(p, n_default=48)
    p.add_argument("--Nt", type=int, default=128)
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--r", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-max", type=int, default=40)
    p.add_argument("--bump", type=float, default=0.2)
    p.add_argument("--perturb-beta", type=float, default=1e-2)
    p.add_argument("--perturb-alpha", type=float, default=0.0)
    p.add_argument("--sweep", type=lambda s: [float(v) for v in s.split(",")],
                   default=[])
    p.add_argument("--out-root", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("dim", help="moduli dimension bookkeeping")
    p.add_argument("--genus-minus", type=int, default=1)
    p.add_argument("--genus-plus", type=int, default=1)
    p.add_argument("--genus-min", type=int, default=1)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--table", action="store_true",
                   help="print a reference table instead")
    p.set_defaults(fn=cmd_dim)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
