"""Config-driven experiment runs.

A run is described by a JSON document with sections geometry / spectrum /
vortex / sw / verify / seeds / output plus a stage list; load_config fills
every default explicitly and rejects unknown keys, so the effective config
echoed into the manifest is complete.  Stages execute in the fixed order
spectrum -> vortex -> sw -> verify; a stage failure stops the run but leaves
the completed outputs and the manifest behind.

Everything derived from the config is deterministic (fixed seeds, fixed
iteration order), so rerunning an identical config reproduces bit-identical
field dumps and reports.  Wall-clock timings live only in the manifest.
"""

import copy
import os
import time

import numpy as np

from . import cylinder, estimates, fieldio, harmonic, lattice, spectrum, vortex
from ._backend import BACKEND

VERSION = "0.1.0"

STAGE_ORDER = ("spectrum", "vortex", "sw", "verify")

DEFAULT_CONFIG = {
    "stages": ["spectrum", "vortex", "sw", "verify"],
    "geometry": {"L1": 2.0 * np.pi, "L2": 2.0 * np.pi, "N": 48,
                 "Nt": 128, "T": 8.0},
    "spectrum": {"kmax": 40},
    "vortex": {"d": 2, "r": 10.0, "tol": 1e-8, "max_iter": 500},
    "sw": {"perturb_beta": 1e-2, "perturb_alpha": 0.0, "tol": 1e-8,
           "max_iter": 400},
    "verify": {"sweep": []},
    "seeds": {"vortex": 0, "boundary": 0},
    "output": {"root": ""},
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _merge(dst, src, path):
    for key, val in src.items():
        here = f"{path}.{key}" if path else key
        if key not in dst:
            raise ConfigError(f"unknown config key '{here}'")
        cur = dst[key]
        if isinstance(cur, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{here}' must be an object")
            _merge(cur, val, here)
        elif isinstance(cur, list):
            if not isinstance(val, list):
                raise ConfigError(f"'{here}' must be a list")
            dst[key] = list(val)
        elif isinstance(cur, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"'{here}' must be a boolean")
            dst[key] = val
        elif isinstance(cur, str):
            if not isinstance(val, str):
                raise ConfigError(f"'{here}' must be a string")
            dst[key] = val
        elif isinstance(cur, int) and not isinstance(cur, bool):
            if isinstance(val, bool) or int(val) != val:
                raise ConfigError(f"'{here}' must be an integer")
            dst[key] = int(val)
        else:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"'{here}' must be a number")
            dst[key] = float(val)


def load_config(doc=None):
    """Effective config: defaults overlaid with doc, schema checked."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    _merge(cfg, doc or {}, "")
    bad = [s for s in cfg["stages"] if s not in STAGE_ORDER]
    if bad:
        raise ConfigError(f"unknown stages {bad}; valid: {list(STAGE_ORDER)}")
    cfg["stages"] = [s for s in STAGE_ORDER if s in cfg["stages"]]
    have = set(cfg["stages"])
    if "sw" in have and "vortex" not in have:
        raise ConfigError("the sw stage needs the vortex stage for boundary data")
    if "verify" in have and not {"spectrum", "sw"} <= have:
        raise ConfigError("the verify stage needs the spectrum and sw stages")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
               for v in cfg["verify"]["sweep"]):
        raise ConfigError("'verify.sweep' must be a list of couplings")
    cfg["verify"]["sweep"] = sorted(float(v) for v in cfg["verify"]["sweep"])
    return cfg


def torus_of(cfg):
    g = cfg["geometry"]
    return lattice.build_torus(g["L1"], g["L2"], g["N"], g["N"])


def cylinder_of(cfg):
    g = cfg["geometry"]
    return harmonic.CylinderGeometry(torus=torus_of(cfg), T=g["T"],
                                     Nt=g["Nt"])


def solve_vortex_stage(cfg, r=None):
    v = cfg["vortex"]
    prob = vortex.VortexProblem(
        torus_of(cfg), v["d"], v["r"] if r is None else r,
        tol=v["tol"], max_iter=v["max_iter"], seed=cfg["seeds"]["vortex"])
    return vortex.solve_vortex(prob)


def solve_sw_stage(cfg, vsol, r=None):
    s = cfg["sw"]
    bdata = cylinder.boundary_from_vortex(
        vsol, beta_amp=s["perturb_beta"], alpha_amp=s["perturb_alpha"],
        seed=cfg["seeds"]["boundary"])
    prob = cylinder.SWCylinderProblem(
        cyl=cylinder_of(cfg), degree=cfg["vortex"]["d"],
        r=cfg["vortex"]["r"] if r is None else r,
        boundary_minus=bdata, boundary_plus=bdata,
        tol=s["tol"], max_iter=s["max_iter"])
    # the tiled vortex concentrates the initial residual at the boundary
    # layers, which is where the perturbation response lives
    return cylinder.solve_sw_cylinder(
        prob, x0_state=cylinder.pullback_state(cylinder_of(cfg), vsol))


def _sol_summary(r, sol):
    return {
        "r": float(r),
        "converged": bool(sol.converged),
        "iterations": int(sol.iterations),
        "final_residual": float(sol.final_residual),
        "residual_by_block": cylinder.sw_residual(sol.state).sup_by_block(),
        "message": sol.message,
    }


def build_checks(cfg, spec_rep, vsol, sols):
    """checks.json payload: vortex checks, frozen-constant estimate checks
    across the sweep, decay fits, and the moduli table."""
    eps0 = spec_rep["eps0"]
    eps = spec_rep["eps"]
    lam_max = max(abs(v) for v in spec_rep["eigenvalues"])
    d = cfg["vortex"]["d"]

    checks = []
    try:
        div = vortex.extract_divisor(vsol.gauge, vsol.alpha.values, d)
        div_dict = {"points": div.points, "total": div.total,
                    "matches_degree": div.matches_degree}
        div_ok, div_total = div.matches_degree, div.total
    except vortex.IndeterminateZeroError as e:
        div_dict = {"error": str(e)}
        div_ok, div_total = False, None
    checks.append(estimates.CheckResult(
        name="vortex_divisor_total", passed=bool(div_ok),
        measured=float("nan") if div_total is None else div_total, bound=d,
        lemma="total divisor multiplicity equals the degree").to_dict())
    alpha_sup_sq = float(np.max(np.abs(vsol.alpha.values) ** 2))
    checks.append(estimates.CheckResult(
        name="vortex_alpha_bound", passed=alpha_sup_sq <= 1.0 + 1e-3,
        measured=alpha_sup_sq, bound=1.0 + 1e-3,
        lemma="sup |alpha|^2 <= 1 + tol_disc on the flat torus").to_dict())

    # constants frozen at the smallest coupling
    sols = sorted(sols, key=lambda p: p[0])
    base_state = sols[0][1].state
    z_prime = estimates.fit_z_prime(base_state)
    c_beta, zeta0 = estimates.fit_beta_constants(base_state)
    zeta_p, zeta_pp = estimates.fit_grad_constants(base_state)
    z_pp_f = estimates.fit_curvature_constant(base_state, df_sup=1.0)
    constants = {"z_prime": z_prime, "c": c_beta, "zeta0": zeta0,
                 "zeta_prime": zeta_p, "zeta_doubleprime": zeta_pp,
                 "z_doubleprime_F": z_pp_f, "df_sup_product": 1.0,
                 "fitted_at_r": float(sols[0][0])}

    m_pairs = []
    b_pairs = []
    fits_by_r = {}
    for rv, sol in sols:
        st = sol.state
        for cr in (estimates.check_psi_linf(st, z_prime),
                   estimates.check_beta_pointwise(st, c_beta, zeta0),
                   estimates.check_grad_bound(st, zeta_p, zeta_pp),
                   estimates.check_curvature(st, z_pp_f, df_sup=1.0)):
            row = cr.to_dict()
            row["r"] = float(rv)
            checks.append(row)
        m_pairs.append((rv, estimates.m_value(st)))
        b_pairs.append((rv, estimates.beta_sup_sq_core(st)))
        fits_by_r[rv] = estimates.beta_decay_fits(st)
    if len(sols) > 1:
        checks.append(estimates.check_m_monotone(m_pairs).to_dict())
        checks.append(estimates.check_beta_sup_scaling(b_pairs).to_dict())

    rates = []
    for rv, fits in sorted(fits_by_r.items()):
        for cr in estimates.check_decay_rates(fits, eps):
            row = cr.to_dict()
            row["r"] = float(rv)
            checks.append(row)
        rates += [fits[e]["beta_sq"].rate for e in ("minus", "plus")]
    checks.append(estimates.check_spectral_ceiling(rates, lam_max).to_dict())

    base_r = float(sols[0][0])
    return {
        "config": cfg,
        "config_hash": fieldio.config_hash(cfg),
        "backend": BACKEND,
        "version": VERSION,
        "eps0": eps0,
        "eps": eps,
        "vortex": {
            "converged": bool(vsol.converged),
            "iterations": int(vsol.iterations),
            "final_residual": float(vsol.final_residual),
            "bradlow_defect": vortex.bradlow_defect(vsol),
            "alpha_sup_sq": alpha_sup_sq,
            "divisor": div_dict,
        },
        "cylinder": {
            "base": _sol_summary(base_r, sols[0][1]),
            "sweep": [_sol_summary(rv, s) for rv, s in sols[1:]],
        },
        "estimates": {
            "constants": constants,
            "m_table": [[float(r), float(m)] for r, m in m_pairs],
            "beta_sup_table": [[float(r), float(b)] for r, b in b_pairs],
            "decay_fits": {f"r={rv:g}": {e: {k: f.to_dict()
                                             for k, f in byend.items()}
                                         for e, byend in fits.items()}
                           for rv, fits in sorted(fits_by_r.items())},
        },
        "moduli_table": estimates.reference_table(),
        "checks": checks,
        "all_passed": all(c["pass"] for c in checks),
    }


def emit_report(out_root, report):
    """Write the checks report; the decay CSVs are emitted beside each solve."""
    p = os.path.join(out_root, "checks.json")
    fieldio.dump_json(p, report)
    return {"checks.json": p}


def run_pipeline(cfg, out_root=None):
    """Execute the configured stages; returns the manifest dict."""
    cfg = load_config(cfg) if not _is_loaded(cfg) else cfg
    out_root = (out_root or cfg["output"]["root"]
                or os.environ.get("SWCYL_OUT_ROOT") or "runs/latest")
    os.makedirs(out_root, exist_ok=True)
    chash = fieldio.config_hash(cfg)
    stages = []
    outputs = {}
    t_start = time.perf_counter()

    def write_manifest():
        manifest = {
            "config": cfg,
            "config_hash": chash,
            "version": VERSION,
            "backend": BACKEND,
            "stages": stages,
            "outputs": outputs,
            "wall_seconds": round(time.perf_counter() - t_start, 3),
        }
        fieldio.dump_json(os.path.join(out_root, "manifest.json"), manifest)
        return manifest

    def run_stage(name, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as e:
            stages.append({"name": name, "status": f"failed: {e}",
                           "seconds": round(time.perf_counter() - t0, 3)})
            write_manifest()
            raise StageError(name, e) from e
        stages.append({"name": name, "status": "ok",
                       "seconds": round(time.perf_counter() - t0, 3)})
        return result

    def record(path):
        outputs[os.path.basename(path)] = fieldio.sha256_file(path)

    want = set(cfg["stages"])
    spec_rep = None
    vsol = None
    sols = []

    if "spectrum" in want:
        spec_rep = run_stage("spectrum", lambda: spectrum.spectrum_report(
            torus_of(cfg), k_max=cfg["spectrum"]["kmax"]).to_dict())
        spec_rep["config_hash"] = chash
        p = os.path.join(out_root, "spec.json")
        fieldio.dump_json(p, spec_rep)
        record(p)

    if "vortex" in want:
        vsol = run_stage("vortex", lambda: solve_vortex_stage(cfg))
        p = os.path.join(out_root, "vortex.bin")
        fieldio.save_vortex_solution(p, vsol, extra_meta={"config_hash": chash})
        record(p)

    if "sw" in want:
        base_r = cfg["vortex"]["r"]
        ssol = run_stage("sw", lambda: solve_sw_stage(cfg, vsol))
        sols.append((base_r, ssol))
        p = os.path.join(out_root, "sw.bin")
        fieldio.save_sw_state(p, ssol.state, extra_meta={
            "config_hash": chash, "seed": cfg["seeds"]["boundary"],
            "perturb_beta": cfg["sw"]["perturb_beta"],
            "perturb_alpha": cfg["sw"]["perturb_alpha"],
            "converged": bool(ssol.converged)})
        record(p)
        b2, gb2 = cylinder.beta_profiles(ssol.state)
        p = os.path.join(out_root, "decay.csv")
        fieldio.write_decay_csv(p, cylinder_of(cfg).t_nodes, b2, gb2,
                                config_hash=chash)
        record(p)

    if "verify" in want:
        base_r = cfg["vortex"]["r"]
        for rv in cfg["verify"]["sweep"]:
            if rv == base_r:
                continue
            vs = run_stage(f"vortex r={rv:g}",
                           lambda rv=rv: solve_vortex_stage(cfg, r=rv))
            ss = run_stage(f"sw r={rv:g}",
                           lambda rv=rv, vs=vs: solve_sw_stage(cfg, vs, r=rv))
            sols.append((rv, ss))
            p = os.path.join(out_root, f"sw_r{rv:g}.bin")
            fieldio.save_sw_state(p, ss.state, extra_meta={
                "config_hash": chash, "seed": cfg["seeds"]["boundary"],
                "perturb_beta": cfg["sw"]["perturb_beta"],
                "perturb_alpha": cfg["sw"]["perturb_alpha"],
                "converged": bool(ss.converged)})
            record(p)
            b2, gb2 = cylinder.beta_profiles(ss.state)
            p = os.path.join(out_root, f"decay_r{rv:g}.csv")
            fieldio.write_decay_csv(p, cylinder_of(cfg).t_nodes, b2, gb2,
                                    config_hash=chash)
            record(p)
        report = run_stage("verify", lambda: build_checks(
            cfg, spec_rep, vsol, sols))
        for p in emit_report(out_root, report, chash).values():
            record(p)

    return write_manifest()


def _is_loaded(cfg):
    """True when cfg already went through load_config (all sections present)."""
    return isinstance(cfg, dict) and set(cfg) == set(DEFAULT_CONFIG)
