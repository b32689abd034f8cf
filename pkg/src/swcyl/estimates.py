"""A-priori estimate checks on cylinder solutions, r-sweep validation,
decay-rate fits, and moduli dimension bookkeeping.

All pointwise scans and fit windows exclude a 2-unit collar at each Dirichlet
end: the prescribed boundary perturbation is r-independent, so only the core
region carries the r-scaled bounds (interior statements).  Constants are
fitted once at a base coupling and then validated, frozen, at larger r; the
comparisons allow a 1e-9 floating-point allowance and nothing else.
"""

from dataclasses import dataclass, field

import numpy as np

from . import cylinder
from .fitting import fit_envelope_constants, fit_exponential_decay

FP_TOL = 1e-9  # floating-point allowance in frozen-constant comparisons
COLLAR = 2.0  # excluded band at each Dirichlet end


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    bound: float
    lemma: str = ""
    constants: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def slack(self):
        return self.bound - self.measured

    def to_dict(self):
        return {
            "check": self.name,
            "lemma": self.lemma,
            "measured": float(self.measured),
            "bound": float(self.bound),
            "slack": float(self.slack),
            "pass": bool(self.passed),
            "constants": {k: float(v) for k, v in self.constants.items()},
            "details": self.details,
        }


def core_mask(cyl, half=False, collar=COLLAR):
    """Slice mask for |t| <= T - collar (half-slice midpoints when half)."""
    t = cyl.t_nodes
    if half:
        t = 0.5 * (t[:-1] + t[1:])
    return np.abs(t) <= cyl.T - collar + 1e-12


def _core(state, arr, half=False):
    return arr[core_mask(state.cyl, half=half)]


# ---------------------------------------------------------------- psi bound

def psi_sup_sq(state):
    """sup over the core region of |alpha|^2 + |beta|^2."""
    dens = np.abs(state.alpha) ** 2 + np.abs(state.beta) ** 2
    return float(_core(state, dens).max())


def fit_z_prime(state):
    """Smallest z' with sup|psi|^2 <= 1 + z'/r on the core region."""
    return max(0.0, (psi_sup_sq(state) - 1.0)) * state.r


def check_psi_linf(state, z_prime):
    measured = psi_sup_sq(state)
    bound = 1.0 + z_prime / state.r
    return CheckResult(
        name=f"psi_linf_r{state.r:g}",
        passed=measured <= bound + FP_TOL,
        measured=measured, bound=bound,
        lemma="sup |psi|^2 <= 1 + z'/r",
        constants={"z_prime": z_prime},
    )


def m_value(state):
    """m(r) = r * max(0, sup|psi|^2 - 1): decays for resolved solutions."""
    return state.r * max(0.0, psi_sup_sq(state) - 1.0)


def beta_sup_sq_core(state):
    return float(_core(state, np.abs(state.beta) ** 2).max())


def check_m_monotone(pairs, slack=0.2, floor=1e-9):
    """Non-increasing within slack (absolute floor covers the fp noise regime)."""
    pairs = sorted(pairs)
    ok = all(m2 <= (1.0 + slack) * m1 + floor
             for (_, m1), (_, m2) in zip(pairs, pairs[1:]))
    return CheckResult(
        name="m_of_r_nonincreasing",
        passed=ok,
        measured=max(m for _, m in pairs),
        bound=(1.0 + slack) * pairs[0][1] + floor if pairs else 0.0,
        lemma="r * max(0, sup|psi|^2 - 1) non-increasing in r",
        details={"table": [[float(r), float(m)] for r, m in pairs],
                 "allowance": slack, "floor": floor},
    )


def check_beta_sup_scaling(pairs, slack=0.2, floor=1e-18):
    """r * sup|beta|^2 non-increasing across the sweep (the 1/r prefactor)."""
    pairs = sorted(pairs)
    vals = [(r, r * b) for r, b in pairs]
    ok = all(v2 <= (1.0 + slack) * v1 + floor
             for (_, v1), (_, v2) in zip(vals, vals[1:]))
    return CheckResult(
        name="beta_sup_scaling",
        passed=ok,
        measured=max(v for _, v in vals),
        bound=(1.0 + slack) * vals[0][1] + floor if vals else 0.0,
        lemma="r * sup |beta|^2 non-increasing in r",
        details={"table": [[float(r), float(v)] for r, v in vals],
                 "allowance": slack, "floor": floor},
    )


# --------------------------------------------------------------- beta bound

def _beta_predictors(state):
    y = np.abs(state.beta) ** 2
    p = 2.0 / state.r * np.maximum(1.0 - np.abs(state.alpha) ** 2, 0.0)
    q = np.full_like(y, 1.0 / state.r ** 2)
    mask = core_mask(state.cyl)
    return y[mask], p[mask], q[mask]


def fit_beta_constants(state):
    """Tight (c, zeta0) with |beta|^2 <= 2c/r (1-|alpha|^2) + zeta0/r^2 (core)."""
    y, p, q = _beta_predictors(state)
    return fit_envelope_constants(y, p, q)


def check_beta_pointwise(state, c, zeta0):
    y, p, q = _beta_predictors(state)
    slack = y - (c * p + zeta0 * q)
    worst = int(np.argmax(slack))
    return CheckResult(
        name=f"beta_pointwise_r{state.r:g}",
        passed=float(slack.max()) <= FP_TOL,
        measured=float(y[worst]),
        bound=float((c * p + zeta0 * q)[worst]),
        lemma="|beta|^2 <= (2c/r) (|df| - |alpha|^2)_+ + zeta0/r^2",
        constants={"c": c, "zeta0": zeta0},
        details={"sup_beta_sq_core": float(y.max())},
    )


# ---------------------------------------------------- first-derivative bound

def _grad_predictors(state):
    ga = cylinder.covariant_grad_sq(state, state.alpha)
    gb = cylinder.covariant_grad_sq(state, state.beta)
    y = ga + state.r * gb
    p = state.r * np.maximum(1.0 - np.abs(state.alpha) ** 2, 0.0)
    q = np.ones_like(y)
    mask = core_mask(state.cyl)
    return y[mask], p[mask], q[mask]


def fit_grad_constants(state):
    """Tight (zeta', zeta'') with |Da|^2 + r|Db|^2 <= zeta' r pi_+ + zeta''."""
    y, p, q = _grad_predictors(state)
    return fit_envelope_constants(y, p, q)


def check_grad_bound(state, zeta_p, zeta_pp):
    y, p, q = _grad_predictors(state)
    slack = y - (zeta_p * p + zeta_pp * q)
    worst = int(np.argmax(slack))
    return CheckResult(
        name=f"first_derivatives_r{state.r:g}",
        passed=float(slack.max()) <= FP_TOL,
        measured=float(y[worst]),
        bound=float((zeta_p * p + zeta_pp * q)[worst]),
        lemma="|D alpha|^2 + r |D beta|^2 <= zeta' r (|df| - |alpha|^2)_+ + zeta''",
        constants={"zeta_prime": zeta_p, "zeta_doubleprime": zeta_pp},
    )


# ------------------------------------------------------------ curvature bound

def curvature_sup(state):
    """sup |F| over the core region, with F the determinant-line curvature.

    The three components live on staggered locations; they are averaged to
    half-slice plaquettes before taking the pointwise norm.
    """
    fxy, ftx, fty = cylinder.curvature_components(state)
    fxy_m = 0.5 * (fxy[:-1] + fxy[1:])
    ftx_p = 0.5 * (ftx + np.roll(ftx, -1, axis=-1))  # x-links -> plaquette
    fty_p = 0.5 * (fty + np.roll(fty, -1, axis=-2))  # y-links -> plaquette
    mag = np.sqrt(fxy_m ** 2 + ftx_p ** 2 + fty_p ** 2)
    return float(_core(state, mag, half=True).max())


def fit_curvature_constant(state, df_sup=1.0):
    """Smallest z'' with sup|F| <= 2 r ||d f||_inf + z''."""
    return max(0.0, curvature_sup(state) - 2.0 * state.r * df_sup)


def check_curvature(state, z_doubleprime, df_sup=1.0):
    measured = curvature_sup(state)
    bound = 2.0 * state.r * df_sup + z_doubleprime
    return CheckResult(
        name=f"curvature_linf_r{state.r:g}",
        passed=measured <= bound + FP_TOL,
        measured=measured, bound=bound,
        lemma="sup |F| <= 2 r sup|df| + z''",
        constants={"z_doubleprime": z_doubleprime, "df_sup": df_sup},
        details={"sup_F": measured, "sup_F_sq": measured ** 2},
    )


# ----------------------------------------------------------------- decay fits

def beta_decay_fits(state, floor=1e-26):
    """Per-end exponential fits of sup|beta|^2 and sup|D beta|^2 on the
    windows |t| in [T-6, T-2], abscissa t_tilde(|t|).

    Returns {"minus"|"plus": {"beta_sq": DecayFit, "grad_beta_sq": DecayFit}}.
    The floor applies to |beta|^2 (values below it give the +inf sentinel).
    """
    from .harmonic import t_tilde

    cyl = state.cyl
    t = cyl.t_nodes
    b2, gb2 = cylinder.beta_profiles(state)
    lo, hi = cyl.T - 6.0, cyl.T - 2.0
    out = {}
    for end, sign in (("minus", -1.0), ("plus", 1.0)):
        m = (sign * t >= lo - 1e-12) & (sign * t <= hi + 1e-12)
        # decay away from the end: abscissa decreases toward the interior,
        # so fit against -t_tilde(|t|) to get a positive rate
        xs = -t_tilde(np.abs(t[m]))
        out[end] = {
            "beta_sq": fit_exponential_decay(xs, b2[m], floor=floor),
            "grad_beta_sq": fit_exponential_decay(xs, gb2[m], floor=floor),
        }
    return out


def check_decay_rates(fits, eps):
    """beta|^2 rate >= 2*eps on both ends; grad rate within 25% of it."""
    checks = []
    for end, f in fits.items():
        rb = f["beta_sq"].rate
        rg = f["grad_beta_sq"].rate
        checks.append(CheckResult(
            name=f"beta_decay_rate_{end}",
            passed=rb >= 2.0 * eps,
            measured=rb, bound=2.0 * eps,
            lemma="sup |beta|^2 decays like exp(-rate t~) with rate >= 2 eps",
            details={"rms": f["beta_sq"].rms,
                     "comparison": "measured rate must be >= bound"},
        ))
        rel = abs(rg - rb) / rb if np.isfinite(rb) and rb > 0 else float("inf")
        both_floored = f["beta_sq"].floored and f["grad_beta_sq"].floored
        checks.append(CheckResult(
            name=f"grad_beta_rate_match_{end}",
            passed=bool(both_floored or rel <= 0.25),
            measured=rg, bound=rb,
            lemma="sup |D beta|^2 decay rate tracks the |beta|^2 rate",
            details={"relative_difference": rel, "tolerance": 0.25},
        ))
    return checks


def check_spectral_ceiling(rates, lambda_max):
    """Sanity: fitted rates never exceed twice the largest computed |lambda|."""
    finite = [x for x in rates if np.isfinite(x)]
    measured = max(finite) if finite else 0.0
    return CheckResult(
        name="spectral_ceiling",
        passed=measured <= 2.0 * lambda_max + FP_TOL,
        measured=measured, bound=2.0 * lambda_max,
        lemma="fitted decay rates stay below twice the largest eigenvalue",
        details={"n_rates": len(finite)},
    )


# ------------------------------------------------------------ moduli algebra

@dataclass
class ModuliDimension:
    degree: int
    d_minus: int
    d_plus: int
    dim: int
    empty: bool

    def to_dict(self):
        return {"degree": self.degree, "d_minus": self.d_minus,
                "d_plus": self.d_plus, "dim": self.dim, "empty": self.empty}


def moduli_dimension(genus_minus, genus_plus, genus_min, degree):
    """Endpoint divisor degrees and expected moduli dimension for a
    cobordism with boundary genera (genus_minus, genus_plus) and minimal
    slice genus genus_min."""
    for name, g in (("genus_minus", genus_minus), ("genus_plus", genus_plus),
                    ("genus_min", genus_min)):
        if int(g) != g or g < 0:
            raise ValueError(f"{name} must be a nonnegative integer")
    if genus_min > min(genus_minus, genus_plus):
        raise ValueError("genus_min cannot exceed either boundary genus")
    d = int(degree)
    d_minus = d + (int(genus_minus) - int(genus_min))
    d_plus = d + (int(genus_plus) - int(genus_min))
    return ModuliDimension(degree=d, d_minus=d_minus, d_plus=d_plus,
                           dim=d_minus + d_plus, empty=d < 0)


REFERENCE_ROWS = (
    (0, 0, 0, -1), (0, 0, 0, 0), (0, 0, 0, 3), (1, 1, 1, -2),
    (1, 1, 1, 2), (2, 1, 1, 3), (3, 2, 2, 1), (2, 2, 1, 4),
    (5, 3, 2, 6), (4, 4, 4, -1),
)


def reference_table():
    """Dimension bookkeeping over a fixed set of (g-, g+, g_min, d) rows,
    covering negative degrees (empty moduli) and asymmetric genera."""
    out = []
    for gm, gp, g0, d in REFERENCE_ROWS:
        md = moduli_dimension(gm, gp, g0, d)
        row = {"genus_minus": gm, "genus_plus": gp, "genus_min": g0}
        row.update(md.to_dict())
        out.append(row)
    return out


def degree_from_chern(c1_pairing, euler_char):
    """Invert c1 = 2d + chi; raises when the parity is inconsistent."""
    num = int(c1_pairing) - int(euler_char)
    if num % 2 != 0:
        raise ValueError(
            f"c1 pairing {c1_pairing} and Euler characteristic {euler_char} "
            "have inconsistent parity (c1 - chi must be even)"
        )
    return num // 2
