"""Abelian vortex equations on the flat torus.

Unknowns: fluctuation link phases theta and a section alpha of the degree-d
bundle.  Residuals:

    R1 (plaquettes) = (r/2) * (1 - avg4 |alpha|^2) - kappa
    R2 (sites)      = dbar_A alpha

with kappa the curvature density (folded background + curl theta) and avg4
the corner average onto plaquette centers.  A zero of (R1, R2) is a vortex
solution; its alpha vanishes at d points counted by covariant winding.
"""

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from ._backend import kernels
from . import lattice
from .descent import SolveOptions, solve_least_squares

TWO_PI = 2.0 * np.pi


class IndeterminateZeroError(RuntimeError):
    """A candidate vortex plaquette has |alpha| below threshold on a corner;
    the winding there is numerically unreliable.  Refine the grid."""


@dataclass(frozen=True)
class VortexProblem:
    geom: lattice.TorusGeometry
    degree: int
    r: float
    tol: float = 1e-8
    max_iter: int = 500
    seed: int = 0
    noise: float = 0.02

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("coupling r must be positive")
        if self.degree > 0 and self.r * self.geom.area < 16.0 * np.pi * self.degree:
            raise ValueError(
                "existence gate violated: need r * area >= 16*pi*degree "
                f"(r*area = {self.r * self.geom.area:.6g}, "
                f"16*pi*d = {16.0 * np.pi * self.degree:.6g})"
            )


@dataclass
class VortexSolution:
    problem: VortexProblem
    gauge: lattice.GaugeField
    alpha: lattice.MatterField
    converged: bool
    iterations: int
    final_residual: float
    message: str
    residual_history: np.ndarray


@dataclass
class Divisor:
    points: list  # (i, j, multiplicity) on plaquettes
    total: int
    degree: int

    @property
    def matches_degree(self):
        return self.total == self.degree

    def centers(self, geom):
        return [((i + 0.5) * geom.h1, (j + 0.5) * geom.h2, m)
                for (i, j, m) in self.points]


def vortex_residual(gauge, values, r):
    """Residual blocks (R1 on plaquettes, R2 on sites)."""
    kappa = lattice.curvature(gauge)
    R1 = 0.5 * r * (1.0 - kernels.avg4_site_to_plaq(np.abs(values) ** 2)) - kappa
    R2 = lattice.dbar(gauge, values)
    return R1, R2


def residual_sup(R1, R2):
    return max(float(np.max(np.abs(R1))), float(np.max(np.abs(R2))))


def bradlow_defect(sol):
    """|integral(1-|alpha|^2) - 4*pi*d/r|; zero for exact solutions."""
    g = sol.problem.geom
    lhs = float(np.sum(1.0 - np.abs(sol.alpha.values) ** 2)) * g.h1 * g.h2
    return abs(lhs - 4.0 * np.pi * sol.problem.degree / sol.problem.r)


def winding_numbers(gauge, values):
    """Covariant winding per plaquette; sums to the bundle degree exactly.

    Each link angle is computed once and reused with opposite sign from the
    other side, so the total telescopes to 0 and the folded background flux
    contributes exactly 2*pi*d in total.
    """
    Ux, Uy = lattice.transport(gauge)
    chix, chiy = kernels.link_angles(Ux, Uy, values)
    loop = (chix + np.roll(chiy, -1, axis=0)
            - np.roll(chix, -1, axis=1) - chiy)
    w = (loop + lattice.plaquette_flux(gauge)) / TWO_PI
    w_int = np.rint(w)
    if np.max(np.abs(w - w_int)) > 1e-6:
        raise IndeterminateZeroError(
            "winding numbers are not cleanly integral; alpha vanishes too "
            "close to a link (refine the grid or move the configuration)"
        )
    return w_int.astype(int)


def _bad_components(bad):
    """Connected components (shared-link adjacency, periodic) of a boolean
    plaquette mask.  Returns (labels, n) with labels -1 outside the mask."""
    N1, N2 = bad.shape
    labels = np.full(bad.shape, -1, dtype=int)
    n = 0
    for i0, j0 in zip(*np.nonzero(bad)):
        if labels[i0, j0] >= 0:
            continue
        stack = [(i0, j0)]
        labels[i0, j0] = n
        while stack:
            i, j = stack.pop()
            for ii, jj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                ii %= N1
                jj %= N2
                if bad[ii, jj] and labels[ii, jj] < 0:
                    labels[ii, jj] = n
                    stack.append((ii, jj))
        n += 1
    return labels, n


def extract_divisor(gauge, values, degree, threshold=0.1):
    """Zero divisor of alpha from covariant winding numbers.

    Plaquettes with a corner at |alpha| <= threshold carry individually
    unreliable winding, so they are grouped into connected clusters; every
    boundary link of such a cluster has both endpoints above threshold (any
    bad endpoint pulls the outside plaquette into the cluster), and the
    per-plaquette sum over the cluster telescopes to the winding of that
    trustworthy enclosing loop.  Each cluster with nonzero total is one
    divisor point; zeros closer than the cluster scale merge into a single
    point with multiplicity, which is the Sym^d picture at finite resolution.

    Raises IndeterminateZeroError when a cluster wraps around the torus: no
    enclosing loop of good links exists and the zeros cannot be localized.
    """
    g = gauge.geom
    w = winding_numbers(gauge, values)
    a = np.abs(values)
    corner_min = np.minimum(
        np.minimum(a, np.roll(a, -1, axis=0)),
        np.minimum(np.roll(a, -1, axis=1), np.roll(np.roll(a, -1, axis=0), -1, axis=1)),
    )
    bad = corner_min <= threshold
    labels, n = _bad_components(bad)
    points = []
    for c in range(n):
        ii, jj = np.nonzero(labels == c)
        if len(set(ii.tolist())) == g.N1 or len(set(jj.tolist())) == g.N2:
            raise IndeterminateZeroError(
                f"|alpha| <= {threshold} on a cluster wrapping the torus "
                f"({len(ii)} plaquettes); no enclosing loop of trusted links "
                "exists; refine the grid"
            )
        mult = int(w[ii, jj].sum())
        if mult == 0:
            continue
        k = int(np.argmax(np.abs(w[ii, jj])))
        points.append((int(ii[k]), int(jj[k]), mult))
    for i, j in zip(*np.nonzero((w != 0) & ~bad)):
        points.append((int(i), int(j), int(w[i, j])))
    points.sort()
    return Divisor(points=points, total=int(w.sum()), degree=int(degree))


def _planted_centers(problem, rng):
    """Random plaquette centers with pairwise periodic separation of at least
    a quarter of the smaller period; near-coincident starts relax badly."""
    g = problem.geom
    sep = 0.25 * min(g.L1, g.L2)
    centers = []
    for _ in range(8):
        for _ in range(100 * problem.degree):
            xc = (rng.integers(g.N1) + 0.5) * g.h1
            yc = (rng.integers(g.N2) + 0.5) * g.h2
            ok = True
            for xo, yo in centers:
                dx = min(abs(xc - xo), g.L1 - abs(xc - xo))
                dy = min(abs(yc - yo), g.L2 - abs(yc - yo))
                if np.hypot(dx, dy) < sep:
                    ok = False
                    break
            if ok:
                centers.append((xc, yc))
                if len(centers) == problem.degree:
                    return centers
        sep *= 0.5  # torus too crowded at this separation; relax and keep going
    raise RuntimeError("could not place separated vortex centers")


def initial_guess(problem):
    """Seeded start: alpha with d planted approximate zeros, links at zero."""
    g = problem.geom
    rng = np.random.default_rng(problem.seed)
    x, y = lattice.site_coords(g)
    if problem.degree > 0:
        a = np.ones(g.shape, dtype=complex)
        for xc, yc in _planted_centers(problem, rng):
            # periodic factor with a single +1-winding zero at (xc, yc)
            a *= (np.sin(np.pi * (x - xc) / g.L1)
                  + 1j * np.sin(np.pi * (y - yc) / g.L2))
        a /= max(np.max(np.abs(a)), 1e-30)
    else:
        a = np.ones(g.shape, dtype=complex)
    a *= 1.0 + problem.noise * (rng.standard_normal(g.shape)
                                + 1j * rng.standard_normal(g.shape))
    return lattice.GaugeField(g, problem.degree, np.zeros(g.shape), np.zeros(g.shape)), a


def _pack(tx, ty, a):
    return np.concatenate([tx.ravel(), ty.ravel(), a.real.ravel(), a.imag.ravel()])


def _unpack(x, g):
    M = g.nsites
    tx = x[:M].reshape(g.shape)
    ty = x[M:2 * M].reshape(g.shape)
    a = (x[2 * M:3 * M] + 1j * x[3 * M:]).reshape(g.shape)
    return tx, ty, a


def make_operators(problem):
    """Weighted residual / JVP / VJP closures over the packed unknowns.

    Exposed separately from the solve so the adjoint pair can be checked
    against finite differences.
    """
    g = problem.geom
    r = problem.r
    d = problem.degree
    w = g.h1 * g.h2
    sqw = np.sqrt(w)
    bgx, bgy = lattice.background_links(g, d)
    phi_d = lattice.flux_per_plaquette(g, d)

    def blocks(x):
        tx, ty, a = _unpack(x, g)
        Ux = np.exp(1j * (bgx + tx))
        Uy = np.exp(1j * (bgy + ty))
        kappa = (phi_d + kernels.curl_plaquette(tx, ty)) / w
        R1 = 0.5 * r * (1.0 - kernels.avg4_site_to_plaq(np.abs(a) ** 2)) - kappa
        R2 = kernels.dbar_apply(Ux, Uy, a, g.h1, g.h2)
        return R1, R2, Ux, Uy, a

    def residual(x):
        R1, R2, _, _, _ = blocks(x)
        return sqw * np.concatenate([R1.ravel(), R2.real.ravel(), R2.imag.ravel()])

    def sup_metric(x):
        R1, R2, _, _, _ = blocks(x)
        return residual_sup(R1, R2)

    def jvp(x, dx):
        tx, ty, a = _unpack(x, g)
        dtx, dty, da = _unpack(dx, g)
        Ux = np.exp(1j * (bgx + tx))
        Uy = np.exp(1j * (bgy + ty))
        dR1 = (-r * kernels.avg4_site_to_plaq(np.real(np.conj(a) * da))
               - kernels.curl_plaquette(dtx, dty) / w)
        dR2 = kernels.dbar_apply(Ux, Uy, da, g.h1, g.h2)
        # theta variation of the transport inside dbar
        ax_f = np.conj(Ux) * np.roll(a, -1, axis=0)
        ax_b = np.roll(Ux, 1, axis=0) * np.roll(a, 1, axis=0)
        ay_f = np.conj(Uy) * np.roll(a, -1, axis=1)
        ay_b = np.roll(Uy, 1, axis=1) * np.roll(a, 1, axis=1)
        dR2 = dR2 + (-1j) * (dtx * ax_f + np.roll(dtx, 1, axis=0) * ax_b) / (4 * g.h1)
        dR2 = dR2 + (dty * ay_f + np.roll(dty, 1, axis=1) * ay_b) / (4 * g.h2)
        return sqw * np.concatenate([dR1.ravel(), dR2.real.ravel(), dR2.imag.ravel()])

    def vjp(x, v):
        tx, ty, a = _unpack(x, g)
        M = g.nsites
        v1 = v[:M].reshape(g.shape)
        v2 = (v[M:2 * M] + 1j * v[2 * M:]).reshape(g.shape)
        Ux = np.exp(1j * (bgx + tx))
        Uy = np.exp(1j * (bgy + ty))
        # R1 part
        gx, gy = kernels.curl_adjoint(v1)
        gtx = -gx / w
        gty = -gy / w
        Ga = -r * kernels.avg4_plaq_to_site(v1) * a
        # R2 part: alpha variation (adjoint of dbar is -partial)
        Ga = Ga - kernels.partial_apply(Ux, Uy, v2, g.h1, g.h2)
        # R2 part: theta variation
        a_xf = np.conj(Ux) * np.roll(a, -1, axis=0)
        a_yf = np.conj(Uy) * np.roll(a, -1, axis=1)
        gtx = gtx + np.imag(np.conj(v2) * a_xf
                            + np.conj(np.roll(v2, -1, axis=0)) * Ux * a) / (4 * g.h1)
        gty = gty + np.real(np.conj(v2) * a_yf
                            + np.conj(np.roll(v2, -1, axis=1)) * Uy * a) / (4 * g.h2)
        return sqw * np.concatenate([gtx.ravel(), gty.ravel(),
                                     Ga.real.ravel(), Ga.imag.ravel()])

    return SimpleNamespace(residual=residual, jvp=jvp, vjp=vjp,
                           sup_metric=sup_metric, blocks=blocks)


def solve_vortex(problem, x0=None, options=None):
    """Minimize the squared vortex residual to a zero (BB descent + Gauss-Newton).

    For degree < 0 there are no solutions (a holomorphic section of a
    negative-degree bundle vanishes identically); the alpha == 0 projection
    is returned unconverged with the flux obstruction spelled out.
    """
    g = problem.geom
    d = problem.degree
    r = problem.r

    if d < 0:
        gauge = lattice.zero_gauge(g, d)
        values = np.zeros(g.shape, dtype=complex)
        R1, R2 = vortex_residual(gauge, values, r)
        sup = residual_sup(R1, R2)
        msg = (
            "degree d < 0: no vortex solutions exist; integrated flux "
            f"2*pi*d = {TWO_PI * d:.6g} < 0 cannot equal "
            "(r/2)*integral(1-|alpha|^2) >= 0 for the only holomorphic "
            "section alpha == 0; returning the alpha == 0 projection"
        )
        return VortexSolution(problem, gauge, lattice.MatterField(g, d, values),
                              converged=False, iterations=0, final_residual=sup,
                              message=msg, residual_history=np.array([sup]))

    ops = make_operators(problem)

    if x0 is None:
        gauge0, a0 = initial_guess(problem)
        x0 = _pack(gauge0.theta_x, gauge0.theta_y, a0)

    opts = options or SolveOptions(tol=problem.tol, max_iter=problem.max_iter)
    res = solve_least_squares(x0, ops.residual, ops.vjp, ops.jvp,
                              ops.sup_metric, opts)

    tx, ty, a = _unpack(res.x, g)
    gauge = lattice.GaugeField(g, d, tx, ty)
    msg = f"stopped: {res.stop_reason} after {res.iterations} iterations"
    return VortexSolution(problem, gauge, lattice.MatterField(g, d, a),
                          converged=res.converged, iterations=res.iterations,
                          final_residual=res.sup_residual, message=msg,
                          residual_history=np.asarray(res.history))
