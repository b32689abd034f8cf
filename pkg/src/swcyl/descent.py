"""Shared nonlinear least-squares driver.

Minimizes E(x) = 0.5 * ||rho(x)||^2 for a weighted residual map rho given as
callbacks, with a matrix-free Jacobian:

    residual(x) -> flat real vector rho
    vjp(x, v)   -> J(x)^T v          (same weighting as rho)
    jvp(x, dx)  -> J(x) dx
    sup_metric(x) -> float           (unweighted sup residual, for stopping)

Strategy: Levenberg-Marquardt.  Each step solves (J^T J + lam) s = -J^T rho
by matrix-free CG and adapts lam from the gain ratio (Nielsen's rule).  The
damping matters here: the Jacobians have near-null directions (gauge orbits
and flat moduli), and the undamped Gauss-Newton step picks up huge components
along them that the second-order terms then punish.  E decreases monotonically
and every run is deterministic.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveOptions:
    tol: float = 1e-8  # stop when sup_metric <= tol
    max_iter: int = 500
    cg_max: int = 300
    cg_rtol: float = 1e-2
    lam0: float = 1.0
    lam_max: float = 1e14
    stall_rtol: float = 1e-14  # relative E decrease considered "no progress"
    stall_iters: int = 20
    history_stride: int = 1


@dataclass
class DescentResult:
    x: np.ndarray
    sup_residual: float
    objective: float
    iterations: int
    converged: bool
    stop_reason: str
    history: list = field(default_factory=list)


def _cg(apply_N, b, max_iter, rtol):
    """Plain CG for the damped normal operator; x0 = 0."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    b_norm = np.sqrt(rr)
    if b_norm == 0.0:
        return x
    for _ in range(max_iter):
        Np = apply_N(p)
        pNp = float(p @ Np)
        if pNp <= 0.0:
            break  # numerically lost positivity; use current iterate
        a = rr / pNp
        x += a * p
        r -= a * Np
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= rtol * b_norm:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def solve_least_squares(x0, residual, vjp, jvp, sup_metric, opts=None):
    opts = opts or SolveOptions()
    x = np.array(x0, dtype=float, copy=True)

    rho = residual(x)
    E = 0.5 * float(rho @ rho)
    sup = sup_metric(x)
    history = [sup]

    lam = opts.lam0
    nu = 2.0
    stall = 0
    it = 0
    reason = "max_iter"
    converged = False

    while it < opts.max_iter:
        if sup <= opts.tol:
            converged = True
            reason = "tol"
            break
        grad = vjp(x, rho)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            reason = "zero_gradient"
            break

        def apply_N(v, lam=lam):
            return vjp(x, jvp(x, v)) + lam * v

        step = _cg(apply_N, -grad, opts.cg_max, opts.cg_rtol)
        pred = 0.5 * float(step @ (lam * step - grad))
        x_try = x + step
        rho_try = residual(x_try)
        E_try = 0.5 * float(rho_try @ rho_try)
        it += 1

        if E_try < E:
            gain = (E - E_try) / max(pred, 1e-300)
            E_drop = (E - E_try) / max(E, 1e-300)
            x, rho, E = x_try, rho_try, E_try
            lam = lam * max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            nu = 2.0
            sup = sup_metric(x)
            if it % opts.history_stride == 0:
                history.append(sup)
            stall = stall + 1 if E_drop < opts.stall_rtol else 0
            if stall >= opts.stall_iters:
                reason = "stalled"
                break
        else:
            lam *= nu
            nu *= 2.0
            if lam > opts.lam_max:
                reason = "stalled"
                break

    if sup <= opts.tol:
        converged = True
        reason = "tol"
    history.append(sup)
    return DescentResult(x, sup, E, it, converged, reason, history)
