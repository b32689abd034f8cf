"""Exponential decay fits and two-constant envelope fits used by the checks."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


@dataclass
class DecayFit:
    rate: float  # y ~ exp(-rate * x)
    intercept: float  # log y at x = 0
    rms: float  # rms of log-residuals
    window: tuple
    n_points: int
    floored: bool = False

    def to_dict(self):
        return {
            "rate": float(self.rate),
            "intercept": float(self.intercept),
            "rms": float(self.rms),
            "window": [float(self.window[0]), float(self.window[1])],
            "n_points": int(self.n_points),
            "floored": bool(self.floored),
        }


def fit_exponential_decay(x, y, window=None, floor=1e-13):
    """Least-squares fit of log y against x on a window.

    Values at or below the floating-point floor yield the +inf sentinel
    (profile indistinguishable from zero; any finite rate would be noise).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        lo, hi = window
        m = (x >= lo - 1e-12) & (x <= hi + 1e-12)
        x, y = x[m], y[m]
    else:
        window = (float(x.min()), float(x.max())) if x.size else (0.0, 0.0)
    if x.size < 2 or float(np.max(y, initial=0.0)) <= floor:
        return DecayFit(rate=float("inf"), intercept=float("-inf"), rms=0.0,
                        window=tuple(window), n_points=int(x.size), floored=True)
    ly = np.log(np.maximum(y, 1e-300))
    A = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return DecayFit(rate=float(coef[1]), intercept=float(coef[0]), rms=rms,
                    window=tuple(window), n_points=int(x.size), floored=False)


def fit_envelope_constants(y, p, q):
    """Smallest (c1, c2) >= 0 with y <= c1 * p + c2 * q pointwise.

    Solved as a tiny LP minimizing c2 + 1e-6 * c1 (the secondary term breaks
    degeneracy toward using the structural predictor p).  Arrays are
    flattened; infeasibilities cannot occur (c2 large enough always works
    when q > 0 everywhere).
    """
    y = np.asarray(y, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if not (q > 0).all():
        raise ValueError("secondary predictor q must be positive")
    # constraints: -c1*p - c2*q <= -y
    A_ub = -np.column_stack([p, q])
    res = linprog(c=[1e-6, 1.0], A_ub=A_ub, b_ub=-y, bounds=[(0, None), (0, None)],
                  method="highs")
    if not res.success:
        raise RuntimeError(f"envelope fit LP failed: {res.message}")
    return float(res.x[0]), float(res.x[1])
