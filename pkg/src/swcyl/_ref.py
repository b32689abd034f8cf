"""Reference (pure numpy) implementations of the hot kernels.

All field arrays are indexed [..., i, j] with i the x index (period N1) and
j the y index (period N2); leading axes are batch dimensions (time slices).
Link variables live on the link leaving site (i, j) in the +x or +y
direction.  Matter transport from site n to n + e_mu multiplies by
exp(-i * Theta_mu(n)); Ux/Uy below are those transport factors.
"""

import numpy as np


def curl_plaquette(tx, ty):
    """Oriented plaquette sum tx(i,j) + ty(i+1,j) - tx(i,j+1) - ty(i,j)."""
    return (
        tx
        + np.roll(ty, -1, axis=-2)
        - np.roll(tx, -1, axis=-1)
        - ty
    )


def curl_adjoint(v):
    """Adjoint of curl_plaquette: returns (gx, gy) with <v, curl t> = <gx,tx>+<gy,ty>."""
    gx = v - np.roll(v, 1, axis=-1)
    gy = np.roll(v, 1, axis=-2) - v
    return gx, gy


def avg4_site_to_plaq(s):
    """Average of the four corner sites of each plaquette."""
    return 0.25 * (
        s
        + np.roll(s, -1, axis=-2)
        + np.roll(s, -1, axis=-1)
        + np.roll(np.roll(s, -1, axis=-2), -1, axis=-1)
    )


def avg4_plaq_to_site(p):
    """Adjoint of avg4_site_to_plaq (average of the four plaquettes at a site)."""
    return 0.25 * (
        p
        + np.roll(p, 1, axis=-2)
        + np.roll(p, 1, axis=-1)
        + np.roll(np.roll(p, 1, axis=-2), 1, axis=-1)
    )


def _cov_diff_x(Ux, phi, h1):
    # central covariant difference along x
    fwd = np.conj(Ux) * np.roll(phi, -1, axis=-2)
    bwd = np.roll(Ux, 1, axis=-2) * np.roll(phi, 1, axis=-2)
    return (fwd - bwd) / (2.0 * h1)


def _cov_diff_y(Uy, phi, h2):
    fwd = np.conj(Uy) * np.roll(phi, -1, axis=-1)
    bwd = np.roll(Uy, 1, axis=-1) * np.roll(phi, 1, axis=-1)
    return (fwd - bwd) / (2.0 * h2)


def dbar_apply(Ux, Uy, phi, h1, h2):
    """(D_x + i D_y) phi / 2 with central covariant differences."""
    return 0.5 * (_cov_diff_x(Ux, phi, h1) + 1j * _cov_diff_y(Uy, phi, h2))


def partial_apply(Ux, Uy, phi, h1, h2):
    """(D_x - i D_y) phi / 2 with central covariant differences."""
    return 0.5 * (_cov_diff_x(Ux, phi, h1) - 1j * _cov_diff_y(Uy, phi, h2))


def link_angles(Ux, Uy, alpha):
    """Gauge-invariant phase increments arg(conj(a(n)) U*(n->m) a(m)) per link."""
    chix = np.angle(np.conj(alpha) * np.conj(Ux) * np.roll(alpha, -1, axis=-2))
    chiy = np.angle(np.conj(alpha) * np.conj(Uy) * np.roll(alpha, -1, axis=-1))
    return chix, chiy


def lap7_apply(f, wt, wx, wy, ht, h1, h2):
    """Flux-form weighted 7-point Laplacian on [0..Nt-1] x torus.

    f: (Nt, N1, N2); wt: (Nt-1, N1, N2) on t-links; wx, wy: (Nt, N1, N2) on
    periodic transverse links.  No flux through the t ends (Neumann data is
    handled by the caller through the right-hand side).
    """
    out = np.zeros_like(f)
    # transverse parts, periodic
    out += (wx * (np.roll(f, -1, axis=-2) - f)
            - np.roll(wx * (np.roll(f, -1, axis=-2) - f), 1, axis=-2)) / (h1 * h1)
    out += (wy * (np.roll(f, -1, axis=-1) - f)
            - np.roll(wy * (np.roll(f, -1, axis=-1) - f), 1, axis=-1)) / (h2 * h2)
    # t part with no-flux ends
    flux = wt * (f[1:] - f[:-1])  # (Nt-1, N1, N2)
    out[:-1] += flux / (ht * ht)
    out[1:] -= flux / (ht * ht)
    return out
