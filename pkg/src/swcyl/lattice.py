"""Flat torus lattice: geometry, U(1) gauge and matter fields, basic operators.

Conventions
-----------
Sites (i, j), i = 0..N1-1, j = 0..N2-1 at positions (i*h1, j*h2) on the flat
torus of periods (L1, L2).  Arrays are indexed [i, j] (x first).  A gauge
field stores the real fluctuation phases theta on links; a degree-d bundle
additionally carries fixed background transport with one uniform flux quantum
2*pi*d/(N1*N2) per plaquette.  Matter transport from site n to n + e_mu
multiplies by exp(-i * Theta_mu(n)) with Theta = background + theta; under a
gauge transformation u the links change by the lattice gradient of u and
matter by exp(i u), which makes conj(a(n)) exp(-i Theta) a(n + e) invariant.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernels

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGeometry:
    L1: float
    L2: float
    N1: int
    N2: int

    def __post_init__(self):
        if self.L1 <= 0 or self.L2 <= 0:
            raise ValueError("torus periods must be positive")
        if self.N1 < 3 or self.N2 < 3:
            raise ValueError("need at least 3 sites per direction")

    @property
    def h1(self):
        return self.L1 / self.N1

    @property
    def h2(self):
        return self.L2 / self.N2

    @property
    def area(self):
        return self.L1 * self.L2

    @property
    def nsites(self):
        return self.N1 * self.N2

    @property
    def shape(self):
        return (self.N1, self.N2)


def build_torus(L1, L2=None, N1=64, N2=None):
    """Convenience constructor; square grid/periods by default."""
    if L2 is None:
        L2 = L1
    if N2 is None:
        N2 = N1
    return TorusGeometry(float(L1), float(L2), int(N1), int(N2))


def site_coords(geom):
    x = np.arange(geom.N1)[:, None] * geom.h1 * np.ones((1, geom.N2))
    y = np.ones((geom.N1, 1)) * np.arange(geom.N2)[None, :] * geom.h2
    return x, y


@dataclass(frozen=True)
class GaugeField:
    """Fluctuation link phases on a degree-d background."""

    geom: TorusGeometry
    degree: int
    theta_x: np.ndarray
    theta_y: np.ndarray

    def __post_init__(self):
        for t in (self.theta_x, self.theta_y):
            if t.shape != self.geom.shape:
                raise ValueError("link array shape mismatch")


@dataclass(frozen=True)
class MatterField:
    """Complex section of the degree-d bundle (values at sites)."""

    geom: TorusGeometry
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.geom.shape:
            raise ValueError("matter array shape mismatch")


def zero_gauge(geom, degree=0):
    z = np.zeros(geom.shape)
    return GaugeField(geom, int(degree), z, z.copy())


def flux_per_plaquette(geom, degree):
    """The folded uniform background flux 2*pi*d/(N1*N2) in radians."""
    return TWO_PI * degree / (geom.N1 * geom.N2)


def background_links(geom, degree):
    """Background transport phases realizing one uniform flux quantum per
    plaquette: Landau gauge in y with a compensating seam column in x.

    Every plaquette holonomy is exactly exp(i * 2*pi*d/(N1*N2)); the real
    curl equals that constant except on the seam row, so curvature is taken
    from the folded constant, never from these raw phases.
    """
    phi = flux_per_plaquette(geom, degree)
    bgx = np.zeros(geom.shape)
    bgy = phi * np.arange(geom.N1)[:, None] * np.ones((1, geom.N2))
    bgx[geom.N1 - 1, :] = -phi * geom.N1 * np.arange(geom.N2)
    return bgx, bgy


def transport(gauge):
    """Total transport factors Ux, Uy = exp(i (background + theta))."""
    bgx, bgy = background_links(gauge.geom, gauge.degree)
    return np.exp(1j * (bgx + gauge.theta_x)), np.exp(1j * (bgy + gauge.theta_y))


def plaquette_flux(gauge):
    """Per-plaquette flux in radians: folded background + curl(theta)."""
    return flux_per_plaquette(gauge.geom, gauge.degree) + kernels.curl_plaquette(
        gauge.theta_x, gauge.theta_y
    )


def curvature(gauge):
    """Curvature density kappa = flux / (h1 h2) on plaquettes."""
    g = gauge.geom
    return plaquette_flux(gauge) / (g.h1 * g.h2)


def total_flux(gauge):
    """Integral of the curvature; equals 2*pi*degree exactly (curl telescopes)."""
    g = gauge.geom
    return float(np.sum(curvature(gauge))) * g.h1 * g.h2


def gauge_transform(gauge, u, matter=None):
    """Apply the gauge transformation with periodic gauge function u.

    theta += du (lattice gradient), matter *= exp(i u).
    """
    g = gauge.geom
    if u.shape != g.shape:
        raise ValueError("gauge function shape mismatch")
    tx = gauge.theta_x + np.roll(u, -1, axis=0) - u
    ty = gauge.theta_y + np.roll(u, -1, axis=1) - u
    out = replace(gauge, theta_x=tx, theta_y=ty)
    if matter is None:
        return out
    new_m = replace(matter, values=np.exp(1j * u) * matter.values)
    return out, new_m


def dbar(gauge, values):
    """Covariant (D_x + i D_y)/2 acting on matter values (plain array in/out)."""
    Ux, Uy = transport(gauge)
    return kernels.dbar_apply(Ux, Uy, values, gauge.geom.h1, gauge.geom.h2)


def partial(gauge, values):
    """Covariant (D_x - i D_y)/2; minus its adjoint is dbar's adjoint."""
    Ux, Uy = transport(gauge)
    return kernels.partial_apply(Ux, Uy, values, gauge.geom.h1, gauge.geom.h2)


def divergence(gauge):
    """Site divergence of the fluctuation links (adjoint to the gradient)."""
    g = gauge.geom
    dx = (gauge.theta_x - np.roll(gauge.theta_x, 1, axis=0)) / (g.h1 * g.h1)
    dy = (gauge.theta_y - np.roll(gauge.theta_y, 1, axis=1)) / (g.h2 * g.h2)
    return dx + dy


def coulomb_project(gauge, fold_harmonic=True):
    """Project the fluctuation links onto the Coulomb slice.

    Removes the pure-gradient part (FFT Poisson solve, so the divergence of
    the result vanishes to rounding) and, when fold_harmonic, folds the
    constant harmonic part into (-pi/N, pi/N] per direction by subtracting a
    large gauge transformation.  Folding changes the representative within
    the gauge class; matter fields tracked alongside must be rotated by the
    corresponding linear phase by the caller if exact pairing is needed.
    """
    g = gauge.geom
    div = divergence(gauge)
    k1 = np.fft.fftfreq(g.N1)[:, None]
    k2 = np.fft.fftfreq(g.N2)[None, :]
    lam = (4.0 * np.sin(np.pi * k1) ** 2 / (g.h1 * g.h1)
           + 4.0 * np.sin(np.pi * k2) ** 2 / (g.h2 * g.h2))
    lam[0, 0] = 1.0
    # div(du) = Lap u and the 5-point Laplacian has symbol -lam
    u_hat = -np.fft.fft2(div) / lam
    u_hat[0, 0] = 0.0
    u = np.real(np.fft.ifft2(u_hat))
    tx = gauge.theta_x - (np.roll(u, -1, axis=0) - u)
    ty = gauge.theta_y - (np.roll(u, -1, axis=1) - u)
    if fold_harmonic:
        kx = np.rint(np.mean(tx) * g.N1 / TWO_PI)
        ky = np.rint(np.mean(ty) * g.N2 / TWO_PI)
        tx = tx - TWO_PI * kx / g.N1
        ty = ty - TWO_PI * ky / g.N2
    return replace(gauge, theta_x=tx, theta_y=ty)
