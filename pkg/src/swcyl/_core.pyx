# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in _ref.py.

Same contracts as the reference module: arrays are [..., i, j] with i the x
index, leading axes are batches, and all transverse directions are periodic.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2

cnp.import_array()

ctypedef fused realcplx:
    double
    double complex


cdef inline Py_ssize_t _up(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    return i + 1 if i + 1 < n else 0


cdef inline Py_ssize_t _dn(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    return i - 1 if i > 0 else n - 1


def _as_batch(a):
    if a.dtype != np.complex128:
        a = np.asarray(a, dtype=np.float64)
    a = np.ascontiguousarray(a)
    return a.reshape((-1,) + a.shape[-2:]), a.shape


def _curl(const realcplx[:, :, ::1] tx, const realcplx[:, :, ::1] ty,
          realcplx[:, :, ::1] out):
    cdef Py_ssize_t b, i, j, nb = tx.shape[0], n1 = tx.shape[1], n2 = tx.shape[2]
    with nogil:
        for b in range(nb):
            for i in range(n1):
                for j in range(n2):
                    out[b, i, j] = (tx[b, i, j] + ty[b, _up(i, n1), j]
                                    - tx[b, i, _up(j, n2)] - ty[b, i, j])


def curl_plaquette(tx, ty):
    """Oriented plaquette sum tx(i,j) + ty(i+1,j) - tx(i,j+1) - ty(i,j)."""
    txb, shape = _as_batch(np.asarray(tx))
    tyb, _ = _as_batch(np.asarray(ty, dtype=txb.dtype))
    out = np.empty_like(txb)
    _curl(txb, tyb, out)
    return out.reshape(shape)


def _curl_adj(const realcplx[:, :, ::1] v, realcplx[:, :, ::1] gx,
              realcplx[:, :, ::1] gy):
    cdef Py_ssize_t b, i, j, nb = v.shape[0], n1 = v.shape[1], n2 = v.shape[2]
    with nogil:
        for b in range(nb):
            for i in range(n1):
                for j in range(n2):
                    gx[b, i, j] = v[b, i, j] - v[b, i, _dn(j, n2)]
                    gy[b, i, j] = v[b, _dn(i, n1), j] - v[b, i, j]


def curl_adjoint(v):
    """Adjoint of curl_plaquette: returns (gx, gy) with <v, curl t> = <gx,tx>+<gy,ty>."""
    vb, shape = _as_batch(np.asarray(v))
    gx = np.empty_like(vb)
    gy = np.empty_like(vb)
    _curl_adj(vb, gx, gy)
    return gx.reshape(shape), gy.reshape(shape)


def _avg4_sp(const realcplx[:, :, ::1] s, realcplx[:, :, ::1] out):
    cdef Py_ssize_t b, i, j, nb = s.shape[0], n1 = s.shape[1], n2 = s.shape[2]
    with nogil:
        for b in range(nb):
            for i in range(n1):
                for j in range(n2):
                    out[b, i, j] = 0.25 * (s[b, i, j] + s[b, _up(i, n1), j]
                                           + s[b, i, _up(j, n2)]
                                           + s[b, _up(i, n1), _up(j, n2)])


def avg4_site_to_plaq(s):
    """Average of the four corner sites of each plaquette."""
    sb, shape = _as_batch(np.asarray(s))
    out = np.empty_like(sb)
    _avg4_sp(sb, out)
    return out.reshape(shape)


def _avg4_ps(const realcplx[:, :, ::1] p, realcplx[:, :, ::1] out):
    cdef Py_ssize_t b, i, j, nb = p.shape[0], n1 = p.shape[1], n2 = p.shape[2]
    with nogil:
        for b in range(nb):
            for i in range(n1):
                for j in range(n2):
                    out[b, i, j] = 0.25 * (p[b, i, j] + p[b, _dn(i, n1), j]
                                           + p[b, i, _dn(j, n2)]
                                           + p[b, _dn(i, n1), _dn(j, n2)])


def avg4_plaq_to_site(p):
    """Adjoint of avg4_site_to_plaq (average of the four plaquettes at a site)."""
    pb, shape = _as_batch(np.asarray(p))
    out = np.empty_like(pb)
    _avg4_ps(pb, out)
    return out.reshape(shape)


def _prep_cplx(Ux, Uy, phi):
    phi = np.ascontiguousarray(phi, dtype=np.complex128)
    Ux = np.ascontiguousarray(np.broadcast_to(Ux, phi.shape), dtype=np.complex128)
    Uy = np.ascontiguousarray(np.broadcast_to(Uy, phi.shape), dtype=np.complex128)
    shape = phi.shape
    flat = (-1,) + shape[-2:]
    return Ux.reshape(flat), Uy.reshape(flat), phi.reshape(flat), shape


def _dirac(const double complex[:, :, ::1] Ux, const double complex[:, :, ::1] Uy,
           const double complex[:, :, ::1] phi, double h1, double h2,
           double ysign, double complex[:, :, ::1] out):
    # 0.5 * (D_x phi + ysign * i * D_y phi), central covariant differences
    cdef Py_ssize_t b, i, j
    cdef Py_ssize_t nb = phi.shape[0], n1 = phi.shape[1], n2 = phi.shape[2]
    cdef double complex dx, dy, iy
    iy = ysign * 1j
    with nogil:
        for b in range(nb):
            for i in range(n1):
                for j in range(n2):
                    dx = (Ux[b, i, j].conjugate() * phi[b, _up(i, n1), j]
                          - Ux[b, _dn(i, n1), j] * phi[b, _dn(i, n1), j]) / (2.0 * h1)
                    dy = (Uy[b, i, j].conjugate() * phi[b, i, _up(j, n2)]
                          - Uy[b, i, _dn(j, n2)] * phi[b, i, _dn(j, n2)]) / (2.0 * h2)
                    out[b, i, j] = 0.5 * (dx + iy * dy)


def dbar_apply(Ux, Uy, phi, h1, h2):
    """(D_x + i D_y) phi / 2 with central covariant differences."""
    Uxb, Uyb, phib, shape = _prep_cplx(Ux, Uy, phi)
    out = np.empty_like(phib)
    _dirac(Uxb, Uyb, phib, h1, h2, 1.0, out)
    return out.reshape(shape)


def partial_apply(Ux, Uy, phi, h1, h2):
    """(D_x - i D_y) phi / 2 with central covariant differences."""
    Uxb, Uyb, phib, shape = _prep_cplx(Ux, Uy, phi)
    out = np.empty_like(phib)
    _dirac(Uxb, Uyb, phib, h1, h2, -1.0, out)
    return out.reshape(shape)


def _angles(const double complex[:, :, ::1] Ux, const double complex[:, :, ::1] Uy,
            const double complex[:, :, ::1] a, double[:, :, ::1] cx,
            double[:, :, ::1] cy):
    cdef Py_ssize_t b, i, j, nb = a.shape[0], n1 = a.shape[1], n2 = a.shape[2]
    cdef double complex zx, zy
    with nogil:
        for b in range(nb):
            for i in range(n1):
                for j in range(n2):
                    zx = (a[b, i, j].conjugate() * Ux[b, i, j].conjugate()
                          * a[b, _up(i, n1), j])
                    zy = (a[b, i, j].conjugate() * Uy[b, i, j].conjugate()
                          * a[b, i, _up(j, n2)])
                    cx[b, i, j] = atan2(zx.imag, zx.real)
                    cy[b, i, j] = atan2(zy.imag, zy.real)


def link_angles(Ux, Uy, alpha):
    """Gauge-invariant phase increments arg(conj(a(n)) U*(n->m) a(m)) per link."""
    Uxb, Uyb, ab, shape = _prep_cplx(Ux, Uy, alpha)
    cx = np.empty(ab.shape, dtype=np.float64)
    cy = np.empty(ab.shape, dtype=np.float64)
    _angles(Uxb, Uyb, ab, cx, cy)
    return cx.reshape(shape), cy.reshape(shape)


def _lap7(const double[:, :, ::1] f, const double[:, :, ::1] wt,
          const double[:, :, ::1] wx, const double[:, :, ::1] wy,
          double ht, double h1, double h2, double[:, :, ::1] out):
    cdef Py_ssize_t m, i, j
    cdef Py_ssize_t nt = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    cdef double acc
    cdef double ih1 = 1.0 / (h1 * h1), ih2 = 1.0 / (h2 * h2), iht = 1.0 / (ht * ht)
    with nogil:
        for m in range(nt):
            for i in range(n1):
                for j in range(n2):
                    acc = (wx[m, i, j] * (f[m, _up(i, n1), j] - f[m, i, j])
                           - wx[m, _dn(i, n1), j] * (f[m, i, j] - f[m, _dn(i, n1), j])) * ih1
                    acc += (wy[m, i, j] * (f[m, i, _up(j, n2)] - f[m, i, j])
                            - wy[m, i, _dn(j, n2)] * (f[m, i, j] - f[m, i, _dn(j, n2)])) * ih2
                    if m + 1 < nt:
                        acc += wt[m, i, j] * (f[m + 1, i, j] - f[m, i, j]) * iht
                    if m > 0:
                        acc -= wt[m - 1, i, j] * (f[m, i, j] - f[m - 1, i, j]) * iht
                    out[m, i, j] = acc


def lap7_apply(f, wt, wx, wy, ht, h1, h2):
    """Flux-form weighted 7-point Laplacian on [0..Nt-1] x torus.

    Same contract as the reference version: wt sits on t-links (Nt-1 slabs),
    wx/wy on periodic transverse links, no flux through the t ends.
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    wt = np.ascontiguousarray(wt, dtype=np.float64)
    wx = np.ascontiguousarray(wx, dtype=np.float64)
    wy = np.ascontiguousarray(wy, dtype=np.float64)
    out = np.empty_like(f)
    _lap7(f, wt, wx, wy, ht, h1, h2, out)
    return out
