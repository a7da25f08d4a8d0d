# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.

Same algorithms and signatures as ``_fallback``; see that module for the
reference implementations.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, atan2, cos, exp, fabs, floor, hypot, log, sin, sqrt

from ._coeffs import (
    ASYMPTOTIC_COEFS,
    ASYMPTOTIC_X,
    INV_SQRT_PI,
    RYBICKI_H,
    RYBICKI_OFFSETS,
    SERIES_COEFS,
    SERIES_RADIUS,
    STRIP_HALFWIDTH,
    WEIDEMAN_COEFS,
    WEIDEMAN_L,
)

cnp.import_array()

cdef double[::1] _wcoef = np.ascontiguousarray(WEIDEMAN_COEFS, dtype=float)
cdef double _wl = WEIDEMAN_L
cdef double[::1] _acoef = np.ascontiguousarray(ASYMPTOTIC_COEFS, dtype=float)
cdef double[::1] _roff = np.ascontiguousarray(RYBICKI_OFFSETS, dtype=float)
cdef double _rh = RYBICKI_H
cdef double[::1] _rgauss = np.exp(-(np.asarray(RYBICKI_OFFSETS) * RYBICKI_H) ** 2)
cdef double _strip = STRIP_HALFWIDTH
cdef double[::1] _scoef = np.ascontiguousarray(SERIES_COEFS, dtype=float)
cdef double _srad = SERIES_RADIUS
cdef double _ax = ASYMPTOTIC_X
cdef double _isp = INV_SQRT_PI


cdef inline double complex cexp_(double complex z) nogil:
    cdef double e = exp(z.real)
    return e * cos(z.imag) + 1j * (e * sin(z.imag))


cdef inline double complex clog_(double complex z) nogil:
    return log(hypot(z.real, z.imag)) + 1j * atan2(z.imag, z.real)


cdef double complex _weideman(double complex z):
    cdef double complex iz = 1j * z
    cdef double complex lmz = _wl - iz
    cdef double complex Z = (_wl + iz) / lmz
    cdef double complex p = 0
    cdef Py_ssize_t k
    for k in range(_wcoef.shape[0]):
        p = p * Z + _wcoef[k]
    return 2.0 * p / (lmz * lmz) + _isp / lmz


cdef double complex _w_scalar(double complex z):
    cdef double y = z.imag
    cdef double complex F, d, u, acc, zz
    cdef double n0
    cdef Py_ssize_t k
    if fabs(y) <= _strip:
        zz = -z * z
        if hypot(z.real, z.imag) < _srad:
            u = z * z
            acc = 0
            for k in range(_scoef.shape[0] - 1, -1, -1):
                acc = acc * u + _scoef[k]
            F = acc * z
        elif fabs(z.real) < _ax:
            n0 = 2.0 * floor(z.real / (2.0 * _rh) + 0.5)
            # exp(-(xp - n h)^2) = exp(-xp^2) exp(2 xp n h) exp(-(n h)^2),
            # with the middle factor advanced by a constant ratio
            d = z - n0 * _rh
            u = cexp_(2.0 * d * _rh * _roff[0])
            acc = cexp_(4.0 * d * _rh)
            F = 0
            for k in range(_roff.shape[0]):
                F = F + u * _rgauss[k] / (_roff[k] + n0)
                u = u * acc
            F = F * cexp_(-d * d) * _isp
        else:
            u = 1.0 / (z * z)
            acc = 0
            for k in range(_acoef.shape[0] - 1, -1, -1):
                acc = acc * u + _acoef[k]
            F = acc / z
        return cexp_(zz) + 2j * _isp * F
    if y > 0:
        return _weideman(z)
    return 2.0 * cexp_(-z * z) - _weideman(-z)


def faddeeva(z):
    """Faddeeva function w(z) for a 1-D complex array."""
    cdef const double complex[::1] zv = np.ascontiguousarray(z, dtype=complex)
    out = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    for i in range(zv.shape[0]):
        ov[i] = _w_scalar(zv[i])
    return out


def discrete_levelshift(z, poles, weights):
    """Return ``K(z) = sum w_j / (z - p_j)`` and its derivative."""
    cdef const double complex[::1] zv = np.ascontiguousarray(z, dtype=complex)
    cdef const double complex[::1] pv = np.ascontiguousarray(poles, dtype=complex)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=float)
    K = np.empty(zv.shape[0], dtype=complex)
    dK = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] Kv = K
    cdef double complex[::1] dKv = dK
    cdef Py_ssize_t i, j
    cdef double complex r, acc, dacc, zi
    with nogil:
        for i in range(zv.shape[0]):
            acc = 0
            dacc = 0
            zi = zv[i]
            for j in range(pv.shape[0]):
                r = 1.0 / (zi - pv[j])
                acc = acc + wv[j] * r
                dacc = dacc - wv[j] * r * r
            Kv[i] = acc
            dKv[i] = dacc
    return K, dK


def tabulated_levelshift(zeta, nodes, rho, kinks):
    """First-sheet level shift of a piecewise-linear density."""
    zeta = np.ascontiguousarray(zeta, dtype=complex)
    zeta = zeta.real + 1j * (zeta.imag + 0.0)
    cdef const double complex[::1] zv = zeta
    cdef const double[::1] xv = np.ascontiguousarray(nodes, dtype=float)
    cdef const double[::1] rv = np.ascontiguousarray(rho, dtype=float)
    cdef const double[::1] kv = np.ascontiguousarray(kinks, dtype=float)
    K = np.empty(zv.shape[0], dtype=complex)
    dK = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] Kv = K
    cdef double complex[::1] dKv = dK
    cdef Py_ssize_t i, k, n = xv.shape[0]
    cdef double complex diff, L, acc, dacc
    cdef int hit
    cdef double r0 = rv[0]
    cdef double rN = rv[n - 1]
    with nogil:
        for i in range(zv.shape[0]):
            acc = 0
            dacc = 0
            hit = 0
            for k in range(n):
                diff = zv[i] - xv[k]
                if diff.real == 0 and diff.imag == 0:
                    if kv[k] != 0:
                        hit = 1
                    continue
                L = clog_(diff)
                acc = acc + kv[k] * diff * L
                dacc = dacc + kv[k] * L
            if r0 != 0:
                diff = zv[i] - xv[0]
                acc = acc + r0 * clog_(diff)
                dacc = dacc + r0 / diff
            if rN != 0:
                diff = zv[i] - xv[n - 1]
                acc = acc - rN * clog_(diff)
                dacc = dacc - rN / diff
            Kv[i] = acc - (rN - r0)
            dKv[i] = INFINITY if hit else dacc
    return K, dK


def volterra(kernel, double complex omega, double h, Py_ssize_t n):
    """Implicit trapezoid stepper for y' = -i omega y - (K * y)(t), y(0) = 1."""
    cdef const double complex[::1] kv = np.ascontiguousarray(kernel, dtype=complex)
    cdef Py_ssize_t M = kv.shape[0]
    y = np.empty(n + 1, dtype=complex)
    f = np.empty(n + 1, dtype=complex)
    cdef double complex[::1] yv = y
    cdef double complex[::1] fv = f
    cdef double complex k0 = kv[0]
    cdef double complex denom = 1.0 + 0.5j * h * omega + 0.25 * h * h * k0
    cdef double complex s, yk
    cdef Py_ssize_t k, m, lo
    yv[0] = 1.0
    fv[0] = -1j * omega
    with nogil:
        for k in range(1, n + 1):
            lo = k - M + 1
            if lo < 1:
                lo = 1
            s = 0
            for m in range(lo, k):
                s = s + kv[k - m] * yv[m]
            if k < M:
                s = s + 0.5 * kv[k] * yv[0]
            s = h * s
            yk = (yv[k - 1] + 0.5 * h * fv[k - 1] - 0.5 * h * s) / denom
            yv[k] = yk
            fv[k] = -1j * omega * yk - s - 0.5 * h * k0 * yk
    return y, f


cdef inline void _sec_eval(Py_ssize_t a, double s, const double[::1] fr, const double[::1] w,
                           double omega_c, double* F, double* dF) nogil:
    cdef double base = fr[a]
    cdef double acc = 0, dacc = 0, r
    cdef Py_ssize_t j
    for j in range(fr.shape[0]):
        r = 1.0 / ((base - fr[j]) + s)
        acc += w[j] * r
        dacc += w[j] * r * r
    F[0] = (base - omega_c) + s - acc
    dF[0] = 1.0 + dacc


def secular_roots(freqs, weights, double omega_c):
    """All roots of ``E - omega_c - sum w_j / (E - w_j) = 0`` as anchor + offset."""
    cdef const double[::1] fr = np.ascontiguousarray(freqs, dtype=float)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=float)
    cdef Py_ssize_t N = fr.shape[0]
    anchor = np.empty(N + 1, dtype=np.int64)
    off = np.empty(N + 1, dtype=float)
    cdef long long[::1] av = anchor
    cdef double[::1] ov = off
    cdef double eps = np.finfo(float).eps
    cdef double tot = 0, scale, S, lo, hi, mid, F, dF, F2, dF2, snew, gap
    cdef Py_ssize_t q, a, it
    for q in range(N):
        tot += w[q]
    scale = max(fabs(fr[0] - omega_c), fabs(fr[N - 1] - omega_c), sqrt(tot), 1e-300)
    with nogil:
        for q in range(N + 1):
            if q == 0:
                a = 0
                S = scale
                _sec_eval(0, -S, fr, w, omega_c, &F, &dF)
                while F >= 0:
                    S *= 2.0
                    _sec_eval(0, -S, fr, w, omega_c, &F, &dF)
                lo = -S
                hi = 0.0
            elif q == N:
                a = N - 1
                S = scale
                _sec_eval(a, S, fr, w, omega_c, &F, &dF)
                while F <= 0:
                    S *= 2.0
                    _sec_eval(a, S, fr, w, omega_c, &F, &dF)
                lo = 0.0
                hi = S
            else:
                gap = fr[q] - fr[q - 1]
                _sec_eval(q - 1, 0.5 * gap, fr, w, omega_c, &F, &dF)
                if F > 0:
                    a = q - 1
                    lo = 0.0
                    hi = 0.5 * gap
                else:
                    a = q
                    lo = -0.5 * gap
                    hi = 0.0
            for it in range(4000):
                mid = 0.5 * (lo + hi)
                _sec_eval(a, mid, fr, w, omega_c, &F, &dF)
                if F > 0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 4 * eps * max(fabs(lo), fabs(hi)) or hi - lo <= 1e-300:
                    break
            mid = 0.5 * (lo + hi)
            _sec_eval(a, mid, fr, w, omega_c, &F, &dF)
            snew = mid - F / dF
            _sec_eval(a, snew, fr, w, omega_c, &F2, &dF2)
            if snew >= lo and snew <= hi and fabs(F2) < fabs(F):
                mid = snew
            av[q] = a
            ov[q] = mid
    return anchor, off
