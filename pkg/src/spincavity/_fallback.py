"""Pure-NumPy implementations of the hot kernels.

Every function here has a compiled twin in ``_core.pyx`` with the same
signature and the same numerical algorithm. The two are cross-checked in
the test suite and compared in ``benchmarks/bench_kernels.py``.
"""
import numpy as np

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

_CHUNK = 1 << 18


def _weideman(z: np.ndarray) -> np.ndarray:
    L = WEIDEMAN_L
    iz = 1j * z
    lmz = L - iz
    Z = (L + iz) / lmz
    p = np.polyval(WEIDEMAN_COEFS, Z)
    return 2.0 * p / (lmz * lmz) + INV_SQRT_PI / lmz


def _dawson_rybicki(z: np.ndarray) -> np.ndarray:
    h = RYBICKI_H
    n0 = 2.0 * np.round(z.real / (2.0 * h))
    xp = z - n0 * h
    d = xp[:, None] - RYBICKI_OFFSETS[None, :] * h
    terms = np.exp(-d * d) / (RYBICKI_OFFSETS[None, :] + n0[:, None])
    return INV_SQRT_PI * terms.sum(axis=1)


def _dawson_series(z: np.ndarray) -> np.ndarray:
    u = z * z
    acc = np.zeros_like(z)
    for c in SERIES_COEFS[::-1]:
        acc = acc * u + c
    return acc * z


def _dawson_asymptotic(z: np.ndarray) -> np.ndarray:
    u = 1.0 / (z * z)
    acc = np.zeros_like(z)
    for c in ASYMPTOTIC_COEFS[::-1]:
        acc = acc * u + c
    return acc / z


def faddeeva(z: np.ndarray) -> np.ndarray:
    """Faddeeva function w(z) for a 1-D complex array."""
    z = np.ascontiguousarray(z, dtype=complex)
    out = np.empty_like(z)
    y = z.imag
    strip = np.abs(y) <= STRIP_HALFWIDTH
    small = np.abs(z) < SERIES_RADIUS
    near = strip & ~small & (np.abs(z.real) < ASYMPTOTIC_X)
    far = strip & ~small & ~near
    up = y > STRIP_HALFWIDTH
    down = y < -STRIP_HALFWIDTH
    if small.any():
        zs = z[small]
        out[small] = np.exp(-zs * zs) + 2j * INV_SQRT_PI * _dawson_series(zs)
    if near.any():
        zs = z[near]
        out[near] = np.exp(-zs * zs) + 2j * INV_SQRT_PI * _dawson_rybicki(zs)
    if far.any():
        zs = z[far]
        out[far] = np.exp(-zs * zs) + 2j * INV_SQRT_PI * _dawson_asymptotic(zs)
    if up.any():
        out[up] = _weideman(z[up])
    if down.any():
        zs = z[down]
        out[down] = 2.0 * np.exp(-zs * zs) - _weideman(-zs)
    return out


def discrete_levelshift(z: np.ndarray, poles: np.ndarray, weights: np.ndarray):
    """Return ``K(z) = sum w_j / (z - p_j)`` and its derivative."""
    z = np.ascontiguousarray(z, dtype=complex)
    K = np.empty_like(z)
    dK = np.empty_like(z)
    step = max(1, _CHUNK // max(1, poles.size))
    for i in range(0, z.size, step):
        r = 1.0 / (z[i : i + step, None] - poles[None, :])
        wr = weights[None, :] * r
        K[i : i + step] = wr.sum(axis=1)
        dK[i : i + step] = -(wr * r).sum(axis=1)
    return K, dK


def tabulated_levelshift(zeta: np.ndarray, nodes: np.ndarray, rho: np.ndarray, kinks: np.ndarray):
    """First-sheet level shift of a piecewise-linear density.

    ``kinks[k]`` is the jump in slope at ``nodes[k]`` (outer slopes zero).
    """
    zeta = np.ascontiguousarray(zeta, dtype=complex)
    zeta = zeta.real + 1j * (zeta.imag + 0.0)
    K = np.empty_like(zeta)
    dK = np.empty_like(zeta)
    r0, rN = rho[0], rho[-1]
    step = max(1, _CHUNK // max(1, nodes.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(0, zeta.size, step):
            zc = zeta[i : i + step]
            diff = zc[:, None] - nodes[None, :]
            hit = diff == 0
            L = np.where(hit, 0.0, np.log(diff))
            Kc = (diff * L) @ kinks - (rN - r0)
            dKc = L @ kinks
            if r0 != 0:
                Kc += r0 * L[:, 0]
                dKc += r0 / diff[:, 0]
            if rN != 0:
                Kc -= rN * L[:, -1]
                dKc -= rN / diff[:, -1]
            singular = (hit & (kinks != 0)[None, :]).any(axis=1)
            dKc[singular] = np.inf
            K[i : i + step] = Kc
            dK[i : i + step] = dKc
    return K, dK


def volterra(kernel: np.ndarray, omega: complex, h: float, n: int):
    """Implicit trapezoid stepper for y' = -i omega y - (K * y)(t), y(0) = 1.

    Parameters
    ----------
    kernel : ndarray
        Samples ``K(m h)``; the kernel is treated as zero beyond them.
    omega : complex
        Complex cavity frequency.
    h : float
        Step size.
    n : int
        Number of steps.

    Returns
    -------
    y, f : ndarray
        Solution and its derivative at ``t = 0, h, ..., n h``.
    """
    kernel = np.ascontiguousarray(kernel, dtype=complex)
    M = kernel.size
    y = np.empty(n + 1, dtype=complex)
    f = np.empty(n + 1, dtype=complex)
    y[0] = 1.0
    f[0] = -1j * omega
    k0 = kernel[0]
    denom = 1.0 + 0.5j * h * omega + 0.25 * h * h * k0
    for k in range(1, n + 1):
        lo = max(1, k - M + 1)
        s = np.dot(kernel[k - lo : 0 : -1], y[lo:k]) if lo < k else 0.0
        if k < M:
            s = s + 0.5 * kernel[k] * y[0]
        s = h * s
        yk = (y[k - 1] + 0.5 * h * f[k - 1] - 0.5 * h * s) / denom
        y[k] = yk
        f[k] = -1j * omega * yk - s - 0.5 * h * k0 * yk
    return y, f


def _secular_eval(anchor, s, freqs, weights, omega_c):
    base = freqs[anchor]
    F = np.empty(base.size)
    dF = np.empty(base.size)
    # rows in blocks so memory stays bounded for large ensembles
    step = max(1, _CHUNK // max(1, freqs.size))
    for i in range(0, base.size, step):
        b = base[i : i + step]
        sc = s[i : i + step]
        r = 1.0 / ((b[:, None] - freqs[None, :]) + sc[:, None])
        wr = weights[None, :] * r
        F[i : i + step] = (b - omega_c) + sc - wr.sum(axis=1)
        dF[i : i + step] = 1.0 + (wr * r).sum(axis=1)
    return F, dF


def secular_roots(freqs: np.ndarray, weights: np.ndarray, omega_c: float):
    """All roots of ``E - omega_c - sum w_j / (E - w_j) = 0``.

    Frequencies must be sorted, strictly increasing, with positive weights.
    Each root is returned as ``freqs[anchor] + offset`` so that roots lying
    extremely close to a spin frequency keep their full relative precision.
    """
    freqs = np.ascontiguousarray(freqs, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    N = freqs.size
    anchor = np.empty(N + 1, dtype=np.int64)
    lo = np.empty(N + 1)
    hi = np.empty(N + 1)
    scale = max(abs(freqs[0] - omega_c), abs(freqs[-1] - omega_c), np.sqrt(weights.sum()), 1e-300)

    # lower exterior root, below freqs[0]
    S = scale
    while _secular_eval(np.array([0]), np.array([-S]), freqs, weights, omega_c)[0][0] >= 0:
        S *= 2.0
    anchor[0], lo[0], hi[0] = 0, -S, 0.0
    # upper exterior root, above freqs[-1]
    S = scale
    while _secular_eval(np.array([N - 1]), np.array([S]), freqs, weights, omega_c)[0][0] <= 0:
        S *= 2.0
    anchor[N], lo[N], hi[N] = N - 1, 0.0, S
    if N > 1:
        gaps = np.diff(freqs)
        lower = np.arange(N - 1)
        Fm, _ = _secular_eval(lower, 0.5 * gaps, freqs, weights, omega_c)
        left = Fm > 0
        anchor[1:N] = np.where(left, lower, lower + 1)
        lo[1:N] = np.where(left, 0.0, -0.5 * gaps)
        hi[1:N] = np.where(left, 0.5 * gaps, 0.0)

    active = np.arange(N + 1)
    eps = np.finfo(float).eps
    for _ in range(4000):
        if active.size == 0:
            break
        a = anchor[active]
        mid = 0.5 * (lo[active] + hi[active])
        F, _ = _secular_eval(a, mid, freqs, weights, omega_c)
        pos = F > 0
        hi[active[pos]] = mid[pos]
        lo[active[~pos]] = mid[~pos]
        width = hi[active] - lo[active]
        mag = np.maximum(np.abs(lo[active]), np.abs(hi[active]))
        done = (width <= 4 * eps * mag) | (width <= 1e-300)
        active = active[~done]

    s = 0.5 * (lo + hi)
    F, dF = _secular_eval(anchor, s, freqs, weights, omega_c)
    s_new = s - F / dF
    F_new, _ = _secular_eval(anchor, s_new, freqs, weights, omega_c)
    ok = (s_new >= lo) & (s_new <= hi) & (np.abs(F_new) < np.abs(F))
    s = np.where(ok, s_new, s)
    return anchor, s
