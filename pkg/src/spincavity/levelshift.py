"""Level-shift function of the spin ensemble and its analytic continuation.

For a coupling density ``rho`` and homogeneous width ``gamma_hom`` the
level shift is

    K(z) = integral rho(w) / (z - w + i gamma_hom / 2) dw,

analytic above the cut line ``Im z = -gamma_hom / 2``. :class:`LevelShift`
returns the first-sheet value on and above that line (the boundary value
from above on the line itself) and the analytic continuation from above
below it. The first-sheet value below the line is available explicitly
through ``sheet="first"``.

Discrete ensembles give a meromorphic sum with no cut. The Lorentzian
continuation is a single rational function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import InvalidInput, SingularPoint
from .faddeeva import wofz
from .model import CouplingDensity, Discrete, Ensemble, Gaussian, Lorentzian, Tabulated

_SHEETS = ("auto", "first", "continued")
_ASYM_ORDER = 14
_ASYM_RATIO = 40.0


@dataclass(frozen=True)
class CutDecomposition:
    """Real and imaginary parts of the boundary value on the cut line.

    ``K(omega - i gamma_hom / 2 + i0) = delta_c - i gamma_c / 2``.
    """

    omega: np.ndarray
    delta_c: np.ndarray
    gamma_c: np.ndarray


def _as_source(source) -> CouplingDensity:
    if source is None:
        return Discrete(None)
    if isinstance(source, Ensemble):
        return Discrete(source)
    if isinstance(source, CouplingDensity):
        return source
    raise InvalidInput(f"cannot build a level shift from {type(source).__name__}")


class LevelShift:
    """Sheet-aware evaluator of the level-shift function.

    Parameters
    ----------
    source : CouplingDensity, Ensemble or None
        ``None`` (or an empty discrete source) is the bare cavity, ``K = 0``.

    Notes
    -----
    Sheet semantics of :meth:`evaluate` for continuous sources, with
    ``c = -gamma_hom / 2`` the cut line:

    ``sheet="auto"``
        first sheet for ``Im z >= c`` (boundary value from above on the
        line), continuation from above for ``Im z < c``.
    ``sheet="first"``
        the integral itself everywhere.
    ``sheet="continued"``
        the continuation from above everywhere; identical to ``"auto"``.
    """

    def __init__(self, source=None):
        self.source = _as_source(source)
        src = self.source
        self.gamma_hom = float(src.gamma_hom)
        if isinstance(src, Tabulated):
            self._kinks = src.kinks
            raw = np.empty(_ASYM_ORDER + 1)
            from .model import _tab_moments

            raw0 = _tab_moments(src, 1, 0.0)
            self._mu = raw0[1] / raw0[0] if raw0[0] > 0 else 0.5 * (src.omega[0] + src.omega[-1])
            raw[:] = _tab_moments(src, _ASYM_ORDER, self._mu)
            self._raw = raw
            self._reach = max(abs(src.omega[0] - self._mu), abs(src.omega[-1] - self._mu))

    # -- basic properties --------------------------------------------------

    @property
    def strength(self) -> float:
        return self.source.strength

    @property
    def has_cut(self) -> bool:
        return self.source.is_continuous

    @property
    def cut(self) -> float | None:
        """Imaginary part of the cut line, or ``None`` for discrete sources."""
        return -0.5 * self.gamma_hom if self.has_cut else None

    @property
    def scale(self) -> float:
        return self.source.scale

    def sheet_of(self, z) -> np.ndarray:
        """Label ``"first"``, ``"cut"`` or ``"second"`` for each point."""
        z = np.asarray(z, dtype=complex)
        if not self.has_cut:
            return np.full(z.shape, "first", dtype=object)
        c = self.cut
        out = np.where(z.imag > c, "first", np.where(z.imag == c, "cut", "second"))
        return out.astype(object)

    # -- evaluation --------------------------------------------------------

    def __call__(self, z, sheet: str = "auto"):
        K, _ = self.evaluate(z, sheet)
        return K

    def derivative(self, z, sheet: str = "auto"):
        _, dK = self.evaluate(z, sheet)
        return dK

    def evaluate(self, z, sheet: str = "auto"):
        """Return ``(K(z), K'(z))`` on the requested sheet.

        Parameters
        ----------
        z : complex or array_like
        sheet : {"auto", "first", "continued"}

        Returns
        -------
        K, dK : complex or ndarray
        """
        if sheet not in _SHEETS:
            raise InvalidInput(f"sheet must be one of {_SHEETS}, got {sheet!r}")
        arr = np.asarray(z, dtype=complex)
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("level shift evaluated at a non-finite point")
        flat = arr.ravel()
        K, dK = self._eval(flat, sheet)
        K = K.reshape(arr.shape)
        dK = dK.reshape(arr.shape)
        if arr.ndim == 0:
            return K[()], dK[()]
        return K, dK

    def _eval(self, z: np.ndarray, sheet: str):
        src = self.source
        if isinstance(src, Discrete):
            return self._eval_discrete(z)
        zeta = z + 0.5j * self.gamma_hom
        below = zeta.imag < 0
        first = sheet == "first"
        if isinstance(src, Lorentzian):
            O2 = src.strength**2
            hw = 0.5 * src.width
            pole = np.where(first & below, src.center + 1j * hw, src.center - 1j * hw)
            d = zeta - pole
            return O2 / d, -O2 / (d * d)
        if isinstance(src, Gaussian):
            s2 = math.sqrt(2.0) * src.sigma
            c = math.sqrt(math.pi / 2.0) * src.strength**2 / src.sigma
            xi = (zeta - src.center) / s2
            K = np.empty_like(xi)
            dK = np.empty_like(xi)
            flip = below if first else np.zeros_like(below)
            keep = ~flip
            if keep.any():
                w = wofz(xi[keep])
                K[keep] = -1j * c * w
                dK[keep] = -1j * c * (-2.0 * xi[keep] * w + 2j / math.sqrt(math.pi)) / s2
            if flip.any():
                w = wofz(-xi[flip])
                K[flip] = 1j * c * w
                dK[flip] = -1j * c * (-2.0 * (-xi[flip]) * w + 2j / math.sqrt(math.pi)) / s2
            return K, dK
        if isinstance(src, Tabulated):
            return self._eval_tabulated(zeta, below if not first else np.zeros_like(below))
        raise InvalidInput(f"unsupported source {type(src).__name__}")

    def _eval_discrete(self, z: np.ndarray):
        e = self.source.ensemble
        if e is None:
            return np.zeros_like(z), np.zeros_like(z)
        poles = e.complex_frequencies
        w2 = e.couplings**2
        with np.errstate(divide="ignore", invalid="ignore"):
            K, dK = kernels.discrete_levelshift(z, poles, w2)
        bad = ~np.isfinite(K)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            hits = np.flatnonzero((poles == z[i]) & (w2 > 0))
            j = int(hits[0]) if hits.size else None
            raise SingularPoint(f"level shift evaluated on the pole of spin {j} at z={z[i]!r}", index=j)
        return K, dK

    def _eval_tabulated(self, zeta: np.ndarray, continue_below: np.ndarray):
        src = self.source
        K = np.empty_like(zeta)
        dK = np.empty_like(zeta)
        u = zeta - self._mu
        far = np.abs(u) > _ASYM_RATIO * self._reach
        near = ~far
        if far.any():
            uf = u[far]
            inv = 1.0 / uf
            acc = np.zeros_like(uf)
            dacc = np.zeros_like(uf)
            p = inv.copy()
            for k in range(_ASYM_ORDER + 1):
                acc += self._raw[k] * p
                dacc -= (k + 1) * self._raw[k] * p * inv
                p = p * inv
            K[far] = acc
            dK[far] = dacc
        if near.any():
            Kn, dKn = kernels.tabulated_levelshift(zeta[near], src.omega, src.rho, self._kinks)
            K[near] = Kn
            dK[near] = dKn
        jump = continue_below & (zeta.real > src.omega[0]) & (zeta.real < src.omega[-1])
        if jump.any():
            zj = zeta[jump]
            i = np.clip(np.searchsorted(src.omega, zj.real, side="right") - 1, 0, src.omega.size - 2)
            s = src.slopes[i]
            rho_lin = src.rho[i] + s * (zj - src.omega[i])
            K[jump] -= 2j * math.pi * rho_lin
            dK[jump] -= 2j * math.pi * s
        return K, dK

    # -- densities and the cut -------------------------------------------

    def density(self, omega):
        """Coupling density ``rho(omega)`` (without homogeneous broadening)."""
        if not self.has_cut:
            raise InvalidInput("discrete sources have no pointwise density")
        return self.source.density(omega)

    def broadened_density(self, omega):
        """``-Im K(omega) / pi`` on the real axis.

        This is the density convolved with a Lorentzian of FWHM
        ``gamma_hom``; it equals :meth:`density` when ``gamma_hom = 0``.
        """
        if not self.has_cut:
            raise InvalidInput("discrete sources have no pointwise density")
        omega = np.asarray(omega, dtype=float)
        return -np.imag(self(omega.astype(complex), sheet="first")) / math.pi

    def cut_decomposition(self, omega) -> CutDecomposition:
        """Principal value ``Delta_c`` and width ``Gamma_c = 2 pi rho`` on the cut line.

        Parameters
        ----------
        omega : float or array_like
            Real frequencies; the evaluation points are
            ``omega - i gamma_hom / 2``.
        """
        if not self.has_cut:
            raise InvalidInput("discrete sources have no branch cut")
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        z = w + 1j * self.cut
        K = np.atleast_1d(self(z))
        gamma_c = 2.0 * math.pi * np.asarray(self.density(w), dtype=float)
        return CutDecomposition(w, K.real.copy(), gamma_c)


def memory_kernel(source, t):
    """Memory kernel ``K(t) = integral rho(w) exp(-i w t - gamma_hom t / 2) dw``.

    Parameters
    ----------
    source : CouplingDensity, Ensemble or None
    t : float or array_like
        Non-negative times.

    Returns
    -------
    complex or ndarray
    """
    src = _as_source(source)
    ta = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(ta)) or np.any(ta < 0):
        raise InvalidInput("memory kernel needs finite t >= 0")
    tt = ta.ravel()
    if isinstance(src, Discrete):
        if src.ensemble is None:
            out = np.zeros(tt.shape, dtype=complex)
        else:
            e = src.ensemble
            out = np.empty(tt.shape, dtype=complex)
            w2 = e.couplings**2
            p = e.complex_frequencies
            step = max(1, (1 << 18) // max(1, p.size))
            for i in range(0, tt.size, step):
                out[i : i + step] = np.exp(-1j * np.outer(tt[i : i + step], p)) @ w2
    elif isinstance(src, Lorentzian):
        out = src.strength**2 * np.exp(-1j * src.center * tt - 0.5 * (src.width + src.gamma_hom) * tt)
    elif isinstance(src, Gaussian):
        out = src.strength**2 * np.exp(
            -1j * src.center * tt - 0.5 * src.gamma_hom * tt - 0.5 * (src.sigma * tt) ** 2
        )
    elif isinstance(src, Tabulated):
        out = _tabulated_fourier(src, tt) * np.exp(-0.5 * src.gamma_hom * tt)
    else:
        raise InvalidInput(f"unsupported source {type(src).__name__}")
    out = out.reshape(ta.shape)
    return out[()] if out.ndim == 0 else out


def _tabulated_fourier(src: Tabulated, t: np.ndarray) -> np.ndarray:
    # exact transform of the piecewise-linear interpolant, segment by segment
    a, b = src.omega[:-1], src.omega[1:]
    m = 0.5 * (a + b)
    d = 0.5 * (b - a)
    rm = 0.5 * (src.rho[:-1] + src.rho[1:])
    s = src.slopes
    out = np.empty(t.shape, dtype=complex)
    step = max(1, (1 << 18) // max(1, m.size))
    for i in range(0, t.size, step):
        tc = t[i : i + step, None]
        x = d[None, :] * tc
        small = np.abs(x) < 1e-3
        with np.errstate(divide="ignore", invalid="ignore"):
            sinc = np.where(small, 1.0 - x * x / 6.0, np.sin(x) / np.where(small, 1.0, x))
            # j = integral_0^d u sin(u t) du
            jj = np.where(
                small,
                d[None, :] ** 3 * tc / 3.0 - d[None, :] ** 5 * tc**3 / 30.0,
                (np.sin(x) - x * np.cos(x)) / np.where(small, 1.0, tc * tc),
            )
        seg = np.exp(-1j * m[None, :] * tc) * (rm[None, :] * 2.0 * d[None, :] * sinc - 2j * s[None, :] * jj)
        out[i : i + step] = seg.sum(axis=1)
    return out
