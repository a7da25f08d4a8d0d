"""Recover the level shift and the coupling density from spectra.

The forward relation ``chi_cc(omega) = 1 / (omega - omega_c + i kappa - K(omega))``
is inverted point by point. When only the transmissivity is available, the
probe frequency is held fixed while the cavity is swept: ``|chi_cc|**2`` is
then an exact Lorentzian in ``omega_c`` whose center and width give the
real and imaginary part of ``K``. The density follows from
``rho = -Im K / pi + (gamma_hom / 2 pi) d(Re K)/d omega``, the first-order
correction for homogeneous broadening.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import least_squares

from .errors import InvalidInput

NEGATIVE_CLAMP = 1e-6
RICHARDSON_LIMIT = 0.10


@dataclass(frozen=True, eq=False)
class MeasuredSpectrum:
    """Sampled cavity response.

    Parameters
    ----------
    grid : array_like
        Increasing probe frequencies.
    data : array_like
        Complex ``chi_cc`` on `grid` (``kind="chi"``) or real transmissivity
        of shape ``(len(cavity_grid), len(grid))`` (``kind="transmissivity"``).
    kappa : float
    omega_c : float, optional
        Cavity frequency of a ``chi`` measurement.
    cavity_grid : array_like, optional
        Swept cavity frequencies of a transmissivity measurement.
    gamma_hom : float
        Assumed homogeneous linewidth.
    """

    grid: np.ndarray
    data: np.ndarray
    kappa: float
    omega_c: float | None = None
    cavity_grid: np.ndarray | None = None
    gamma_hom: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 3 or not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0):
            raise InvalidInput("grid must be a finite, strictly increasing array of at least 3 points")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise InvalidInput("kappa must be finite and >= 0")
        if not (math.isfinite(self.gamma_hom) and self.gamma_hom >= 0):
            raise InvalidInput("gamma_hom must be finite and >= 0")
        object.__setattr__(self, "grid", g)
        if self.cavity_grid is None:
            if self.omega_c is None or not math.isfinite(self.omega_c):
                raise InvalidInput("a chi measurement needs a finite omega_c")
            d = np.asarray(self.data, dtype=complex)
            if d.shape != g.shape or not np.all(np.isfinite(d)):
                raise InvalidInput("chi data must be finite and match the grid")
        else:
            c = np.asarray(self.cavity_grid, dtype=float)
            if c.ndim != 1 or c.size < 4 or np.any(np.diff(c) <= 0):
                raise InvalidInput("cavity_grid must be strictly increasing with at least 4 points")
            d = np.asarray(self.data, dtype=float)
            if d.shape != (c.size, g.size) or not np.all(np.isfinite(d)):
                raise InvalidInput("transmissivity data must have shape (len(cavity_grid), len(grid))")
            if np.any(d < 0):
                raise InvalidInput("transmissivity must be >= 0")
            object.__setattr__(self, "cavity_grid", c)
        object.__setattr__(self, "data", d)

    @property
    def kind(self) -> str:
        return "chi" if self.cavity_grid is None else "transmissivity"


@dataclass(frozen=True, eq=False)
class LevelShiftTable:
    """Tabulated ``K(omega)`` recovered from data.

    ``valid`` is False where a point was excluded (``values`` is NaN there).
    ``noise_bound`` is the first-order error estimate ``eps / |chi|`` for a
    relative noise level ``eps`` on ``chi``; ``residual`` holds the relative
    rms residual of each Lorentzian fit.
    """

    grid: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    noise_bound: np.ndarray | None = None
    residual: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Recovered coupling density.

    Attributes
    ----------
    grid, rho : ndarray
    negative : ndarray of bool
        Points with ``rho < -1e-6 max(rho)``, kept unclamped.
    valid : ndarray of bool
    warning : str or None
        Set when the Richardson check of the derivative fails.
    strength_squared : float
        ``Omega**2`` recovered by integration with tail closure.
    """

    grid: np.ndarray
    rho: np.ndarray
    negative: np.ndarray
    valid: np.ndarray
    warning: str | None
    strength_squared: float


def levelshift_from_chi(ms: MeasuredSpectrum, floor: float = 1e-12, rel_noise: float | None = None) -> LevelShiftTable:
    """Pointwise inversion ``K = omega - omega_c + i kappa - 1 / chi_cc``.

    Parameters
    ----------
    ms : MeasuredSpectrum
        A ``chi`` measurement.
    floor : float
        Points with ``|chi| <= floor * max |chi|`` are excluded.
    rel_noise : float, optional
        Relative noise level of ``chi``; fills ``noise_bound``.
    """
    if ms.kind != "chi":
        raise InvalidInput("levelshift_from_chi needs complex chi data")
    chi = ms.data
    mag = np.abs(chi)
    ok = mag > floor * mag.max() if mag.max() > 0 else np.zeros(mag.shape, dtype=bool)
    K = np.full(chi.shape, np.nan + 0j)
    K[ok] = ms.grid[ok] - complex(ms.omega_c, -ms.kappa) - 1.0 / chi[ok]
    nb = None
    if rel_noise is not None:
        if not rel_noise >= 0:
            raise InvalidInput("rel_noise must be >= 0")
        nb = np.full(chi.shape, np.inf)
        nb[ok] = rel_noise / mag[ok]
    return LevelShiftTable(ms.grid.copy(), K, ok, nb, None)


def _fit_column(wc: np.ndarray, T: np.ndarray):
    """Fit ``A / ((x - c)**2 + w**2)``; return (c, w, A, rel_residual, ok)."""
    k = int(np.argmax(T))
    Tm = T[k]
    if not Tm > 0:
        return math.nan, math.nan, math.nan, math.inf, False
    above = np.flatnonzero(T >= 0.5 * Tm)
    lo, hi = above[0], above[-1]
    # the resonance must be resolved: half maximum reached inside the sweep
    resolved = lo > 0 and hi < T.size - 1
    w0 = max(0.5 * (wc[hi] - wc[lo]), 0.5 * float(np.min(np.diff(wc))))
    c0 = wc[k]
    x0 = np.array([c0, w0, Tm * w0 * w0])
    xs = np.array([w0, w0, Tm * w0 * w0])

    def res(p):
        return (p[2] / ((wc - p[0]) ** 2 + p[1] ** 2) - T) / Tm

    def jac(p):
        d = (wc - p[0]) ** 2 + p[1] ** 2
        J = np.empty((wc.size, 3))
        J[:, 0] = 2 * p[2] * (wc - p[0]) / d**2
        J[:, 1] = -2 * p[2] * p[1] / d**2
        J[:, 2] = 1.0 / d
        return J / Tm

    sol = least_squares(res, x0, jac=jac, x_scale=xs, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    c, w, A = sol.x
    rr = float(np.sqrt(np.mean(sol.fun**2)))
    return float(c), abs(float(w)), float(A), rr, bool(sol.success and resolved)


def levelshift_from_transmissivity(ms: MeasuredSpectrum, max_residual: float = 1e-3) -> LevelShiftTable:
    """Recover ``K`` from transmissivity swept over the cavity frequency.

    For each probe ``omega`` a Lorentzian ``A / ((omega_c - c)**2 + w**2)``
    is fitted over the sweep; then ``Re K = omega - c`` and
    ``Im K = -(w - kappa)``.

    Parameters
    ----------
    ms : MeasuredSpectrum
        A transmissivity measurement.
    max_residual : float
        Fits with relative rms residual above this (or that do not resolve
        the half maximum inside the sweep) are flagged invalid.
    """
    if ms.kind != "transmissivity":
        raise InvalidInput("levelshift_from_transmissivity needs a transmissivity sweep")
    n = ms.grid.size
    K = np.full(n, np.nan + 0j)
    ok = np.zeros(n, dtype=bool)
    resid = np.full(n, np.inf)
    for i in range(n):
        c, w, _, rr, good = _fit_column(ms.cavity_grid, ms.data[:, i])
        resid[i] = rr
        if good and rr <= max_residual:
            K[i] = complex(ms.grid[i] - c, -(w - ms.kappa))
            ok[i] = True
    return LevelShiftTable(ms.grid.copy(), K, ok, None, resid)


def _tail_closure(x: np.ndarray, rho: np.ndarray) -> float:
    # algebraic rho ~ B / (omega - center)**2 beyond each end of the grid
    pos = np.clip(rho, 0.0, None)
    tot = pos.sum()
    if tot <= 0:
        return 0.0
    center = float(np.sum(x * pos) / tot)
    left = max(rho[0], 0.0) * abs(x[0] - center)
    right = max(rho[-1], 0.0) * abs(x[-1] - center)
    return left + right


def recovered_strength_squared(grid, rho, tail: bool = True) -> float:
    """``Omega**2`` as the integral of `rho`, with an algebraic tail closure."""
    x = np.asarray(grid, dtype=float)
    r = np.asarray(rho, dtype=float)
    ok = np.isfinite(r)
    x, r = x[ok], r[ok]
    if x.size < 3:
        raise InvalidInput("too few valid points to integrate the density")
    val = float(simpson(r, x=x))
    return val + (_tail_closure(x, r) if tail else 0.0)


def density_from_levelshift(table: LevelShiftTable, gamma_hom: float = 0.0, tail: bool = True) -> DensityEstimate:
    """First-order density estimate from a tabulated level shift.

    ``rho = -Im K / pi + (gamma_hom / 2 pi) d(Re K)/d omega`` with the
    derivative from centered differences. Values in ``[-1e-6 max, 0)`` are
    clamped to zero; more negative values are flagged in ``negative``.
    A warning is attached (and issued) when the derivative on the grid and
    on the every-other-point grid disagree by more than 10 %.
    """
    if not (math.isfinite(gamma_hom) and gamma_hom >= 0):
        raise InvalidInput("gamma_hom must be finite and >= 0")
    x = table.grid
    K = table.values
    valid = table.valid & np.isfinite(K)
    if valid.sum() < 5:
        raise InvalidInput("too few valid level-shift points")
    xv, Kv = x[valid], K[valid]
    rho_v = -Kv.imag / math.pi
    message = None
    if gamma_hom > 0:
        d = np.gradient(Kv.real, xv, edge_order=2)
        d2 = np.gradient(Kv.real[::2], xv[::2], edge_order=2)
        # Richardson: d_h - d_2h estimates three times the error of d_h
        err = np.max(np.abs(d[::2] - d2)) / 3.0
        if err > RICHARDSON_LIMIT * max(np.max(np.abs(d)), 1e-300):
            message = "grid too coarse for the derivative of Re K (Richardson mismatch above 10%)"
            warnings.warn(message, RuntimeWarning, stacklevel=2)
        rho_v = rho_v + gamma_hom / (2 * math.pi) * d
    top = max(float(np.max(rho_v)), 0.0)
    small = (rho_v < 0) & (rho_v >= -NEGATIVE_CLAMP * top)
    rho_v = np.where(small, 0.0, rho_v)
    neg_v = rho_v < -NEGATIVE_CLAMP * top
    rho = np.full(x.shape, np.nan)
    rho[valid] = rho_v
    neg = np.zeros(x.shape, dtype=bool)
    neg[valid] = neg_v
    strength2 = recovered_strength_squared(xv, rho_v, tail)
    return DensityEstimate(x.copy(), rho, neg, valid, message, strength2)
