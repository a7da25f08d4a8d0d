"""Complex poles of the cavity propagator.

The poles are the roots of ``f(z) = z - omega_c + i kappa - K(z)`` where
``K`` is the analytic continuation of the forward level shift: the first
sheet above the cut line ``Im z = -gamma_hom / 2`` and the second sheet
below it. Each root carries a sheet label and the residue ``1 / f'(z)``.

The module also evaluates the closed forms for a Lorentzian density, the
strong- and weak-coupling expansions of the poles, and follows pole pairs
across sweeps of the collective coupling.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, SingularPoint
from .levelshift import LevelShift
from .model import CavitySpec, CouplingDensity, Discrete, Ensemble, Gaussian, Lorentzian, MomentSet, moment_set

MAX_ITER = 200


@dataclass(frozen=True)
class PoleResult:
    """One root of the pole equation.

    Attributes
    ----------
    location : complex
    sheet : {"first", "cut", "second"}
    residue : complex
        ``1 / f'(z)``, the weight of the pole in ``G_cc``.
    iterations : int
    converged : bool
    residual : float
        ``|f(z)|`` at the returned location.
    """

    location: complex
    sheet: str
    residue: complex
    iterations: int
    converged: bool
    residual: float = float("nan")


@dataclass(frozen=True)
class RegimeReport:
    """Oscillatory or overdamped character of a pole pair.

    ``splitting = |Re E_+ - Re E_-|`` (0 when overdamped) and
    ``widths = (-2 Im E_+, -2 Im E_-)``.
    """

    regime: str
    splitting: float
    widths: tuple


@dataclass(frozen=True)
class LorentzianPoles:
    """Closed-form poles and dressed amplitudes of a Lorentzian system."""

    E_plus: complex
    E_minus: complex
    theta: complex
    rabi_frequency: complex
    eta_plus_c: complex
    eta_minus_c: complex
    eta_plus_s: complex
    eta_minus_s: complex


@dataclass(frozen=True)
class AsymptoticPoles:
    """Predicted pole pair from a perturbative expansion.

    ``dominated`` is set when the first-order correction does not vanish
    and the requested second order is therefore not meaningful.
    """

    E_plus: complex
    E_minus: complex
    order: int
    branch: str
    dominated: bool = False


@dataclass(frozen=True, eq=False)
class PoleTrack:
    """Pole pair followed across a sweep of the collective coupling.

    ``plus`` and ``minus`` hold the upper and lower branch (by ``Re``),
    ``collision`` marks steps where both Newton runs met the same root
    and the pair was re-seeded from a grid search.
    """

    strengths: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    converged: np.ndarray
    collision: np.ndarray
    sheets: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class GapReport:
    delta_gap: float
    valid: bool
    ratios: tuple


# --------------------------------------------------------------------------
# root finding
# --------------------------------------------------------------------------


def _as_levelshift(source) -> LevelShift:
    return source if isinstance(source, LevelShift) else LevelShift(source)


def _center_spread(ls: LevelShift) -> tuple[float, float]:
    src = ls.source
    if isinstance(src, Discrete):
        e = src.ensemble
        if e is None:
            return 0.0, 0.0
        c = e.mean_frequency.real
        return c, float(np.max(np.abs(e.frequencies - c)))
    return src.center, 0.5 * src.fwhm


def problem_scale(ls: LevelShift, cavity: CavitySpec) -> float:
    """Frequency scale of the pole problem (independent of the origin)."""
    c, spread = _center_spread(ls)
    s = max(ls.strength, spread, cavity.loss, 0.5 * ls.gamma_hom, abs(cavity.frequency - c))
    return s if s > 0 else 1.0


def _fdf(ls: LevelShift, wc: complex, z: np.ndarray):
    K, dK = ls.evaluate(z)
    return z - wc - K, 1.0 - dK


def _newton(ls: LevelShift, cavity: CavitySpec, z0: np.ndarray, max_iter: int, tol: float):
    wc = cavity.complex_frequency
    z = np.array(z0, dtype=complex)
    n = z.size
    it = np.zeros(n, dtype=int)
    conv = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    with np.errstate(all="ignore"):
        f, df = _fdf(ls, wc, z)
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            step = -f[idx] / df[idx]
            bad = ~np.isfinite(step)
            step[bad] = 0.0
            lam = np.ones(idx.size)
            zn = z[idx] + step
            fn, dfn = _fdf(ls, wc, zn)
            # damping: halve the step until |f| decreases
            for _h in range(30):
                worse = ~(np.abs(fn) <= np.abs(f[idx])) & (lam > 1e-6)
                if not worse.any():
                    break
                lam[worse] *= 0.5
                zn[worse] = z[idx][worse] + lam[worse] * step[worse]
                fn[worse], dfn[worse] = _fdf(ls, wc, zn[worse])
            small = np.abs(step) <= 4 * np.finfo(float).eps * np.maximum(np.abs(z[idx]), tol)
            z[idx], f[idx], df[idx] = zn, fn, dfn
            it[idx] += 1
            # near a spin pole f' is huge and |f| cannot reach the absolute
            # tolerance; a Newton correction at roundoff level also counts
            corr = np.abs(fn / dfn) <= 8 * np.finfo(float).eps * np.maximum(np.abs(zn), tol)
            ok = ((np.abs(fn) <= 1e-10 * tol) & (small | (np.abs(fn) <= 1e-15 * tol))) | corr
            conv[idx] = ok
            active[idx] = ~(ok | bad)
        # final refinement pass with full steps
        step = -f / df
        zz = z + np.where(np.isfinite(step), step, 0.0)
        f2, df2 = _fdf(ls, wc, zz)
        better = np.abs(f2) < np.abs(f)
        z = np.where(better, zz, z)
        f = np.where(better, f2, f)
        df = np.where(better, df2, df)
    with np.errstate(all="ignore"):
        corr = np.abs(f / df) <= 8 * np.finfo(float).eps * np.maximum(np.abs(z), tol)
    conv = conv | (np.abs(f) <= 1e-10 * tol) | corr
    return z, f, df, it, conv


def default_seeds(ls: LevelShift, cavity: CavitySpec, depth: float | None = None) -> np.ndarray:
    """Coarse seed grid over the region where relevant poles live."""
    c, spread = _center_spread(ls)
    if depth is None:
        depth = _default_depth(ls, cavity)
    O = ls.strength
    lo = min(c - spread, cavity.frequency) - 1.5 * O - spread
    hi = max(c + spread, cavity.frequency) + 1.5 * O + spread
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    re = np.linspace(lo, hi, 13)
    im = -np.linspace(0.0, depth, 6)
    seeds = (re[:, None] + 1j * im[None, :]).ravel()
    extra = [complex(cavity.frequency, -cavity.loss), complex(c + O, -0.5 * ls.gamma_hom), complex(c - O, -0.5 * ls.gamma_hom)]
    if not isinstance(ls.source, Discrete):
        extra.append(complex(c, -0.5 * (ls.source.fwhm + ls.gamma_hom)))
        if O > 0:
            extra.extend(_seed_pair(ls.source, cavity, O))
    if isinstance(ls.source, Discrete) and ls.source.ensemble is not None:
        # a discrete system has exactly one root per coupled spin plus one
        return np.concatenate((_aberth_seeds(ls.source.ensemble, cavity), np.array(extra, dtype=complex)))
    return np.concatenate((np.array(extra, dtype=complex), seeds))


def _aberth_seeds(ens: Ensemble, cavity: CavitySpec, max_iter: int = 500) -> np.ndarray:
    """Simultaneous approximations of all roots of a discrete pole equation.

    Aberth iteration on ``P(z) = f(z) prod_j (z - omega_j)`` using
    ``P'/P = f'/f + sum_j 1 / (z - omega_j)``; no polynomial coefficients
    are formed.
    """
    keep = ens.couplings > 0
    p = ens.complex_frequencies[keep]
    w2 = ens.couplings[keep] ** 2
    wc = cavity.complex_frequency
    scale = max(float(np.max(np.abs(p - p.mean()))) if p.size else 0.0, math.sqrt(w2.sum()), abs(wc - p.mean()) if p.size else 0.0, 1e-300)
    n = p.size + 1
    ang = np.exp(2j * np.pi * (np.arange(n) + 0.25) / n)
    gap = np.abs(np.diff(np.sort(p.real))).min() if p.size > 1 else scale
    r = np.concatenate((p, [wc])) + 0.3 * max(gap, 1e-12 * scale) * ang
    r[-1] = wc + math.sqrt(w2.sum()) * ang[-1]
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            inv = 1.0 / (r[:, None] - p[None, :])
            f = r - wc - inv @ w2
            df = 1.0 + (inv * inv) @ w2
            ratio = df / f + inv.sum(axis=1)
            wk = np.where(np.isfinite(ratio) & (ratio != 0), 1.0 / ratio, 0.0)
            dr = r[:, None] - r[None, :]
            np.fill_diagonal(dr, np.inf)
            S = (1.0 / dr).sum(axis=1)
            step = wk / (1.0 - wk * S)
            step = np.where(np.isfinite(step), step, 0.0)
            r = r - step
            if np.max(np.abs(step)) <= 1e-14 * scale:
                break
    return r


def _default_depth(ls: LevelShift, cavity: CavitySpec) -> float:
    src = ls.source
    width = 0.0 if isinstance(src, Discrete) else src.fwhm
    d = 10.0 * max(cavity.loss, width + ls.gamma_hom)
    return d if d > 0 else problem_scale(ls, cavity)


def find_poles(levelshift, cavity: CavitySpec, seeds=None, max_iter: int = MAX_ITER,
               depth: float | None = None, dedupe: bool = True) -> list[PoleResult]:
    """Roots of ``z - omega_c + i kappa - K(z) = 0`` by damped Newton iteration.

    Parameters
    ----------
    levelshift : LevelShift, CouplingDensity, Ensemble or None
    cavity : CavitySpec
    seeds : array_like of complex, optional
        Starting points; a coarse grid is used when omitted.
    max_iter : int
    depth : float, optional
        Roots with ``Im z < -depth`` are dropped (continuous profiles can
        have infinitely many). Default ``10 max(kappa, FWHM + gamma_hom)``.
    dedupe : bool
        Merge roots closer than ``1e-8`` times the problem scale.

    Returns
    -------
    list of PoleResult
        Converged roots first (sorted by ``Re``), then unconverged runs from
        explicit seeds (runs from the default grid that fail are dropped).
    """
    ls = _as_levelshift(levelshift)
    scale = problem_scale(ls, cavity)
    auto = seeds is None
    if seeds is None:
        seeds = default_seeds(ls, cavity, depth)
        if depth is None:
            depth = _default_depth(ls, cavity)
    seeds = np.atleast_1d(np.asarray(seeds, dtype=complex))
    if not np.all(np.isfinite(seeds)):
        raise InvalidInput("seeds must be finite")
    if isinstance(ls.source, Discrete) and ls.source.ensemble is None:
        z = complex(cavity.complex_frequency)
        return [PoleResult(z, "first", 1.0 + 0j, 0, True, 0.0)]
    z, f, df, it, conv = _newton(ls, cavity, seeds, max_iter, scale)
    keep = np.ones(z.size, dtype=bool)
    if depth is not None:
        keep &= ~(conv & (z.imag < -depth))
    results = []
    sheets = ls.sheet_of(z)
    for i in np.flatnonzero(keep):
        with np.errstate(all="ignore"):
            res = complex(1.0 / df[i])
        results.append(PoleResult(complex(z[i]), str(sheets[i]), res, int(it[i]),
                                  bool(conv[i]), float(abs(f[i]))))
    if not dedupe:
        return results
    good = sorted((r for r in results if r.converged), key=lambda r: r.residual)
    poles = ls.source.ensemble.complex_frequencies if isinstance(ls.source, Discrete) else np.zeros(0)
    uniq: list[PoleResult] = []
    for r in good:
        # roots squeezed between close spin poles are closer than the global scale
        loc = min(scale, float(np.min(np.abs(poles - r.location)))) if poles.size else scale
        if all(abs(r.location - u.location) >= 1e-8 * loc for u in uniq):
            uniq.append(r)
    uniq.sort(key=lambda r: (r.location.real, r.location.imag))
    # grid runs that wander off are not poles; explicit seeds are reported
    bad = [] if auto else [r for r in results if not r.converged]
    return uniq + bad


# --------------------------------------------------------------------------
# Lorentzian closed forms
# --------------------------------------------------------------------------


def lorentzian_poles(Omega: float, gamma: float, kappa: float = 0.0, delta: float = 0.0,
                     omega_a: float = 0.0) -> LorentzianPoles:
    """Poles and dressed amplitudes for one damped collective mode.

    ``E_pm = omega_a - i gamma / 2 + Omega_R cos(theta) +- Omega_R`` with
    ``Omega_R = sqrt(Omega**2 + (delta - i (kappa - gamma / 2))**2 / 4)``,
    ``cos(theta) = (delta - i (kappa - gamma / 2)) / (2 Omega_R)`` and
    ``sin(theta) = Omega / Omega_R``.

    Parameters
    ----------
    Omega : float
        Collective coupling, ``> 0``.
    gamma : float
        FWHM of the collective mode (inhomogeneous plus homogeneous).
    kappa, delta, omega_a : float
        Cavity loss, detuning ``omega_c - omega_a`` and center.
    """
    if not Omega > 0:
        raise InvalidInput("Omega must be positive")
    a = complex(delta, -(kappa - 0.5 * gamma))
    OR = cmath.sqrt(Omega * Omega + a * a / 4.0)
    base = complex(omega_a, -0.5 * gamma) + 0.5 * a
    Ep, Em = base + OR, base - OR
    if OR == 0:
        theta = complex("nan")
        c2 = s2 = complex("nan")
    else:
        # cos(theta) + i sin(theta) fixes the branch of theta
        theta = -1j * cmath.log((0.5 * a + 1j * Omega) / OR)
        c2, s2 = cmath.cos(0.5 * theta), cmath.sin(0.5 * theta)
    nrm = cmath.sqrt(math.cosh(theta.imag)) if OR != 0 else complex("nan")
    epc, emc = c2 / nrm, s2 / nrm
    return LorentzianPoles(Ep, Em, theta, OR, epc, emc, emc, -epc)


# --------------------------------------------------------------------------
# pairs, regimes, tracking
# --------------------------------------------------------------------------


def principal_pair(poles: list[PoleResult]) -> tuple[PoleResult, PoleResult]:
    """The two least-damped converged poles, returned as ``(E_+, E_-)`` by ``Re``."""
    good = [p for p in poles if p.converged]
    if len(good) < 2:
        raise InvalidInput("need at least two converged poles")
    good.sort(key=lambda p: (-p.location.imag, p.location.real))
    a, b = good[0], good[1]
    return (a, b) if (a.location.real, a.location.imag) >= (b.location.real, b.location.imag) else (b, a)


def classify_regime(pair, tol: float = 1e-6) -> RegimeReport:
    """Oscillatory iff ``|Re E_+ - Re E_-| > tol * max(widths)``.

    Parameters
    ----------
    pair : pair of complex or PoleResult
    tol : float
    """
    z = [p.location if isinstance(p, PoleResult) else complex(p) for p in pair]
    if len(z) != 2:
        raise InvalidInput("classify_regime needs exactly two poles")
    hi, lo = (z[0], z[1]) if z[0].real >= z[1].real else (z[1], z[0])
    widths = (-2.0 * hi.imag, -2.0 * lo.imag)
    split = hi.real - lo.real
    if split > tol * max(max(abs(w) for w in widths), 1e-300):
        return RegimeReport("oscillatory", float(split), widths)
    return RegimeReport("overdamped", 0.0, widths)


def _family(profile, strength):
    if callable(profile) and not isinstance(profile, (CouplingDensity, Ensemble)):
        return profile(strength)
    return profile.with_strength(strength)


def _seed_pair(src, cavity: CavitySpec, strength: float):
    if isinstance(src, (Lorentzian, Gaussian)) and strength > 0:
        lp = lorentzian_poles(strength, src.fwhm + src.gamma_hom, cavity.loss, cavity.frequency - src.center, src.center)
        return [lp.E_plus, lp.E_minus]
    c = complex(cavity.frequency, -cavity.loss)
    return [c + 1e-3, c - 1e-3]


def track_poles(profile, cavity: CavitySpec, strengths, seeds=None) -> PoleTrack:
    """Follow the principal pole pair across a monotone sweep of ``Omega``.

    Parameters
    ----------
    profile : CouplingDensity, Ensemble or callable
        Rescaled with ``with_strength``; a callable maps ``Omega`` to a source.
    cavity : CavitySpec
    strengths : array_like
        Monotone grid of collective couplings.
    seeds : pair of complex, optional
        Starting pair for the first point; by default the Lorentzian closed
        form with the profile's FWHM, or the bare cavity.
    """
    S = np.asarray(strengths, dtype=float)
    d = np.diff(S)
    if S.ndim != 1 or S.size == 0 or not (np.all(d > 0) or np.all(d < 0)):
        raise InvalidInput("strengths must be strictly monotone")
    plus = np.empty(S.size, dtype=complex)
    minus = np.empty(S.size, dtype=complex)
    conv = np.zeros(S.size, dtype=bool)
    coll = np.zeros(S.size, dtype=bool)
    sheets = []
    prev = None
    for i, O in enumerate(S):
        src = _family(profile, float(O))
        ls = LevelShift(src)
        scale = problem_scale(ls, cavity)
        if i == 0:
            guess = list(seeds) if seeds is not None else _seed_pair(ls.source, cavity, float(O))
        elif i == 1 or prev is None:
            guess = [plus[i - 1], minus[i - 1]]
        else:
            guess = [2 * plus[i - 1] - plus[i - 2], 2 * minus[i - 1] - minus[i - 2]]
        runs = find_poles(ls, cavity, seeds=guess, dedupe=False)
        z = [r.location for r in runs]
        ok = [r.converged for r in runs]
        if not all(ok) or abs(z[0] - z[1]) < 1e-6 * scale:
            # branch lost or both runs met the same root: re-seed from a grid
            coll[i] = True
            found = [p for p in find_poles(ls, cavity) if p.converged]
            ref = guess
            if len(found) >= 2:
                best = None
                for a in range(len(found)):
                    for b in range(len(found)):
                        if a == b:
                            continue
                        cost = abs(found[a].location - ref[0]) + abs(found[b].location - ref[1])
                        if best is None or cost < best[0]:
                            best = (cost, a, b)
                z = [found[best[1]].location, found[best[2]].location]
                ok = [True, True]
        if z[0].real < z[1].real:
            z = z[::-1]
        plus[i], minus[i] = z
        conv[i] = all(ok)
        sheets.append(tuple(str(s) for s in ls.sheet_of(np.array(z))))
        prev = z
    return PoleTrack(S, plus, minus, conv, coll, tuple(sheets))


def _pair_at(profile, cavity: CavitySpec, strength: float, guess=None):
    ls = LevelShift(_family(profile, strength))
    seeds = default_seeds(ls, cavity)
    if guess is not None:
        seeds = np.concatenate((np.asarray(guess, dtype=complex), seeds))
    return principal_pair(find_poles(ls, cavity, seeds=seeds))


def splitting_onset(profile, cavity: CavitySpec, lo: float, hi: float, rel: float = 1e-6,
                    xtol: float = 1e-6) -> float:
    """Smallest ``Omega`` at which the principal pair splits in ``Re``.

    Bisection on ``Omega`` in ``[lo, hi]`` with the criterion
    ``|Re E_+ - Re E_-| > rel * FWHM``.
    """
    src0 = _family(profile, hi)
    fw = src0.fwhm if not isinstance(src0, Discrete) else problem_scale(LevelShift(src0), cavity)

    def split(O):
        a, b = _pair_at(profile, cavity, O)
        return abs(a.location.real - b.location.real) > rel * fw

    if split(lo) or not split(hi):
        raise InvalidInput("the bracket does not contain the splitting onset")
    while hi - lo > xtol * hi:
        mid = 0.5 * (lo + hi)
        if split(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# asymptotic expansions
# --------------------------------------------------------------------------


def asymptotic_poles(source, cavity: CavitySpec, order: int = 0, branch: str = "strong") -> AsymptoticPoles:
    """Perturbative pole pair.

    Parameters
    ----------
    source : CouplingDensity, Ensemble or MomentSet
    cavity : CavitySpec
    order : {0, 1, 2}
        Strong branch: order 0 is the two-mode result with ``gamma =
        gamma_hom`` around the complex mean ``omega_bar``; order 1 adds
        ``A_1 sin^2(theta/2)`` and ``A_1 cos^2(theta/2)``; order 2 gives
        ``(omega_bar + omega_c) / 2 +- Omega_R [1 + 2 s^4 A_2 / Omega**2]``
        with ``s = sin(theta/2)`` (upper) or ``cos(theta/2)`` (lower). When
        ``A_1 != 0`` the order-1 result is returned with ``dominated`` set.
    branch : {"strong", "weak"}
        The weak branch (Gaussian only) keeps the leading Taylor terms of the
        level shift around the center.
    """
    if order not in (0, 1, 2):
        raise InvalidInput("order must be 0, 1 or 2")
    if branch not in ("strong", "weak"):
        raise InvalidInput("branch must be 'strong' or 'weak'")
    if branch == "weak":
        if not isinstance(source, Gaussian):
            raise InvalidInput("the weak-coupling expansion is available for the Gaussian profile")
        return _gaussian_weak(source, cavity)
    ms = source if isinstance(source, MomentSet) else moment_set(
        Discrete(source) if isinstance(source, Ensemble) else source, 2
    )
    if ms.max_order < 2 and order == 2:
        raise InvalidInput("order 2 needs a moment set with max_order >= 2")
    O = ms.strength
    if not O > 0:
        raise InvalidInput("the strong-coupling expansion needs Omega > 0")
    wbar = complex(ms.mean)
    wc = cavity.complex_frequency
    a = wc - wbar  # complex detuning, delta - i (kappa - gamma_hom / 2)
    OR = cmath.sqrt(O * O + a * a / 4.0)
    mid = 0.5 * (wbar + wc)
    theta = -1j * cmath.log((0.5 * a + 1j * O) / OR)
    s2, c2 = cmath.sin(0.5 * theta), cmath.cos(0.5 * theta)
    Ep, Em = mid + OR, mid - OR
    if order == 0:
        return AsymptoticPoles(Ep, Em, 0, "strong")
    A1 = complex(ms.tail_A[1])
    if order == 1 or abs(A1) > 1e-10 * max(abs(complex(ms.tail_A[2])) ** 0.5 if ms.max_order >= 2 else 0.0, 1e-300):
        dominated = order == 2
        return AsymptoticPoles(Ep + A1 * s2 * s2, Em + A1 * c2 * c2, 1, "strong", dominated)
    A2 = complex(ms.tail_A[2])
    Ep2 = mid + OR * (1.0 + 2.0 * s2**4 * A2 / (O * O))
    Em2 = mid - OR * (1.0 + 2.0 * c2**4 * A2 / (O * O))
    return AsymptoticPoles(Ep2, Em2, 2, "strong")


def resonant_order2(Omega: float, delta_omega: float, gamma_hom: float, kappa: float, omega_bar: float = 0.0):
    """Resonant second-order poles in explicit real form.

    ``Re(E_pm - omega_bar) = +- Omega_R (1 + Delta_omega**2 / (2 Omega**2))`` and
    ``-2 Im E_pm = gamma_hom / 2 + kappa + (gamma_hom / 2 - kappa) Delta_omega**2 / Omega**2``.
    """
    OR = math.sqrt(max(Omega**2 - (0.5 * gamma_hom - kappa) ** 2 / 4.0, 0.0))
    re = OR * (1.0 + 0.5 * delta_omega**2 / Omega**2)
    w = 0.5 * gamma_hom + kappa + (0.5 * gamma_hom - kappa) * delta_omega**2 / Omega**2
    return complex(omega_bar + re, -0.5 * w), complex(omega_bar - re, -0.5 * w)


def gaussian_strong_poles(Omega: float, sigma: float, omega_a: float = 0.0) -> tuple[complex, complex]:
    """Gaussian strong-coupling poles for ``delta = kappa = gamma_hom = 0``.

    ``Re(E_pm - omega_a) = +- sqrt(Omega**2 + sigma**2)`` and
    ``-2 Im E = sqrt(2 pi / e) exp(-Omega**2 / (2 sigma**2)) (Omega**2 - sigma**2) / (2 sigma)``.
    """
    if not (Omega > 0 and sigma > 0):
        raise InvalidInput("Omega and sigma must be positive")
    re = math.sqrt(Omega**2 + sigma**2)
    w = math.sqrt(2 * math.pi / math.e) * math.exp(-(Omega**2) / (2 * sigma**2)) * (Omega**2 - sigma**2) / (2 * sigma)
    return complex(omega_a + re, -0.5 * w), complex(omega_a - re, -0.5 * w)


def _gaussian_weak(src: Gaussian, cavity: CavitySpec) -> AsymptoticPoles:
    O, s = src.strength, src.sigma
    if not O < s:
        raise InvalidInput("the weak-coupling expansion needs Omega < sigma")
    d = cavity.frequency - src.center
    k, gh = cavity.loss, src.gamma_hom
    r = s * s / (O * O) - 1.0
    Ep = complex(src.center + d / (1.0 - O * O / (s * s)),
                 -0.5 * (2 * k + (2 * k - gh + math.sqrt(2 * math.pi) * s) / r))
    Em = complex(src.center - d,
                 -0.5 * (2 * gh - 2 * k + 8 * s / math.sqrt(2 * math.pi) * r))
    return AsymptoticPoles(Ep, Em, 1, "weak")


def gap_shift(Omega: float, delta: float, delta_omega: float | None = None, ratio: float = 5.0) -> GapReport:
    """Dispersive shift ``Delta_gap = -Omega**2 / delta`` of the superradiant mode.

    ``valid`` checks ``Delta_omega << Omega << |delta| << Omega**2 / Delta_omega``
    with each ``<<`` read as a factor of at least `ratio`.
    """
    if delta == 0:
        raise InvalidInput("the gap shift needs a nonzero detuning")
    if not Omega >= 0:
        raise InvalidInput("Omega must be >= 0")
    dg = -Omega * Omega / delta
    if delta_omega is None or delta_omega <= 0 or Omega == 0:
        r = (math.inf if delta_omega == 0 else math.nan, abs(delta) / Omega if Omega else math.inf, math.inf if delta_omega == 0 else math.nan)
        return GapReport(dg, bool(delta_omega == 0 and Omega > 0 and abs(delta) >= ratio * Omega), r)
    r = (Omega / delta_omega, abs(delta) / Omega, Omega * Omega / (delta_omega * abs(delta)))
    return GapReport(dg, all(x >= ratio for x in r), r)
