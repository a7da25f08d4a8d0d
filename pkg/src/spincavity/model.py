"""Domain types for a spin ensemble coupled to a single cavity mode.

All frequencies and rates are plain floats in a caller-chosen reference
unit. Complex spin and cavity frequencies follow the convention
``omega - i gamma / 2`` for spins and ``omega_c - i kappa`` for the cavity.

Complex couplings are accepted on input. Internally every spin is gauge
rotated so that its coupling is real and non-negative; the removed phases
are kept in :attr:`Ensemble.phases` so that spin amplitudes can be mapped
back to the input basis.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .errors import InvalidInput

SQRT_2PI = math.sqrt(2.0 * math.pi)
FWHM_PER_SIGMA = math.sqrt(8.0 * math.log(2.0))


def _finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise InvalidInput(f"{name} must be finite, got {value!r}")


def _nonneg(name: str, value: float) -> None:
    _finite(name, value)
    if value < 0:
        raise InvalidInput(f"{name} must be >= 0, got {value!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# cavity and spins
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinSpec:
    """A single two-level spin in the linear (single-excitation) regime.

    Parameters
    ----------
    frequency : float
        Transition frequency ``omega_j``.
    decay : float
        Homogeneous decay rate ``gamma_j >= 0``.
    coupling : complex
        Coupling amplitude ``g_j`` to the cavity mode.
    """

    frequency: float
    decay: float = 0.0
    coupling: complex = 1.0

    def __post_init__(self):
        _finite("frequency", self.frequency)
        _nonneg("decay", self.decay)
        _finite("coupling", complex(self.coupling))


@dataclass(frozen=True)
class CavitySpec:
    """Cavity mode with frequency ``omega_c`` and field loss rate ``kappa``."""

    frequency: float = 0.0
    loss: float = 0.0

    def __post_init__(self):
        _finite("cavity frequency", self.frequency)
        _nonneg("cavity loss", self.loss)

    @property
    def complex_frequency(self) -> complex:
        return complex(self.frequency, -self.loss)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """An ordered collection of spins with derived collective quantities.

    Construct with :func:`build_ensemble`. Spins are stored sorted by
    frequency (stable with respect to the input order).

    Attributes
    ----------
    frequencies, decays : ndarray
        Per-spin ``omega_j`` and ``gamma_j``.
    couplings : ndarray
        Gauge-rotated couplings ``|g_j|`` (real, non-negative).
    phases : ndarray
        Input coupling phases, ``g_j = couplings[j] * exp(1j * phases[j])``.
    """

    frequencies: np.ndarray
    decays: np.ndarray
    couplings: np.ndarray
    phases: np.ndarray

    def __len__(self) -> int:
        return int(self.frequencies.size)

    @property
    def spins(self) -> tuple[SpinSpec, ...]:
        g = self.original_couplings
        return tuple(
            SpinSpec(float(w), float(d), complex(c))
            for w, d, c in zip(self.frequencies, self.decays, g)
        )

    @property
    def original_couplings(self) -> np.ndarray:
        return self.couplings * np.exp(1j * self.phases)

    @property
    def complex_frequencies(self) -> np.ndarray:
        return self.frequencies - 0.5j * self.decays

    @property
    def collective_coupling(self) -> float:
        """``Omega = sqrt(sum |g_j|^2)``."""
        return float(math.sqrt(math.fsum(self.couplings**2)))

    @property
    def superradiant_weights(self) -> np.ndarray:
        """``alpha_j = g_j / Omega`` in the input gauge."""
        return self.original_couplings / self.collective_coupling

    @property
    def mean_frequency(self) -> complex:
        """Coupling-weighted complex mean ``sum |alpha_j|^2 (omega_j - i gamma_j / 2)``."""
        p = self.couplings**2 / math.fsum(self.couplings**2)
        z = self.complex_frequencies
        return complex(math.fsum(p * z.real), math.fsum(p * z.imag))

    @property
    def inhomogeneous_width(self) -> float:
        """``Delta omega = sqrt(sum |alpha_j|^2 |omega_j - omega_bar|^2)``."""
        p = self.couplings**2 / math.fsum(self.couplings**2)
        d = self.complex_frequencies - self.mean_frequency
        return float(math.sqrt(math.fsum(p * np.abs(d) ** 2)))

    def with_strength(self, strength: float) -> "Ensemble":
        """Copy with couplings rescaled so that ``Omega = strength``."""
        _nonneg("strength", strength)
        scale = strength / self.collective_coupling
        return Ensemble(self.frequencies, self.decays, _readonly(self.couplings * scale), self.phases)

    def to_dict(self) -> dict:
        return {
            "type": "ensemble",
            "spins": [
                {
                    "frequency": float(s.frequency),
                    "decay": float(s.decay),
                    "coupling": [float(s.coupling.real), float(s.coupling.imag)],
                }
                for s in self.spins
            ],
        }


def build_ensemble(spins: Sequence[SpinSpec]) -> Ensemble:
    """Build an :class:`Ensemble` from spin specifications.

    Parameters
    ----------
    spins : sequence of SpinSpec
        At least one spin with nonzero total coupling.

    Returns
    -------
    Ensemble
        Spins sorted by frequency. Degenerate spins are kept; see
        :func:`merge_degenerate`.
    """
    spins = list(spins)
    if not spins:
        raise InvalidInput("an ensemble needs at least one spin")
    for s in spins:
        if not isinstance(s, SpinSpec):
            raise InvalidInput(f"expected SpinSpec, got {type(s).__name__}")
    w = np.array([s.frequency for s in spins], dtype=float)
    d = np.array([s.decay for s in spins], dtype=float)
    g = np.array([complex(s.coupling) for s in spins])
    return _make(w, d, np.abs(g), np.angle(g))


def _make(w, d, mag, phase) -> Ensemble:
    for name, a in (("frequency", w), ("decay", d), ("coupling", mag)):
        _finite(name, a)
    if np.any(d < 0):
        raise InvalidInput("spin decay rates must be >= 0")
    if w.size == 0:
        raise InvalidInput("an ensemble needs at least one spin")
    if not np.any(mag > 0):
        raise InvalidInput("at least one spin must couple to the cavity")
    order = np.argsort(w, kind="stable")
    return Ensemble(
        _readonly(w[order]), _readonly(d[order]), _readonly(mag[order]), _readonly(phase[order])
    )


def ensemble_from_arrays(frequencies, couplings, decays=0.0) -> Ensemble:
    """Vectorized constructor: arrays of ``omega_j``, ``g_j`` and ``gamma_j``."""
    w = np.asarray(frequencies, dtype=float).ravel()
    g = np.broadcast_to(np.asarray(couplings, dtype=complex), w.shape)
    d = np.broadcast_to(np.asarray(decays, dtype=float), w.shape).astype(float)
    return _make(w, d, np.abs(g), np.angle(g))


def merge_degenerate(ensemble: Ensemble, tol: float = 0.0) -> Ensemble:
    """Replace groups of (near-)degenerate spins by one effective spin.

    Neighbouring spins whose frequencies differ by at most `tol` are chained
    into a group. Each group becomes a spin with coupling
    ``sqrt(sum |g_k|^2)`` at the coupling-weighted mean frequency and decay,
    which keeps ``Omega`` and the complex mean frequency unchanged.

    Parameters
    ----------
    ensemble : Ensemble
    tol : float
        Grouping tolerance, ``>= 0``.

    Returns
    -------
    Ensemble
    """
    _nonneg("tol", tol)
    w, d, g = ensemble.frequencies, ensemble.decays, ensemble.couplings
    breaks = np.flatnonzero(np.diff(w) > tol) + 1
    if breaks.size == w.size - 1:
        return ensemble
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [w.size]))
    nw, nd, ng, nph = [], [], [], []
    for a, b in zip(starts, stops):
        if b - a == 1:
            nw.append(w[a])
            nd.append(d[a])
            ng.append(g[a])
            nph.append(ensemble.phases[a])
            continue
        g2 = g[a:b] ** 2
        tot = math.fsum(g2)
        if tot > 0:
            nw.append(math.fsum(g2 * w[a:b]) / tot)
            nd.append(math.fsum(g2 * d[a:b]) / tot)
        else:
            nw.append(float(np.mean(w[a:b])))
            nd.append(float(np.mean(d[a:b])))
        ng.append(math.sqrt(tot))
        nph.append(0.0)
    return _make(np.array(nw), np.array(nd), np.array(ng), np.array(nph))


# --------------------------------------------------------------------------
# coupling densities
# --------------------------------------------------------------------------


class CouplingDensity:
    """Base class of the coupling-density variants.

    Every variant carries ``gamma_hom``, the homogeneous spin linewidth.
    Continuous variants provide ``density``, ``cdf`` and ``ppf``.
    """

    kind = "abstract"
    gamma_hom: float

    @property
    def is_continuous(self) -> bool:
        return True

    @property
    def strength(self) -> float:
        raise NotImplementedError

    @property
    def fwhm(self) -> float:
        raise NotImplementedError

    @property
    def center(self) -> float:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        """Characteristic frequency scale used for tolerances."""
        return max(self.strength, self.fwhm, self.gamma_hom, abs(self.center), 1e-300)

    def density(self, omega):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Discrete(CouplingDensity):
    """Density made of the delta peaks of a discrete ensemble.

    ``ensemble=None`` represents a bare cavity (no spins).
    """

    ensemble: Ensemble | None = None
    gamma_hom: float = 0.0
    kind = "discrete"

    def __post_init__(self):
        if self.gamma_hom != 0.0:
            raise InvalidInput("discrete sources carry per-spin decays; gamma_hom must be 0")

    @property
    def is_continuous(self) -> bool:
        return False

    @property
    def strength(self) -> float:
        return 0.0 if self.ensemble is None else self.ensemble.collective_coupling

    @property
    def center(self) -> float:
        return 0.0 if self.ensemble is None else self.ensemble.mean_frequency.real

    @property
    def fwhm(self) -> float:
        if self.ensemble is None:
            return 0.0
        return FWHM_PER_SIGMA * self.ensemble.inhomogeneous_width

    @property
    def scale(self) -> float:
        if self.ensemble is None:
            return 1.0
        e = self.ensemble
        return max(
            self.strength,
            float(np.max(np.abs(e.frequencies))),
            float(np.max(e.decays)),
            e.inhomogeneous_width,
            1e-300,
        )

    def with_strength(self, strength: float) -> "Discrete":
        if self.ensemble is None:
            raise InvalidInput("cannot rescale an empty ensemble")
        return Discrete(self.ensemble.with_strength(strength))

    def density(self, omega):
        raise InvalidInput("a discrete ensemble has no pointwise density")

    def to_dict(self) -> dict:
        return {"type": "discrete", "ensemble": None if self.ensemble is None else self.ensemble.to_dict()}


@dataclass(frozen=True)
class Lorentzian(CouplingDensity):
    """Lorentzian density with FWHM `width` and total weight ``strength**2``."""

    center: float = 0.0
    width: float = 1.0
    strength: float = 1.0
    gamma_hom: float = 0.0
    kind = "lorentzian"

    def __post_init__(self):
        _finite("center", self.center)
        _nonneg("strength", self.strength)
        _nonneg("gamma_hom", self.gamma_hom)
        _finite("width", self.width)
        if self.width <= 0:
            raise InvalidInput("Lorentzian width must be > 0")

    @property
    def fwhm(self) -> float:
        return self.width

    def density(self, omega):
        hw = 0.5 * self.width
        x = np.asarray(omega, dtype=float) - self.center
        return self.strength**2 * hw / (np.pi * (x * x + hw * hw))

    def cdf(self, omega):
        x = np.asarray(omega, dtype=float) - self.center
        return 0.5 + np.arctan(x / (0.5 * self.width)) / np.pi

    def ppf(self, u):
        return self.center + 0.5 * self.width * np.tan(np.pi * (np.asarray(u) - 0.5))

    def with_strength(self, strength: float) -> "Lorentzian":
        return Lorentzian(self.center, self.width, strength, self.gamma_hom)

    def to_dict(self) -> dict:
        return {
            "type": "lorentzian",
            "center": self.center,
            "width": self.width,
            "strength": self.strength,
            "gamma_hom": self.gamma_hom,
        }


@dataclass(frozen=True)
class Gaussian(CouplingDensity):
    """Gaussian density with standard deviation `sigma` and weight ``strength**2``."""

    center: float = 0.0
    sigma: float = 1.0
    strength: float = 1.0
    gamma_hom: float = 0.0
    kind = "gaussian"

    def __post_init__(self):
        _finite("center", self.center)
        _nonneg("strength", self.strength)
        _nonneg("gamma_hom", self.gamma_hom)
        _finite("sigma", self.sigma)
        if self.sigma <= 0:
            raise InvalidInput("Gaussian sigma must be > 0")

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma

    def density(self, omega):
        x = (np.asarray(omega, dtype=float) - self.center) / self.sigma
        return self.strength**2 * np.exp(-0.5 * x * x) / (SQRT_2PI * self.sigma)

    def cdf(self, omega):
        from scipy.special import ndtr

        return ndtr((np.asarray(omega, dtype=float) - self.center) / self.sigma)

    def ppf(self, u):
        return self.center + self.sigma * ndtri(np.asarray(u, dtype=float))

    def with_strength(self, strength: float) -> "Gaussian":
        return Gaussian(self.center, self.sigma, strength, self.gamma_hom)

    def to_dict(self) -> dict:
        return {
            "type": "gaussian",
            "center": self.center,
            "sigma": self.sigma,
            "strength": self.strength,
            "gamma_hom": self.gamma_hom,
        }


@dataclass(frozen=True, eq=False)
class Tabulated(CouplingDensity):
    """Piecewise-linear density on a grid, zero outside it.

    Parameters
    ----------
    omega : array_like
        Strictly increasing grid, at least two points.
    rho : array_like
        Non-negative density samples.
    gamma_hom : float
    """

    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma_hom: float = 0.0
    kind = "tabulated"

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float).ravel()
        r = np.asarray(self.rho, dtype=float).ravel()
        if w.size < 2 or w.size != r.size:
            raise InvalidInput("tabulated density needs matching omega/rho arrays of length >= 2")
        _finite("omega", w)
        _finite("rho", r)
        if np.any(np.diff(w) <= 0):
            raise InvalidInput("tabulated omega grid must be strictly increasing")
        if np.any(r < 0):
            raise InvalidInput("tabulated density must be non-negative")
        _nonneg("gamma_hom", self.gamma_hom)
        object.__setattr__(self, "omega", _readonly(w))
        object.__setattr__(self, "rho", _readonly(r))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.rho) / np.diff(self.omega)

    @property
    def kinks(self) -> np.ndarray:
        """Jump in slope at every node (zero slope outside the grid)."""
        s = self.slopes
        return np.diff(np.concatenate(([0.0], s, [0.0])))

    @property
    def strength(self) -> float:
        # exact integral of the piecewise-linear interpolant
        area = math.fsum(0.5 * (self.rho[1:] + self.rho[:-1]) * np.diff(self.omega))
        return float(math.sqrt(max(area, 0.0)))

    @property
    def center(self) -> float:
        m = _tab_moments(self, 1, about=0.0)
        return float(m[1] / m[0]) if m[0] > 0 else float(0.5 * (self.omega[0] + self.omega[-1]))

    @property
    def fwhm(self) -> float:
        r, w = self.rho, self.omega
        k = int(np.argmax(r))
        half = 0.5 * r[k]
        left = np.flatnonzero(r[: k + 1] < half)
        right = np.flatnonzero(r[k:] < half)
        if left.size:
            i = left[-1]
            lo = w[i] + (half - r[i]) * (w[i + 1] - w[i]) / (r[i + 1] - r[i])
        else:
            lo = w[0]
        if right.size:
            i = k + right[0]
            hi = w[i - 1] + (half - r[i - 1]) * (w[i] - w[i - 1]) / (r[i] - r[i - 1])
        else:
            hi = w[-1]
        return float(hi - lo)

    @property
    def scale(self) -> float:
        return max(self.strength, self.fwhm, self.gamma_hom, abs(self.center), 1e-300)

    def density(self, omega):
        return np.interp(np.asarray(omega, dtype=float), self.omega, self.rho, left=0.0, right=0.0)

    def cdf(self, omega):
        seg = 0.5 * (self.rho[1:] + self.rho[:-1]) * np.diff(self.omega)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        total = cum[-1]
        x = np.clip(np.asarray(omega, dtype=float), self.omega[0], self.omega[-1])
        i = np.clip(np.searchsorted(self.omega, x, side="right") - 1, 0, self.omega.size - 2)
        dx = x - self.omega[i]
        return (cum[i] + self.rho[i] * dx + 0.5 * self.slopes[i] * dx * dx) / total

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        seg = 0.5 * (self.rho[1:] + self.rho[:-1]) * np.diff(self.omega)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        target = u * cum[-1]
        i = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, self.omega.size - 2)
        rem = target - cum[i]
        a = 0.5 * self.slopes[i]
        b = self.rho[i]
        # stable root of a dx^2 + b dx - rem = 0 inside the segment
        den = b + np.sqrt(np.maximum(b * b + 4 * a * rem, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(den > 0, 2 * rem / den, 0.0)
        h = np.diff(self.omega)[i]
        return self.omega[i] + np.clip(dx, 0.0, h)

    def with_strength(self, strength: float) -> "Tabulated":
        s = self.strength
        return Tabulated(self.omega, self.rho * (strength / s) ** 2, self.gamma_hom)

    def to_dict(self) -> dict:
        return {
            "type": "tabulated",
            "omega": [float(x) for x in self.omega],
            "rho": [float(x) for x in self.rho],
            "gamma_hom": self.gamma_hom,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "rho"])
            for a, b in zip(self.omega, self.rho):
                w.writerow([repr(float(a)), repr(float(b))])

    @classmethod
    def from_csv(cls, path, gamma_hom: float = 0.0) -> "Tabulated":
        """Load a two-column (omega, rho) CSV; a header row is optional."""
        path = Path(path)
        if not path.exists():
            raise InvalidInput(f"tabulated density file not found: {path}")
        rows = []
        with open(path, newline="") as fh:
            for k, row in enumerate(csv.reader(fh)):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if k == 0:
                        continue
                    raise InvalidInput(f"{path}:{k + 1}: expected two numeric columns") from None
        a = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(a[:, 0], a[:, 1], gamma_hom)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def sample_ensemble(
    profile: CouplingDensity, n: int, seed: int = 0, scheme: str = "quantile"
) -> Ensemble:
    """Draw a discrete ensemble from a continuous coupling density.

    Parameters
    ----------
    profile : CouplingDensity
        Continuous variant.
    n : int
        Number of spins.
    seed : int
        Seed for ``scheme="random"``; ignored for quantiles.
    scheme : {"quantile", "random"}
        ``quantile`` places spins at the inverse-CDF midpoints
        ``(k + 1/2) / n`` and is fully deterministic.

    Returns
    -------
    Ensemble
        Uniform coupling ``Omega / sqrt(n)``, decay ``gamma_hom``.
    """
    if not profile.is_continuous:
        raise InvalidInput("sample_ensemble needs a continuous density")
    if int(n) != n or n < 1:
        raise InvalidInput(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if scheme == "quantile":
        u = (np.arange(n) + 0.5) / n
    elif scheme == "random":
        u = np.random.default_rng(seed).random(n)
    else:
        raise InvalidInput(f"unknown sampling scheme {scheme!r}")
    w = np.sort(np.asarray(profile.ppf(u), dtype=float))
    g = np.full(n, profile.strength / math.sqrt(n))
    d = np.full(n, float(profile.gamma_hom))
    return _make(w, d, g, np.zeros(n))


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSet:
    """Normalized moments and tail coefficients of a coupling density.

    Attributes
    ----------
    mean : complex
        Expansion point ``omega_bar`` (imaginary part ``-gamma_hom / 2`` for
        continuous profiles).
    moments : tuple
        Real central moments ``M_n`` of ``rho / Omega**2`` about
        ``Re omega_bar``; ``None`` where the moment does not exist.
    tail_A : tuple of complex
        Coefficients ``A_k`` of the expansion
        ``K(z) = Omega**2 sum_k A_k / (z - omega_bar)**(k + 1)``.
    tail_B : tuple of float
        Coefficients ``B_n`` of the algebraic density tail
        ``rho / Omega**2 ~ sum_n B_n / (omega - omega_bar)**(n + 1)``.
    max_order : int
    strength : float
        ``Omega``.
    """

    mean: complex
    moments: tuple
    tail_A: tuple
    tail_B: tuple
    max_order: int
    strength: float

    @property
    def variance(self):
        return None if self.max_order < 2 else self.moments[2]


def _tab_moments(profile: "Tabulated", max_order: int, about: float) -> np.ndarray:
    # exact for piecewise-linear rho: Gauss-Legendre per segment
    nq = max_order // 2 + 2
    xg, wg = np.polynomial.legendre.leggauss(nq)
    a, b = profile.omega[:-1], profile.omega[1:]
    ra, rb = profile.rho[:-1], profile.rho[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * xg[None, :]
    r = ra[:, None] + (rb - ra)[:, None] * (0.5 * (xg[None, :] + 1.0))
    base = r * wg[None, :] * half[:, None]
    u = x - about
    out = np.empty(max_order + 1)
    p = np.ones_like(u)
    for n in range(max_order + 1):
        out[n] = math.fsum((base * p).ravel())
        p = p * u
    return out


def moment_set(profile: CouplingDensity, max_order: int) -> MomentSet:
    """Moments ``M_n`` and asymptotic coefficients ``A_k``, ``B_n`` up to `max_order`.

    Parameters
    ----------
    profile : CouplingDensity
    max_order : int
        Highest order, ``>= 0``.

    Returns
    -------
    MomentSet
        For a Lorentzian only ``M_0`` exists and the others are ``None``.
    """
    if int(max_order) != max_order or max_order < 0:
        raise InvalidInput("max_order must be a non-negative integer")
    n = int(max_order)
    orders = range(n + 1)
    if isinstance(profile, Lorentzian):
        g = profile.width
        mean = complex(profile.center, -0.5 * profile.gamma_hom)
        M = tuple([1.0] + [None] * n)
        A = tuple(complex((-0.5j * g) ** k) for k in orders)
        B = tuple(
            0.0 if k % 2 == 0 else g / (2 * math.pi) * (-0.25 * g * g) ** ((k - 1) // 2) for k in orders
        )
        return MomentSet(mean, M[: n + 1], A, B, n, profile.strength)
    if isinstance(profile, Gaussian):
        s2 = profile.sigma**2
        mean = complex(profile.center, -0.5 * profile.gamma_hom)
        vals = []
        for k in orders:
            if k % 2:
                vals.append(0.0)
            else:
                dfact = math.prod(range(k - 1, 0, -2)) if k > 1 else 1
                vals.append(float(dfact) * s2 ** (k // 2))
        return MomentSet(
            mean, tuple(vals), tuple(complex(v) for v in vals), (0.0,) * (n + 1), n, profile.strength
        )
    if isinstance(profile, Discrete):
        if profile.ensemble is None:
            raise InvalidInput("moments of an empty ensemble are undefined")
        e = profile.ensemble
        p = e.couplings**2 / math.fsum(e.couplings**2)
        mean = e.mean_frequency
        dr = e.frequencies - mean.real
        dz = e.complex_frequencies - mean
        M = tuple(math.fsum(p * dr**k) for k in orders)
        A = tuple(complex(math.fsum((p * dz**k).real), math.fsum((p * dz**k).imag)) for k in orders)
        return MomentSet(mean, M, A, (0.0,) * (n + 1), n, e.collective_coupling)
    if isinstance(profile, Tabulated):
        raw = _tab_moments(profile, 1, 0.0)
        mu = raw[1] / raw[0]
        c = _tab_moments(profile, n, mu) / raw[0]
        c[0] = 1.0
        if n >= 1:
            c[1] = 0.0
        mean = complex(mu, -0.5 * profile.gamma_hom)
        return MomentSet(
            mean, tuple(float(x) for x in c), tuple(complex(x) for x in c), (0.0,) * (n + 1), n, profile.strength
        )
    raise InvalidInput(f"unsupported profile {type(profile).__name__}")


# --------------------------------------------------------------------------
# homogeneous broadening
# --------------------------------------------------------------------------


def _graded_grid(center: float, core: float, step: float, extent: float, c_tail: float) -> np.ndarray:
    """Uniform grid on ``[center - core, center + core]`` with graded tails.

    Beyond the core the spacing grows like ``c_tail * x**(4/3)``, which keeps
    the trapezoid error of algebraic ``1/x**2`` tails bounded with a finite
    number of nodes.
    """
    m = int(math.ceil(core / step))
    inner = np.arange(-m, m + 1) * (core / m)
    tail = []
    x = core
    while x < extent:
        h = max(core / m, c_tail * x ** (4.0 / 3.0))
        x = min(x + h, extent)
        tail.append(x)
    tail = np.array(tail)
    return center + np.concatenate((-tail[::-1], inner, tail))


def convolve_homogeneous(profile: CouplingDensity) -> CouplingDensity:
    """Fold the homogeneous linewidth into the density.

    Returns ``rho'(omega) = integral rho(omega') L(omega - omega') d omega'``
    with ``L`` a normalized Lorentzian of FWHM ``gamma_hom``, and
    ``gamma_hom = 0``. Lorentzian profiles stay Lorentzian; Gaussian and
    tabulated profiles become tabulated on a graded grid whose tails extend
    far enough that the total weight is kept to about 1e-8.
    """
    if profile.gamma_hom == 0.0:
        return profile
    if isinstance(profile, Discrete):
        raise InvalidInput("convolve_homogeneous needs a continuous density")
    gh = profile.gamma_hom
    if isinstance(profile, Lorentzian):
        return Lorentzian(profile.center, profile.width + gh, profile.strength, 0.0)
    from . import levelshift as _ls

    if isinstance(profile, Gaussian):
        feat = max(profile.sigma, 0.5 * gh)
        core = 10.0 * profile.sigma + 20.0 * gh
        grid = _graded_grid(profile.center, core, feat / 400.0, 1e9 * feat, 1e-4 * feat ** (-1.0 / 3.0))
    elif isinstance(profile, Tabulated):
        lo, hi = profile.omega[0], profile.omega[-1]
        mid = 0.5 * (lo + hi)
        width = 0.5 * (hi - lo)
        step = min(float(np.min(np.diff(profile.omega))), 0.25 * gh)
        core = width + 20.0 * gh
        feat = max(width, 0.5 * gh)
        base = _graded_grid(mid, core, max(step, core / 20000.0), 1e9 * feat, 1e-4 * feat ** (-1.0 / 3.0))
        grid = np.union1d(base, profile.omega)
    else:
        raise InvalidInput(f"unsupported profile {type(profile).__name__}")
    rho = _ls.LevelShift(profile).broadened_density(grid)
    return Tabulated(grid, np.maximum(rho, 0.0), 0.0)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _complex_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidInput(f"complex numbers are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def ensemble_from_dict(doc: dict) -> Ensemble:
    try:
        spins = [
            SpinSpec(
                float(s["frequency"]),
                float(s.get("decay", 0.0)),
                _complex_from_json(s.get("coupling", 1.0)),
            )
            for s in doc["spins"]
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"malformed ensemble document: {exc}") from None
    return build_ensemble(spins)


def density_from_dict(doc: dict, base_dir: Path | None = None) -> CouplingDensity:
    """Inverse of ``to_dict`` for every density variant.

    A tabulated density may reference a CSV file via ``"path"``, resolved
    relative to `base_dir`.
    """
    kind = doc.get("type")
    gh = float(doc.get("gamma_hom", 0.0))
    try:
        if kind == "lorentzian":
            return Lorentzian(float(doc.get("center", 0.0)), float(doc["width"]), float(doc["strength"]), gh)
        if kind == "gaussian":
            return Gaussian(float(doc.get("center", 0.0)), float(doc["sigma"]), float(doc["strength"]), gh)
        if kind == "tabulated":
            if "path" in doc:
                p = Path(doc["path"])
                if base_dir is not None and not p.is_absolute():
                    p = Path(base_dir) / p
                return Tabulated.from_csv(p, gh)
            return Tabulated(np.array(doc["omega"], float), np.array(doc["rho"], float), gh)
        if kind == "discrete":
            ens = doc.get("ensemble")
            return Discrete(None if ens is None else ensemble_from_dict(ens))
        if kind == "ensemble":
            return Discrete(ensemble_from_dict(doc))
    except KeyError as exc:
        raise InvalidInput(f"density of type {kind!r} is missing field {exc}") from None
    raise InvalidInput(f"unknown density type {kind!r}")


def to_json(obj, path=None, indent: int | None = 2) -> str:
    """Serialize an Ensemble or CouplingDensity; write to `path` if given."""
    text = json.dumps(obj.to_dict(), indent=indent)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def from_json(source):
    """Load an Ensemble or CouplingDensity from a JSON string or file path."""
    base = None
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        base = Path(source).parent
        source = Path(source).read_text()
    doc = json.loads(source)
    if doc.get("type") == "ensemble":
        return ensemble_from_dict(doc)
    return density_from_dict(doc, base)
