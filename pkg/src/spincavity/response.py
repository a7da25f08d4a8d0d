"""Linear response of the cavity-ensemble system.

Frequency domain: the forward propagators

    G_cc(w) = 1 / (w - omega_c + i kappa - K(w)),
    G_jc = g_j k_j G_cc,   G_ck = conj(g_k) k_k G_cc,
    G_jk = delta_jk k_j + g_j conj(g_k) k_j k_k G_cc,
    G_sc = G_cs = K G_cc / Omega,
    G_ss = K (1 + K G_cc) / Omega**2,

with ``k_j(w) = 1 / (w - omega_j + i gamma_j / 2)`` and the couplings in
the input gauge (``H_jc = g_j``). The susceptibility is ``chi = G(w)``.

Time domain: ``G(t) = [exp(-i H t)]`` evaluated from the eigenmodes, by
time-stepping the memory-kernel equation

    dG_cc/dt = -i (omega_c - i kappa) G_cc - int_0^t K(t - s) G_cc(s) ds,

or by Fourier inversion of ``G_cc(w)`` along the real axis.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from ._backend import kernels
from .errors import InvalidInput, NoSteadyState, SingularPoint
from .levelshift import LevelShift, memory_kernel
from .model import (
    CavitySpec,
    Discrete,
    Ensemble,
    Gaussian,
    Lorentzian,
    Tabulated,
    _graded_grid,
)
from .spectral import eigensystem

CHANNELS = ("cc", "jc", "ck", "jk", "sc", "cs", "ss")
TIME_METHODS = ("eigen", "kernel", "quadrature")


# --------------------------------------------------------------------------
# result types
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Cavity susceptibility sampled on a frequency grid.

    ``transmissivity = |chi_cc|**2`` (in drive units) and ``phase = arg chi_cc``.
    """

    grid: np.ndarray
    chi_cc: np.ndarray

    @property
    def transmissivity(self) -> np.ndarray:
        return np.abs(self.chi_cc) ** 2

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.chi_cc)


@dataclass(frozen=True, eq=False)
class DriveSpec:
    """Classical drive ``sum_mu E_mu exp(-i w0 t) a_mu^dag + h.c.``.

    Parameters
    ----------
    amplitudes : array_like of complex
        ``[E_c, E_1, ..., E_N]`` with spins in ensemble (sorted) order. A
        single value drives the cavity only.
    frequency : float
        Drive frequency ``w0``.
    """

    amplitudes: np.ndarray
    frequency: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        if a.ndim != 1 or a.size == 0 or not np.all(np.isfinite(a)):
            raise InvalidInput("drive amplitudes must be a non-empty finite vector")
        if not math.isfinite(self.frequency):
            raise InvalidInput("drive frequency must be finite")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequency", float(self.frequency))


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """Samples of one propagator matrix element ``G(t)``."""

    times: np.ndarray
    values: np.ndarray
    channel: str
    method: str = ""
    info: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ExcitationDistribution:
    """Asymptotic spectral distribution of the excited spin.

    Attributes
    ----------
    omega, p : ndarray
        Density ``p(w) = rho(w) |G_cc(w)|**2`` on an adaptive grid.
    converted : float
        ``int p dw``, the probability that the photon ends up in the spins.
    leak : float
        ``2 kappa int_0^inf |G_cc(t)|**2 dt``, including the tail estimate.
    tail : float
        Analytic bound used for the time integral beyond the last sample.
    """

    omega: np.ndarray
    p: np.ndarray
    converted: float
    leak: float
    tail: float

    @property
    def total(self) -> float:
        return self.converted + self.leak


@dataclass(frozen=True, eq=False)
class LeakageReport:
    """Survival of the zeroth-order upper polariton.

    ``trace`` holds ``G_++(t)``; ``bound = 2 |phi_+|**2 - 1`` is the exact
    triangle-inequality bound on ``|G_++(t)|``.
    """

    trace: TimeTrace
    phi: np.ndarray
    energies: np.ndarray
    phi_plus: complex
    bound: float
    min_abs: float
    theta: complex
    rabi_frequency: complex


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _as_levelshift(system) -> LevelShift:
    return system if isinstance(system, LevelShift) else LevelShift(system)


def _ensemble_of(system) -> Ensemble | None:
    if isinstance(system, Ensemble):
        return system
    src = system.source if isinstance(system, LevelShift) else system
    if isinstance(src, Discrete):
        return src.ensemble
    if system is None:
        return None
    raise InvalidInput("this operation needs a discrete ensemble")


def _is_discrete(system) -> bool:
    if system is None or isinstance(system, Ensemble):
        return True
    src = system.source if isinstance(system, LevelShift) else system
    return isinstance(src, Discrete)


def _check_index(ens: Ensemble | None, j, name: str) -> int:
    if ens is None or j is None:
        raise InvalidInput(f"channel needs a spin index {name}")
    j = int(j)
    if not 0 <= j < len(ens):
        raise InvalidInput(f"spin index {name}={j} out of range for {0 if ens is None else len(ens)} spins")
    return j


def _kj(ens: Ensemble, j: int, w):
    d = w - ens.complex_frequencies[j]
    if np.any(d == 0):
        raise SingularPoint(f"propagator evaluated on the pole of spin {j}", index=j)
    return 1.0 / d


# --------------------------------------------------------------------------
# frequency domain
# --------------------------------------------------------------------------


def propagator(levelshift, cavity: CavitySpec, omega, channel: str = "cc", j=None, k=None):
    """Forward propagator (susceptibility) matrix element.

    Parameters
    ----------
    levelshift : LevelShift, CouplingDensity, Ensemble or None
    cavity : CavitySpec
    omega : float, complex or array_like
        Frequencies, normally real; complex values give the analytic
        continuation of the forward propagator.
    channel : {"cc", "jc", "ck", "jk", "sc", "cs", "ss"}
    j, k : int, optional
        Spin indices (ensemble order) for the spin channels.

    Returns
    -------
    complex or ndarray
    """
    if channel not in CHANNELS:
        raise InvalidInput(f"channel must be one of {CHANNELS}, got {channel!r}")
    ls = _as_levelshift(levelshift)
    w = np.asarray(omega, dtype=complex)
    K = ls(w)
    inv = w - cavity.complex_frequency - K
    if np.any(inv == 0):
        raise SingularPoint("propagator evaluated exactly on a pole")
    G = 1.0 / inv
    if channel == "cc":
        out = G
    elif channel in ("sc", "cs", "ss"):
        O = ls.strength
        if O == 0:
            raise InvalidInput("the superradiant mode is undefined for zero collective coupling")
        out = K * G / O if channel != "ss" else K * (1.0 + K * G) / (O * O)
    else:
        ens = _ensemble_of(ls)
        g = None if ens is None else ens.original_couplings
        if channel == "jc":
            jj = _check_index(ens, j, "j")
            out = g[jj] * _kj(ens, jj, w) * G
        elif channel == "ck":
            kk = _check_index(ens, k, "k")
            out = np.conj(g[kk]) * _kj(ens, kk, w) * G
        else:
            jj = _check_index(ens, j, "j")
            kk = _check_index(ens, k, "k")
            kj = _kj(ens, jj, w)
            kk_ = _kj(ens, kk, w)
            out = g[jj] * np.conj(g[kk]) * kj * kk_ * G + (kj if jj == kk else 0.0)
    return out[()] if np.ndim(out) == 0 else out


def resolvent_matrix(ensemble: Ensemble | None, cavity: CavitySpec, z: complex) -> np.ndarray:
    """Dense ``(z - H)^{-1}`` in the input coupling gauge (cavity first).

    Intended as an independent check of :func:`propagator`.
    """
    from .spectral import hamiltonian_matrix

    H = hamiltonian_matrix(ensemble, cavity)
    if ensemble is not None:
        u = np.concatenate(([1.0], np.exp(1j * ensemble.phases)))
        H = u[:, None] * H * np.conj(u)[None, :]
    return np.linalg.solve(z * np.eye(H.shape[0]) - H, np.eye(H.shape[0]))


def steady_state(system, cavity: CavitySpec, drive: DriveSpec) -> np.ndarray:
    """Steady-state amplitudes ``<a_mu> = sum_nu chi_mu_nu(w0) E_nu``.

    Parameters
    ----------
    system : Ensemble, LevelShift or CouplingDensity
        Continuous sources accept a cavity-only drive.
    cavity : CavitySpec
    drive : DriveSpec

    Returns
    -------
    ndarray
        ``[<a_c>, <a_1>, ..., <a_N>]`` envelopes (the ``exp(-i w0 t)`` factor
        removed), in the input coupling gauge.

    Raises
    ------
    NoSteadyState
        If the cavity and all spins are lossless.
    """
    ls = _as_levelshift(system)
    ens = _ensemble_of(ls) if _is_discrete(ls) else None
    if _is_discrete(ls):
        lossy = cavity.loss > 0 or (ens is not None and np.any(ens.decays > 0))
    else:
        lossy = cavity.loss > 0 or ls.gamma_hom > 0
    if not lossy:
        raise NoSteadyState("a lossless system has no steady state; give kappa or a spin decay > 0")
    E = drive.amplitudes
    n = 0 if ens is None else len(ens)
    w0 = drive.frequency
    if not _is_discrete(ls):
        if E.size != 1:
            raise InvalidInput("a continuous ensemble can only be driven through the cavity")
        return np.array([propagator(ls, cavity, w0) * E[0]])
    if E.size == 1:
        E = np.concatenate((E, np.zeros(n, dtype=complex)))
    if E.size != n + 1:
        raise InvalidInput(f"drive needs {n + 1} amplitudes (cavity first), got {E.size}")
    G = propagator(ls, cavity, w0)
    if n == 0:
        return np.array([G * E[0]])
    g = ens.original_couplings
    kvec = 1.0 / (w0 - ens.complex_frequencies)
    ac = G * (E[0] + np.sum(np.conj(g) * kvec * E[1:]))
    aj = kvec * E[1:] + g * kvec * ac
    return np.concatenate(([ac], aj))


def spectrum(levelshift, cavity: CavitySpec, grid) -> SpectrumResult:
    """Cavity susceptibility on a strictly increasing real frequency grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise InvalidInput("spectrum grid must be strictly increasing")
    chi = np.atleast_1d(propagator(levelshift, cavity, grid))
    return SpectrumResult(grid, chi)


def spectrogram(levelshift, kappa: float, omega_grid, cavity_grid) -> np.ndarray:
    """``chi_cc(w; omega_c)`` with rows indexed by the cavity frequency.

    Returns
    -------
    ndarray, shape (len(cavity_grid), len(omega_grid))
    """
    w = np.asarray(omega_grid, dtype=float)
    wc = np.asarray(cavity_grid, dtype=float)
    if np.any(np.diff(w) <= 0) or np.any(np.diff(wc) <= 0):
        raise InvalidInput("spectrogram grids must be strictly increasing")
    if not kappa >= 0:
        raise InvalidInput("kappa must be >= 0")
    K = np.atleast_1d(_as_levelshift(levelshift)(w.astype(complex)))
    inv = w[None, :] - wc[:, None] + 1j * kappa - K[None, :]
    if np.any(inv == 0):
        raise SingularPoint("spectrogram grid hits a real pole")
    return 1.0 / inv


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------


def _sin_over(x: complex, t):
    """``sin(x t) / x`` with the ``x -> 0`` limit."""
    t = np.asarray(t, dtype=float)
    if x == 0:
        return t.astype(complex)
    return np.sin(x * t) / x


def lorentzian_rabi(Omega: float, gamma: float, kappa: float, delta: float):
    """Complex Rabi frequency and ``(cos theta, sin theta)`` for one damped mode.

    ``Omega_R = sqrt(Omega**2 + (delta - i (kappa - gamma / 2))**2 / 4)``,
    principal branch.
    """
    a = complex(delta, -(kappa - 0.5 * gamma))
    OR = cmath.sqrt(Omega * Omega + a * a / 4.0)
    if OR == 0:
        return OR, complex("nan"), complex("nan")
    return OR, a / (2.0 * OR), Omega / OR


def closed_form_green(regime: str, params: dict, t, channel: str = "cc"):
    """Closed-form ``G_cc(t)`` or ``G_sc(t)`` in limiting cases.

    Parameters
    ----------
    regime : {"rabi", "lorentzian", "weisskopf_wigner"}
        ``rabi``: narrow ensemble, keys ``omega_a``, ``delta``, ``Omega``.
        ``lorentzian``: one damped collective mode, keys ``omega_a``,
        ``delta``, ``Omega``, ``gamma`` (total FWHM), ``kappa``.
        ``weisskopf_wigner``: keys ``omega_c``, ``kappa`` and either
        ``delta_c`` and ``gamma_c`` or a ``levelshift``.
    params : dict
    t : float or array_like
    channel : {"cc", "sc"}

    Notes
    -----
    The Lorentzian form is valid for complex ``Omega_R`` and mixing angle:
    ``G_cc = e (cos W t - i cos(theta) sin W t)`` and
    ``G_sc = -i e sin(theta) sin W t`` with
    ``e = exp(-i (omega_a + delta / 2) t - (gamma / 2 + kappa) t / 2)``.
    """
    if channel not in ("cc", "sc"):
        raise InvalidInput("closed forms exist for the cc and sc channels")
    t = np.asarray(t, dtype=float)
    try:
        if regime == "rabi":
            wa, d, O = float(params["omega_a"]), float(params["delta"]), float(params["Omega"])
            gam, kap = 0.0, 0.0
        elif regime == "lorentzian":
            wa, d, O = float(params["omega_a"]), float(params["delta"]), float(params["Omega"])
            gam, kap = float(params["gamma"]), float(params["kappa"])
        elif regime == "weisskopf_wigner":
            wc = float(params["omega_c"])
            kap = float(params.get("kappa", 0.0))
            if "levelshift" in params:
                Kc = complex(_as_levelshift(params["levelshift"])(complex(wc)))
            else:
                Kc = complex(float(params["delta_c"]), -0.5 * float(params["gamma_c"]))
            if channel != "cc":
                raise InvalidInput("the Weisskopf-Wigner form is given for G_cc only")
            out = np.exp(-1j * (wc - 1j * kap + Kc) * t)
            return out[()] if out.ndim == 0 else out
        else:
            raise InvalidInput(f"unknown regime {regime!r}")
    except KeyError as exc:
        raise InvalidInput(f"missing parameter {exc.args[0]!r} for regime {regime!r}") from None
    a = complex(d, -(kap - 0.5 * gam))
    OR = cmath.sqrt(O * O + a * a / 4.0)
    env = np.exp(-1j * (wa + 0.5 * d) * t - 0.5 * (0.5 * gam + kap) * t)
    S = _sin_over(OR, t)
    if channel == "cc":
        out = env * (np.cos(OR * t) - 0.5j * a * S)
    else:
        out = -1j * env * O * S
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# time domain
# --------------------------------------------------------------------------


def _check_times(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise InvalidInput("t_grid must start at 0 and increase strictly")
    return t


def _spread(ls: LevelShift) -> tuple[float, float]:
    """Center and frequency spread of the ensemble."""
    src = ls.source
    if isinstance(src, Discrete):
        e = src.ensemble
        if e is None:
            return 0.0, 0.0
        c = e.mean_frequency.real
        return c, float(np.max(np.abs(e.frequencies - c))) + 0.5 * float(np.max(e.decays))
    if isinstance(src, Gaussian):
        return src.center, 4.0 * src.sigma + src.gamma_hom
    if isinstance(src, Lorentzian):
        return src.center, src.width + src.gamma_hom
    if isinstance(src, Tabulated):
        c = 0.5 * (src.omega[0] + src.omega[-1])
        return c, 0.5 * (src.omega[-1] - src.omega[0]) + src.gamma_hom
    raise InvalidInput(f"unsupported source {type(src).__name__}")


def evolution_matrix(ensemble: Ensemble | None, cavity: CavitySpec, t) -> np.ndarray:
    """Full ``exp(-i H t)`` in the input gauge from the eigenmodes.

    Returns
    -------
    ndarray, shape (len(t), N+1, N+1) or (N+1, N+1) for scalar ``t``
    """
    E, V, _, _ = eigensystem(ensemble, cavity)
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    u = np.ones(V.shape[0], dtype=complex)
    if ensemble is not None:
        u[1:] = np.exp(1j * ensemble.phases)
    Vu = u[:, None] * V
    Vl = V.T * np.conj(u)[None, :]
    out = np.einsum("iq,tq,qj->tij", Vu, np.exp(-1j * np.outer(ta, E)), Vl)
    return out[0] if np.ndim(t) == 0 else out


def _green_eigen(ls: LevelShift, cavity: CavitySpec, t: np.ndarray, channel: str, j, k) -> np.ndarray:
    ens = _ensemble_of(ls)
    E, V, _, _ = eigensystem(ens, cavity)
    ph = np.exp(-1j * np.outer(t, E))
    c = V[0]
    if channel == "cc":
        return ph @ (c * c)
    if channel in ("sc", "cs", "ss"):
        O = 0.0 if ens is None else ens.collective_coupling
        if O == 0:
            raise InvalidInput("the superradiant mode is undefined for zero collective coupling")
        s = (ens.couplings / O) @ V[1:]
        return ph @ (s * c) if channel != "ss" else ph @ (s * s)
    phase = np.exp(1j * ens.phases) if ens is not None else None
    if channel == "jc":
        jj = _check_index(ens, j, "j")
        return phase[jj] * (ph @ (V[1 + jj] * c))
    if channel == "ck":
        kk = _check_index(ens, k, "k")
        return np.conj(phase[kk]) * (ph @ (c * V[1 + kk]))
    jj = _check_index(ens, j, "j")
    kk = _check_index(ens, k, "k")
    return phase[jj] * np.conj(phase[kk]) * (ph @ (V[1 + jj] * V[1 + kk]))


def _volterra_run(ls, cavity, h, n, wr):
    tk = np.arange(n + 1) * h
    Kt = np.asarray(memory_kernel(ls.source, tk), dtype=complex) * np.exp(1j * wr * tk)
    mag = np.abs(Kt)
    top = mag.max() if mag.size else 0.0
    if top > 0:
        # drop the negligible far tail of fast-decaying kernels
        live = np.flatnonzero(mag > 1e-18 * top)
        Kt = Kt[: live[-1] + 1]
    return kernels.volterra(Kt, complex(cavity.complex_frequency - wr), float(h), int(n))


def kernel_solution(levelshift, cavity: CavitySpec, t_max: float, step: float | None = None):
    """Richardson-extrapolated memory-kernel solution on a uniform grid.

    Returns
    -------
    times, G, dG : ndarray
        ``G_cc`` and its time derivative at ``times = 0, h, ..., >= t_max``.
    h : float
    """
    ls = _as_levelshift(levelshift)
    center, spread = _spread(ls)
    wr = 0.5 * (cavity.frequency + center)
    if step is None:
        F = abs(cavity.frequency - wr) + abs(center - wr) + spread + ls.strength + cavity.loss
        step = 0.02 / max(F, 1e-300)
        if t_max > 0:
            step = min(step, t_max / 8.0)
    h = float(step)
    if not h > 0:
        raise InvalidInput("time step must be positive")
    n = max(1, int(math.ceil(t_max / h - 1e-9)))
    y1, f1 = _volterra_run(ls, cavity, h, n, wr)
    y2, f2 = _volterra_run(ls, cavity, 0.5 * h, 2 * n, wr)
    y = (4.0 * y2[::2] - y1) / 3.0
    f = (4.0 * f2[::2] - f1) / 3.0
    tk = np.arange(n + 1) * h
    rot = np.exp(-1j * wr * tk)
    G = y * rot
    dG = (f - 1j * wr * y) * rot
    return tk, G, dG, h


def _green_kernel(ls, cavity, t, channel, step):
    if channel not in ("cc", "sc", "cs"):
        raise InvalidInput("the kernel method provides the cc and sc channels")
    tk, G, dG, h = kernel_solution(ls, cavity, float(t[-1]), step)
    if channel == "cc":
        vals = G
    else:
        O = ls.strength
        if O == 0:
            raise InvalidInput("the superradiant mode is undefined for zero collective coupling")
        # i dG_cc/dt = omega_c G_cc + Omega G_sc
        vals = (1j * dG - cavity.complex_frequency * G) / O
    idx = np.rint(t / h).astype(np.int64)
    if np.all(np.abs(idx * h - t) <= 1e-12 * max(1.0, t[-1])):
        out = vals[idx]
    elif channel == "cc":
        out = CubicHermiteSpline(tk, G, dG)(t)
    else:
        # not-a-knot cubic interpolation keeps the O(h^4) accuracy
        out = CubicSpline(tk, vals)(t)
    out[t == 0] = 1.0 if channel == "cc" else 0.0
    return out, h


def _filon_weights(c: np.ndarray):
    """``int_0^1 exp(c u) du`` and ``int_0^1 u exp(c u) du``."""
    small = np.abs(c) < 1e-3
    cs = np.where(small, 1.0, c)
    ec = np.exp(cs)
    e0 = np.where(small, 1 + c / 2 + c * c / 6 + c**3 / 24, (ec - 1.0) / cs)
    e1 = np.where(small, 0.5 + c / 3 + c * c / 8 + c**3 / 30, (ec * (cs - 1.0) + 1.0) / (cs * cs))
    return e0, e1


def _green_quadrature(ls: LevelShift, cavity: CavitySpec, t: np.ndarray, resolution: float | None):
    src = ls.source
    if _is_discrete(ls):
        ens = _ensemble_of(ls)
        lossy = cavity.loss > 0 or (ens is not None and np.any(ens.decays > 0))
    else:
        lossy = cavity.loss > 0 or ls.gamma_hom > 0
    if not lossy:
        raise InvalidInput("the quadrature method needs a lossy system")
    # two-pole reference with the same 1/w and Omega**2/w**2 tails
    O = ls.strength
    if isinstance(src, Discrete):
        ens = src.ensemble
        wbar = ens.mean_frequency if ens is not None else 0.0
        rates = [cavity.loss] + ([] if ens is None else list(0.5 * ens.decays))
        center, spread = _spread(ls)
        feats = [r for r in rates if r > 0]
    else:
        width = src.width if isinstance(src, Lorentzian) else 0.0
        wbar = complex(src.center, -0.5 * (ls.gamma_hom + width))
        center, spread = _spread(ls)
        feats = [r for r in (cavity.loss, 0.5 * ls.gamma_hom, src.fwhm / 2) if r > 0]
    feature = min(feats) if feats else 1.0
    if resolution is None:
        resolution = feature / 100.0
    if wbar.imag == 0:
        # keep the reference pole off the real axis
        wbar = complex(wbar.real, -max(feature, 0.25 * spread))
    params = dict(
        omega_a=wbar.real, delta=cavity.frequency - wbar.real, Omega=O, gamma=-2.0 * wbar.imag, kappa=cavity.loss
    )
    Gref_t = closed_form_green("lorentzian", params, t)
    lo = min(center - spread, cavity.frequency) - 2 * (O + cavity.loss + feature)
    hi = max(center + spread, cavity.frequency) + 2 * (O + cavity.loss + feature)
    core = np.linspace(lo, hi, int(math.ceil((hi - lo) / resolution)) + 1)
    # the remainder decays algebraically; geometric spacing suffices outside
    half = 0.5 * (hi - lo)
    reach = np.geomspace(1.0, 1e4 * max(1.0, O / half), 1400)[1:] * half
    w = np.concatenate((lo + half - reach[::-1], core, hi - half + reach))
    K = ls(w.astype(complex))
    wc = cavity.complex_frequency
    chi = 1.0 / (w - wc - K)
    Kref = O * O / (w - wbar)
    chi_ref = 1.0 / (w - wc - Kref)
    R = chi - chi_ref
    a, b = w[:-1], w[1:]
    dw = b - a
    out = np.empty(t.size, dtype=complex)
    for i, ti in enumerate(t):
        e0, e1 = _filon_weights(-1j * ti * dw)
        seg = dw * np.exp(-1j * a * ti) * (R[:-1] * (e0 - e1) + R[1:] * e1)
        out[i] = 1j / (2.0 * math.pi) * seg.sum()
    return Gref_t + out, resolution


def green_time(system, cavity: CavitySpec, t_grid, channel: str = "cc", method: str = "eigen",
               j=None, k=None, step: float | None = None) -> TimeTrace:
    """Propagator matrix element ``G(t)`` on a time grid.

    Parameters
    ----------
    system : Ensemble, LevelShift or CouplingDensity
    cavity : CavitySpec
    t_grid : array_like
        Starts at 0, strictly increasing.
    channel : str
        ``eigen`` supports every channel; ``kernel`` gives ``cc`` and ``sc``;
        ``quadrature`` gives ``cc``.
    method : {"eigen", "kernel", "quadrature"}
        ``eigen`` sums over the dressed modes (discrete ensembles only),
        ``kernel`` time-steps the memory-kernel equation with an implicit
        trapezoid rule and Richardson extrapolation, ``quadrature`` inverts
        the Fourier transform of ``G_cc(w)`` (lossy systems only).
    j, k : int, optional
        Spin indices for spin channels.
    step : float, optional
        Time step (``kernel``) or frequency resolution (``quadrature``).
    """
    if method not in TIME_METHODS:
        raise InvalidInput(f"method must be one of {TIME_METHODS}, got {method!r}")
    if channel not in CHANNELS:
        raise InvalidInput(f"channel must be one of {CHANNELS}, got {channel!r}")
    t = _check_times(t_grid)
    ls = _as_levelshift(system)
    info = {}
    if method == "eigen":
        if not _is_discrete(ls):
            raise InvalidInput("the eigen method needs a discrete ensemble")
        vals = _green_eigen(ls, cavity, t, channel, j, k)
    elif method == "kernel":
        vals, h = _green_kernel(ls, cavity, t, channel, step)
        info["step"] = h
    else:
        if channel != "cc":
            raise InvalidInput("the quadrature method provides the cc channel")
        vals, res = _green_quadrature(ls, cavity, t, step)
        info["resolution"] = res
    return TimeTrace(t, np.asarray(vals, dtype=complex), channel, method, info)


# --------------------------------------------------------------------------
# asymptotic excitation distribution
# --------------------------------------------------------------------------


def _refine(w: np.ndarray, f, tol: float, max_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    v = f(w)
    for _ in range(40):
        rel = np.abs(np.diff(v)) / np.maximum(np.maximum(v[:-1], v[1:]), 1e-300)
        bad = np.flatnonzero(rel > tol)
        if bad.size == 0 or w.size + bad.size > max_nodes:
            break
        new = 0.5 * (w[bad] + w[bad + 1])
        vn = f(new)
        w = np.concatenate((w, new))
        v = np.concatenate((v, vn))
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[order]
    return w, v


def excitation_distribution(levelshift, cavity: CavitySpec, tol: float = 0.003,
                            max_nodes: int = 400_000, step: float | None = None) -> ExcitationDistribution:
    """Asymptotic energy distribution ``p(w)`` of the excited spin and the cavity leak.

    Requires a continuous profile with non-decaying spins. The leak ``2 kappa int |G_cc(t)|**2 dt``
    is integrated from the memory-kernel solution until ``|G_cc|**2 < 1e-10``
    and the remainder is bounded by the decay rate of the final samples.
    """
    ls = _as_levelshift(levelshift)
    src = ls.source
    if isinstance(src, Discrete):
        # G_cc(t) of a finite ensemble never settles, so p(w) has no limit
        raise InvalidInput("the excitation distribution needs a continuous coupling density")
    if ls.gamma_hom > 0:
        raise InvalidInput("the excitation distribution assumes non-decaying spins (gamma_hom = 0)")
    leak, tail = _leak(ls, cavity, step)

    def dens(w):
        return np.asarray(src.density(w), dtype=float) * np.abs(propagator(ls, cavity, w)) ** 2

    center, spread = _spread(ls)
    if isinstance(src, Tabulated):
        w0 = np.union1d(src.omega, np.linspace(src.omega[0], src.omega[-1], 4097))
    elif isinstance(src, Gaussian):
        w0 = center + src.sigma * np.linspace(-12.0, 12.0, 4097)
    else:
        feat = min(src.width, cavity.loss) if cavity.loss > 0 else src.width
        w0 = _graded_grid(center, 10 * spread + 5 * ls.strength, feat / 50, 1e7 * spread, 1e-3 * feat ** (-1 / 3))
    w, p = _refine(w0, dens, tol, max_nodes)
    converted = float(simpson(p, x=w))
    if isinstance(src, Lorentzian):
        # algebraic tails beyond the grid: p ~ c / w**4
        for end, sgn in ((w[-1], 1.0), (w[0], -1.0)):
            converted += p[-1 if sgn > 0 else 0] * abs(end - center) / 3.0
    return ExcitationDistribution(w, p, converted, leak, tail)


def _leak(ls: LevelShift, cavity: CavitySpec, step: float | None) -> tuple[float, float]:
    kap = cavity.loss
    if kap == 0:
        return 0.0, 0.0
    # |G_cc|^2 decays at least as fast as exp(-2 kappa t)
    T = 12.0 / kap
    if step is None:
        center, spread = _spread(ls)
        F = abs(cavity.frequency - center) + spread + ls.strength + kap
        step = min(0.1 / F, T / 64.0)
    for _ in range(12):
        tk, G, _, h = kernel_solution(ls, cavity, T, step)
        a2 = np.abs(G) ** 2
        below = np.flatnonzero(a2 < 1e-10)
        if below.size and below[0] > 8:
            cut = below[0]
            tk, a2 = tk[: cut + 1], a2[: cut + 1]
            break
        T *= 2.0
    n = tk.size
    core = float(simpson(a2, x=tk))
    # decay rate of |G|^2 over the last quarter bounds the remainder
    m = max(2, n // 4)
    lg = np.log(np.maximum(a2[-m:], 1e-300))
    rate = -np.polyfit(tk[-m:], lg, 1)[0]
    rate = max(rate, 2.0 * kap)
    tail = float(a2[-1] / rate) * 2.0
    return 2.0 * kap * (core + tail), 2.0 * kap * tail


# --------------------------------------------------------------------------
# dressed-state leakage
# --------------------------------------------------------------------------


def dressed_leakage(ensemble: Ensemble, cavity: CavitySpec, t_grid) -> LeakageReport:
    """Survival amplitude of the zeroth-order upper polariton.

    ``Phi_+ = cos(theta/2) a_c + sin(theta/2) b`` with the complex mixing
    angle of the two-mode problem (``gamma`` set to the mean spin decay).
    ``G_++(t) = sum_q |phi_q|**2 exp(-i E_q t)`` with
    ``phi_q = cos(theta/2) eta_qc + sin(theta/2) eta_qs``.
    """
    if not isinstance(ensemble, Ensemble):
        raise InvalidInput("dressed_leakage needs a discrete ensemble")
    t = _check_times(t_grid)
    O = ensemble.collective_coupling
    if O == 0:
        raise InvalidInput("dressed_leakage needs a nonzero collective coupling")
    wbar = ensemble.mean_frequency
    gam = -2.0 * wbar.imag
    delta = cavity.frequency - wbar.real
    OR, cth, sth = lorentzian_rabi(O, gam, cavity.loss, delta)
    if OR == 0:
        raise InvalidInput("the mixing angle is undefined at the exceptional point")
    theta = cmath.acos(cth)
    c2 = cmath.cos(0.5 * theta)
    s2 = cmath.sin(0.5 * theta)
    norm = math.sqrt(abs(c2) ** 2 + abs(s2) ** 2)
    c2, s2 = c2 / norm, s2 / norm
    E, V, _, _ = eigensystem(ensemble, cavity)
    eta_s = (ensemble.couplings / O) @ V[1:]
    phi = c2 * V[0] + s2 * eta_s
    w = np.abs(phi) ** 2
    G = np.exp(-1j * np.outer(t, E)) @ w
    q = int(np.argmax(w))
    bound = 2.0 * float(w[q]) - 1.0
    trace = TimeTrace(t, G, "++", "eigen")
    return LeakageReport(trace, phi, E, complex(phi[q]), bound, float(np.min(np.abs(G))), theta, OR)
