"""Exact single-excitation eigenmodes of a discrete ensemble.

The Hamiltonian in the single-excitation subspace is the (N+1)x(N+1)
matrix with cavity entry ``omega_c - i kappa``, spin entries
``omega_j - i gamma_j / 2`` and couplings ``|g_j|`` in the cavity row and
column (coupling phases are gauged away). For a lossless ensemble with
distinct frequencies the eigenvalues are the roots of the secular equation

    E - omega_c - sum_j |g_j|**2 / (E - omega_j) = 0,

found by bisection on the interlacing brackets. Otherwise a dense complex
eigensolver is used. Eigenvectors are normalized with the unconjugated
product ``v^T v = 1`` so that ``G_cc(t) = sum_q eta_qc**2 exp(-i E_q t)``
holds for complex energies too.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._backend import kernels
from .errors import InvalidInput
from .model import CavitySpec, Ensemble

PHOTONLIKE = "photonlike"
SPINLIKE = "spinlike"
_MIN_GAP = np.finfo(float).tiny / np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class PolaritonMode:
    """One dressed eigenmode.

    Attributes
    ----------
    energy : complex
        Eigenenergy ``E_q``.
    photonic_amplitude : complex
        Cavity component ``eta_qc``.
    mode_function : ndarray
        Spin components ``eta_qj`` in the input coupling gauge, in ensemble
        order, so that ``eta_qj = g_j eta_qc / (E_q - omega_j)``.
    photon_fraction : float
        Cavity share ``|eta_qc|**2 / ||eta_q||**2`` of the mode; equal to
        ``|eta_qc|**2`` in the lossless case.
    anchor, offset : int and float, optional
        For secular-equation roots, ``E_q = omega[anchor] + offset`` with
        the offset resolved to full relative precision.
    """

    energy: complex
    photonic_amplitude: complex
    mode_function: np.ndarray
    photon_fraction: float
    anchor: int | None = None
    offset: float | None = None


@dataclass(frozen=True)
class InterlacingReport:
    """Per-root outcome of the interlacing test.

    ``checks[0]`` is ``E_- < omega_1``, ``checks[-1]`` is ``E_+ > omega_N``
    and the others are ``omega_q < E_q < omega_(q+1)``.
    """

    passed: bool
    checks: tuple = field(default_factory=tuple)


def _gauged(ensemble: Ensemble | None):
    if ensemble is None:
        return np.zeros(0), np.zeros(0, dtype=complex), np.zeros(0)
    return ensemble.frequencies, ensemble.complex_frequencies, ensemble.couplings


def hamiltonian_matrix(ensemble: Ensemble | None, cavity: CavitySpec) -> np.ndarray:
    """Single-excitation Hamiltonian, cavity first, in the real-coupling gauge.

    Parameters
    ----------
    ensemble : Ensemble or None
        ``None`` gives the 1x1 bare-cavity matrix.
    cavity : CavitySpec

    Returns
    -------
    ndarray, complex, shape (N+1, N+1)
    """
    _, wc, g = _gauged(ensemble)
    n = wc.size
    H = np.zeros((n + 1, n + 1), dtype=complex)
    H[0, 0] = cavity.complex_frequency
    H[np.arange(1, n + 1), np.arange(1, n + 1)] = wc
    H[0, 1:] = g
    H[1:, 0] = g
    return H


def is_lossless(ensemble: Ensemble | None, cavity: CavitySpec) -> bool:
    return cavity.loss == 0.0 and (ensemble is None or not np.any(ensemble.decays > 0))


def _sort_key(E: np.ndarray, frac: np.ndarray) -> np.ndarray:
    return np.lexsort((-frac, E.real))


def eigensystem(ensemble: Ensemble | None, cavity: CavitySpec, method: str = "auto"):
    """Eigenvalues and gauged eigenvectors as arrays.

    Returns
    -------
    E : ndarray, complex, shape (N+1,)
        Sorted by ascending ``Re E``, ties by descending photon fraction.
    V : ndarray, complex, shape (N+1, N+1)
        Columns are eigenvectors in the real-coupling gauge with
        ``V[:, q] @ V[:, q] = 1``; row 0 is the cavity.
    anchor, offset : ndarray or None
        Secular-root representation (lossless method only).
    """
    if method not in ("auto", "secular", "dense"):
        raise InvalidInput(f"unknown eigen method {method!r}")
    w, wc, g = _gauged(ensemble)
    lossless = is_lossless(ensemble, cavity)
    coupled = g > 0
    # offsets below this lose precision as subnormals; treat such spins as degenerate
    distinct = np.all(np.diff(w[coupled]) > _MIN_GAP) if coupled.any() else True
    use_secular = method == "secular" or (method == "auto" and lossless and distinct and coupled.any())
    if use_secular:
        if not lossless:
            raise InvalidInput("the secular-equation path needs a lossless system")
        if not distinct:
            raise InvalidInput("the secular-equation path needs distinct spin frequencies; merge degenerate spins first")
        if not coupled.any():
            raise InvalidInput("the secular-equation path needs at least one coupled spin")
        return _secular_system(w, g, cavity.frequency)
    H = hamiltonian_matrix(ensemble, cavity)
    if lossless:
        E, V = np.linalg.eigh(H.real)
        E = E.astype(complex)
        V = V.astype(complex)
    else:
        E, V = scipy.linalg.eig(H)
        V = _t_normalize(H, E, V)
    frac = np.abs(V[0]) ** 2 / np.sum(np.abs(V) ** 2, axis=0)
    order = _sort_key(E, frac)
    return E[order], V[:, order], None, None


def _t_normalize(H: np.ndarray, E: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Normalize eigenvectors of a complex symmetric matrix to ``v^T v = 1``.

    Eigenvectors of distinct eigenvalues are already orthogonal under the
    unconjugated product. Inside an exactly degenerate cluster (identical
    spins) the eigenspace is spanned by real vectors, so a real orthonormal
    basis of it is also orthonormal under that product.
    """
    V = V.copy()
    tol = 1e-10 * max(1.0, np.abs(H).max())
    order = np.argsort(E.real, kind="stable")
    i = 0
    while i < order.size:
        j = i + 1
        while j < order.size and abs(E[order[j]] - E[order[i]]) <= tol:
            j += 1
        if j - i > 1:
            idx = order[i:j]
            k = idx.size
            U, sv, _ = np.linalg.svd(np.hstack([V[:, idx].real, V[:, idx].imag]), full_matrices=False)
            B = U[:, :k].astype(complex)
            lam = E[idx].mean()
            if np.abs(H @ B - lam * B).max() <= 1e3 * tol:
                V[:, idx] = B
                E[idx] = lam
        i = j
    norm = np.sqrt(np.sum(V * V, axis=0))
    return V / norm[None, :]


def _secular_system(w: np.ndarray, g: np.ndarray, omega_c: float):
    n = w.size
    coupled = np.flatnonzero(g > 0)
    fr = w[coupled]
    g2 = g[coupled] ** 2
    anc_local, off = kernels.secular_roots(fr, g2, float(omega_c))
    anc = coupled[anc_local]
    m = anc.size
    # amplitudes from E - omega_j = (omega_anchor - omega_j) + offset
    d = (w[anc][:, None] - w[None, :]) + off[:, None]
    V = np.zeros((n + 1, m + (n - coupled.size)), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = np.where(g[None, :] > 0, g[None, :] / d, 0.0)
        # scale before squaring so roots extremely close to a spin do not overflow
        big = np.maximum(1.0, np.max(np.abs(inv), axis=1))
        inv_s = np.where(np.isinf(big)[:, None], np.where(np.isinf(inv), np.sign(inv), 0.0), inv / big[:, None])
    nrm = np.sqrt((1.0 / big) ** 2 + np.sum(inv_s * inv_s, axis=1))
    eta_c = (1.0 / big) / nrm
    V[0, :m] = eta_c
    V[1:, :m] = (inv_s / nrm[:, None]).T
    E = (w[anc] + off).astype(complex)
    anchors = [int(a) for a in anc]
    offsets = [float(o) for o in off]
    # spins with zero coupling are exact uncoupled modes
    for k, j in enumerate(np.flatnonzero(g == 0)):
        V[1 + j, m + k] = 1.0
        E = np.append(E, w[j])
        anchors.append(int(j))
        offsets.append(0.0)
    frac = np.abs(V[0]) ** 2
    order = _sort_key(E, frac)
    return E[order], V[:, order], np.array(anchors)[order], np.array(offsets)[order]


def eigenmodes(ensemble: Ensemble | None, cavity: CavitySpec, method: str = "auto") -> list[PolaritonMode]:
    """Dressed eigenmodes of the cavity-ensemble system.

    Parameters
    ----------
    ensemble : Ensemble or None
    cavity : CavitySpec
    method : {"auto", "secular", "dense"}
        ``auto`` uses the secular equation for lossless ensembles with
        distinct frequencies and the dense solver otherwise.

    Returns
    -------
    list of PolaritonMode
        Sorted by ascending ``Re E``.
    """
    E, V, anchor, offset = eigensystem(ensemble, cavity, method)
    phase = np.exp(1j * ensemble.phases) if ensemble is not None else np.zeros(0)
    norms = np.sum(np.abs(V) ** 2, axis=0)
    modes = []
    for q in range(E.size):
        modes.append(
            PolaritonMode(
                energy=complex(E[q]),
                photonic_amplitude=complex(V[0, q]),
                mode_function=phase * V[1:, q],
                photon_fraction=float(abs(V[0, q]) ** 2 / norms[q]),
                anchor=None if anchor is None else int(anchor[q]),
                offset=None if offset is None else float(offset[q]),
            )
        )
    return modes


def interlacing_check(modes: list[PolaritonMode], ensemble: Ensemble) -> InterlacingReport:
    """Check ``E_- < omega_1 < E_1 < ... < omega_N < E_+`` root by root.

    Only spins with nonzero coupling take part; their frequencies must be
    distinct. When the modes carry an anchor/offset representation the
    comparison is done on the offsets, so roots closer to a spin frequency
    than the float spacing of ``E`` are still resolved.
    """
    if np.any(ensemble.decays > 0):
        raise InvalidInput("interlacing is defined for lossless ensembles only")
    if any(abs(m.energy.imag) > 0 for m in modes):
        raise InvalidInput("interlacing is defined for lossless systems only")
    w = ensemble.frequencies
    coupled = np.flatnonzero(ensemble.couplings > 0)
    fr = w[coupled]
    # uncoupled spins give trivial modes exactly at their frequency
    uncoupled = set(np.flatnonzero(ensemble.couplings == 0).tolist())
    dressed = [m for m in modes if not (m.anchor in uncoupled and m.offset == 0.0 and m.photonic_amplitude == 0)]
    if len(dressed) != fr.size + 1:
        return InterlacingReport(False, (False,))
    pos = {int(j): k for k, j in enumerate(coupled)}

    def above(m: PolaritonMode, b: int) -> float:
        # sign of E - fr[b], using the offset when the root carries one
        if m.anchor is not None and int(m.anchor) in pos:
            a = pos[int(m.anchor)]
            return m.offset if a == b else (fr[a] - fr[b]) + m.offset
        return m.energy.real - fr[b]

    checks = []
    for q, m in enumerate(dressed):
        ok = True
        if q > 0:
            ok &= above(m, q - 1) > 0
        if q < fr.size:
            ok &= above(m, q) < 0
        checks.append(bool(ok))
    return InterlacingReport(all(checks), tuple(checks))


def classify_mode(mode: PolaritonMode, threshold: float = 0.4) -> str:
    """``"photonlike"`` if ``photon_fraction >= threshold`` else ``"spinlike"``."""
    if not 0.0 < threshold < 1.0:
        raise InvalidInput(f"threshold must lie in (0, 1), got {threshold!r}")
    return PHOTONLIKE if mode.photon_fraction >= threshold else SPINLIKE
