"""Poles: root finding, closed forms, tracking, onset, asymptotics."""
import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spincavity.errors import InvalidInput
from spincavity.model import CavitySpec, Gaussian, Lorentzian, ensemble_from_arrays, moment_set
from spincavity.poles import (
    asymptotic_poles,
    classify_regime,
    find_poles,
    gap_shift,
    gaussian_strong_poles,
    lorentzian_poles,
    principal_pair,
    resonant_order2,
    splitting_onset,
    track_poles,
)
from spincavity.spectral import eigensystem, hamiltonian_matrix

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))


def test_discrete_poles_match_eigenvalues(rng):
    n = 200
    ens = ensemble_from_arrays(np.sort(rng.normal(0, 1, n)), rng.uniform(0.01, 0.2, n), rng.uniform(0, 0.05, n))
    cav = CavitySpec(0.3, 0.1)
    poles = find_poles(ens, cav)
    assert len(poles) == n + 1 and all(p.converged for p in poles)
    ev = np.linalg.eigvals(hamiltonian_matrix(ens, cav))
    got = np.array([p.location for p in poles])
    for e in ev:
        assert np.min(np.abs(got - e)) < 1e-11
    # residue of G_cc equals the squared cavity amplitude of the mode
    E, V, _, _ = eigensystem(ens, cav)
    for p in poles[::20]:
        q = int(np.argmin(np.abs(E - p.location)))
        assert p.residue == pytest.approx(V[0, q] ** 2, rel=1e-8, abs=1e-14)


def test_bare_cavity_pole():
    (p,) = find_poles(None, CavitySpec(0.4, 0.1))
    assert p.location == 0.4 - 0.1j and p.residue == 1


@settings(max_examples=40)
@given(st.floats(0.05, 3), st.floats(0.01, 2), st.floats(0, 1), st.floats(-2, 2))
def test_lorentzian_poles_numeric_vs_closed(Omega, width, kappa, delta):
    lor = Lorentzian(0.0, width, Omega)
    cav = CavitySpec(delta, kappa)
    lp = lorentzian_poles(Omega, width, kappa, delta)
    if abs(lp.E_plus - lp.E_minus) < 1e-4:
        return  # near-exceptional points are ill conditioned
    got = [p.location for p in find_poles(lor, cav)]
    for e in (lp.E_plus, lp.E_minus):
        assert min(abs(g - e) for g in got) < 1e-10 * max(1.0, Omega)


@given(st.floats(0.05, 3), st.floats(0, 2), st.floats(0, 1), st.floats(-2, 2))
def test_lorentzian_closed_form_is_two_mode_eigensystem(Omega, gamma, kappa, delta):
    H = np.array([[delta - 1j * kappa, Omega], [Omega, -0.5j * gamma]])
    lp = lorentzian_poles(Omega, gamma, kappa, delta)
    if abs(lp.rabi_frequency) < 1e-6:
        return
    for E, vc, vs in ((lp.E_plus, lp.eta_plus_c, lp.eta_plus_s), (lp.E_minus, lp.eta_minus_c, lp.eta_minus_s)):
        v = np.array([vc, vs])
        assert np.abs(H @ v - E * v).max() < 1e-10 * max(1.0, Omega)
        assert abs(vc) ** 2 + abs(vs) ** 2 == pytest.approx(1.0, rel=1e-12)
    assert cmath.cos(lp.theta) == pytest.approx((delta - 1j * (kappa - gamma / 2)) / (2 * lp.rabi_frequency), abs=1e-10)
    assert cmath.sin(lp.theta) == pytest.approx(Omega / lp.rabi_frequency, abs=1e-10)


def _gauss_K_mp(z, sigma, Omega, gamma_hom=0.0):
    # continuation of the Gaussian level shift from the Faddeeva function
    xi = (mpmath.mpc(z) + 0.5j * gamma_hom) / (mpmath.sqrt(2) * sigma)
    w = mpmath.exp(-xi * xi) * mpmath.erfc(-1j * xi)
    return -1j * mpmath.sqrt(mpmath.pi / 2) * Omega**2 / sigma * w


@pytest.mark.parametrize("Omega,kappa,gh,delta", [(1.5, 0.05, 0.02, 0.0), (0.3, 0.1, 0.0, 0.2), (3.0, 0.0, 0.1, -0.5)])
def test_gaussian_poles_satisfy_equation_in_high_precision(Omega, kappa, gh, delta):
    g = Gaussian(0.0, 0.5, Omega, gamma_hom=gh)
    cav = CavitySpec(delta, kappa)
    poles = find_poles(g, cav)
    assert len(poles) >= 2
    mpmath.mp.dps = 30
    for p in poles:
        f = mpmath.mpc(p.location) - delta + 1j * kappa - _gauss_K_mp(p.location, 0.5, Omega, gh)
        assert abs(complex(f)) < 1e-9 * max(1.0, Omega)
    E1, E2 = principal_pair(poles)
    assert E1.location.real >= E2.location.real


def test_sheet_labels():
    # second sheet when kappa > gamma_hom / 2 on resonance at strong coupling
    g = Gaussian(0.0, 0.5, 3.0, gamma_hom=0.02)
    pair = principal_pair(find_poles(g, CavitySpec(0.0, 0.1)))
    assert all(p.sheet == "second" for p in pair)
    g = Gaussian(0.0, 0.5, 3.0, gamma_hom=0.4)
    pair = principal_pair(find_poles(g, CavitySpec(0.0, 0.05)))
    assert all(p.sheet == "first" for p in pair)


def test_explicit_seed_reports_nonconvergence():
    res = find_poles(Gaussian(0.0, 0.5, 1.0), CavitySpec(0.0, 0.1), seeds=[50 - 80j], max_iter=2)
    assert any(not r.converged for r in res)
    with pytest.raises(InvalidInput):
        find_poles(Gaussian(0.0, 0.5, 1.0), CavitySpec(0.0), seeds=[complex("nan")])


def test_classify_regime():
    assert classify_regime((1 - 0.1j, -1 - 0.1j)).regime == "oscillatory"
    r = classify_regime((-0.1j, -0.5j))
    assert r.regime == "overdamped" and r.splitting == 0 and r.widths == (0.2, 1.0)
    with pytest.raises(InvalidInput):
        principal_pair([])


def test_lorentzian_regime_boundary():
    # oscillatory iff gamma - 2 kappa < 4 Omega
    for Omega, expect in ((0.24, "overdamped"), (0.26, "oscillatory")):
        lp = lorentzian_poles(Omega, 1.0, 0.0)
        assert classify_regime((lp.E_plus, lp.E_minus)).regime == expect


def test_track_poles_gaussian():
    g = Gaussian(0.0, 1.0 / FWHM_PER_SIGMA, 1.0)
    S = np.linspace(0.05, 2.0, 40)
    tr = track_poles(g, CavitySpec(0.0, 0.0), S)
    assert tr.converged.all()
    # each tracked pair is the least-damped pair found from scratch
    for O, a, b in zip(S[::5], tr.plus[::5], tr.minus[::5]):
        Ep, Em = principal_pair(find_poles(g.with_strength(O), CavitySpec(0.0, 0.0)))
        assert {round(a.real, 8), round(b.real, 8)} == {round(Ep.location.real, 8), round(Em.location.real, 8)}
        assert min(abs(a - Ep.location), abs(a - Em.location)) < 1e-9
    regimes = [classify_regime((a, b)).regime for a, b in zip(tr.plus, tr.minus)]
    assert regimes[0] == "overdamped" and regimes[-1] == "oscillatory"
    with pytest.raises(InvalidInput):
        track_poles(g, CavitySpec(0.0), [1.0, 0.5, 2.0])


def _onset_oracle():
    # on resonance the pair sits at z = -i y; K(-i y) = -i c g(u) with
    # g(u) = exp(u^2) erfc(-u), u = y / (sqrt2 sigma), c = sqrt(pi/2) Omega^2 / sigma.
    # The onset is the double root: y = c g(u) and 1 = c g'(u) / (sqrt2 sigma).
    mpmath.mp.dps = 30
    s = mpmath.mpf(1)
    g = lambda v: mpmath.exp(v * v) * mpmath.erfc(-v)

    def F(u, a):
        c = mpmath.sqrt(mpmath.pi / 2) * a * a / s
        return [u * mpmath.sqrt(2) * s - c * g(u), mpmath.sqrt(2) * s - c * mpmath.diff(g, u)]

    u, a = mpmath.findroot(F, (mpmath.mpf("0.3"), mpmath.mpf("0.5")))
    return float(a) / FWHM_PER_SIGMA


def test_splitting_onset_gaussian():
    ref = _onset_oracle()
    assert ref == pytest.approx(0.23, abs=5e-3)  # reported value about 0.23
    g = Gaussian(0.0, 1.0 / FWHM_PER_SIGMA, 1.0)
    got = splitting_onset(g, CavitySpec(0.0, 0.0), 0.1, 0.5)
    assert got == pytest.approx(ref, rel=1e-4)
    with pytest.raises(InvalidInput):
        splitting_onset(g, CavitySpec(0.0, 0.0), 0.3, 0.5)


def test_lorentzian_onset_closed_form():
    lor = Lorentzian(0.0, 1.0, 1.0)
    got = splitting_onset(lor, CavitySpec(0.0, 0.0), 0.1, 0.5)
    assert got == pytest.approx(0.25, rel=1e-4)


@pytest.mark.parametrize("ratio,bound", [(3, 0.222), (5, 0.08), (8, 0.031)])
def test_gaussian_strong_poles(ratio, bound):
    sigma = 1.0
    g = Gaussian(0.0, sigma, ratio * sigma)
    Ep, Em = principal_pair(find_poles(g, CavitySpec(0.0, 0.0)))
    cp, cm = gaussian_strong_poles(ratio * sigma, sigma)
    assert abs(Ep.location.real - cp.real) < bound * sigma
    assert abs(Em.location.real - cm.real) < bound * sigma
    if ratio == 8:
        assert Ep.location.imag == pytest.approx(cp.imag, rel=0.02)


def test_asymptotic_orders_improve():
    g = Gaussian(0.1, 0.3, 3.0, gamma_hom=0.05)
    cav = CavitySpec(0.3, 0.04)
    Ep, Em = principal_pair(find_poles(g, cav))
    errs = []
    for k in (0, 1, 2):
        a = asymptotic_poles(g, cav, k)
        assert a.order == k and not a.dominated
        errs.append(abs(a.E_plus - Ep.location) + abs(a.E_minus - Em.location))
    assert errs[0] == pytest.approx(errs[1], rel=1e-12)  # A_1 = 0 about the mean
    assert errs[2] < 0.1 * errs[0]


def test_asymptotic_order2_matches_resonant_form():
    O, dw, gh, k = 4.0, 0.3, 0.1, 0.02
    g = Gaussian(0.0, dw, O, gamma_hom=gh)
    a = asymptotic_poles(g, CavitySpec(0.0, k), 2)
    rp, rm = resonant_order2(O, dw, gh, k)
    assert abs(a.E_plus - rp) < 1e-5 and abs(a.E_minus - rm) < 1e-5


def test_asymptotic_dominated_and_errors():
    ens = ensemble_from_arrays([-1.0, 0.0, 2.0], [1.0, 1.0, 1.0])
    ms = moment_set(Gaussian(0.0, 0.3, 2.0), 2)
    assert asymptotic_poles(ms, CavitySpec(0.0), 2).order == 2
    with pytest.raises(InvalidInput):
        asymptotic_poles(ens, CavitySpec(0.0), 3)
    with pytest.raises(InvalidInput):
        asymptotic_poles(Lorentzian(0, 1, 1), CavitySpec(0.0), 0, "weak")
    with pytest.raises(InvalidInput):
        asymptotic_poles(Gaussian(0, 0.3, 2.0), CavitySpec(0.0), 0, "weak")


def test_weak_branch_cavity_pole():
    g = Gaussian(0.0, 1.0, 0.1)
    cav = CavitySpec(0.05, 0.01)
    a = asymptotic_poles(g, cav, branch="weak")
    poles = find_poles(g, cav)
    best = min(abs(p.location - a.E_plus) for p in poles)
    assert best < 1e-3


def test_gap_shift():
    rep = gap_shift(1.0, 10.0, 0.01)
    assert rep.delta_gap == -0.1 and rep.valid
    assert not gap_shift(1.0, 2.0, 0.01).valid
    # the dispersively shifted spin pole of a narrow two-mode system
    lp = lorentzian_poles(1.0, 1e-6, 0.0, 20.0)
    assert lp.E_minus.real == pytest.approx(-1.0 / 20.0, rel=0.01)
    with pytest.raises(InvalidInput):
        gap_shift(1.0, 0.0)
