"""Response functions: frequency domain, closed forms, time evolution, conservation."""
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from spincavity.errors import InvalidInput, NoSteadyState, SingularPoint
from spincavity.levelshift import LevelShift
from spincavity.model import CavitySpec, Gaussian, Lorentzian, Tabulated, ensemble_from_arrays
from spincavity.response import (
    DriveSpec,
    closed_form_green,
    dressed_leakage,
    evolution_matrix,
    excitation_distribution,
    green_time,
    propagator,
    resolvent_matrix,
    spectrogram,
    spectrum,
    steady_state,
)


@pytest.fixture
def lossy_ensemble():
    return ensemble_from_arrays([-0.8, -0.1, 0.3, 1.2], [0.2 + 0.1j, -0.3, 0.25j, 0.15], [0.05, 0.0, 0.1, 0.02])


CAV = CavitySpec(0.1, 0.07)


def _full_h(ens, cav):
    n = len(ens)
    H = np.zeros((n + 1, n + 1), dtype=complex)
    H[0, 0] = cav.frequency - 1j * cav.loss
    H[np.arange(1, n + 1), np.arange(1, n + 1)] = ens.frequencies - 0.5j * ens.decays
    H[1:, 0] = ens.original_couplings
    H[0, 1:] = np.conj(ens.original_couplings)
    return H


def test_propagator_channels_vs_resolvent(lossy_ensemble):
    ens = lossy_ensemble
    H = _full_h(ens, CAV)
    for z in (0.05, -0.3 + 0.02j, 2.0):
        R = np.linalg.inv(z * np.eye(5) - H)
        np.testing.assert_allclose(resolvent_matrix(ens, CAV, z), R, atol=1e-12)
        assert propagator(ens, CAV, z) == pytest.approx(R[0, 0], rel=1e-12)
        for j in range(4):
            assert propagator(ens, CAV, z, "jc", j=j) == pytest.approx(R[1 + j, 0], rel=1e-12)
            assert propagator(ens, CAV, z, "ck", k=j) == pytest.approx(R[0, 1 + j], rel=1e-12)
            for k in range(4):
                assert propagator(ens, CAV, z, "jk", j=j, k=k) == pytest.approx(R[1 + j, 1 + k], rel=1e-11)
        s = np.conj(ens.original_couplings) / ens.collective_coupling
        assert propagator(ens, CAV, z, "sc") == pytest.approx(s @ R[1:, 0], rel=1e-12)
        assert propagator(ens, CAV, z, "cs") == pytest.approx(R[0, 1:] @ np.conj(s), rel=1e-12)
        assert propagator(ens, CAV, z, "ss") == pytest.approx(s @ R[1:, 1:] @ np.conj(s), rel=1e-12)


def test_propagator_errors(lossy_ensemble):
    with pytest.raises(InvalidInput):
        propagator(lossy_ensemble, CAV, 0.0, "jc")
    with pytest.raises(InvalidInput):
        propagator(lossy_ensemble, CAV, 0.0, "jc", j=7)
    with pytest.raises(InvalidInput):
        propagator(lossy_ensemble, CAV, 0.0, "xx")
    with pytest.raises(InvalidInput):
        propagator(Gaussian(0, 1, 1), CAV, 0.0, "jc", j=0)
    ens = ensemble_from_arrays([0.5], [0.3])
    with pytest.raises(SingularPoint):
        propagator(ens, CavitySpec(0.0), 0.5, "jc", j=0)


def test_continuous_ss_channel_correction():
    # G_ss from a fine discretization converges to K (1 + K G) / Omega^2
    g = Gaussian(0.0, 0.5, 1.0, gamma_hom=0.2)
    from spincavity.model import sample_ensemble

    ens = sample_ensemble(g, 4000)
    z = 0.3 + 0.4j
    cav = CavitySpec(0.2, 0.1)
    a = propagator(g, cav, z, "ss")
    b = propagator(ens, cav, z, "ss")
    assert abs(a - b) < 1e-3 * abs(a)


def test_steady_state_vs_linear_solve(lossy_ensemble):
    ens = lossy_ensemble
    amps = np.array([1.0, 0.3j, 0.0, -0.2, 0.1])
    drive = DriveSpec(amps, 0.25)
    a = steady_state(ens, CAV, drive)
    ref = np.linalg.solve(0.25 * np.eye(5) - _full_h(ens, CAV), amps)
    np.testing.assert_allclose(a, ref, atol=1e-13)
    only_c = steady_state(ens, CAV, DriveSpec(2.0, 0.25))
    np.testing.assert_allclose(only_c, 2 * np.linalg.solve(0.25 * np.eye(5) - _full_h(ens, CAV), np.eye(5)[0]))
    with pytest.raises(NoSteadyState):
        steady_state(ensemble_from_arrays([0.0], [0.1]), CavitySpec(0.0), DriveSpec(1.0, 0.3))
    with pytest.raises(InvalidInput):
        steady_state(ens, CAV, DriveSpec([1.0, 2.0], 0.1))
    assert steady_state(Gaussian(0, 1, 1, 0.1), CavitySpec(0.0), DriveSpec(1.0, 0.2)).shape == (1,)


def test_spectrum_and_spectrogram():
    g = Gaussian(0.0, 0.3, 1.0)
    grid = np.linspace(-2, 2, 41)
    sp = spectrum(g, CAV, grid)
    np.testing.assert_allclose(sp.transmissivity, np.abs(propagator(g, CAV, grid)) ** 2)
    np.testing.assert_allclose(sp.phase, np.angle(sp.chi_cc))
    cg = np.linspace(-1, 1, 5)
    S = spectrogram(g, 0.07, grid, cg)
    for i, wc in enumerate(cg):
        np.testing.assert_allclose(S[i], propagator(g, CavitySpec(wc, 0.07), grid), rtol=1e-14)
    with pytest.raises(InvalidInput):
        spectrum(g, CAV, grid[::-1])
    # bare cavity is a single Lorentzian
    np.testing.assert_allclose(spectrum(None, CAV, grid).chi_cc, 1 / (grid - 0.1 + 0.07j))


def _two_mode(Omega, gamma, kappa, delta, wa):
    return np.array([[wa + delta - 1j * kappa, Omega], [Omega, wa - 0.5j * gamma]])


@given(st.floats(0.0, 3), st.floats(0.0, 2), st.floats(0.0, 2), st.floats(-3, 3))
def test_lorentzian_closed_form_vs_expm(Omega, gamma, kappa, delta):
    H = _two_mode(Omega, gamma, kappa, delta, 0.4)
    p = dict(omega_a=0.4, delta=delta, Omega=Omega, gamma=gamma, kappa=kappa)
    for t in (0.0, 0.9, 3.7):
        U = scipy.linalg.expm(-1j * H * t)
        assert abs(closed_form_green("lorentzian", p, t) - U[0, 0]) < 1e-10
        assert abs(closed_form_green("lorentzian", p, t, "sc") - U[1, 0]) < 1e-10


def test_closed_form_rabi_and_ww():
    p = dict(omega_a=0.0, delta=0.0, Omega=1.0)
    t = np.array([0.0, math.pi / 2, math.pi])
    np.testing.assert_allclose(closed_form_green("rabi", p, t), np.cos(t), atol=1e-15)
    ww = closed_form_green("weisskopf_wigner", dict(omega_c=0.0, kappa=0.1, delta_c=0.2, gamma_c=0.4), 1.0)
    assert ww == pytest.approx(np.exp(-1j * (0.2 - 0.1j - 0.2j)))
    with pytest.raises(InvalidInput):
        closed_form_green("rabi", {"omega_a": 0.0}, 1.0)
    with pytest.raises(InvalidInput):
        closed_form_green("nope", {}, 1.0)


def test_eigen_time_vs_expm(lossy_ensemble):
    ens = lossy_ensemble
    H = _full_h(ens, CAV)
    t = np.linspace(0, 6, 13)
    U = np.array([scipy.linalg.expm(-1j * H * ti) for ti in t])
    np.testing.assert_allclose(evolution_matrix(ens, CAV, t), U, atol=1e-11)
    np.testing.assert_allclose(green_time(ens, CAV, t).values, U[:, 0, 0], atol=1e-12)
    np.testing.assert_allclose(green_time(ens, CAV, t, "jc", j=2).values, U[:, 3, 0], atol=1e-12)
    np.testing.assert_allclose(green_time(ens, CAV, t, "ck", k=1).values, U[:, 0, 2], atol=1e-12)
    np.testing.assert_allclose(green_time(ens, CAV, t, "jk", j=0, k=3).values, U[:, 1, 4], atol=1e-12)
    s = np.conj(ens.original_couplings) / ens.collective_coupling
    np.testing.assert_allclose(green_time(ens, CAV, t, "sc").values, U[:, 1:, 0] @ s, atol=1e-12)
    np.testing.assert_allclose(green_time(ens, CAV, t, "ss").values, np.einsum("j,tjk,k->t", s, U[:, 1:, 1:], np.conj(s)), atol=1e-12)


def test_kernel_method_vs_expm(lossy_ensemble):
    ens = lossy_ensemble
    H = _full_h(ens, CAV)
    t = np.linspace(0, 10, 21)
    U0 = np.array([scipy.linalg.expm(-1j * H * ti)[0, 0] for ti in t])
    tr = green_time(ens, CAV, t, method="kernel")
    np.testing.assert_allclose(tr.values, U0, atol=1e-7)
    s = np.conj(ens.original_couplings) / ens.collective_coupling
    Us = np.array([scipy.linalg.expm(-1j * H * ti)[1:, 0] @ s for ti in t])
    np.testing.assert_allclose(green_time(ens, CAV, t, "sc", method="kernel").values, Us, atol=1e-6)


def test_lorentzian_time_methods_vs_closed_form():
    lor = Lorentzian(0.0, 0.3, 1.0, gamma_hom=0.1)
    cav = CavitySpec(0.4, 0.05)
    t = np.linspace(0, 15, 31)
    p = dict(omega_a=0.0, delta=0.4, Omega=1.0, gamma=0.4, kappa=0.05)
    ref = closed_form_green("lorentzian", p, t)
    np.testing.assert_allclose(green_time(lor, cav, t, method="kernel").values, ref, atol=1e-7)
    np.testing.assert_allclose(green_time(lor, cav, t, method="quadrature").values, ref, atol=1e-6)
    ref_sc = closed_form_green("lorentzian", p, t, "sc")
    np.testing.assert_allclose(green_time(lor, cav, t, "sc", method="kernel").values, ref_sc, atol=1e-6)


def test_gaussian_kernel_vs_quadrature():
    # two independent routes for a profile without closed form
    g = Gaussian(0.1, 0.4, 0.8, gamma_hom=0.05)
    cav = CavitySpec(0.0, 0.1)
    t = np.linspace(0, 20, 41)
    a = green_time(g, cav, t, method="kernel").values
    b = green_time(g, cav, t, method="quadrature").values
    assert np.max(np.abs(a - b)) < 1e-5


def test_tabulated_kernel_vs_quadrature():
    tab = Tabulated(np.linspace(-1, 1, 9), np.array([0, 0.2, 0.5, 0.7, 0.8, 0.7, 0.5, 0.2, 0.0]), gamma_hom=0.1)
    cav = CavitySpec(0.2, 0.05)
    t = np.linspace(0, 12, 25)
    a = green_time(tab, cav, t, method="kernel").values
    b = green_time(tab, cav, t, method="quadrature").values
    assert np.max(np.abs(a - b)) < 1e-5


def test_weisskopf_wigner_limit():
    g = Gaussian(0.0, 1.0, 0.05)
    cav = CavitySpec(0.2, 0.0)
    t = np.linspace(0, 200, 11)
    a = green_time(g, cav, t, method="kernel").values
    ww = closed_form_green("weisskopf_wigner", dict(omega_c=0.2, kappa=0.0, levelshift=LevelShift(g)), t)
    # deviations of order (Omega / sigma)^2
    assert np.max(np.abs(a - ww)) < 5e-3


def test_time_method_errors(lossy_ensemble):
    t = np.linspace(0, 1, 3)
    with pytest.raises(InvalidInput):
        green_time(Gaussian(0, 1, 1), CAV, t, method="eigen")
    with pytest.raises(InvalidInput):
        green_time(Gaussian(0, 1, 1), CAV, t, "ss", method="kernel")
    with pytest.raises(InvalidInput):
        green_time(Gaussian(0, 1, 1), CavitySpec(0.0), t, method="quadrature")
    with pytest.raises(InvalidInput):
        green_time(lossy_ensemble, CAV, [0.5, 1.0])
    with pytest.raises(InvalidInput):
        green_time(lossy_ensemble, CAV, t, method="magic")


def test_norm_conservation_and_loss(lossy_ensemble):
    # lossless: the cavity column of exp(-iHt) stays normalized
    ens = ensemble_from_arrays(np.linspace(-1, 1, 30), 0.1)
    U = evolution_matrix(ens, CavitySpec(0.0), np.linspace(0, 50, 6))
    np.testing.assert_allclose(np.sum(np.abs(U[:, :, 0]) ** 2, axis=1), 1.0, atol=1e-12)
    # lossy: d|psi|^2/dt = -2 kappa |G_cc|^2 - sum gamma_j |G_jc|^2
    e = lossy_ensemble
    t = np.linspace(0, 8, 4001)
    U = evolution_matrix(e, CAV, t)[:, :, 0]
    norm = np.sum(np.abs(U) ** 2, axis=1)
    rate = 2 * CAV.loss * np.abs(U[:, 0]) ** 2 + np.abs(U[:, 1:]) ** 2 @ e.decays
    from scipy.integrate import simpson

    assert 1.0 - norm[-1] == pytest.approx(simpson(rate, x=t), abs=1e-9)


@pytest.mark.parametrize("src", [Gaussian(0.0, 0.5, 0.6), Lorentzian(0.0, 0.4, 0.6)])
def test_excitation_distribution_total(src):
    ed = excitation_distribution(src, CavitySpec(0.1, 0.2))
    assert ed.total == pytest.approx(1.0, abs=2e-3)
    assert ed.converted > 0 and ed.leak > 0 and ed.tail >= 0
    assert np.all(ed.p >= 0)


def test_excitation_distribution_lossless_cavity():
    ed = excitation_distribution(Gaussian(0.0, 0.5, 0.6), CavitySpec(0.1, 0.0))
    assert ed.leak == 0 and ed.converted == pytest.approx(1.0, abs=2e-3)
    with pytest.raises(InvalidInput):
        excitation_distribution(Gaussian(0.0, 0.5, 0.6, gamma_hom=0.1), CavitySpec(0.0, 0.1))
    with pytest.raises(InvalidInput):
        excitation_distribution(ensemble_from_arrays([0.0], [1.0]), CavitySpec(0.0, 0.1))


@settings(max_examples=25)
@given(st.integers(2, 40), st.floats(0.5, 5), st.floats(-1, 1), st.integers(0, 2**31))
def test_dressed_leakage_bound(n, Omega, delta, seed):
    rng = np.random.default_rng(seed)
    ens = ensemble_from_arrays(rng.normal(0, 0.3, n), Omega / math.sqrt(n) * np.ones(n))
    rep = dressed_leakage(ens, CavitySpec(delta), np.linspace(0, 30, 301))
    assert rep.trace.values[0] == pytest.approx(1.0, abs=1e-12)
    assert rep.min_abs >= rep.bound - 1e-12
