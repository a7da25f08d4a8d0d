"""Level shift: closed forms, quadrature oracles, continuation and memory kernel."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from spincavity.errors import InvalidInput, SingularPoint
from spincavity.levelshift import LevelShift, memory_kernel
from spincavity.model import Discrete, Gaussian, Lorentzian, Tabulated, ensemble_from_arrays

mpmath.mp.dps = 30


def _mp_levelshift(rho, z, lo, hi, gamma_hom=0.0, points=()):
    zeta = mpmath.mpc(z) + 0.5j * gamma_hom
    pts = sorted({lo, *points, float(mpmath.re(zeta)), hi}, key=float) if lo != -mpmath.inf else [lo, *sorted({*points, float(mpmath.re(zeta))}), hi]
    return complex(mpmath.quad(lambda w: rho(w) / (zeta - w), pts))


GAUSS = Gaussian(0.3, 0.7, 1.4, gamma_hom=0.1)
TAB = Tabulated(np.array([-1.0, -0.2, 0.4, 1.5]), np.array([0.0, 0.8, 0.5, 0.0]), gamma_hom=0.05)


def _gauss_mp(w):
    s = GAUSS.sigma
    return GAUSS.strength**2 * mpmath.exp(-((w - GAUSS.center) ** 2) / (2 * s * s)) / (mpmath.sqrt(2 * mpmath.pi) * s)


def _tab_mp(w):
    return mpmath.mpf(float(np.interp(float(w), TAB.omega, TAB.rho)))


@pytest.mark.parametrize("z", [0.2 + 0.5j, -1.0 + 0.01j, 2.5 + 1e-3j, 0.3 - 0.02j, 4.0 + 3.0j])
def test_gaussian_against_quadrature(z):
    ref = _mp_levelshift(_gauss_mp, z, -mpmath.inf, mpmath.inf, GAUSS.gamma_hom, points=[GAUSS.center])
    assert abs(LevelShift(GAUSS)(z) - ref) <= 1e-12 * max(1.0, abs(ref))


@pytest.mark.parametrize("z", [0.2 + 0.5j, -0.5 + 0.01j, 1.0 - 0.01j, 30.0 + 1.0j, 800.0 - 5.0j])
def test_tabulated_against_quadrature(z):
    ref = _mp_levelshift(_tab_mp, z, -1.0, 1.5, TAB.gamma_hom, points=[-0.2, 0.4])
    assert abs(LevelShift(TAB)(z, sheet="first") - ref) <= 1e-11 * max(1e-3, abs(ref))


def test_lorentzian_closed_form():
    lor = Lorentzian(0.5, 0.4, 1.2, gamma_hom=0.1)
    ls = LevelShift(lor)
    z = np.array([0.0 + 0.1j, 1.0, 0.5 - 0.5j])
    np.testing.assert_allclose(ls(z), 1.44 / (z - 0.5 + 0.25j), rtol=1e-15)
    # the integral over the real line for a point in the upper half plane
    f = lambda w, part: getattr(lor.density(w) / (0.2 + 0.3j + 0.05j - w), part)
    re = integrate.quad(f, -np.inf, np.inf, args=("real",), epsabs=1e-13)[0]
    im = integrate.quad(f, -np.inf, np.inf, args=("imag",), epsabs=1e-13)[0]
    assert abs(ls(0.2 + 0.3j) - complex(re, im)) < 1e-9


def test_discrete_sum_and_pole_error():
    ens = ensemble_from_arrays([-1.0, 0.5, 2.0], [0.3, 0.4j, 0.5], [0.0, 0.1, 0.2])
    ls = LevelShift(ens)
    z = 0.3 + 0.2j
    ref = sum(abs(g) ** 2 / (z - w + 0.5j * d) for w, g, d in [(-1.0, 0.3, 0.0), (0.5, 0.4, 0.1), (2.0, 0.5, 0.2)])
    assert ls(z) == pytest.approx(ref, rel=1e-15)
    with pytest.raises(SingularPoint) as err:
        ls(-1.0 + 0j)
    assert err.value.index == 0
    assert LevelShift(None)(1.0 + 1j) == 0
    assert not LevelShift(ens).has_cut


@pytest.mark.parametrize("src", [GAUSS, Lorentzian(0.1, 0.6, 1.0, 0.05), TAB])
def test_derivative_matches_finite_difference(src):
    ls = LevelShift(src)
    for z in (0.13 + 0.4j, -0.3 - 0.1j, 0.7 + 0.001j):
        h = 1e-5
        fd = (ls(z + h) - ls(z - h)) / (2 * h)
        assert abs(ls.derivative(z) - fd) <= 1e-6 * max(1.0, abs(fd))


@pytest.mark.parametrize("src", [GAUSS, Lorentzian(0.1, 0.6, 1.0, 0.05), TAB])
def test_continuation_is_analytic_across_cut(src):
    ls = LevelShift(src)
    c = ls.cut
    for x in (-0.15, 0.05, 0.6):
        above = ls(x + 1j * (c + 1e-7))
        below = ls(x + 1j * (c - 1e-7))
        assert abs(above - below) < 1e-5 * max(1.0, abs(above))


@pytest.mark.parametrize("src", [GAUSS, TAB])
def test_sheet_jump_is_two_pi_i_rho(src):
    # continuation minus first-sheet integral equals -2 pi i rho(zeta) below the cut
    ls = LevelShift(src)
    zeta = 0.2 - 0.05j
    z = zeta - 0.5j * src.gamma_hom
    jump = ls(z, sheet="continued") - ls(z, sheet="first")
    if isinstance(src, Gaussian):
        s = src.sigma
        rho = src.strength**2 * np.exp(-((zeta - src.center) ** 2) / (2 * s * s)) / (math.sqrt(2 * math.pi) * s)
    else:
        i = np.searchsorted(src.omega, zeta.real) - 1
        rho = src.rho[i] + src.slopes[i] * (zeta - src.omega[i])
    assert abs(jump + 2j * math.pi * rho) < 1e-12


def test_sheet_labels_and_cut_decomposition():
    ls = LevelShift(GAUSS)
    labels = ls.sheet_of([1j, -0.05j, -1j])
    assert list(labels) == ["first", "cut", "second"]
    cd = ls.cut_decomposition([0.3, 1.0])
    np.testing.assert_allclose(cd.gamma_c, 2 * math.pi * GAUSS.density(np.array([0.3, 1.0])))
    K = ls(np.array([0.3, 1.0]) - 0.05j)
    np.testing.assert_allclose(-2 * K.imag, cd.gamma_c, rtol=1e-12)
    with pytest.raises(InvalidInput):
        LevelShift(ensemble_from_arrays([0.0], [1.0])).cut_decomposition(0.0)
    with pytest.raises(InvalidInput):
        ls(1.0, sheet="third")


def test_broadened_density_is_voigt():
    ls = LevelShift(GAUSS)
    x = 0.9
    f = lambda w: GAUSS.density(w) * (0.05 / math.pi) / ((x - w) ** 2 + 0.05**2)
    ref = integrate.quad(f, -10, 10, points=[x, 0.3], limit=400, epsabs=1e-14)[0]
    assert ls.broadened_density(x) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("src", [GAUSS, Lorentzian(0.1, 0.6, 1.0, 0.05), TAB])
def test_memory_kernel_against_quadrature(src):
    for t in (0.0, 0.7, 3.1):
        if isinstance(src, Lorentzian) and t > 0:
            # Fourier-weighted quadrature on the half line about the center
            g = lambda u: src.density(src.center + u) + src.density(src.center - u)
            c = integrate.quad(g, 0, np.inf, weight="cos", wvar=t)[0]
            ref = c * np.exp(-1j * src.center * t - 0.5 * src.gamma_hom * t)
            assert abs(memory_kernel(src, t) - ref) < 1e-8
            continue
        f = lambda w, part: getattr(src.density(w) * np.exp(-1j * w * t), part)
        lim = (-np.inf, np.inf) if not isinstance(src, Tabulated) else (src.omega[0], src.omega[-1])
        opts = {"limit": 400, "epsabs": 1e-12}
        if isinstance(src, Tabulated):
            opts["points"] = list(src.omega[1:-1])
        re = integrate.quad(f, *lim, args=("real",), **opts)[0]
        im = integrate.quad(f, *lim, args=("imag",), **opts)[0]
        ref = complex(re, im) * math.exp(-0.5 * src.gamma_hom * t)
        assert abs(memory_kernel(src, t) - ref) < 1e-8


def test_memory_kernel_discrete_and_errors():
    ens = ensemble_from_arrays([0.0, 1.0], [0.3, 0.4], [0.2, 0.0])
    t = np.array([0.0, 2.0])
    ref = 0.09 * np.exp(-0.1 * t) + 0.16 * np.exp(-1j * t)
    np.testing.assert_allclose(memory_kernel(ens, t), ref, rtol=1e-14)
    assert memory_kernel(GAUSS, 0.0) == pytest.approx(GAUSS.strength**2)
    with pytest.raises(InvalidInput):
        memory_kernel(GAUSS, -1.0)


@given(
    st.floats(-3, 3),
    st.floats(1e-3, 5),
    st.sampled_from(["gauss", "lor", "tab"]),
)
def test_herglotz(x, y, kind):
    # Im K < 0 throughout the upper half plane, and K ~ Omega^2 / z far away
    src = {"gauss": GAUSS, "lor": Lorentzian(0.1, 0.6, 1.0, 0.05), "tab": TAB}[kind]
    ls = LevelShift(src)
    K = ls(complex(x, y))
    assert K.imag < 0
    big = 1e6j
    assert ls(big) * big == pytest.approx(src.strength**2, rel=1e-5)
