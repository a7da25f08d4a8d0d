"""Compiled kernels against the pure-Python fallback."""
import os
import subprocess
import sys

import numpy as np
import pytest

from spincavity import _backend, _fallback

core = pytest.importorskip("spincavity._core")


def test_backend_selected():
    # the build ships the compiled core; the fallback only when forced
    forced = os.environ.get("SPINCAVITY_PURE", "") in ("1", "true", "yes")
    assert _backend.name == ("python" if forced else "compiled")


def test_pure_switch():
    code = "import spincavity._backend as b; print(b.name)"
    env = dict(os.environ, SPINCAVITY_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_faddeeva(rng):
    z = np.concatenate([
        rng.uniform(-15, 15, 4000) + 1j * rng.uniform(-3, 3, 4000),
        rng.uniform(-0.6, 0.6, 500) + 1j * rng.uniform(-0.6, 0.6, 500),
        rng.uniform(-50, 50, 500) + 1j * rng.uniform(1, 50, 500),
    ])
    a = core.faddeeva(z)
    b = _fallback.faddeeva(z)
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)) < 1e-13


def test_discrete_levelshift(rng):
    p = rng.normal(size=40) - 0.05j * rng.random(40)
    w = rng.random(40)
    z = rng.normal(size=300) + 1j * rng.normal(size=300)
    for x, y in zip(core.discrete_levelshift(z, p, w), _fallback.discrete_levelshift(z, p, w)):
        np.testing.assert_allclose(x, y, rtol=1e-13)


def test_tabulated_levelshift(rng):
    nodes = np.linspace(-2, 2, 30)
    rho = np.exp(-nodes**2)
    rho[0] = 0.1
    kinks = np.zeros_like(rho)
    s = np.diff(rho) / np.diff(nodes)
    kinks[0] = s[0]
    kinks[1:-1] = np.diff(s)
    kinks[-1] = -s[-1]
    z = rng.normal(size=300) + 1j * rng.uniform(0.01, 1, 300)
    for x, y in zip(core.tabulated_levelshift(z, nodes, rho, kinks), _fallback.tabulated_levelshift(z, nodes, rho, kinks)):
        np.testing.assert_allclose(x, y, rtol=1e-11, atol=1e-13)


def test_volterra(rng):
    t = np.arange(200) * 0.01
    kern = np.exp(-1j * 0.3 * t - 0.5 * t)
    a = core.volterra(kern, 0.2 - 0.05j, 0.01, 500)
    b = _fallback.volterra(kern, 0.2 - 0.05j, 0.01, 500)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-14)


def test_secular_roots(rng):
    fr = np.sort(rng.normal(size=60))
    w = rng.uniform(0.001, 0.05, 60)
    a1, o1 = core.secular_roots(fr, w, 0.1)
    a2, o2 = _fallback.secular_roots(fr, w, 0.1)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_allclose(o1, o2, rtol=1e-14, atol=0)
