"""Faddeeva function and Dawson integral.

The Faddeeva function ``w(z) = exp(-z**2) erfc(-i z)`` is evaluated to
near machine precision in all quadrants:

* ``|Im z| <= 1``: ``w = exp(-z**2) + 2i/sqrt(pi) F(z)`` with the Dawson
  function ``F`` from Rybicki's sampling sum, or its asymptotic series for
  ``|Re z| >= 10``. Both terms are kept separately so the exponentially
  small real part on the real axis is not lost.
* ``Im z > 1``: Weideman's rational approximation with 36 terms.
* ``Im z < -1``: reflection ``w(z) = 2 exp(-z**2) - w(-z)``.
"""
import numpy as np

from ._backend import kernels
from ._coeffs import SQRT_PI


def wofz(z):
    """Faddeeva function ``w(z)``.

    Parameters
    ----------
    z : complex or array_like

    Returns
    -------
    complex or ndarray
        Same shape as `z`.
    """
    arr = np.asarray(z, dtype=complex)
    out = kernels.faddeeva(arr.ravel()).reshape(arr.shape)
    return out[()] if out.ndim == 0 else out


def wofz_derivative(z, w=None):
    """Derivative ``w'(z) = -2 z w(z) + 2i/sqrt(pi)``."""
    z = np.asarray(z, dtype=complex)
    if w is None:
        w = wofz(z)
    out = -2.0 * z * w + 2j / SQRT_PI
    return out[()] if np.ndim(out) == 0 else out


def dawsn(z):
    """Dawson function ``F(z) = sqrt(pi)/2 * exp(-z**2) * erfi(z)``.

    Real for real input.
    """
    z = np.asarray(z)
    zc = z.astype(complex)
    if np.iscomplexobj(z):
        F = 0.5j * SQRT_PI * (np.exp(-zc * zc) - wofz(zc))
    else:
        # on the real axis Re w = exp(-x**2), so F is Im w up to a factor
        F = 0.5 * SQRT_PI * np.imag(wofz(zc))
    return F[()] if np.ndim(F) == 0 else F
