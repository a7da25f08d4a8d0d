"""Constants shared by the compiled and pure-Python kernels."""
import numpy as np

# Strip |Im z| <= STRIP_HALFWIDTH uses the Dawson-function representation
# w = exp(-z^2) + 2i/sqrt(pi) F(z); above it the rational approximation.
STRIP_HALFWIDTH = 1.0

# Rybicki sampling step and number of odd offsets on each side.
RYBICKI_H = 0.2
RYBICKI_TERMS = 40

# Beyond |Re z| >= ASYMPTOTIC_X inside the strip the Dawson function is
# summed from its asymptotic series instead.
ASYMPTOTIC_X = 10.0
ASYMPTOTIC_TERMS = 24

WEIDEMAN_N = 36

SQRT_PI = float(np.sqrt(np.pi))
INV_SQRT_PI = 1.0 / SQRT_PI


def weideman_coefficients(n: int = WEIDEMAN_N) -> tuple[np.ndarray, float]:
    """Polynomial coefficients for Weideman's rational approximation of w(z).

    Parameters
    ----------
    n : int
        Number of terms.

    Returns
    -------
    coefs : ndarray
        Coefficients in descending order (``np.polyval`` convention).
    L : float
        Scale parameter of the Moebius map.
    """
    m = 2 * n
    m2 = 2 * m
    k = np.arange(-m + 1, m)
    L = np.sqrt(n / np.sqrt(2.0))
    theta = k * np.pi / m
    t = L * np.tan(theta / 2.0)
    f = np.exp(-t * t) * (L * L + t * t)
    f = np.concatenate(([0.0], f))
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / m2
    return np.ascontiguousarray(np.flipud(a[1 : n + 1])), float(L)


WEIDEMAN_COEFS, WEIDEMAN_L = weideman_coefficients()

# Odd offsets n' in [-(2T-1), 2T-1] used by the Rybicki sum.
RYBICKI_OFFSETS = np.arange(-2 * RYBICKI_TERMS + 1, 2 * RYBICKI_TERMS, 2, dtype=float)

# Asymptotic Dawson series F(z) ~ sum_n c_n / z^(2n+1), c_n = (2n-1)!! / 2^(n+1).
_c = [0.5]
for _n in range(1, ASYMPTOTIC_TERMS):
    _c.append(_c[-1] * (2 * _n - 1) / 2.0)
ASYMPTOTIC_COEFS = np.array(_c)
del _c, _n

# Maclaurin series of the Dawson function, F(z) = sum c_n z**(2n+1), used
# for |z| < SERIES_RADIUS where the sampling sum loses relative accuracy
SERIES_RADIUS = 0.5
SERIES_COEFS = tuple((-2.0) ** n / float(np.prod(np.arange(1, 2 * n + 2, 2))) for n in range(24))
