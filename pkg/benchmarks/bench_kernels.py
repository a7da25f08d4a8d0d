"""Time the compiled kernels against the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat 5]``. Prints one
line per kernel with the best wall time of each backend, the speedup and
the largest difference between the two results.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from spincavity import _fallback
from spincavity.model import Tabulated

try:
    from spincavity import _core
except ImportError:  # the extension was not built
    _core = None


def _cases(rng):
    n = 200_000
    z = rng.uniform(-8, 8, n) + 1j * rng.uniform(-3, 5, n)
    poles = np.sort(rng.normal(0, 1, 500)) - 0.05j
    w2 = rng.uniform(0.01, 0.1, 500)
    zd = rng.uniform(-3, 3, 2000) + 1j * rng.uniform(0.01, 1.0, 2000)
    nodes = np.linspace(-2, 2, 2001)
    rho = np.exp(-nodes**2)
    kinks = Tabulated(nodes, rho).kinks
    zt = rng.uniform(-3, 3, 4000) + 1j * rng.uniform(0.01, 1.0, 4000)
    h = 0.01
    kern = np.exp(-0.5 * (np.arange(4001) * h) ** 2).astype(complex)
    freqs = np.sort(rng.uniform(-1, 1, 4000))
    g2 = np.full(freqs.size, 1.0 / freqs.size)
    return {
        "faddeeva (200k points)": ("faddeeva", (z,)),
        "discrete_levelshift (2k x 500)": ("discrete_levelshift", (zd, poles, w2)),
        "tabulated_levelshift (4k x 2k nodes)": ("tabulated_levelshift", (zt, nodes, rho, kinks)),
        "volterra (4000 steps)": ("volterra", (kern, 0.1 - 0.05j, h, 4000)),
        "secular_roots (N = 4000)": ("secular_roots", (freqs, g2, 0.0)),
    }


def _best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind in "iu":
        return float(np.max(np.abs(a - b))) if a.size else 0.0
    scale = max(float(np.max(np.abs(b))), 1e-300) if b.size else 1.0
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':40s} {'fallback [s]':>13s} {'compiled [s]':>13s} {'speedup':>8s} {'max rel diff':>13s}")
    for label, (name, fargs) in _cases(rng).items():
        tp = _best(getattr(_fallback, name), fargs, args.repeat)
        if _core is None:
            print(f"{label:40s} {tp:13.4f} {'n/a':>13s}")
            continue
        tc = _best(getattr(_core, name), fargs, args.repeat)
        d = _diff(getattr(_core, name)(*fargs), getattr(_fallback, name)(*fargs))
        print(f"{label:40s} {tp:13.4f} {tc:13.4f} {tp / tc:8.1f} {d:13.2e}", flush=True)


if __name__ == "__main__":
    main()
