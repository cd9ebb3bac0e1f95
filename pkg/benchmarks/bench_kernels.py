#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy/SciPy fallback.

Run after building the extension (``pip install -e . --no-build-isolation``):

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from whinit._kernels import BACKEND, _ref

try:
    from whinit._kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_iir():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(2_000_000)
    b = np.array([0.2, 0.1, 0.05])
    a = np.array([1.0, -1.6, 0.68])
    rows = []
    t_ref, y_ref = timeit(_ref.iir_filter, b, a, x)
    rows.append(("fallback (scipy lfilter)", t_ref))
    if _core is not None:
        t_core, y_core = timeit(_core.iir_filter, b, a, x)
        rows.append(("compiled", t_core))
        assert np.allclose(y_core, y_ref, atol=1e-10)
    return "IIR difference equation, 2e6 samples", rows


def bench_selfconv():
    rng = np.random.default_rng(1)
    n = 128
    x = np.zeros(n, dtype=np.complex128)
    excited = rng.choice(np.arange(1, n // 2), size=12, replace=False)
    x[excited] = np.exp(1j * rng.uniform(0, 2 * np.pi, excited.size))
    x[(-excited) % n] = np.conj(x[excited])
    rows = []
    t_ref, y_ref = timeit(_ref.spectral_selfconv, x, 3)
    rows.append(("fallback (numpy)", t_ref))
    if _core is not None:
        t_core, y_core = timeit(_core.spectral_selfconv, np.ascontiguousarray(x), 3)
        rows.append(("compiled", t_core))
        assert np.allclose(y_core, y_ref, atol=1e-10)
    return "3-fold spectral self-convolution, N=128, 24 energized lines", rows


def main():
    print(f"active backend: {BACKEND}")
    if _core is None:
        print("compiled extension not available; benchmarking the fallback only")
    for title, rows in (bench_iir(), bench_selfconv()):
        print(f"\n{title}")
        base = rows[0][1]
        for name, t in rows:
            speedup = f"  ({base / t:5.1f}x vs fallback)" if name != rows[0][0] else ""
            print(f"  {name:28s} {t * 1e3:9.2f} ms{speedup}")


if __name__ == "__main__":
    main()
