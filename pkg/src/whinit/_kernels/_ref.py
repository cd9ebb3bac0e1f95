"""NumPy/SciPy reference implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (or when
WHINIT_PURE is set). Results match the compiled versions to rounding.
"""

import numpy as np
from scipy.signal import lfilter


def iir_filter(b, a, x):
    """Filter x with b(q)/a(q), zero initial state. Requires a[0] == 1."""
    if len(x) == 0:
        return np.asarray(x, dtype=np.float64).copy()
    return lfilter(b, a, x)


def spectral_selfconv(x, order):
    """Sum of prod_i x[l_i] over all index tuples with sum(l_i) = k (mod n).

    Direct enumeration with the innermost index vectorized; x is in FFT
    bin order.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = len(x)
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        return x.copy()
    acc = np.zeros(n, dtype=np.complex128)
    support = np.flatnonzero(x)

    def recurse(depth, ksum, prod):
        if depth == 1:
            # acc[(ksum + l) % n] += prod * x[l] for every l
            acc[:] += np.roll(prod * x, ksum)
        else:
            for l in support:
                recurse(depth - 1, ksum + l, prod * x[l])

    recurse(order, 0, 1.0 + 0.0j)
    return acc
