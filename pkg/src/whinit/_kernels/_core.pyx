# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: IIR difference equation and the brute-force
D-fold spectral self-convolution used as a simulation oracle."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def iir_filter(double[::1] b, double[::1] a, double[::1] x):
    """Filter x with b(q)/a(q), zero initial state. Requires a[0] == 1."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nz = max(nb, na) - 1
    cdef cnp.ndarray[double, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef double[::1] yv = y
    cdef double[::1] bb = np.zeros(nz + 1, dtype=np.float64)
    cdef double[::1] aa = np.zeros(nz + 1, dtype=np.float64)
    cdef double[::1] z = np.zeros(max(nz, 1), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double yi

    for j in range(nb):
        bb[j] = b[j]
    for j in range(na):
        aa[j] = a[j]

    if nz == 0:
        for i in range(n):
            yv[i] = bb[0] * x[i]
        return y

    # direct form II transposed
    for i in range(n):
        yi = bb[0] * x[i] + z[0]
        for j in range(nz - 1):
            z[j] = bb[j + 1] * x[i] + z[j + 1] - aa[j + 1] * yi
        z[nz - 1] = bb[nz] * x[i] - aa[nz] * yi
        yv[i] = yi
    return y


cdef void _conv_rec(double complex* x, double complex* acc, Py_ssize_t n,
                    int depth, Py_ssize_t ksum, double complex prod) noexcept:
    cdef Py_ssize_t l
    if depth == 1:
        for l in range(n):
            if x[l] != 0:
                acc[(ksum + l) % n] += prod * x[l]
    else:
        for l in range(n):
            if x[l] != 0:
                _conv_rec(x, acc, n, depth - 1, ksum + l, prod * x[l])


def spectral_selfconv(double complex[::1] x, int order):
    """Sum of prod_i x[l_i] over all index tuples with sum(l_i) = k (mod n).

    Direct enumeration, O(n**order); x is in FFT bin order.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[double complex, ndim=1] acc = np.zeros(n, dtype=np.complex128)
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        return np.asarray(x).copy()
    _conv_rec(&x[0], <double complex*> acc.data, n, order, 0, 1.0 + 0.0j)
    return acc
