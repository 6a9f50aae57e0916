# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled theta-series kernel.

Same contract as ``_theta_py.lattice_theta``; the phase factors are built by
repeated multiplication instead of one ``exp`` per term.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport M_PI

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)

cnp.import_array()


def lattice_theta(z, double complex tau_eff, double offset, double step,
                  int m_max, int order):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zf = np.ascontiguousarray(
        np.asarray(z, dtype=np.complex128).ravel())
    cdef Py_ssize_t n = zf.shape[0]
    cdef int n_terms = 2 * m_max + 1
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out = np.zeros(
        (order + 1, n), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] weight = np.empty(
        n_terms, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] freq = np.empty(
        n_terms, dtype=np.complex128)
    cdef double complex two_pi_i = 2j * M_PI
    cdef double complex zh, base, y, yinv, ph, t, f
    cdef double a
    cdef Py_ssize_t i, k
    cdef int m

    for m in range(n_terms):
        a = offset + step * (m - m_max)
        weight[m] = cexp(1j * M_PI * tau_eff * a * a)
        freq[m] = two_pi_i * a

    for i in range(n):
        zh = zf[i] + 0.5
        base = cexp(two_pi_i * offset * zh)
        y = cexp(two_pi_i * step * zh)
        yinv = 1.0 / y
        # m = 0 and upward
        ph = base
        for m in range(m_max, n_terms):
            t = ph * weight[m]
            f = 1.0
            for k in range(order + 1):
                out[k, i] = out[k, i] + t * f
                f = f * freq[m]
            ph = ph * y
        # downward
        ph = base * yinv
        for m in range(m_max - 1, -1, -1):
            t = ph * weight[m]
            f = 1.0
            for k in range(order + 1):
                out[k, i] = out[k, i] + t * f
                f = f * freq[m]
            ph = ph * yinv
    shape = (order + 1,) + np.shape(z)
    return out.reshape(shape)
