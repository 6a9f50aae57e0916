"""Pure-numpy theta-series kernel (fallback for the compiled core)."""

import numpy as np

TWO_PI_I = 2j * np.pi


def lattice_theta(z, tau_eff, offset, step, m_max, order):
    """Sum ``exp(2 pi i a (z + 1/2) + i pi tau_eff a^2)`` over ``a = offset + step*m``.

    Returns an array of shape ``(order + 1,) + z.shape`` holding the series and
    its first ``order`` term-wise z-derivatives.
    """
    z = np.asarray(z, dtype=complex)
    m = np.arange(-m_max, m_max + 1)
    a = offset + step * m
    weight = np.exp(1j * np.pi * tau_eff * a * a)
    phase = np.exp(TWO_PI_I * np.multiply.outer(z + 0.5, a))
    terms = phase * weight
    out = np.empty((order + 1,) + z.shape, dtype=complex)
    factor = np.ones_like(a, dtype=complex)
    for k in range(order + 1):
        out[k] = terms @ factor
        factor = factor * (TWO_PI_I * a)
    return out
