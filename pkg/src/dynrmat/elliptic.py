"""Elliptic special functions on the torus with periods 1 and tau.

Everything is expressed through the odd theta function

    theta(z) = -sum_n exp(2 pi i (z + 1/2)(n + 1/2) + i pi tau (n + 1/2)^2)

and its term-wise derivatives.  The kernel

    Phi(z, s) = theta'(0) theta(z + s) / (theta(z) theta(s))

has residue 1 at z = 0 and at s = 0.  Its regular part at s = 0 is
``phi_reg(z) = theta'(z) / theta(z)``.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels


class ConfigurationError(ValueError):
    """Invalid modulus or precision settings."""


class SampleRejected(ArithmeticError):
    """A sample point is numerically unusable and should be redrawn."""


class PoleError(SampleRejected):
    """An argument lies within the pole-avoidance threshold of the lattice.

    Raised instead of returning an inaccurate value; the samplers catch it and
    draw a new point.
    """


@dataclass(frozen=True)
class EllipticContext:
    """Modulus and precision policy shared by every evaluation.

    Parameters
    ----------
    tau : complex
        Modulus, ``Im tau > 0``.
    tol : float
        Relative truncation target for every series.
    pole_threshold : float
        Minimum lattice distance accepted for arguments of denominators.
    """

    tau: complex
    tol: float = 1e-17
    pole_threshold: float = 1e-3
    n_max: int = field(init=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if not math.isfinite(tau.imag) or tau.imag <= 0:
            raise ConfigurationError(f"Im tau must be positive, got tau={tau}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "n_max", _default_n_max(tau, self.tol))

    @property
    def p(self) -> complex:
        """Nome ``exp(2 pi i tau)``."""
        return complex(np.exp(2j * np.pi * self.tau))

    def with_n_max(self, n_max: int) -> "EllipticContext":
        """Copy of the context with a forced truncation order (for tests)."""
        ctx = EllipticContext(self.tau, self.tol, self.pole_threshold)
        object.__setattr__(ctx, "n_max", int(n_max))
        return ctx

    @cached_property
    def _neighbours(self) -> np.ndarray:
        return np.array([dx + dy * self.tau for dy in (-1, 0, 1) for dx in (-1, 0, 1)])

    @cached_property
    def _base_n_max(self) -> int:
        return _default_n_max(self.tau, self.tol)

    @cached_property
    def theta_prime0(self) -> complex:
        return complex(theta_derivs(0.0, self, 1)[1])

    @cached_property
    def eta1(self) -> complex:
        """Weierstrass ``zeta(1/2)``, fixed by ``sigma(z) = z + O(z^5)``."""
        d = theta_derivs(0.0, self, 3)
        return complex(-d[3] / (6.0 * d[1]))


def _default_n_max(tau: complex, tol: float) -> int:
    return math.ceil(math.sqrt(-math.log(tol) / (math.pi * tau.imag))) + 2


def _window(z, ctx: EllipticContext, tau_eff: complex, step: float) -> int:
    """Number of lattice terms on each side of the origin.

    Terms decay like ``exp(-pi Im(tau_eff) (a - a*)^2)`` around
    ``a* = -Im z / Im tau_eff``, so the window is widened by ``|Im z|``.
    A context with a forced ``n_max`` scales the window proportionally.
    """
    width = math.sqrt(-math.log(ctx.tol) / (math.pi * tau_eff.imag))
    shift = float(np.abs(z.imag).max()) / tau_eff.imag if z.size else 0.0
    scale = ctx.n_max / ctx._base_n_max
    return int(math.ceil(scale * (width + shift) / step)) + 2


def theta_derivs(z, ctx: EllipticContext, order: int = 1) -> np.ndarray:
    """theta and its first ``order`` derivatives, shape ``(order + 1,) + shape(z)``."""
    z = np.asarray(z, dtype=complex)
    m_max = _window(z, ctx, ctx.tau, 1.0)
    return -_kernels.lattice_theta(z, ctx.tau, 0.5, 1.0, m_max, order)


def theta(z, ctx: EllipticContext):
    """Odd Jacobi theta function with ``theta(z + 1) = -theta(z)``."""
    return _unwrap(theta_derivs(z, ctx, 0)[0])


def theta_prime(z, ctx: EllipticContext):
    return _unwrap(theta_derivs(z, ctx, 1)[1])


def theta_prime_prime(z, ctx: EllipticContext):
    return _unwrap(theta_derivs(z, ctx, 2)[2])


def theta_char(j: int, z, N: int, ctx: EllipticContext):
    """Theta function with characteristic used by the intertwining vectors.

    ``theta_j(z) = sum_{n in N/2 - j + N Z} exp 2 pi i [n (z + 1/2) + n^2 tau / (2N)]``.
    Any integer ``j`` is accepted; the lattice only depends on ``j mod N``.
    """
    if N < 1:
        raise ConfigurationError(f"N must be positive, got {N}")
    z = np.asarray(z, dtype=complex)
    tau_eff = ctx.tau / N
    m_max = _window(z, ctx, tau_eff, float(N))
    return _unwrap(_kernels.lattice_theta(z, tau_eff, N / 2.0 - j, float(N), m_max, 0)[0])


def dedekind_eta(ctx: EllipticContext) -> complex:
    """``p^(1/24) prod_{m>=1} (1 - p^m)`` with the product cut at ``|p|^m < tol``."""
    p = ctx.p
    prod = 1.0 + 0j
    m = 1
    while True:
        pm = p**m
        prod *= 1.0 - pm
        if abs(pm) < ctx.tol:
            break
        m += 1
    return complex(np.exp(2j * np.pi * ctx.tau / 24.0) * prod)


def lattice_distance(z, ctx: EllipticContext):
    """Distance from ``z`` to the nearest point of ``Z + tau Z``."""
    z = np.asarray(z, dtype=complex)
    tau = ctx.tau
    w = z - np.round(z.imag / tau.imag) * tau
    w = w - np.round(w.real)
    return np.abs(w[..., None] - ctx._neighbours).min(axis=-1)


def check_off_lattice(ctx: EllipticContext, *args) -> None:
    """Raise :class:`PoleError` if any argument is within the pole threshold."""
    flat = [np.ravel(np.asarray(a, dtype=complex)) for a in args]
    flat = np.concatenate(flat) if flat else np.empty(0, dtype=complex)
    if flat.size and lattice_distance(flat, ctx).min() < ctx.pole_threshold:
        raise PoleError("argument too close to a lattice point")


def phi(z, s, ctx: EllipticContext):
    """Lame kernel ``theta'(0) theta(z + s) / (theta(z) theta(s))``."""
    z, s = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(s, dtype=complex))
    check_off_lattice(ctx, z, s)
    num, tz, ts = theta_derivs(np.stack([z + s, z, s]), ctx, 0)[0]
    return _unwrap(ctx.theta_prime0 * num / (tz * ts))


def phi_derivs(z, s, ctx: EllipticContext):
    """``(Phi, dPhi/dz, dPhi/ds)`` evaluated from analytic theta derivatives."""
    z, s = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(s, dtype=complex))
    check_off_lattice(ctx, z, s)
    d = theta_derivs(np.stack([z + s, z, s]), ctx, 1)
    a, b, c = d[:, 0], d[:, 1], d[:, 2]
    t0 = ctx.theta_prime0
    val = t0 * a[0] / (b[0] * c[0])
    dz = t0 * (a[1] * b[0] - a[0] * b[1]) / (b[0] ** 2 * c[0])
    ds = t0 * (a[1] * c[0] - a[0] * c[1]) / (c[0] ** 2 * b[0])
    return _unwrap(val), _unwrap(dz), _unwrap(ds)


def phi_derivs_with_reg(z: complex, s, ctx: EllipticContext):
    """``phi_derivs(z, s)`` together with ``phi_reg_derivs(z)`` for a scalar ``z``.

    All thetas come from one series evaluation, which matters in the matrix
    builders that need both the off-diagonal kernel and its diagonal limit.
    """
    s = np.ravel(np.asarray(s, dtype=complex))
    z = complex(z)
    check_off_lattice(ctx, s, np.array([z]))
    d = theta_derivs(np.concatenate([z + s, s, [z]]), ctx, 2)
    n = s.size
    a, c, b = d[:, :n], d[:, n: 2 * n], d[:, 2 * n]
    t0 = ctx.theta_prime0
    val = t0 * a[0] / (b[0] * c[0])
    dz = t0 * (a[1] * b[0] - a[0] * b[1]) / (b[0] ** 2 * c[0])
    ds = t0 * (a[1] * c[0] - a[0] * c[1]) / (c[0] ** 2 * b[0])
    lg = b[1] / b[0]
    return val, dz, ds, complex(lg), complex(b[2] / b[0] - lg * lg)


def phi_dz(z, s, ctx: EllipticContext):
    return phi_derivs(z, s, ctx)[1]


def phi_ds(z, s, ctx: EllipticContext):
    return phi_derivs(z, s, ctx)[2]


def phi_reg(s, ctx: EllipticContext):
    """Regular part of ``Phi(eps, s)`` as ``eps -> 0``: ``theta'(s)/theta(s)``."""
    s = np.asarray(s, dtype=complex)
    check_off_lattice(ctx, s)
    d = theta_derivs(s, ctx, 1)
    return _unwrap(d[1] / d[0])


def phi_reg_derivs(s, ctx: EllipticContext):
    """``(phi_reg, phi_reg')``."""
    s = np.asarray(s, dtype=complex)
    check_off_lattice(ctx, s)
    d = theta_derivs(s, ctx, 2)
    lg = d[1] / d[0]
    return _unwrap(lg), _unwrap(d[2] / d[0] - lg * lg)


def zeta_w(z, ctx: EllipticContext):
    """Weierstrass zeta function, ``d/dz log sigma``."""
    return _unwrap(np.asarray(phi_reg(z, ctx)) + 2.0 * ctx.eta1 * np.asarray(z, dtype=complex))


def weierstrass_p(z, ctx: EllipticContext):
    """Weierstrass P function, ``-zeta_w'``."""
    return _unwrap(-np.asarray(phi_reg_derivs(z, ctx)[1]) - 2.0 * ctx.eta1)


def sigma(z, ctx: EllipticContext):
    """Weierstrass sigma function via ``theta(z) = theta'(0) exp(-zeta(1/2) z^2) sigma(z)``."""
    z = np.asarray(z, dtype=complex)
    return _unwrap(theta_derivs(z, ctx, 0)[0] * np.exp(ctx.eta1 * z * z) / ctx.theta_prime0)


def _unwrap(x):
    x = np.asarray(x)
    return complex(x) if x.ndim == 0 else x


# -- kernel identities -----------------------------------------------------------------
#
# Each function returns |lhs - rhs| / (|lhs| + |rhs| + 1) at one point.  ``scale``
# multiplies the kernel; the quadratic and cubic identities are homogeneous,
# so any nonzero scale leaves them intact.


def _rel(lhs, rhs) -> float:
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1.0))


def phi_mero(z, s, ctx: EllipticContext):
    """Meromorphic kernel ``theta(z + s)/(theta(z) theta(s))`` (``Phi / theta'(0)``)."""
    return _unwrap(np.asarray(phi(z, s, ctx)) / ctx.theta_prime0)


def third_residual(z, w, x, y, ctx: EllipticContext, scale: complex = 1.0) -> float:
    """``Phi(z,x)Phi(w,y) = Phi(z,x-y)Phi(z+w,y) + Phi(z+w,x)Phi(w,y-x)``."""
    P = lambda a, b: scale * phi(a, b, ctx)  # noqa: E731
    lhs = P(z, x) * P(w, y)
    rhs = P(z, x - y) * P(z + w, y) + P(z + w, x) * P(w, y - x)
    return _rel(lhs, rhs)


def lim_residual(z, x, y, ctx: EllipticContext) -> float:
    """``Phi(z,x)Phi(z,y) = Phi(z,x+y)(f(z) + f(x) + f(y) - f(z+x+y))`` with ``f = phi_reg``."""
    f = lambda a: phi_reg(a, ctx)  # noqa: E731
    lhs = phi(z, x, ctx) * phi(z, y, ctx)
    rhs = phi(z, x + y, ctx) * (f(z) + f(x) + f(y) - f(z + x + y))
    return _rel(lhs, rhs)


def cub_residual(z, w, x, y, a, b, ctx: EllipticContext, scale: complex = 1.0) -> float:
    """Cubic identity for the kernel at two spectral points.

    ``Phi(z-w,a-b)Phi(z,x+b)Phi(w,y+a) - Phi(z-w,x-y)Phi(z,y+a)Phi(w,x+b)
    = Phi(z,x+a)Phi(w,y+b)(f(a-b) + f(x+b) - f(x-y) - f(a+y))``.
    """
    P = lambda u, v: scale * phi(u, v, ctx)  # noqa: E731
    f = lambda u: phi_reg(u, ctx)  # noqa: E731
    lhs = P(z - w, a - b) * P(z, x + b) * P(w, y + a) - P(z - w, x - y) * P(z, y + a) * P(w, x + b)
    rhs = P(z, x + a) * P(w, y + b) * scale * (f(a - b) + f(x + b) - f(x - y) - f(a + y))
    return _rel(lhs, rhs)


def wp_identity_residual(z, s, ctx: EllipticContext) -> float:
    """``Phi(z,s)Phi(z,-s) = P(z) - P(s)``."""
    return _rel(phi(z, s, ctx) * phi(z, -s, ctx), weierstrass_p(z, ctx) - weierstrass_p(s, ctx))


def derivative_residual(z, s, ctx: EllipticContext) -> float:
    """``dPhi/dz = dPhi/ds - (phi_reg(z) - phi_reg(s)) Phi``."""
    val, dz, ds = phi_derivs(z, s, ctx)
    return _rel(dz, ds - (phi_reg(z, ctx) - phi_reg(s, ctx)) * val)


KERNEL_IDENTITIES = {
    "THIRD": (4, lambda p, ctx: third_residual(*p, ctx)),
    "THIRD_MERO": (4, lambda p, ctx: third_residual(*p, ctx, scale=1.0 / ctx.theta_prime0)),
    "LIM": (3, lambda p, ctx: lim_residual(*p, ctx)),
    "CUB": (6, lambda p, ctx: cub_residual(*p, ctx)),
    "WP": (2, lambda p, ctx: wp_identity_residual(*p, ctx)),
    "DERIV": (2, lambda p, ctx: derivative_residual(*p, ctx)),
}
"""Identity id -> (number of torus points, residual function)."""


def verify_appendix_b(cfg):
    """Run the elliptic identity suite under a sample configuration."""
    from dataclasses import replace as _replace

    from .harness import run

    return run(_replace(cfg, suites=("elliptic",), relations=None))
