import math

import numpy as np
import pytest

from dynrmat import _theta_py
from dynrmat import elliptic as ell

Z = np.array([0.23 + 0.17j, -0.41 + 0.52j, 0.07 - 0.33j, 0.6 + 0.9j])


def triple_product_theta(z, tau, terms=80):
    """Jacobi triple product for the odd theta function."""
    q = np.exp(1j * np.pi * tau)
    m = np.arange(1, terms)
    z = np.asarray(z, dtype=complex)[..., None]
    prod = np.prod((1 - q ** (2 * m)) * (1 - 2 * q ** (2 * m) * np.cos(2 * np.pi * z) + q ** (4 * m)), axis=-1)
    return 2 * q**0.25 * np.sin(np.pi * z[..., 0]) * prod


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)) / (np.abs(b) + 1e-300))


@pytest.mark.parametrize("tau", [0.31 + 1.27j, 1j, -0.4 + 0.8j, 0.5 + 2.5j])
def test_theta_matches_triple_product(tau):
    ctx = ell.EllipticContext(tau)
    assert rel(ell.theta(Z, ctx), triple_product_theta(Z, tau)) < 1e-12


def test_theta_prime_zero_is_two_pi_eta_cubed(ctx):
    assert abs(ctx.theta_prime0 / (2 * np.pi * ell.dedekind_eta(ctx) ** 3) - 1) < 1e-13


def test_dedekind_eta_at_i():
    eta = ell.dedekind_eta(ell.EllipticContext(1j))
    assert abs(eta - math.gamma(0.25) / (2 * math.pi**0.75)) < 1e-14


def test_theta_is_odd_and_quasi_periodic(ctx):
    th = ell.theta(Z, ctx)
    assert rel(ell.theta(-Z, ctx), -th) < 1e-13
    assert rel(ell.theta(Z + 1, ctx), -th) < 1e-13
    factor = -np.exp(-1j * np.pi * ctx.tau - 2j * np.pi * Z)
    assert rel(ell.theta(Z + ctx.tau, ctx), factor * th) < 1e-12


def test_weierstrass_p_trigonometric_limit():
    ctx = ell.EllipticContext(8j)
    oracle = np.pi**2 / np.sin(np.pi * Z) ** 2 - np.pi**2 / 3
    assert rel(ell.weierstrass_p(Z, ctx), oracle) < 1e-12


def test_weierstrass_p_laurent_and_periods(ctx):
    eps = 1e-3
    assert abs(ell.weierstrass_p(eps, ctx) - 1 / eps**2) < 1e-3
    p = ell.weierstrass_p(Z, ctx)
    assert rel(ell.weierstrass_p(Z + 1, ctx), p) < 1e-11
    assert rel(ell.weierstrass_p(Z + ctx.tau, ctx), p) < 1e-11
    assert rel(ell.weierstrass_p(-Z, ctx), p) < 1e-12


def test_sigma_normalisation(ctx):
    eps = 1e-4
    assert abs(ell.sigma(eps, ctx) / eps - 1) < 1e-12


def test_phi_residues_and_symmetry(ctx):
    near = ell.EllipticContext(ctx.tau, pole_threshold=1e-9)
    s, eps = 0.31 + 0.2j, 1e-6
    assert abs(eps * ell.phi(eps, s, near) - 1) < 1e-5
    assert abs(eps * ell.phi(s, eps, near) - 1) < 1e-5
    assert abs(ell.phi(Z, s, ctx) - ell.phi(s, Z, ctx)).max() < 1e-12
    assert rel(ell.phi(-Z, -s, ctx), -np.asarray(ell.phi(Z, s, ctx))) < 1e-12


def test_phi_regular_part(ctx):
    near = ell.EllipticContext(ctx.tau, pole_threshold=1e-9)
    s, eps = 0.31 + 0.2j, 1e-6
    assert abs(ell.phi(eps, s, near) - 1 / eps - ell.phi_reg(s, near)) < 1e-4


def test_analytic_derivatives_against_finite_differences(ctx):
    z, s, h = 0.23 + 0.17j, -0.31 + 0.44j, 1e-5
    val, dz, ds = ell.phi_derivs(z, s, ctx)
    fd_z = (ell.phi(z + h, s, ctx) - ell.phi(z - h, s, ctx)) / (2 * h)
    fd_s = (ell.phi(z, s + h, ctx) - ell.phi(z, s - h, ctx)) / (2 * h)
    assert abs(dz - fd_z) / abs(dz) < 1e-8
    assert abs(ds - fd_s) / abs(ds) < 1e-8
    r, rp = ell.phi_reg_derivs(s, ctx)
    fd_r = (ell.phi_reg(s + h, ctx) - ell.phi_reg(s - h, ctx)) / (2 * h)
    assert abs(rp - fd_r) / abs(rp) < 1e-8
    d = ell.theta_derivs(z, ctx, 2)
    fd_t = (ell.theta(z + h, ctx) - ell.theta(z - h, ctx)) / (2 * h)
    fd_tt = (ell.theta_prime(z + h, ctx) - ell.theta_prime(z - h, ctx)) / (2 * h)
    assert abs(d[1] - fd_t) / abs(d[1]) < 1e-8
    assert abs(d[2] - fd_tt) / abs(d[2]) < 1e-8


def test_doubling_truncation_changes_nothing(ctx):
    wide = ctx.with_n_max(2 * ctx.n_max)
    assert rel(ell.theta_derivs(Z, wide, 2), ell.theta_derivs(Z, ctx, 2)) < 1e-14
    for j in range(1, 4):
        assert rel(ell.theta_char(j, Z, 3, wide), ell.theta_char(j, Z, 3, ctx)) < 1e-14


def test_theta_char_depends_on_j_mod_N(ctx):
    assert rel(ell.theta_char(4, Z, 3, ctx), ell.theta_char(1, Z, 3, ctx)) < 1e-14


def test_backends_agree(ctx):
    m_max = ell._window(Z, ctx, ctx.tau, 1.0)
    ref = _theta_py.lattice_theta(Z, ctx.tau, 0.5, 1.0, m_max, 3)
    try:
        from dynrmat import _theta_core
    except ImportError:
        pytest.skip("compiled core not built")
    got = _theta_core.lattice_theta(Z, ctx.tau, 0.5, 1.0, m_max, 3)
    assert np.max(np.abs(got - ref) / (np.abs(ref) + 1)) < 1e-14


def test_pole_guard(ctx):
    with pytest.raises(ell.PoleError):
        ell.phi(1e-5, 0.3, ctx)
    with pytest.raises(ell.PoleError):
        ell.phi_reg(1 + ctx.tau + 1e-6, ctx)
    assert ell.lattice_distance(2 - ctx.tau + 0.01, ctx) == pytest.approx(0.01)


@pytest.mark.parametrize("bad", [0.5, -1j, complex("nan")])
def test_invalid_modulus(bad):
    with pytest.raises(ell.ConfigurationError):
        ell.EllipticContext(bad)


@pytest.mark.parametrize("name", sorted(ell.KERNEL_IDENTITIES))
def test_kernel_identities_at_random_points(name, ctx):
    n, fn = ell.KERNEL_IDENTITIES[name]
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        p = 0.6 * (rng.random(n) + rng.random(n) * ctx.tau)
        try:
            worst = max(worst, fn(p, ctx))
        except ell.SampleRejected:
            continue
    assert worst < 1e-10


def test_identity_residual_detects_a_wrong_kernel(ctx, monkeypatch):
    z, w, x, y = 0.21 + 0.1j, -0.13 + 0.4j, 0.33 - 0.2j, 0.05 + 0.27j
    assert ell.third_residual(z, w, x, y, ctx) < 1e-12
    orig = ell.phi
    monkeypatch.setattr(ell, "phi", lambda a, b, c: np.asarray(orig(a, b, c)) + 0.5)
    assert ell.third_residual(z, w, x, y, ctx) > 1e-4


def test_theta_at_point_three_tau_i():
    ctx = ell.EllipticContext(1j)
    assert abs(ell.theta(0.3, ctx) - triple_product_theta(0.3, 1j, terms=200)) < 1e-12


def test_theta_prime_limit_and_finite_differences(ctx, rng):
    # theta(eps)/eps - theta'(0) = theta'''(0) eps^2 / 6 + O(eps^4)
    d3 = ell.theta_derivs(0.0, ctx, 3)[3]
    eps = 1e-4
    # the series terms are O(1) and cancel to O(eps): rounding is ~1e-16 / eps
    assert abs(ell.theta(eps, ctx) / eps - ctx.theta_prime0 - d3 * eps**2 / 6) < 1e-11
    eps = 1e-5
    assert abs(ell.theta(eps, ctx) / eps - ctx.theta_prime0) < 1e-8
    h = 1e-5
    z = 0.6 * (rng.random(20) + rng.random(20) * ctx.tau) - 0.3
    fd = (ell.theta(z + h, ctx) - ell.theta(z - h, ctx)) / (2 * h)
    assert rel(fd, ell.theta_prime(z, ctx)) < 1e-6
    assert rel(ell.theta_prime(-z, ctx), ell.theta_prime(z, ctx)) < 1e-13


def test_theta_char_direct_sum():
    tau, N, j, z = 1j, 2, 1, 0.2
    ctx = ell.EllipticContext(tau)
    n = N / 2 - j + N * np.arange(-100, 101)
    direct = np.sum(np.exp(2j * np.pi * (n * (z + 0.5) + n * n * tau / (2 * N))))
    assert abs(ell.theta_char(j, z, N, ctx) - direct) < 1e-12


def test_eta_product_cutoff_is_converged(ctx):
    finer = ell.EllipticContext(ctx.tau, tol=1e-30)
    assert abs(ell.dedekind_eta(finer) / ell.dedekind_eta(ctx) - 1) < 1e-15


@pytest.mark.parametrize("tau", [1j, 0.31 + 1.27j])
def test_weierstrass_p_lattice_sum(tau):
    ctx = ell.EllipticContext(tau)
    z, R = 0.3 + 0.2j, 400
    m = np.arange(-R, R + 1)
    w = (m[:, None] + tau * m[None, :]).ravel()
    w = w[w != 0]
    oracle = 1 / z**2 + np.sum(1 / (z - w) ** 2 - 1 / w**2)
    assert abs(oracle / ell.weierstrass_p(z, ctx) - 1) < 1e-6


def test_kernel_product_is_difference_of_p(ctx, rng):
    z = 0.6 * (rng.random(50) + rng.random(50) * ctx.tau)
    s = 0.6 * (rng.random(50) + rng.random(50) * ctx.tau)
    lhs = np.asarray(ell.phi(z, s, ctx)) * np.asarray(ell.phi(z, -s, ctx))
    rhs = np.asarray(ell.weierstrass_p(z, ctx)) - np.asarray(ell.weierstrass_p(s, ctx))
    assert np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1)) < 1e-10


@pytest.mark.parametrize("tau", [0.31 + 1.27j, 1j, -0.4 + 0.8j])
def test_weierstrass_p_csc_squared_columns(tau):
    """Each lattice column sums to pi^2 csc^2; the constant is G2 in Eisenstein order."""
    ctx = ell.EllipticContext(tau)
    n = np.arange(-30, 31)
    cols = np.sum(np.pi**2 / np.sin(np.pi * (Z[:, None] - n * tau)) ** 2, axis=1)
    nz = n[n != 0]
    g2 = np.pi**2 / 3 + np.sum(np.pi**2 / np.sin(np.pi * nz * tau) ** 2)
    assert rel(ell.weierstrass_p(Z, ctx), cols - g2) < 1e-13


def test_phi_derivs_with_reg_matches_separate_calls(ctx):
    x, s = 0.21 - 0.13j, Z[:3]
    v, vz, vs, r, rp = ell.phi_derivs_with_reg(x, s, ctx)
    for got, want in zip((v, vz, vs), ell.phi_derivs(x, s, ctx)):
        assert rel(got, want) < 1e-14
    for got, want in zip((r, rp), ell.phi_reg_derivs(x, ctx)):
        assert abs(got / want - 1) < 1e-14
