import numpy as np
import pytest

from dynrmat import elliptic as ell
from dynrmat import rmat

from conftest import HBAR, make_point

SPEC2 = (0.21 + 0.13j, -0.27 + 0.31j)
SPEC3 = SPEC2 + (0.09 + 0.52j,)


def E(i, j, N=2):
    m = np.zeros((N, N), dtype=complex)
    m[i, j] = 1.0
    return m


def kphi(x, s, ctx):
    """Two-argument kernel with the regular-part reading at ``s = 0``."""
    return ell.phi_reg(x, ctx) if s == 0 else ell.phi(x, s, ctx)


def brute_classical_r(pt):
    z, w = pt.spec
    q, ctx, N = pt.q, pt.ctx, pt.N
    out = np.zeros((N * N, N * N), dtype=complex)
    for i in range(N):
        for j in range(N):
            qij = q[i] - q[j]
            if i != j:
                out += ell.phi_reg(qij, ctx) * np.kron(E(i, i, N), E(j, j, N))
            out += kphi(z - w, qij, ctx) * np.kron(E(i, j, N), E(j, i, N))
            out -= kphi(z, qij, ctx) * np.kron(E(i, j, N), E(j, j, N))
            out += kphi(w, qij, ctx) * np.kron(E(j, j, N), E(i, j, N))
    return out


def test_classical_r_n2_expansion(ctx):
    pt = make_point(2, SPEC2, ctx)
    assert np.allclose(rmat.classical_r(2)(pt), brute_classical_r(pt), rtol=1e-13, atol=1e-13)


def test_quantum_r_n2_expansion(ctx):
    pt = make_point(2, SPEC2, ctx)
    z, w = pt.spec
    q, h = pt.q, pt.hbar
    out = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            qij = q[i] - q[j]
            out += kphi(h, qij, ctx) * np.kron(E(i, i), E(j, j))
            out += kphi(z - w, qij, ctx) * np.kron(E(i, j), E(j, i))
            out -= kphi(z + h, qij, ctx) * np.kron(E(i, j), E(j, j))
            out += kphi(w, qij, ctx) * np.kron(E(j, j), E(i, j))
    f = np.sqrt(ell.weierstrass_p(h, ctx) - ell.weierstrass_p(z - w, ctx))
    assert np.allclose(rmat.quantum_R(2)(pt), out / f, rtol=1e-13, atol=1e-13)


def test_f_scalar_squares_to_kernel_product(ctx):
    d = 0.3 + 0.2j
    f = rmat.f_scalar(d, HBAR, ctx)
    assert abs(f**2 + ell.phi(d, HBAR, ctx) * ell.phi(d, -HBAR, ctx)) < 1e-11


def test_rbar_inverse_closed_form(ctx):
    for N in (2, 3):
        pt = make_point(N, SPEC2[:1], ctx)
        prod = rmat.rbar_q(N)(pt) @ rmat.rbar_q_inv(N)(pt)
        assert np.max(np.abs(prod - np.eye(N * N))) < 1e-12


def test_classical_rF_is_difference_dependent(ctx):
    pt = make_point(3, SPEC2, ctx)
    c = 0.17 - 0.08j
    shifted = make_point(3, (SPEC2[0] + c, SPEC2[1] + c), ctx, q=pt.q)
    assert np.allclose(rmat.classical_rF(3)(pt), rmat.classical_rF(3)(shifted), atol=1e-13)


def test_builders_by_id(ctx):
    for mid in rmat.RMatrixId:
        m = rmat.build(mid, 2)
        assert m.N == 2
        assert m.n_slots == (1 if mid is rmat.RMatrixId.S_MATRIX else 2)
    with pytest.raises(ValueError):
        rmat.build("NOPE", 2)


def test_quantum_matrices_refuse_tangents(ctx):
    from dynrmat.dynmat import Tangent

    pt = make_point(2, SPEC2, ctx)
    with pytest.raises(NotImplementedError):
        rmat.quantum_R(2).jet(pt, Tangent((1.0, 0.0), np.zeros(2)))


@pytest.mark.parametrize("rid", sorted(r for r, s in rmat.REGISTRY.items()
                                       if s.kind == "residual" and s.evaluator is None))
def test_registry_relation_at_one_point(rid, ctx):
    spec = rmat.REGISTRY[rid]
    pt = make_point(2, SPEC3[:spec.n_spec], ctx)
    assert spec.evaluate(pt) < 1e-10


def test_sign_control_fails(ctx):
    spec = rmat.REGISTRY["CGNF_SIGN_CONTROL"]
    pt = make_point(3, SPEC3[:spec.n_spec], ctx)
    assert spec.evaluate(pt) > 1e-4


def test_weight_zero(ctx):
    assert rmat.weight_zero_residual(make_point(3, SPEC2, ctx)) < 1e-12


@pytest.mark.parametrize("pair", sorted(rmat.SEMI_PAIRS))
def test_semiclassical_remainder_is_first_order(pair, ctx):
    pt = make_point(3, SPEC2, ctx)
    h = rmat.SEMI_HBAR
    assert rmat.semiclassical_admissible(pt, h)
    e1, e2, ratio = rmat.semiclassical_errors(pair, pt, h)
    assert 0.45 < ratio < 0.55
    assert e1 < 1.0


def test_semiclassical_admissibility_rejects_close_points(ctx):
    q = np.array([0.0, 0.05, 0.4 + 0.3j])
    assert not rmat.semiclassical_admissible(make_point(3, SPEC2, ctx, q=q), 1e-2)
