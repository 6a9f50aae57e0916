import numpy as np
import pytest

from dynrmat import elliptic as ell
from dynrmat import opalg as O
from dynrmat.harness import SampleConfig

from conftest import GAMMA, HBAR, generic_q, make_point

Z, W = 0.31 + 0.22j, -0.12 + 0.41j


def test_shift_commutation_rule():
    N = 2
    q1 = O.multiplication(N, 1, HBAR, lambda q: q[0], "q1")
    S1 = O.shift_op(N, O.unit_shift(N, 0), HBAR)
    lhs = O.commutator(q1, S1)
    rhs = S1.scale(-HBAR)
    q = np.array([0.3 + 0.1j, -0.2j])
    assert O.equals(lhs, rhs, [q]) < 1e-15


def test_identity_and_inverse_shifts():
    N = 3
    one = O.identity_op(N, 1, HBAR)
    P1P2 = O.shift_op(N, (1, 1, 0), HBAR)
    inv = O.shift_op(N, (0, -1, 0), HBAR) @ O.shift_op(N, (-1, 0, 0), HBAR)
    q = generic_q(N)
    assert O.equals(P1P2 @ inv, one, [q]) == 0.0
    assert O.equals(one @ P1P2, P1P2, [q]) == 0.0
    assert O.canonical(P1P2 @ inv, q).keys() == {(0, 0, 0)}


def test_composition_is_associative(ctx):
    N = 2
    L = O.build_L_RS(N, Z, GAMMA, HBAR, ctx)
    f = O.multiplication(N, N, HBAR, lambda q: np.diag(np.sin(q)), "sin")
    q = generic_q(N)
    a = (L @ f) @ L
    b = L @ (f @ L)
    assert O.operator_residual(a, b, q) < 1e-14


def test_equals_reports_an_injected_defect(ctx):
    N = 2
    L = O.build_L_RS(N, Z, GAMMA, HBAR, ctx)
    eps = 1e-3
    bumped = L + O.shift_op(N, O.unit_shift(N, 0), HBAR, N).scale(eps)
    qs = [generic_q(N)]
    assert O.equals(L, bumped, qs) == pytest.approx(eps, rel=1e-9)
    assert O.equals(L, L, qs) == 0.0
    report = O.equals(L, bumped, SampleConfig(N=N, samples=4))
    assert not report.passed
    assert report.results[0].max_value == pytest.approx(eps, rel=1e-9)
    assert O.equals(L, L, SampleConfig(N=N, samples=4)).passed


def test_trace_and_partial_trace():
    N = 2
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4)) + 0j
    op = O.multiplication(N, 4, HBAR, lambda q: A)
    q = np.zeros(N)
    t = O.canonical(op.trace(), q)[(0, 0)]
    assert t[0, 0] == pytest.approx(np.trace(A))
    p2 = O.canonical(op.trace((2,), 2, N), q)[(0, 0)]
    assert np.allclose(p2, np.einsum("ikjk->ij", A.reshape(2, 2, 2, 2)))


def test_rs_operator_columns_carry_shifts(ctx):
    N = 3
    L = O.build_L_RS(N, Z, GAMMA, HBAR, ctx)
    q = generic_q(N)
    terms = L.terms(q)
    assert set(terms) == {O.unit_shift(N, j) for j in range(N)}
    W_ = O.rs_W(Z, q, GAMMA, ctx)
    for j in range(N):
        c = terms[O.unit_shift(N, j)]
        assert np.allclose(c[:, j], W_[:, j])
        assert np.count_nonzero(np.delete(c, j, axis=1)) == 0


def test_top_family_member_is_frobenius_determinant(ctx):
    N = 3
    q = generic_q(N)
    th = lambda x: ell.theta(x, ctx)  # noqa: E731
    top = O.commuting_family(N, Z, GAMMA, HBAR, ctx)[N].terms(q)[(1,) * N][0, 0]
    x, y = q + GAMMA, q
    cauchy = ctx.theta_prime0**N * th(Z + N * GAMMA) / th(Z)
    for i in range(N):
        for j in range(i + 1, N):
            cauchy *= th(x[i] - x[j]) * th(y[j] - y[i])
    cauchy /= np.prod([th(x[i] - y[j]) for i in range(N) for j in range(N)])
    assert top == pytest.approx(cauchy * np.prod(O.rs_b(q, GAMMA, ctx)), rel=1e-12)


@pytest.mark.parametrize("N", [2, 3])
def test_family_commutes(N, ctx):
    fam = O.commuting_family(N, Z, GAMMA, HBAR, ctx)
    fam_w = O.commuting_family(N, W, GAMMA, HBAR, ctx)
    q = generic_q(N)
    for a in fam[1:]:
        for b in fam_w[1:]:
            assert O.operator_residual(a @ b, b @ a, q) < 1e-9


def test_first_member_is_trace(ctx):
    N = 3
    q = generic_q(N)
    I1 = O.commuting_family(N, Z, GAMMA, HBAR, ctx)[1]
    tr = O.build_L_RS(N, Z, GAMMA, HBAR, ctx).trace()
    assert O.operator_residual(I1, tr, q) < 1e-13
    a, b = O.trace_factorisation_sides(N, Z, GAMMA, HBAR, ctx)
    assert O.operator_residual(a, b, q) < 1e-12


def test_exchange_relation_at_one_point(ctx):
    N = 2
    pt = make_point(N, (Z, W), ctx)
    Lz = O.build_L_RS(N, Z, GAMMA, HBAR, ctx)
    Lw = O.build_L_RS(N, W, GAMMA, HBAR, ctx)
    lhs, rhs = O.lf_sides(Lz, Lw, pt)
    assert O.operator_residual(lhs, rhs, pt.q) < 1e-8
    lq = O.lq_sides(Lw)
    assert O.operator_residual(*lq, pt.q) < 1e-12


def test_exchange_relation_fails_for_wrong_gamma(ctx):
    N = 2
    pt = make_point(N, (Z, W), ctx)
    Lz = O.build_L_RS(N, Z, GAMMA, HBAR, ctx)
    Lw = O.build_L_RS(N, W, GAMMA + 0.05, HBAR, ctx)
    lhs, rhs = O.lf_sides(Lz, Lw, pt)
    assert O.operator_residual(lhs, rhs, pt.q) > 1e-4


def test_quasi_periodicity_and_rational_limit(ctx):
    q = generic_q(3)
    assert O.quasi_periodicity_residual(3, Z, GAMMA, HBAR, ctx, q) < 1e-9
    small = 0.02 * np.array([0.0, 1.0 + 0.3j, 2.1 - 0.2j])
    assert O.rational_limit_error(small, 0.01 + 0.004j, ell.EllipticContext(8j)) < 1e-2


def test_report_wrappers_are_exposed():
    assert callable(O.check_LF)
    with pytest.raises(AttributeError):
        O.no_such_wrapper
