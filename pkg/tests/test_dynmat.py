import itertools

import numpy as np
import pytest

from dynrmat import dynmat as dm
from dynrmat import rmat

from conftest import make_point


def brute_embed(m, slots, total, N):
    """Entry-by-entry placement of a k-slot matrix into ``total`` slots."""
    dim = N**total
    out = np.zeros((dim, dim), dtype=complex)
    k = len(slots)
    for row in itertools.product(range(N), repeat=total):
        for col in itertools.product(range(N), repeat=total):
            if any(row[s] != col[s] for s in range(total) if s + 1 not in slots):
                continue
            r = sum(row[s - 1] * N ** (k - 1 - a) for a, s in enumerate(slots))
            c = sum(col[s - 1] * N ** (k - 1 - a) for a, s in enumerate(slots))
            R = sum(x * N ** (total - 1 - i) for i, x in enumerate(row))
            C = sum(x * N ** (total - 1 - i) for i, x in enumerate(col))
            out[R, C] = m[r, c]
    return out


@pytest.mark.parametrize("N,slots,total", [(2, (1,), 3), (2, (3,), 3), (2, (1, 3), 3), (2, (3, 1), 3),
                                           (3, (2, 1), 2), (2, (2, 3), 4), (3, (1, 2), 3)])
def test_embed_matches_brute_force(N, slots, total, rng):
    k = len(slots)
    m = rng.normal(size=(N**k, N**k)) + 1j * rng.normal(size=(N**k, N**k))
    assert np.allclose(dm.embed_array(m, slots, total, N), brute_embed(m, slots, total, N), atol=0)


def test_flip_and_kronecker_order(rng):
    N = 3
    a, b = rng.normal(size=(N, N)), rng.normal(size=(N, N))
    P = dm.permutation(N)
    assert np.allclose(P @ P, np.eye(N * N))
    assert np.allclose(P @ np.kron(a, b) @ P, np.kron(b, a))
    assert np.allclose(dm.embed_array(np.kron(a, b), (2, 1), 2, N), np.kron(b, a))
    # slot 1 is the slowest index
    e = np.zeros(N)
    e[2] = 1
    f = np.zeros(N)
    f[1] = 1
    assert np.argmax(np.kron(e, f)) == 2 * N + 1


def test_embed_rejects_bad_slots():
    with pytest.raises(ValueError):
        dm.embed_array(np.eye(4), (1, 1), 3, 2)
    with pytest.raises(ValueError):
        dm.embed_array(np.eye(4), (1, 4), 3, 2)


def test_algebra_and_addends(ctx):
    N = 2
    pt = make_point(N, (0.2 + 0.1j, -0.3 + 0.25j), ctx)
    r = rmat.classical_r(N)
    two = r + r
    assert len(two.addends()) == 2
    assert np.allclose(two(pt), 2 * r(pt))
    assert np.allclose((r - r)(pt), 0)
    assert np.allclose((r @ dm.identity(2, N))(pt), r(pt))
    assert np.allclose(dm.commutator(r, r)(pt), 0)
    assert len((3.0 * two).addends()) == 2


def test_term_residual_scales_by_largest_addend(ctx):
    N = 2
    pt = make_point(N, (), ctx)
    big = dm.constant(1e6 * np.eye(N * N), 2, N)
    tiny = dm.constant(1e-3 * np.eye(N * N), 2, N)
    lhs = big + tiny - big
    zero = dm.constant(np.zeros((N * N, N * N)), 2, N)
    assert dm.term_residual(lhs, zero, pt) == pytest.approx(1e-3 / (1e6 + 1 + 1))
    assert dm.relative_residual(lhs(pt), zero(pt)) == pytest.approx(1e-3 / 1.001)


def test_at_args_reparametrises(ctx):
    N = 2
    r = rmat.classical_r(N)
    pt = make_point(N, (0.2 + 0.1j, -0.3 + 0.25j, 0.11 + 0.4j), ctx)
    m = dm.at_args(r, 3, (2, 0), ("sum", [(0, 1), (1, -1)], 1))
    s = pt.spec
    ref = r(make_point(N, (s[2], s[0] - s[1] + pt.hbar), ctx, q=pt.q))
    assert np.allclose(m(pt), ref)


def test_spectral_and_q_derivatives_against_finite_differences(ctx):
    N, h = 3, 1e-5
    r = rmat.bold_r(N)
    pt = make_point(N, (0.2 + 0.1j, -0.3 + 0.25j), ctx)
    d = dm.spectral_derivative(r, (1.0, 0.0))(pt)
    fd = (r(make_point(N, (pt.spec[0] + h, pt.spec[1]), ctx, q=pt.q))
          - r(make_point(N, (pt.spec[0] - h, pt.spec[1]), ctx, q=pt.q))) / (2 * h)
    assert np.max(np.abs(d - fd)) / np.max(np.abs(d)) < 1e-8
    dq = np.zeros(N)
    dq[1] = 1
    _, jet = r.jet(pt, dm.Tangent((0.0, 0.0), dq))
    fdq = (r(pt.shifted_q(h * dq)) - r(pt.shifted_q(-h * dq))) / (2 * h)
    assert np.max(np.abs(jet - fdq)) / np.max(np.abs(jet)) < 1e-8


def test_conj_P_on_a_diagonal_function(ctx):
    N = 2

    def fn(pt, tan):
        return np.diag(np.exp(np.asarray(pt.q))).astype(complex), None

    m = dm.DynamicalMatrix(1, N, fn, 0, "e^q")
    pt = make_point(N, (), ctx)
    got = dm.conj_P(m, 1, 1)(pt)
    expect = np.diag([np.exp(pt.q[0] - pt.hbar), np.exp(pt.q[1] - pt.hbar)])
    assert np.allclose(got, expect)
    back = dm.conj_P(m, 1, -1)(pt)
    assert np.allclose(back, np.diag(np.exp(pt.q + pt.hbar)))
    with pytest.raises(ValueError):
        dm.conj_P(m, 1, 0)


def test_conj_P_matches_hand_expansion(ctx):
    N = 2
    rbar = rmat.classical_rbar(N)
    pt = make_point(N, (0.2 + 0.1j,), ctx)
    got = dm.conj_P(dm.embed(rbar, (1, 2), 3), 3, 1)(pt)
    expect = np.zeros((8, 8), dtype=complex)
    for j in range(N):
        dq = np.zeros(N, dtype=complex)
        dq[j] = -pt.hbar
        e = np.zeros((N, N))
        e[j, j] = 1
        expect += np.kron(rbar(pt.shifted_q(dq)), e)
    assert np.allclose(got, expect, rtol=1e-14, atol=1e-14)


def test_q_derivative_slot_against_finite_differences(ctx):
    N, h = 2, 1e-5
    rbar = rmat.classical_rbar(N)
    pt = make_point(N, (0.2 + 0.1j,), ctx)
    got = dm.q_derivative_slot(rbar, 2)(pt)
    expect = np.zeros((4, 4), dtype=complex)
    for j in range(N):
        dq = np.zeros(N)
        dq[j] = h
        fd = (rbar(pt.shifted_q(dq)) - rbar(pt.shifted_q(-dq))) / (2 * h)
        e = np.zeros((N, N))
        e[j, j] = 1
        expect += np.kron(np.eye(N), e) @ fd
    assert np.max(np.abs(got - expect)) < 1e-6 * np.max(np.abs(got))
