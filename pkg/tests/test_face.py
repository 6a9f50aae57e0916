import numpy as np
import pytest

from dynrmat import elliptic as ell
from dynrmat import face
from dynrmat.dynmat import permutation

from conftest import HBAR, generic_q

Z, W = 0.31 + 0.22j, -0.12 + 0.41j


@pytest.mark.parametrize("N", [2, 3, 4])
def test_intertwiner_orthogonality(N, ctx):
    assert face.ort_residual(Z, generic_q(N), ctx) < 1e-11


def test_intertwiner_depends_on_projections_only(ctx):
    q = generic_q(3)
    a = face.intertwiner(Z, q, ctx).matrix
    b = face.intertwiner(Z, q + 0.37 - 0.1j, ctx).matrix
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("N", [2, 3])
def test_contraction_identity(N, ctx):
    q = generic_q(N)
    q2 = q + np.linspace(0.05, 0.3, N) * (1 + 0.5j)
    assert face.iden_residual(Z, q, q2, ctx) < 1e-9
    # equal heights give the identity matrix
    assert np.allclose(face.iden_rhs(Z, q, q, ctx), np.eye(N), atol=1e-12)


def test_singular_intertwiner_is_rejected(ctx):
    with pytest.raises(ell.SampleRejected):
        face.intertwiner(Z, np.zeros(3), ctx)


def test_face_weights_at_zero_spectral_parameter(ctx):
    qij = 0.27 + 0.11j
    assert face.face_weight("DIAG", 0.0, qij, HBAR, ctx) == pytest.approx(1.0, abs=1e-14)
    assert face.face_weight("MIX", 0.0, qij, HBAR, ctx) == pytest.approx(0.0, abs=1e-14)
    assert face.face_weight("CROSS", 0.0, qij, HBAR, ctx) == pytest.approx(1.0, abs=1e-14)


def test_weight_selection_rules(ctx):
    q = generic_q(3)
    assert face.weight(0, 1, 2, Z, q, HBAR, ctx) == 0
    assert face.weight(1, 1, 0, Z, q, HBAR, ctx) == 0
    v = face.projections(q)
    cross = face.weight(0, 1, 0, Z, q, HBAR, ctx)
    assert cross == pytest.approx(ell.theta(-Z + v[0] - v[1], ctx) / ell.theta(v[0] - v[1], ctx))


@pytest.mark.parametrize("N", [2, 3])
def test_vertex_matrix_is_regular_at_zero(N, ctx):
    q = generic_q(N)
    R = face.belavin_R(Z, Z, q, HBAR, ctx)
    assert np.max(np.abs(R / R[0, 0] - permutation(N))) < 1e-12


@pytest.mark.parametrize("N", [2, 3])
def test_vertex_matrix_properties(N, ctx):
    q1 = generic_q(N)
    q2 = q1 + np.linspace(0.1, 0.4, N) * (1 - 0.7j)
    assert face.rb_q_independence(Z, W, q1, q2, HBAR, ctx) < 1e-9
    assert face.rb_difference_only(Z, W, 0.13 + 0.05j, q1, HBAR, ctx) < 1e-9
    assert face.rb_qybe_residual(Z, W, 0.05 + 0.6j, q1, HBAR, ctx) < 1e-9
    assert face.dual_residual(Z, W, q1, HBAR, ctx) < 1e-10
    scalar, deviation = face.rb_unitarity(Z, W, q1, HBAR, ctx)
    assert deviation < 1e-9


def test_eight_vertex_pattern(ctx):
    R = face.belavin_R(Z, W, generic_q(2), HBAR, ctx)
    assert face.eight_vertex_violation(R) < 1e-12
    with pytest.raises(ValueError):
        face.eight_vertex_violation(np.eye(9))


def test_opposite_cross_sign_breaks_q_independence(ctx):
    q1 = generic_q(3)
    q2 = q1 + np.array([0.1, 0.3, -0.2])
    assert face.rb_q_independence(Z, W, q1, q2, HBAR, ctx, cross_sign=+1) > 1e-4


def test_two_by_two_intertwiner_entries(ctx):
    q = generic_q(2)
    M = face.intertwiner(Z, q, ctx).matrix
    v = face.projections(q)
    norm = 1j * ell.dedekind_eta(ctx)
    for j in range(2):
        for k in range(2):
            assert M[j, k] == pytest.approx(ell.theta_char(j + 1, Z / 2 - v[k], 2, ctx) / norm, rel=1e-14)
