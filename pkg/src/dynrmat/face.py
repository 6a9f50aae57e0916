"""Intertwining vectors, face weights and the vertex R-matrix they induce.

Heights live in the weight space of sl_N.  A coordinate vector ``q`` enters
only through its projections ``<q, eps_k> = q_k - mean(q)``, so every
function here is invariant under uniform shifts of ``q``.  An ``hbar eps_k``
step of the height is represented by adding ``hbar e_k`` to ``q``; on such
projection functions the two agree.

Matrix conventions
------------------
``Intertwiner.matrix[j, k]`` is the ``j``-th component of the vector that
carries the height ``q`` to ``q + hbar eps_k``; ``Intertwiner.inverse`` is its
matrix inverse, so ``inverse[k, j]`` is the dual component.  The vertex
R-matrix is stored as ``RB[(i, j), (i', j')] = R^{i'j'}_{ij}`` in the
row-major pair basis used by :mod:`dynrmat.dynmat`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from . import elliptic as ell
from .dynmat import embed_array, permutation

COND_LIMIT = 1e8


class FaceCase(str, Enum):
    """The three nonzero configurations of the face weights."""

    DIAG = "DIAG"    # both steps along the same eps_i
    CROSS = "CROSS"  # i != j, top and bottom heights agree
    MIX = "MIX"      # i != j, top and bottom heights differ


def projections(q) -> np.ndarray:
    """``<q, eps_k>`` for every ``k``."""
    q = np.asarray(q, dtype=complex)
    return q - q.mean()


def unit_vector(N: int, k: int) -> np.ndarray:
    e = np.zeros(N, dtype=complex)
    e[k] = 1.0
    return e


@dataclass(frozen=True)
class Intertwiner:
    """Intertwining vectors at spectral parameter ``z`` and height ``q``."""

    z: complex
    q: np.ndarray
    matrix: np.ndarray

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def intertwiner(z, q, ctx: ell.EllipticContext, cond_limit: float = COND_LIMIT) -> Intertwiner:
    """``M[j, k] = theta_j(z/N - <q, eps_k>) / (i eta(tau))``.

    Raises :class:`~dynrmat.elliptic.SampleRejected` when the matrix is too
    ill-conditioned to invert reliably (for instance at ``z = 0``).
    """
    q = np.asarray(q, dtype=complex)
    N = len(q)
    v = projections(q)
    norm = 1j * ell.dedekind_eta(ctx)
    m = np.array([np.atleast_1d(ell.theta_char(j, z / N - v, N, ctx)) for j in range(1, N + 1)]) / norm
    if not np.all(np.isfinite(m)) or np.linalg.cond(m) > cond_limit:
        raise ell.SampleRejected("intertwiner matrix is numerically singular")
    return Intertwiner(complex(z), q, m)


def intertwiner_inv(z, q, ctx: ell.EllipticContext) -> np.ndarray:
    return intertwiner(z, q, ctx).inverse


def iden_rhs(z, q, q2, ctx: ell.EllipticContext) -> np.ndarray:
    """Closed form of ``sum_m inverse(z, q2)[j, m] matrix(z, q)[m, i]``.

    Entry ``[j, i]`` is ``theta(z + a_j - b_i)/theta(z) prod_{j' != j}
    theta(a_j' - b_i) / theta(a_j' - a_j)`` with ``a = <q2, eps>`` and
    ``b = <q, eps>``.
    """
    a, b = projections(q2), projections(q)
    N = len(a)
    th = lambda x: ell.theta(x, ctx)  # noqa: E731
    ell.check_off_lattice(ctx, z, np.subtract.outer(a, a)[~np.eye(N, dtype=bool)])
    out = np.empty((N, N), dtype=complex)
    for j in range(N):
        for i in range(N):
            val = th(z + a[j] - b[i]) / th(z)
            for jp in range(N):
                if jp != j:
                    val *= th(a[jp] - b[i]) / th(a[jp] - a[j])
            out[j, i] = val
    return out


# -- face weights ---------------------------------------------------------------------


def face_weight(case, z, qij, hbar, ctx: ell.EllipticContext, cross_sign: int = -1) -> complex:
    """Boltzmann weight of one face configuration.

    ``cross_sign`` is the sign of ``z`` in the CROSS weight; ``-1`` is the
    documented convention ``theta(-z + q_ij)/theta(q_ij)``.
    """
    case = FaceCase(case)
    th = lambda x: ell.theta(x, ctx)  # noqa: E731
    if case is FaceCase.DIAG:
        ell.check_off_lattice(ctx, hbar)
        return complex(th(z + hbar) / th(hbar))
    ell.check_off_lattice(ctx, qij)
    if case is FaceCase.CROSS:
        return complex(th(cross_sign * z + qij) / th(qij))
    ell.check_off_lattice(ctx, hbar)
    return complex(th(z) / th(hbar) * th(hbar + qij) / th(qij))


def weight(top: int, other: int, bottom: int, z, q, hbar, ctx: ell.EllipticContext, cross_sign: int = -1) -> complex:
    """``W^top_bottom[top + other]``: face from ``q`` to ``q + hbar(eps_top + eps_other)``.

    The upper path passes through ``q + hbar eps_top``, the lower through
    ``q + hbar eps_bottom``.  Zero unless ``bottom`` is ``top`` or ``other``.
    """
    v = projections(q)
    if top == other:
        return face_weight(FaceCase.DIAG, z, 0.0, hbar, ctx) if bottom == top else 0j
    qtm = v[top] - v[other]
    if bottom == top:
        return face_weight(FaceCase.CROSS, z, qtm, hbar, ctx, cross_sign)
    if bottom == other:
        return face_weight(FaceCase.MIX, z, qtm, hbar, ctx)
    return 0j


# -- vertex R-matrix -------------------------------------------------------------------


def belavin_R(z, w, q, hbar, ctx: ell.EllipticContext, cross_sign: int = -1,
              cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Vertex R-matrix ``R^B(z - w)`` extracted from the face-vertex relation.

    Solves ``RB @ Psi = RHS`` where column ``(k, m)`` of ``Psi`` is
    ``phi(z)^{(k)}(q) (x) phi(w)^{(m)}(q + hbar eps_k)`` and column ``(k, m)``
    of ``RHS`` is ``sum_s W^k_s[k+m] phi(z)^{(k+m-s)}(q + hbar eps_s) (x)
    phi(w)^{(s)}(q)``.  The probe ``(z, w, q)`` must be generic; the result is
    independent of ``q`` and depends on ``z, w`` only through ``z - w``.
    """
    q = np.asarray(q, dtype=complex)
    N = len(q)
    Mz = intertwiner(z, q, ctx).matrix
    Mw = intertwiner(w, q, ctx).matrix
    Mw_k = [intertwiner(w, q + hbar * unit_vector(N, k), ctx).matrix for k in range(N)]
    Mz_s = [intertwiner(z, q + hbar * unit_vector(N, s), ctx).matrix for s in range(N)]
    psi = np.zeros((N * N, N * N), dtype=complex)
    rhs = np.zeros_like(psi)
    for k in range(N):
        for m in range(N):
            col = k * N + m
            psi[:, col] = np.kron(Mz[:, k], Mw_k[k][:, m])
            for s in {k, m}:
                wt = weight(k, m, s, z - w, q, hbar, ctx, cross_sign)
                rhs[:, col] += wt * np.kron(Mz_s[s][:, k + m - s], Mw[:, s])
    if np.linalg.cond(psi) > cond_limit:
        raise ell.SampleRejected("face-vertex system is numerically singular")
    return np.linalg.solve(psi.T, rhs.T).T


# -- identity residuals ----------------------------------------------------------------


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / (np.max(np.abs(a)) + np.max(np.abs(b)) + 1.0))


def ort_residual(z, q, ctx) -> float:
    """Both orthogonality relations, ``inverse @ matrix = 1 = matrix @ inverse``."""
    it = intertwiner(z, q, ctx)
    eye = np.eye(it.N)
    return max(_rel(it.inverse @ it.matrix, eye), _rel(it.matrix @ it.inverse, eye))


def iden_residual(z, q, q2, ctx) -> float:
    lhs = intertwiner(z, q2, ctx).inverse @ intertwiner(z, q, ctx).matrix
    return _rel(lhs, iden_rhs(z, q, q2, ctx))


def dual_residual(z, w, q, hbar, ctx, cross_sign: int = -1) -> float:
    """The dual face-vertex relation, checked for every ``(k, m)``."""
    q = np.asarray(q, dtype=complex)
    N = len(q)
    RB = belavin_R(z, w, q, hbar, ctx, cross_sign)
    Wi_q = intertwiner(w, q, ctx).inverse
    Zi_q = intertwiner(z, q, ctx).inverse
    worst = 0.0
    for k in range(N):
        Zi_k = intertwiner(z, q + hbar * unit_vector(N, k), ctx).inverse
        for m in range(N):
            lhs = np.kron(Zi_k[m, :], Wi_q[k, :]) @ RB
            rhs = np.zeros(N * N, dtype=complex)
            for s in {k, m}:
                Wi_s = intertwiner(w, q + hbar * unit_vector(N, s), ctx).inverse
                rhs += weight(s, k + m - s, k, z - w, q, hbar, ctx, cross_sign) * np.kron(Zi_q[s, :], Wi_s[k + m - s, :])
            worst = max(worst, _rel(lhs, rhs))
    return worst


def rb_q_independence(z, w, q1, q2, hbar, ctx, cross_sign: int = -1) -> float:
    return _rel(belavin_R(z, w, q1, hbar, ctx, cross_sign), belavin_R(z, w, q2, hbar, ctx, cross_sign))


def rb_difference_only(z, w, c, q, hbar, ctx, cross_sign: int = -1) -> float:
    return _rel(belavin_R(z, w, q, hbar, ctx, cross_sign), belavin_R(z + c, w + c, q, hbar, ctx, cross_sign))


def rb_qybe_residual(z1, z2, z3, q, hbar, ctx, cross_sign: int = -1) -> float:
    """``R12(z1-z2) R13(z1-z3) R23(z2-z3) = R23 R13 R12``."""
    N = len(q)
    a = embed_array(belavin_R(z1, z2, q, hbar, ctx, cross_sign), (1, 2), 3, N)
    b = embed_array(belavin_R(z1, z3, q, hbar, ctx, cross_sign), (1, 3), 3, N)
    c = embed_array(belavin_R(z2, z3, q, hbar, ctx, cross_sign), (2, 3), 3, N)
    return _rel(a @ b @ c, c @ b @ a)


def eight_vertex_violation(RB: np.ndarray) -> float:
    """Largest entry outside the pattern ``i + j = i' + j' (mod 2)`` (N = 2 only)."""
    if RB.shape != (4, 4):
        raise ValueError("the eight-vertex pattern is defined for N = 2")
    worst = 0.0
    for r in range(4):
        for c in range(4):
            i, j, ip, jp = r // 2, r % 2, c // 2, c % 2
            if (i + j - ip - jp) % 2:
                worst = max(worst, abs(RB[r, c]))
    return float(worst / np.max(np.abs(RB)))


def rb_unitarity(z, w, q, hbar, ctx, cross_sign: int = -1):
    """``R^B(z - w) R^B_21(w - z)`` relative to its ``[0, 0]`` entry.

    Returns ``(scalar, deviation)`` where ``deviation`` is the largest
    departure of the normalised product from the identity.
    """
    N = len(q)
    C = permutation(N)
    U = belavin_R(z, w, q, hbar, ctx, cross_sign) @ C @ belavin_R(w, z, q, hbar, ctx, cross_sign) @ C
    scalar = complex(U[0, 0])
    return scalar, float(np.max(np.abs(U / scalar - np.eye(N * N))))


def __getattr__(name):
    # the report-returning wrapper lives in the harness, which imports this module
    if name == "check_iden":
        from .harness.api import check_iden

        return check_iden
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
