"""Dynamical matrices on tensor powers of C^N.

A :class:`DynamicalMatrix` is a lazily evaluated matrix-valued function of a
:class:`Point` (spectral parameters, coordinates ``q``, ``hbar``, ``gamma`` and
the elliptic context).  Builders may also propagate a first-order
:class:`Tangent`, which is how analytic spectral and coordinate derivatives
enter the classical relations.

Index convention: row-major Kronecker ordering with slot 1 slowest, so the
basis vector ``e_{i1} (x) e_{i2} (x) ...`` has flat index
``((i1 * N) + i2) * N + ...``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .elliptic import EllipticContext


@dataclass(frozen=True)
class Point:
    spec: tuple
    q: np.ndarray
    hbar: complex
    gamma: complex
    ctx: EllipticContext

    @property
    def N(self) -> int:
        return len(self.q)

    def shifted_q(self, dq) -> "Point":
        return replace(self, q=self.q + np.asarray(dq))


@dataclass(frozen=True)
class Tangent:
    """Direction of a first-order derivative in (spectral, q) space."""

    dspec: tuple
    dq: np.ndarray


Evaluator = Callable[[Point, Optional[Tangent]], tuple]


class DynamicalMatrix:
    """Matrix on ``n_slots`` copies of ``C^N`` depending on a :class:`Point`.

    ``fn(point, tangent)`` returns ``(value, derivative)``; the derivative is
    ``None`` when ``tangent`` is ``None``.  ``n_spec`` is the number of
    spectral arguments the expression reads.
    """

    def __init__(self, n_slots: int, N: int, fn: Evaluator, n_spec: int, label: str = "",
                 parts: Optional[tuple] = None):
        self.n_slots = n_slots
        self.N = N
        self.fn = fn
        self.n_spec = n_spec
        self.label = label
        # addends of a sum, kept so that residuals can be scaled by term size
        self.parts = parts

    def addends(self) -> tuple:
        """The summands this matrix was built from (itself if it is not a sum)."""
        return self.parts if self.parts else (self,)

    @property
    def dim(self) -> int:
        return self.N**self.n_slots

    def __call__(self, point: Point) -> np.ndarray:
        return self.fn(point, None)[0]

    def jet(self, point: Point, tangent: Tangent):
        return self.fn(point, tangent)

    def __repr__(self):
        return f"DynamicalMatrix({self.label or '?'}, slots={self.n_slots}, N={self.N})"

    # -- algebra -----------------------------------------------------------
    def _check(self, other: "DynamicalMatrix"):
        if (self.n_slots, self.N) != (other.n_slots, other.N):
            raise ValueError(f"shape mismatch: {self!r} vs {other!r}")

    def __matmul__(self, other: "DynamicalMatrix") -> "DynamicalMatrix":
        self._check(other)
        a, b = self.fn, other.fn

        def fn(pt, tan):
            va, da = a(pt, tan)
            vb, db = b(pt, tan)
            d = None if tan is None else da @ vb + va @ db
            return va @ vb, d

        return DynamicalMatrix(self.n_slots, self.N, fn, max(self.n_spec, other.n_spec),
                               f"({self.label} {other.label})")

    def __add__(self, other: "DynamicalMatrix") -> "DynamicalMatrix":
        self._check(other)
        a, b = self.fn, other.fn

        def fn(pt, tan):
            va, da = a(pt, tan)
            vb, db = b(pt, tan)
            return va + vb, (None if tan is None else da + db)

        return DynamicalMatrix(self.n_slots, self.N, fn, max(self.n_spec, other.n_spec),
                               f"{self.label} + {other.label}", self.addends() + other.addends())

    def __neg__(self) -> "DynamicalMatrix":
        return self.scale(-1.0)

    def __sub__(self, other: "DynamicalMatrix") -> "DynamicalMatrix":
        return self + (-other)

    def scale(self, c: complex) -> "DynamicalMatrix":
        a = self.fn

        def fn(pt, tan):
            v, d = a(pt, tan)
            return c * v, (None if tan is None else c * d)

        parts = tuple(p.scale(c) for p in self.parts) if self.parts else None
        return DynamicalMatrix(self.n_slots, self.N, fn, self.n_spec, f"{c}*{self.label}", parts)

    def __rmul__(self, c) -> "DynamicalMatrix":
        return self.scale(c)


def constant(value: np.ndarray, n_slots: int, N: int, label: str = "const") -> DynamicalMatrix:
    value = np.asarray(value, dtype=complex)

    def fn(pt, tan):
        return value, (None if tan is None else np.zeros_like(value))

    return DynamicalMatrix(n_slots, N, fn, 0, label)


def identity(n_slots: int, N: int) -> DynamicalMatrix:
    return constant(np.eye(N**n_slots), n_slots, N, "I")


def permutation(N: int) -> np.ndarray:
    """The flip operator ``C = sum E_ij (x) E_ji`` on ``C^N (x) C^N``."""
    c = np.zeros((N, N, N, N))
    for i in range(N):
        for j in range(N):
            c[i, j, j, i] = 1.0
    return c.reshape(N * N, N * N)


def commutator(a: DynamicalMatrix, b: DynamicalMatrix) -> DynamicalMatrix:
    return a @ b - b @ a


# -- slot embeddings -------------------------------------------------------

def embed_array(m: np.ndarray, slots: Sequence[int], total: int, N: int) -> np.ndarray:
    """Place a k-slot matrix on the given (1-based) slots of a ``total``-slot space."""
    k = len(slots)
    if len(set(slots)) != k or min(slots) < 1 or max(slots) > total:
        raise ValueError(f"invalid slots {tuple(slots)} for {total} slots")
    if m.shape != (N**k, N**k):
        raise ValueError("matrix shape does not match slot count")
    rows, cols, mask = _embed_layout(tuple(slots), total, N)
    return m[rows, cols] * mask


@functools.lru_cache(maxsize=None)
def _embed_layout(slots: tuple, total: int, N: int):
    """Index arrays and identity mask that place a matrix on ``slots``.

    Entry ``(I, J)`` of the embedding is ``m[sub(I), sub(J)]`` when ``I`` and
    ``J`` agree on every other slot and zero otherwise, where ``sub`` reads
    the digits of the chosen slots (slot 1 slowest).
    """
    idx = np.arange(N**total)
    digits = np.stack([(idx // N ** (total - s)) % N for s in range(1, total + 1)])
    sub = np.zeros(N**total, dtype=np.intp)
    for s in slots:
        sub = sub * N + digits[s - 1]
    rest = digits[[s - 1 for s in range(1, total + 1) if s not in slots]]
    mask = np.all(rest[:, :, None] == rest[:, None, :], axis=0).astype(float)
    return sub[:, None], sub[None, :], mask


def embed(m: DynamicalMatrix, slots: Sequence[int], total: int) -> DynamicalMatrix:
    """Leg-numbered embedding ``m_{ab}`` (``slots=(a, b)``) into ``total`` slots."""
    slots = tuple(slots)
    if len(slots) != m.n_slots:
        raise ValueError("slot count mismatch")
    embed_array(np.eye(m.dim), slots, total, m.N)  # validates the slot list
    a, N = m.fn, m.N

    def fn(pt, tan):
        v, d = a(pt, tan)
        ev = embed_array(v, slots, total, N)
        return ev, (None if tan is None else embed_array(d, slots, total, N))

    label = f"{m.label}_{''.join(map(str, slots))}"
    return DynamicalMatrix(total, N, fn, m.n_spec, label)


# -- spectral reparametrisation -------------------------------------------

def reparam(m: DynamicalMatrix, coeffs, hbar_shift=None, n_spec: Optional[int] = None) -> DynamicalMatrix:
    """Evaluate ``m`` at affine spectral arguments.

    New argument ``k`` is ``sum_l coeffs[k][l] * spec[l] + hbar_shift[k] * hbar``.
    """
    A = np.asarray(coeffs, dtype=complex)
    if A.ndim != 2 or A.shape[0] != m.n_spec:
        raise ValueError("coefficient matrix must have one row per argument of m")
    c = np.zeros(A.shape[0], dtype=complex) if hbar_shift is None else np.asarray(hbar_shift, dtype=complex)
    a = m.fn

    def fn(pt, tan):
        s = np.asarray(pt.spec, dtype=complex)[: A.shape[1]]
        new = replace(pt, spec=tuple(A @ s + c * pt.hbar))
        if tan is None:
            return a(new, None)
        ds = np.asarray(tan.dspec, dtype=complex)[: A.shape[1]]
        return a(new, Tangent(tuple(A @ ds), tan.dq))

    return DynamicalMatrix(m.n_slots, m.N, fn, A.shape[1] if n_spec is None else n_spec, m.label)


def at_args(m: DynamicalMatrix, n_spec: int, *args) -> DynamicalMatrix:
    """Shorthand for :func:`reparam`.

    Each argument is ``(index, hbar_multiple)`` meaning ``spec[index] + k*hbar``,
    or a tuple of such pairs with signs, e.g. ``((0, 1), (2, -1))`` for z1 - z3.
    Use ``("sum", [(idx, coeff), ...], hbar_multiple)`` for general forms.
    """
    rows, shifts = [], []
    for arg in args:
        row = np.zeros(n_spec, dtype=complex)
        if arg[0] == "sum":
            for idx, coeff in arg[1]:
                row[idx] += coeff
            shifts.append(arg[2])
        else:
            idx, h = arg
            row[idx] = 1.0
            shifts.append(h)
        rows.append(row)
    return reparam(m, rows, shifts, n_spec)


def hbar_scaled(m: DynamicalMatrix, factor: float) -> DynamicalMatrix:
    """Evaluate ``m`` with ``hbar`` replaced by ``factor * hbar``."""
    a = m.fn

    def fn(pt, tan):
        return a(replace(pt, hbar=factor * pt.hbar), tan)

    return DynamicalMatrix(m.n_slots, m.N, fn, m.n_spec, m.label)


# -- q-shift conjugations and classical brackets --------------------------------

def _slot_projector(N: int, n_slots: int, slot: int, j: int) -> np.ndarray:
    e = np.zeros((N, N))
    e[j, j] = 1.0
    return embed_array(e, (slot,), n_slots, N)


def conj_P(m: DynamicalMatrix, slot: int, sign: int) -> DynamicalMatrix:
    """Shift conjugation by the diagonal momentum matrix acting on ``slot``.

    ``sign=+1`` gives ``P_k^{-1} m P_k``: the slot-k block with index ``j`` is
    evaluated at ``q - hbar e_j``.  ``sign=-1`` gives ``P_k m P_k^{-1}`` (shift
    ``+hbar e_j``).  The result is a plain matrix only when ``m`` is
    block-diagonal in slot ``k`` (or acts trivially there); the block index is
    taken from the column.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not 1 <= slot <= m.n_slots:
        raise ValueError("slot out of range")
    a, N, n = m.fn, m.N, m.n_slots
    projs = [_slot_projector(N, n, slot, j) for j in range(N)]

    def fn(pt, tan):
        val = np.zeros((m.dim, m.dim), dtype=complex)
        der = None if tan is None else np.zeros_like(val)
        for j in range(N):
            dq = np.zeros(N, dtype=complex)
            dq[j] = -sign * pt.hbar
            v, d = a(pt.shifted_q(dq), tan)
            val += v @ projs[j]
            if tan is not None:
                der += d @ projs[j]
        return val, der

    word = "P^-1 . P" if sign == 1 else "P . P^-1"
    return DynamicalMatrix(n, N, fn, m.n_spec, f"[{word}]_{slot}({m.label})")


def q_derivative_slot(m: DynamicalMatrix, slot: int) -> DynamicalMatrix:
    """Classical bracket term ``P_k^{-1} {m, P_k} = sum_j (dm/dq_j) E_jj^{(k)}``.

    Uses the normalisation ``{q_i, P_j} = P_j delta_ij``.  Requires ``m`` to
    propagate tangents.
    """
    a, N, n = m.fn, m.N, m.n_slots
    projs = [_slot_projector(N, n, slot, j) for j in range(N)]

    def fn(pt, tan):
        if tan is not None:
            raise NotImplementedError("second derivatives are not supported")
        val = np.zeros((m.dim, m.dim), dtype=complex)
        zero_spec = tuple(0.0 for _ in pt.spec)
        for j in range(N):
            dq = np.zeros(N, dtype=complex)
            dq[j] = 1.0
            _, d = a(pt, Tangent(zero_spec, dq))
            val += projs[j] @ d
        return val, None

    return DynamicalMatrix(n, N, fn, m.n_spec, f"dq_{slot}({m.label})")


def spectral_derivative(m: DynamicalMatrix, direction: Sequence[complex]) -> DynamicalMatrix:
    """Directional holomorphic derivative in the spectral arguments."""
    direction = tuple(complex(c) for c in direction)
    a = m.fn

    def fn(pt, tan):
        if tan is not None:
            raise NotImplementedError("second derivatives are not supported")
        dspec = direction + (0.0,) * (len(pt.spec) - len(direction))
        _, d = a(pt, Tangent(dspec, np.zeros(len(pt.q), dtype=complex)))
        return d, None

    return DynamicalMatrix(m.n_slots, m.N, fn, m.n_spec, f"d({m.label})")


# -- residuals -----------------------------------------------------------------

def relative_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """``|lhs - rhs|_inf / (|lhs|_inf + |rhs|_inf + 1)`` with the entrywise max norm."""
    num = np.max(np.abs(lhs - rhs)) if np.size(lhs) else 0.0
    den = (np.max(np.abs(lhs)) if np.size(lhs) else 0.0) + (np.max(np.abs(rhs)) if np.size(rhs) else 0.0) + 1.0
    return float(num / den)


def term_residual(lhs: DynamicalMatrix, rhs: DynamicalMatrix, pt: Point) -> float:
    """Residual of ``lhs = rhs`` scaled by the largest addend of either side.

    Both sides are evaluated addend by addend; the discrepancy is divided by
    ``max|term|_inf`` over the addends of each side (summed over the two
    sides) plus one.  For sides that are not sums this is
    :func:`relative_residual`; for identities of the form ``sum_k T_k = 0``
    it measures the cancellation against the size of the terms, so that
    rounding amplified near the poles is not mistaken for a defect.
    """
    lhs._check(rhs)
    scale = 1.0
    sides = []
    for side in (lhs, rhs):
        vals = [p(pt) for p in side.addends()]
        sides.append(sum(vals[1:], vals[0]))
        scale += max(float(np.max(np.abs(v))) if np.size(v) else 0.0 for v in vals)
    num = float(np.max(np.abs(sides[0] - sides[1]))) if np.size(sides[0]) else 0.0
    return num / scale


def residual(lhs: DynamicalMatrix, rhs: DynamicalMatrix, points) -> float:
    """Maximum :func:`term_residual` over an iterable of sample points."""
    lhs._check(rhs)
    worst = 0.0
    for pt in points:
        worst = max(worst, term_residual(lhs, rhs, pt))
    return worst
