"""Catalogue of checks, grouped into suites.

A :class:`Check` turns a :class:`~dynrmat.harness.sampler.Draw` into a
number.  How that number is judged depends on ``kind``:

``residual``
    passes when the largest value over the samples is below the tolerance;
``ratio``
    passes when every value lies inside ``bounds``;
``control``
    a deliberately broken form; passes when even the smallest value stays
    above :data:`CONTROL_THRESHOLD`, i.e. the check is able to fail.

Checks are looked up by id from worker processes, so everything here is
built at import time and must stay free of mutable global state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .. import elliptic as ell
from .. import face, opalg as O, rmat
from ..dynmat import relative_residual
from .config import format_complex

CONTROL_THRESHOLD = 1e-4
HOMOGENEITY_SCALE = 3.7
GAMMA_PERTURBATION = 1e-3
RATIONAL_TAU = 8j


@dataclass(frozen=True)
class Check:
    """One verifiable statement.

    Attributes
    ----------
    id, suite, anchor : str
        Stable id, owning suite and a short human-readable description.
    evaluate : callable
        ``evaluate(draw) -> value`` or ``(value, details)``.
    n_spec : int
        Spectral arguments drawn up front.
    kind : str
        ``"residual"``, ``"ratio"`` or ``"control"``.
    tol : float or None
        Strictest tolerance for the check; the configured tolerance can only
        tighten it.
    bounds : tuple
        Closed interval for ``ratio`` checks.
    ranks : tuple or None
        Ranks at which the check is meaningful; ``None`` for any rank and
        ``()`` for rank-independent checks.
    operator : bool
        Difference-operator check: uses the operator tolerance and the
        operator sample cap.
    """

    id: str
    suite: str
    anchor: str
    evaluate: Callable
    n_spec: int = 0
    kind: str = "residual"
    tol: Optional[float] = None
    bounds: Tuple[float, float] = ()
    ranks: Optional[Tuple[int, ...]] = None
    operator: bool = False

    def select_ranks(self, requested: Tuple[int, ...]) -> Tuple[int, ...]:
        """Ranks to run for a requested sweep (``0`` marks rank-independent)."""
        if self.ranks == ():
            return (0,)
        if self.ranks is None:
            return tuple(requested)
        chosen = tuple(n for n in requested if n in self.ranks)
        return chosen or (min(self.ranks),)


# -- elliptic -------------------------------------------------------------------------


def _kernel_identity(name):
    n, fn = ell.KERNEL_IDENTITIES[name]
    return n, (lambda d: fn(d.spec, d.ctx))


def _theta_quasi_periodicity(d):
    z, ctx = d.spec[0], d.ctx
    th = ell.theta(z, ctx)
    a = relative_residual(np.array(ell.theta(z + 1, ctx)), np.array(-th))
    b = relative_residual(np.array(ell.theta(z + ctx.tau, ctx)),
                          np.array(-np.exp(-1j * np.pi * ctx.tau - 2j * np.pi * z) * th))
    return max(a, b)


_ELLIPTIC_ANCHORS = {
    "THIRD": "three-term addition formula for the Kronecker kernel",
    "THIRD_MERO": "three-term formula with the kernel rescaled by 1/theta'(0) (homogeneity witness)",
    "LIM": "coincident-argument product formula",
    "CUB": "cubic kernel identity",
    "WP": "kernel product equals P(z) - P(s)",
    "DERIV": "relation between the z- and s-derivatives of the kernel",
}


def _elliptic_checks():
    out = []
    for name, anchor in _ELLIPTIC_ANCHORS.items():
        n, ev = _kernel_identity(name)
        out.append(Check(name, "elliptic", anchor, ev, n, tol=1e-10, ranks=()))
    out.append(Check("THETA_QP", "elliptic", "theta quasi-periodicity under z+1 and z+tau",
                     _theta_quasi_periodicity, 1, tol=1e-10, ranks=()))
    return out


# -- classical and quantum R-matrix registry --------------------------------------------

_REGISTRY_TOL = {"MIN": 1e-11, "WZ": 1e-12}


def _registry_check(spec: rmat.RelationSpec) -> Check:
    kind = {"absolute": "residual"}.get(spec.kind, spec.kind)
    return Check(spec.id, spec.suite, spec.anchor, lambda d: spec.evaluate(d.point()), spec.n_spec,
                 kind=kind, tol=_REGISTRY_TOL.get(spec.id, 1e-10), bounds=spec.bounds)


# -- face/vertex --------------------------------------------------------------------------


def _rb_at(d):
    z, w = d.spec[:2]
    return face.belavin_R(z, w, d.q, d.hbar, d.ctx)


def _iden_shift(d):
    q2 = d.extra_q()
    c1, c2 = d.rng.normal(size=2) + 1j * d.rng.normal(size=2)
    return relative_residual(face.iden_rhs(d.spec[0], d.q + c1, q2 + c2, d.ctx),
                             face.iden_rhs(d.spec[0], d.q, q2, d.ctx))


def _unitarity(d):
    z, w = d.spec[:2]
    scalar, dev = face.rb_unitarity(z, w, d.q, d.hbar, d.ctx)
    return dev, {"scalar": format_complex(scalar)}


def _face_checks():
    S = "face"
    return [
        Check("ORT", S, "orthogonality of intertwiners and their duals (both orders)",
              lambda d: face.ort_residual(d.spec[0], d.q, d.ctx), 1, tol=1e-11),
        Check("IDEN", S, "contraction of intertwiners at two heights equals the theta product",
              lambda d: face.iden_residual(d.spec[0], d.q, d.extra_q(), d.ctx), 1, tol=1e-9),
        Check("IDEN_DIAG", S, "contraction identity at coinciding heights",
              lambda d: face.iden_residual(d.spec[0], d.q, d.q, d.ctx), 1, tol=1e-10),
        Check("IDEN_SHIFT", S, "theta-product side invariant under uniform height shifts",
              _iden_shift, 1, tol=1e-12),
        Check("DUAL", S, "dual face-vertex relation",
              lambda d: face.dual_residual(*d.spec[:2], d.q, d.hbar, d.ctx), 2, tol=1e-10),
        Check("RB_Q_INDEPENDENCE", S, "vertex R-matrix carries no height dependence",
              lambda d: face.rb_q_independence(*d.spec[:2], d.q, d.extra_q(), d.hbar, d.ctx), 2, tol=1e-9),
        Check("RB_DIFFERENCE", S, "vertex R-matrix depends on z - w only",
              lambda d: face.rb_difference_only(*d.spec[:2], complex(d.extra_spec(1)[0]), d.q, d.hbar, d.ctx),
              2, tol=1e-9),
        Check("RB_QYBE", S, "vertex R-matrix satisfies the quantum Yang-Baxter equation",
              lambda d: face.rb_qybe_residual(*d.spec[:3], d.q, d.hbar, d.ctx), 3, tol=1e-9),
        Check("RB_EIGHT_VERTEX", S, "eight-vertex zero pattern at N = 2",
              lambda d: face.eight_vertex_violation(_rb_at(d)), 2, tol=1e-12, ranks=(2,)),
        Check("RB_UNITARITY", S, "R(z-w) R_21(w-z) is proportional to the identity",
              _unitarity, 2, tol=1e-9),
        Check("RB_CROSS_PLUS", S, "control: CROSS weight with +z breaks height independence",
              lambda d: face.rb_q_independence(*d.spec[:2], d.q, d.extra_q(), d.hbar, d.ctx, cross_sign=+1),
              2, kind="control"),
    ]


# -- difference operators ---------------------------------------------------------------


def _rs_pair(d, gamma=None, scale=1.0):
    z, w = d.spec[:2]
    g = d.gamma if gamma is None else gamma
    Lz = O.build_L_RS(d.N, z, g, d.hbar, d.ctx)
    Lw = O.build_L_RS(d.N, w, g, d.hbar, d.ctx)
    return (Lz, Lw) if scale == 1.0 else (Lz.scale(scale), Lw.scale(scale))


def _vanishing(op: O.DifferenceOperator, q) -> float:
    """Size of an operator that should vanish, on the relative-residual scale."""
    t = op.terms(q)
    stacked = np.stack(list(t.values())) if t else np.zeros((1, op.dim, op.dim))
    return relative_residual(stacked, np.zeros_like(stacked))


def _lf(d):
    return O.operator_residual(*O.lf_sides(*_rs_pair(d), d.point()), d.q)


def _lop(d):
    return O.operator_residual(*O.lop_sides(*_rs_pair(d), d.point()), d.q)


def _lq(d):
    return O.operator_residual(*O.lq_sides(_rs_pair(d)[1]), d.q)


def _lf_scaled(d):
    return O.operator_residual(*O.lf_sides(*_rs_pair(d, scale=HOMOGENEITY_SCALE), d.point()), d.q)


def _lf_gamma_control(d):
    lhs, _ = O.lf_sides(*_rs_pair(d), d.point())
    _, rhs = O.lf_sides(*_rs_pair(d, gamma=d.gamma + GAMMA_PERTURBATION), d.point())
    return O.operator_residual(lhs, rhs, d.q)


def _generic_W(d):
    """Two q-dependent W's that are not tied to any particular model."""
    A, B = d.random_matrix(), d.random_matrix()
    Wz = lambda q: A * np.cos(q[:, None] - q[None, :])  # noqa: E731
    Ww = lambda q: B + np.sin(q[:, None] - q[None, :])  # noqa: E731
    return Wz, Ww


def _rs_W(d):
    z, w = d.spec[:2]
    return (lambda q: O.rs_W(z, q, d.gamma, d.ctx)), (lambda q: O.rs_W(w, q, d.gamma, d.ctx))


def _lff_components(d):
    z, w = d.spec[:2]
    s = O.lff_component_scale(z, w, d.hbar, d.ctx)
    worst = 0.0
    for X, Y in (_rs_W(d), _generic_W(d)):
        l, r = O.lff_sides(O.wp_operator(X, d.N, d.hbar), O.wp_operator(Y, d.N, d.hbar), d.point())
        cl, cr = O.component_sides(X, Y, z, w, d.hbar, d.ctx, d.N)
        worst = max(worst, O.operator_residual(l, cl.scale(s), d.q), O.operator_residual(r, cr.scale(s), d.q))
    return worst


def _lff_algebra(d):
    return O.operator_residual(*O.lff_sides(*_rs_pair(d), d.point()), d.q)


def _llh_components(d, variant):
    z, w = d.spec[:2]
    X, Y = _generic_W(d)
    cl, cr = O.component_sides(X, Y, z, w, d.hbar, d.ctx, d.N)
    ref = (cl - cr).scale(O.meromorphic_lff_factor(z, w, d.hbar, d.ctx))
    llh = O.llh_operator(X, Y, z, w, d.hbar, d.ctx, d.N, variant)
    return O.llh_component_residuals(llh, ref, d.q)


def _llh(d):
    comp = _llh_components(d, "corrected")
    return float(comp.max()), {"components": int(comp.size)}


def _llh_label_control(d):
    comp = _llh_components(d, "uncorrected")
    return float(comp.max()), {"components": int(comp.size),
                               "defective": int(np.count_nonzero(comp > CONTROL_THRESHOLD))}


def _llh_rs(d):
    z, w = d.spec[:2]
    X = lambda q: O.our_W(z, q, d.gamma, d.ctx)  # noqa: E731
    Y = lambda q: O.our_W(w, q, d.gamma, d.ctx)  # noqa: E731
    return _vanishing(O.llh_operator(X, Y, z, w, d.hbar, d.ctx, d.N), d.q)


def _ltilde(d):
    z = d.spec[0]
    return O.operator_residual(O.build_Ltilde(d.N, z, d.gamma, d.hbar, d.ctx),
                               O.build_Ltilde_closed(d.N, z, d.gamma, d.hbar, d.ctx), d.q)


def _tl_algebra(variant):
    def ev(d):
        z, w = d.spec[:2]
        X = lambda q: O.ltilde_W(z, q, d.gamma, d.ctx)  # noqa: E731
        Y = lambda q: O.ltilde_W(w, q, d.gamma, d.ctx)  # noqa: E731
        return _vanishing(O.ltilde_algebra(X, Y, z, w, d.hbar, d.ctx, d.N, variant), d.q)
    return ev


def _lhat_pair(d):
    z, w = d.spec[:2]
    return O.build_Lhat(d.N, z, d.gamma, d.hbar, d.ctx), O.build_Lhat(d.N, w, d.gamma, d.hbar, d.ctx)


def _gauge_pair(d):
    z, w = d.spec[:2]
    Lz, Lw = _rs_pair(d)
    return O.gauge_map(Lz, z, d.ctx), O.gauge_map(Lw, w, d.ctx)


def _rll(pair, identity=False):
    def ev(d):
        RB = np.eye(d.N * d.N) if identity else _rb_at(d)
        return O.operator_residual(*O.rll_sides(*pair(d), RB), d.extra_q())
    return ev


def _gauge_ratio(d):
    z = d.spec[0]
    a = O.gauge_map(O.build_L_RS(d.N, z, d.gamma, d.hbar, d.ctx), z, d.ctx).terms(d.q)
    b = O.build_Lhat(d.N, z, d.gamma, d.hbar, d.ctx).terms(d.q)
    if set(a) != set(b):
        return 1.0, {"reason": "different shift sets"}
    num = np.concatenate([a[k].ravel() for k in sorted(a)])
    den = np.concatenate([b[k].ravel() for k in sorted(b)])
    mask = np.abs(den) > 1e-12 * np.max(np.abs(den))
    if np.any(np.abs(num[~mask]) > 1e-12 * np.max(np.abs(num))):
        return 1.0, {"reason": "zero pattern differs"}
    ratio = num[mask] / den[mask]
    return float(np.max(np.abs(ratio / ratio[0] - 1.0))), {"ratio": format_complex(ratio[0])}


def _family(d):
    z, w = d.spec[:2]
    Iz = O.commuting_family(d.N, z, d.gamma, d.hbar, d.ctx)
    Iw = O.commuting_family(d.N, w, d.gamma, d.hbar, d.ctx)
    return max(O.operator_residual(Iz[k] @ Iw[m], Iw[m] @ Iz[k], d.q)
               for k in range(1, d.N + 1) for m in range(1, d.N + 1))


def _trace_lemma(d):
    return O.operator_residual(*O.trace_lemma_sides(*_rs_pair(d), d.point()), d.q)


def _trace_factor(d):
    return O.operator_residual(*O.trace_factorisation_sides(d.N, d.spec[0], d.gamma, d.hbar, d.ctx), d.q)


def _qq_lf(d):
    Lz, Lw = (O.canonical_transform_qq(L, d.gamma, d.ctx) for L in _rs_pair(d))
    return O.operator_residual(*O.lf_sides(Lz, Lw, d.point()), d.q)


def _qq_inverse(d):
    Lz = _rs_pair(d)[0]
    back = O.canonical_transform_qq(O.canonical_transform_qq(Lz, d.gamma, d.ctx), d.gamma, d.ctx, inverse=True)
    return O.operator_residual(back, Lz, d.q)


def _qq_diagonal(d):
    z = d.spec[0]
    k1 = O.qq_diagonal_invariant(z, d.q, d.gamma, d.hbar, d.ctx)
    k2 = O.qq_diagonal_invariant(z, d.extra_q(), d.gamma, d.hbar, d.ctx)
    vals = np.concatenate([k1, k2])
    return relative_residual(vals, np.full_like(vals, vals[0])), {"constant": format_complex(vals[0])}


def _rational(d):
    ctx = ell.EllipticContext(RATIONAL_TAU, pole_threshold=d.ctx.pole_threshold)
    q = (d.rng.random(d.N) - 0.5) * 0.02 + 0.01j * d.rng.random(d.N)
    return O.rational_limit_error(q, 0.004 + 0.001j, ctx)


def _random_operator(d, n_terms=3):
    N, h = d.N, d.hbar
    shifts = [tuple(int(x) for x in d.rng.integers(-1, 2, size=N)) for _ in range(n_terms)]
    mats = [d.random_matrix() for _ in range(n_terms)]
    vecs = [0.3 * d.rng.normal(size=N) for _ in range(n_terms)]

    def fn(q):
        out = {}
        for m, M, v in zip(shifts, mats, vecs):
            c = M * np.exp(v @ q)
            out[m] = out[m] + c if m in out else c
        return out

    return O.DifferenceOperator(N, N, h, fn, "X")


def _associativity(d):
    a, b, c = (_random_operator(d) for _ in range(3))
    return O.operator_residual((a @ b) @ c, a @ (b @ c), d.q)


def _operator_checks():
    S = "operator"
    two_three = (2, 3)

    def C(id_, anchor, ev, n_spec=2, **kw):
        kw.setdefault("operator", True)
        return Check(id_, S, anchor, ev, n_spec, **kw)

    return [
        C("LQ", "commutator of Q_1 with L_2 is fixed by the column shifts", _lq, tol=1e-12),
        C("LF", "RS L-operator satisfies the dynamical exchange relation R L Rbar L = L Rbar L R^F", _lf),
        C("LOP", "exchange relation written with Rbar^-1", _lop),
        C("LF_SCALED", "exchange relation is unchanged under L -> 3.7 L", _lf_scaled),
        C("LF_GAMMA_CONTROL", "control: gamma shifted by 1e-3 on one side of the exchange relation",
          _lf_gamma_control, kind="control"),
        C("LFF_COMPONENTS", "component form of both sides of the W P algebra matches the tensor form",
          _lff_components, ranks=two_three),
        C("LFF_ALGEBRA", "W P algebra holds for the RS operator", _lff_algebra, ranks=two_three),
        C("LLH", "face-type algebra equals theta(z-w) theta(hbar)^2 times the W P algebra, componentwise",
          _llh, ranks=two_three),
        C("LLH_LABEL_CONTROL", "control: face-type algebra with uncorrected face-weight labels",
          _llh_label_control, kind="control", ranks=two_three),
        C("LLH_RS", "face-type algebra vanishes for the meromorphic RS operator", _llh_rs, ranks=two_three),
        C("DELTA", "theta-ratio split over the delta cases", lambda d: O.delta_decomposition_residual(
            d.q, d.hbar, d.ctx), 0, tol=1e-10, ranks=two_three),
        C("LTILDE", "contracted L-tilde equals its closed theta form", _ltilde, 1, tol=1e-9),
        C("TL_ALGEBRA", "L-tilde algebra after contracting the intertwiners", _tl_algebra("bottom"),
          ranks=two_three),
        C("TL_LABEL_CONTROL", "control: L-tilde algebra with the top face-weight label",
          _tl_algebra("uncorrected"), kind="control", ranks=two_three),
        C("RLL_LHAT", "vertex-type L-hat satisfies R^B L L = L L R^B", _rll(_lhat_pair), tol=1e-9),
        C("RLL_GAUGE", "gauge-transformed RS operator satisfies R^B L L = L L R^B", _rll(_gauge_pair), tol=1e-9),
        C("RLL_IDENTITY_CONTROL", "control: R^B replaced by the identity", _rll(_lhat_pair, identity=True),
          kind="control"),
        C("GAUGE_RATIO", "gauge-transformed RS operator is a scalar multiple of L-hat", _gauge_ratio, 1),
        C("FAMILY_COMMUTE", "[I_k(z), I_l(w)] = 0 for all k, l", _family, tol=1e-9),
        C("TRACE_LEMMA", "tr_12 P_2 Rbar^-1 P_2^-1 L_2 Rbar L_1 = tr L(w) tr L(z)", _trace_lemma, tol=1e-9),
        C("TRACE_FACTOR", "I_1(z) = Phi(z, gamma) sum_j b_j P_j", _trace_factor, 1, tol=1e-9),
        C("QQ_LF", "canonically transformed operator satisfies the exchange relation", _qq_lf),
        C("QQ_INVERSE", "canonical transformation followed by its inverse", _qq_inverse, tol=1e-10),
        C("QQ_INTEGRABILITY", "transformed momenta commute",
          lambda d: O.qq_integrability(d.q, d.gamma, d.hbar, d.ctx), 0, tol=1e-10),
        C("QQ_DIAGONAL", "symmetric diagonal pattern after the canonical transformation (N = 2)",
          _qq_diagonal, 1, tol=1e-9, ranks=(2,)),
        C("CB", "sigma-form coefficients versus b_j", lambda d: O.cb_residual(d.q, d.gamma, d.ctx), 0,
          tol=1e-10),
        C("QUASI_PERIODICITY", "L(z+1) = L(z) and the twisted z+tau law", lambda d: O.quasi_periodicity_residual(
            d.N, d.spec[0], d.gamma, d.hbar, d.ctx, d.q), 1, tol=1e-9),
        C("RATIONAL_LIMIT", "b_j approaches the rational coefficients at Im tau = 8 (within 5%)", _rational, 0,
          kind="ratio", bounds=(0.0, 0.05)),
        C("FORM", "L_2 e^{a Q_1} = e^{a Q_1} L_2 e^{hbar a r_0}",
          lambda d: O.operator_residual(*O.form_sides(_rs_pair(d)[1], 0.7 * d.spec[0] + 0.1), d.q), tol=1e-10),
        C("SHIFT_LEMMA", "shifts by hbar e_k and hbar eps_k agree on projection functions",
          lambda d: O.shift_lemma_residual(d.spec[0], d.q, d.hbar, d.ctx), 1, tol=1e-12),
        C("ASSOCIATIVITY", "operator composition is associative", _associativity, 0, tol=1e-11),
    ]


# -- catalogue ----------------------------------------------------------------------------


def _build_catalogue() -> Dict[str, Check]:
    checks = _elliptic_checks()
    checks += [_registry_check(s) for s in rmat.REGISTRY.values()]
    checks += _face_checks()
    checks += _operator_checks()
    out: Dict[str, Check] = {}
    for c in checks:
        if c.id in out:
            raise RuntimeError(f"duplicate check id {c.id}")
        out[c.id] = c
    return out


CATALOGUE: Dict[str, Check] = _build_catalogue()


def suite_checks(suite: str):
    return [c for c in CATALOGUE.values() if c.suite == suite]
