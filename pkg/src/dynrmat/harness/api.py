"""Report-returning entry points for individual identities.

These wrap catalogue checks so that a caller can verify a user-supplied
L-operator, vertex R-matrix or pair of difference operators with the same
sampling and pass rules as the suites.  They run in-process.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Optional

from .. import face, opalg as O
from .config import SampleConfig
from .report import VerificationReport
from .runner import run, run_checks
from .suites import CATALOGUE, Check

LBuilder = Callable  # (N, z, gamma, hbar, ctx) -> DifferenceOperator


def _cfg(cfg: Optional[SampleConfig]) -> SampleConfig:
    return SampleConfig() if cfg is None else cfg


def _catalogue(ids, cfg) -> VerificationReport:
    cfg = _cfg(cfg)
    suites = tuple(dict.fromkeys(CATALOGUE[i].suite for i in ids))
    return run(replace(cfg, suites=suites, relations=tuple(ids)), workers=1)


def _pair(L: LBuilder, d):
    z, w = d.spec[:2]
    return L(d.N, z, d.gamma, d.hbar, d.ctx), L(d.N, w, d.gamma, d.hbar, d.ctx)


def _with(check_id: str, evaluate) -> Check:
    return replace(CATALOGUE[check_id], evaluate=evaluate)


def check_LF(L: Optional[LBuilder] = None, cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Exchange relation with ``Rbar`` for the operator family built by ``L``."""
    L = L or O.build_L_RS
    ev = lambda d: O.operator_residual(*O.lf_sides(*_pair(L, d), d.point()), d.q)  # noqa: E731
    return run_checks([_with("LF", ev)], _cfg(cfg))


def check_Lop(L: Optional[LBuilder] = None, cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Exchange relation written with ``Rbar^-1``."""
    L = L or O.build_L_RS
    ev = lambda d: O.operator_residual(*O.lop_sides(*_pair(L, d), d.point()), d.q)  # noqa: E731
    return run_checks([_with("LOP", ev)], _cfg(cfg))


def check_LQ(L: Optional[LBuilder] = None, cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """``[Q_1, L_2] + hbar L_2 sum E_ii (x) E_ii = 0``."""
    L = L or O.build_L_RS
    ev = lambda d: O.operator_residual(*O.lq_sides(_pair(L, d)[1]), d.q)  # noqa: E731
    return run_checks([_with("LQ", ev)], _cfg(cfg))


def check_LFF_components(W: Optional[Callable] = None, cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Component form against the tensor form, and the algebra itself, for ``L = W(z, q) P``.

    ``W(z, q, gamma, ctx)`` returns the ``N x N`` coefficient matrix; the
    default is the RS operator.
    """
    W = W or O.rs_W

    def ops(d):
        z, w = d.spec[:2]
        X = lambda q: W(z, q, d.gamma, d.ctx)  # noqa: E731
        Y = lambda q: W(w, q, d.gamma, d.ctx)  # noqa: E731
        return z, w, X, Y

    def transcription(d):
        z, w, X, Y = ops(d)
        s = O.lff_component_scale(z, w, d.hbar, d.ctx)
        l, r = O.lff_sides(O.wp_operator(X, d.N, d.hbar), O.wp_operator(Y, d.N, d.hbar), d.point())
        cl, cr = O.component_sides(X, Y, z, w, d.hbar, d.ctx, d.N)
        return max(O.operator_residual(l, cl.scale(s), d.q), O.operator_residual(r, cr.scale(s), d.q))

    def algebra(d):
        _, _, X, Y = ops(d)
        return O.operator_residual(*O.lff_sides(O.wp_operator(X, d.N, d.hbar), O.wp_operator(Y, d.N, d.hbar),
                                                d.point()), d.q)

    return run_checks([_with("LFF_COMPONENTS", transcription), _with("LFF_ALGEBRA", algebra)], _cfg(cfg))


def check_RLL(Lhat: Optional[LBuilder] = None, RB: Optional[Callable] = None,
              cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """``RB(z-w) L_1(z) L_2(w) = L_2(w) L_1(z) RB(z-w)``.

    ``RB(z, w, q, hbar, ctx)`` returns the vertex matrix; the default extracts
    it from the face weights at the sampled probe.
    """
    Lhat = Lhat or O.build_Lhat
    RB = RB or face.belavin_R

    def ev(d):
        z, w = d.spec[:2]
        return O.operator_residual(*O.rll_sides(*_pair(Lhat, d), RB(z, w, d.q, d.hbar, d.ctx)), d.extra_q())

    return run_checks([_with("RLL_LHAT", ev)], _cfg(cfg))


def check_LLH_vs_LFF(cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Face-type algebra against the rescaled W P algebra, plus the theta-ratio split."""
    return _catalogue(("LLH", "LLH_LABEL_CONTROL", "LLH_RS", "DELTA"), cfg)


def check_commuting(cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Commuting family, the trace lemma and the factorisation of ``I_1``."""
    return _catalogue(("FAMILY_COMMUTE", "TRACE_LEMMA", "TRACE_FACTOR"), cfg)


def check_iden(cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Contraction identity for intertwiners at two heights."""
    return _catalogue(("IDEN", "IDEN_DIAG", "IDEN_SHIFT"), cfg)


def equals(a: O.DifferenceOperator, b: O.DifferenceOperator, cfg: Optional[SampleConfig] = None) -> VerificationReport:
    """Sampled equality of two difference operators on ``a.N`` coordinates.

    The value is the largest absolute coefficient discrepancy, judged against
    the operator tolerance.
    """
    chk = Check("EQUALS", "operator", "sampled equality of two difference operators",
                lambda d: O.operator_discrepancy(a, b, d.q), 0, operator=True)
    return run_checks([chk], _cfg(cfg), ranks=(a.N,))
