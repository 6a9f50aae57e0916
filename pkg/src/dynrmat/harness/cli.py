"""Command-line interface: ``dynrmat verify | eval | family``.

Exit codes: 0 when every check passes, 1 when any check fails, 2 for
configuration errors (bad arguments, unreadable or invalid JSON, unknown ids).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .. import elliptic as ell
from .. import face, opalg, rmat
from ..dynmat import Point
from ..elliptic import ConfigurationError
from .config import SampleConfig, _expand_suites, parse_complex, parse_complex_list
from .runner import run
from .sampler import Q_SCALE, cell, generator

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# second spectral argument used when RB is requested by its difference alone
PROBE_W = 0.21 + 0.34j
EVAL_Q_POINTS = 3

SCALAR_OBJECTS = ("theta", "phi", "wp")


def _matrix_builders():
    return {
        "r": rmat.classical_r,
        "rbar": rmat.classical_rbar,
        "bold_r": rmat.bold_r,
        "R": rmat.quantum_R,
        "Rbar": rmat.rbar_q,
        "RF": rmat.quantum_RF,
    }


OPERATOR_OBJECTS = ("L_RS", "Lhat")
OBJECTS = SCALAR_OBJECTS + tuple(_matrix_builders()) + ("RB",) + OPERATOR_OBJECTS + ("I_k",)


# -- JSON with 17 significant digits ------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ConfigurationError("non-finite value cannot be written as JSON")
    return f"{x:.17g}"


def dumps17(obj, indent: int = 2, level: int = 0) -> str:
    """JSON text in which every float carries 17 significant digits."""
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, complex):
        return "[" + _fmt_float(obj.real) + ", " + _fmt_float(obj.imag) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps17(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (float, int, complex)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps17(v) for v in obj) + "]"
        items = [inner + dumps17(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cmatrix(m) -> list:
    return [[complex(x) for x in row] for row in np.asarray(m)]


def _dump_operator(op: opalg.DifferenceOperator, qs) -> list:
    """Term list ``{row, col, shift, coeff}`` with one coefficient per sample point."""
    per_q = [op.terms(q) for q in qs]
    shifts = sorted(set().union(*[set(t) for t in per_q]))
    zero = np.zeros((op.dim, op.dim), dtype=complex)
    out = []
    for m in shifts:
        vals = np.stack([t.get(m, zero) for t in per_q])
        for r in range(op.dim):
            for c in range(op.dim):
                if np.any(vals[:, r, c] != 0):
                    out.append({"row": r, "col": c, "shift": list(m), "coeff": [complex(v) for v in vals[:, r, c]]})
    return out


# -- argument helpers -----------------------------------------------------------------------------


def _complex_arg(text: str) -> complex:
    try:
        return parse_complex(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _complex_list_arg(text: str):
    try:
        return parse_complex_list(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_model_args(p: argparse.ArgumentParser):
    d = SampleConfig()
    p.add_argument("--N", type=int, default=d.N, help="rank (default %(default)s)")
    p.add_argument("--tau", type=_complex_arg, default=d.tau, help="modulus, a+bi")
    p.add_argument("--hbar", type=_complex_arg, default=d.hbar, help="quantum parameter, a+bi")
    p.add_argument("--gamma", type=_complex_arg, default=d.gamma, help="RS coupling, a+bi")
    p.add_argument("--q", type=_complex_list_arg, default=None,
                   help="comma-separated coordinates; default: seeded sample points")
    p.add_argument("--seed", type=int, default=d.seed, help="seed for default coordinates")
    p.add_argument("--pole-threshold", type=float, default=d.pole_threshold)


def _sample_qs(args, n: int = EVAL_Q_POINTS):
    if args.q is not None:
        if len(args.q) != args.N:
            raise ConfigurationError(f"--q needs {args.N} values, got {len(args.q)}")
        return [np.asarray(args.q, dtype=complex)]
    qs = []
    for k in range(n):
        rng = generator(args.seed, "eval", args.N, k, 0)
        qs.append(cell(rng, args.N, args.tau, Q_SCALE))
    return qs


def _context(args) -> ell.EllipticContext:
    if not 2 <= args.N <= 8:
        raise ConfigurationError(f"N must lie in 2..8, got {args.N}")
    return ell.EllipticContext(args.tau, pole_threshold=args.pole_threshold)


def _write(text: str, target: Optional[str]):
    if target in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)


# -- subcommands --------------------------------------------------------------------------------


def cmd_verify(args) -> int:
    cfg = SampleConfig.load(args.config) if args.config else SampleConfig()
    over = {}
    if args.suite:
        over["suites"] = _expand_suites(args.suite)
    if args.relations:
        over["relations"] = tuple(r.strip() for r in args.relations.split(",") if r.strip())
    for name in ("samples", "seed", "N"):
        if getattr(args, name) is not None:
            over[name] = getattr(args, name)
    if args.ranks:
        over["ranks"] = tuple(int(x) for x in args.ranks.split(","))
    if over:
        cfg = replace(cfg, **over)
    report = run(cfg, workers=args.workers)
    out = sys.stderr if args.json == "-" else sys.stdout
    if not args.quiet:
        print(report.summary(), file=out)
    if args.json:
        _write(report.to_json(), args.json)
    return EXIT_OK if report.passed else EXIT_FAIL


def _eval_payload(args) -> dict:
    ctx = _context(args)
    obj = args.object
    base = {"object": obj, "N": args.N, "tau": args.tau, "hbar": args.hbar}
    z = args.z
    w = args.w
    if args.d is not None:
        z, w = args.d + PROBE_W, PROBE_W
    if obj in SCALAR_OBJECTS:
        if z is None:
            raise ConfigurationError(f"eval {obj} needs --z")
        if obj == "theta":
            val = ell.theta(z, ctx)
        elif obj == "wp":
            val = ell.weierstrass_p(z, ctx)
        else:
            s = args.s if args.s is not None else w
            if s is None:
                raise ConfigurationError("eval phi needs --s (or --w) for the second argument")
            return {"object": obj, "tau": args.tau, "z": z, "s": s, "value": complex(ell.phi(z, s, ctx))}
        return {"object": obj, "tau": args.tau, "z": z, "value": complex(val)}
    builders = _matrix_builders()
    if obj in builders or obj == "RB":
        if z is None or (w is None and obj in ("r", "bold_r", "R", "RF", "RB")):
            raise ConfigurationError(f"eval {obj} needs --z and --w (or --d)")
        q = _sample_qs(args, 1)[0]
        if obj == "RB":
            m = face.belavin_R(z, w, q, args.hbar, ctx)
            base.update({"z": z, "w": w, "d": z - w, "probe_q": list(q)})
        else:
            mat = builders[obj](args.N)
            spec = (z, w)[:mat.n_spec] if w is not None else (z,)
            m = mat(Point(tuple(spec), q, args.hbar, args.gamma, ctx))
            base.update({"spec": list(spec), "q": list(q)})
        base.update({"shape": list(np.shape(m)), "matrix": _cmatrix(m)})
        return base
    if obj in OPERATOR_OBJECTS or obj.startswith("I_"):
        if z is None:
            raise ConfigurationError(f"eval {obj} needs --z")
        qs = _sample_qs(args)
        if obj == "L_RS":
            op = opalg.build_L_RS(args.N, z, args.gamma, args.hbar, ctx)
        elif obj == "Lhat":
            op = opalg.build_Lhat(args.N, z, args.gamma, args.hbar, ctx)
        else:
            k = args.k if obj == "I_k" else _parse_k(obj)
            if k is None or not 0 <= k <= args.N:
                raise ConfigurationError(f"I_k needs 0 <= k <= N (got {k})")
            op = opalg.commuting_family(args.N, z, args.gamma, args.hbar, ctx)[k]
            base["k"] = k
        base.update({"gamma": args.gamma, "z": z, "q_points": [list(q) for q in qs],
                     "terms": _dump_operator(op, qs)})
        return base
    raise ConfigurationError(f"unknown object {obj!r}; choose from {', '.join(OBJECTS)}")


def _parse_k(obj: str) -> Optional[int]:
    try:
        return int(obj[2:])
    except ValueError as exc:
        raise ConfigurationError(f"unknown object {obj!r}") from exc


def cmd_eval(args) -> int:
    _write(dumps17(_eval_payload(args)) + "\n", args.json)
    return EXIT_OK


def cmd_family(args) -> int:
    ctx = _context(args)
    if args.z is None:
        raise ConfigurationError("family needs --z")
    qs = _sample_qs(args)
    fam = opalg.commuting_family(args.N, args.z, args.gamma, args.hbar, ctx)
    payload = {
        "N": args.N, "tau": args.tau, "hbar": args.hbar, "gamma": args.gamma, "z": args.z,
        "q_points": [list(q) for q in qs],
        "family": [{"k": k, "terms": _dump_operator(op, qs)} for k, op in enumerate(fam)],
    }
    if args.json is not None:
        _write(dumps17(payload) + "\n", args.json)
    else:
        for entry in payload["family"]:
            print(f"I_{entry['k']}:")
            for t in entry["terms"]:
                c = t["coeff"][0]
                print(f"  shift {t['shift']}  coeff(q_0) = {c.real:+.17g} {c.imag:+.17g}i")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynrmat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--config", help="JSON configuration file")
    v.add_argument("--suite", help="elliptic, classical, quantum, face, operator or all (comma list)")
    v.add_argument("--relations", help="comma-separated relation ids")
    v.add_argument("--json", nargs="?", const="-", help="write the JSON report (to stdout with no path)")
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--N", type=int)
    v.add_argument("--ranks", help="comma-separated ranks to sweep")
    v.add_argument("--workers", type=int, help="worker processes (capped by DYNRMAT_THREADS)")
    v.add_argument("--quiet", action="store_true", help="suppress the per-check summary")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("eval", help="evaluate one object and print it as JSON")
    e.add_argument("--object", "--matrix", "--fn", dest="object", required=True,
                   help=f"one of {', '.join(OBJECTS)} (I_2 etc. also accepted)")
    _add_model_args(e)
    e.add_argument("--z", type=_complex_arg)
    e.add_argument("--w", type=_complex_arg)
    e.add_argument("--s", type=_complex_arg, help="second argument of phi")
    e.add_argument("--d", type=_complex_arg, help="spectral difference z - w (for RB)")
    e.add_argument("--k", type=int, help="index for I_k")
    e.add_argument("--json", nargs="?", const="-", default="-", help="output path (default stdout)")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("family", help="coefficient tables of the commuting family I_k(z)")
    _add_model_args(f)
    f.add_argument("--z", type=_complex_arg, required=True)
    f.add_argument("--json", nargs="?", const="-", help="emit JSON (to stdout with no path)")
    f.set_defaults(func=cmd_family)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"dynrmat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ell.SampleRejected as exc:
        print(f"dynrmat: evaluation point rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
