"""Sample configuration: defaults, validation, JSON round-trip and hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping, Optional, Sequence, Tuple

from ..elliptic import ConfigurationError, EllipticContext

SCHEMA = 1
SUITES = ("elliptic", "classical", "quantum", "face", "operator")


def _parse_complex(text) -> Optional[complex]:
    if isinstance(text, (int, float, complex)) and not isinstance(text, bool):
        return complex(text)
    if isinstance(text, (list, tuple)) and len(text) == 2:
        try:
            return complex(float(text[0]), float(text[1]))
        except (TypeError, ValueError):
            return None
    if isinstance(text, str):
        try:
            return complex(text.strip().replace(" ", "").replace("i", "j"))
        except ValueError:
            return None
    return None


def parse_complex(text) -> complex:
    """Parse ``a+bi`` (also ``a``, ``bi``, ``a-bi``; ``j`` is accepted for ``i``).

    Numbers pass through and a ``[re, im]`` pair is accepted for JSON input.
    Non-finite values are rejected.
    """
    z = _parse_complex(text)
    if z is None or not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ConfigurationError(f"cannot read {text!r} as a finite complex number (expected a+bi)")
    return z


def parse_complex_list(text) -> Tuple[complex, ...]:
    if isinstance(text, str):
        return tuple(parse_complex(t) for t in text.split(",") if t.strip())
    return tuple(parse_complex(t) for t in text)


def format_complex(z: complex) -> list:
    """``[re, im]`` with 17 significant digits, as JSON-ready floats."""
    z = complex(z)
    return [float(f"{z.real:.17g}"), float(f"{z.imag:.17g}")]


@dataclass(frozen=True)
class SampleConfig:
    """Everything that determines a verification run.

    Attributes
    ----------
    N : int
        Default rank (2..8).
    tau, hbar, gamma : complex
        Modulus, quantum parameter and RS coupling.
    samples : int
        Sample points per relation (operator identities use at most
        ``operator_samples`` of them).
    seed : int
        Master seed, 0 <= seed < 2**64.
    tol : float
        Tolerance for matrix and scalar identities.
    operator_tol : float
        Tolerance for difference-operator identities.
    pole_threshold : float
        Minimum lattice distance of every argument that enters a denominator.
    suites : tuple of str
        Suites to run.
    relations : tuple of str or None
        Optional filter of relation ids.
    ranks : tuple of int or None
        Ranks to sweep; ``None`` means ``(N,)``.
    """

    N: int = 3
    tau: complex = 0.31 + 1.27j
    hbar: complex = 0.17 + 0.03j
    gamma: complex = 0.23 - 0.05j
    samples: int = 50
    seed: int = 20240601
    tol: float = 1e-9
    operator_tol: float = 1e-8
    pole_threshold: float = 1e-3
    suites: Tuple[str, ...] = SUITES
    relations: Optional[Tuple[str, ...]] = None
    ranks: Optional[Tuple[int, ...]] = None
    operator_samples: int = 8
    max_attempts: int = 20

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------------
    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigurationError(msg)

        for name in ("N", "samples", "seed", "operator_samples", "max_attempts"):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool), f"{name} must be an integer, got {v!r}")
        need(2 <= self.N <= 8, f"N must lie in 2..8, got {self.N}")
        for name in ("tau", "hbar", "gamma"):
            v = getattr(self, name)
            need(isinstance(v, complex) and math.isfinite(v.real) and math.isfinite(v.imag),
                 f"{name} must be a finite complex number")
        need(self.tau.imag > 0, f"Im tau must be positive, got {self.tau}")
        need(self.samples >= 1, "samples must be at least 1")
        need(self.operator_samples >= 1, "operator_samples must be at least 1")
        need(self.max_attempts >= 1, "max_attempts must be at least 1")
        need(0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer")
        for name in ("tol", "operator_tol", "pole_threshold"):
            v = getattr(self, name)
            need(isinstance(v, float) and math.isfinite(v) and v > 0, f"{name} must be a positive number")
        need(len(self.suites) > 0, "at least one suite is required")
        for s in self.suites:
            need(s in SUITES, f"unknown suite {s!r}; choose from {', '.join(SUITES)}")
        if self.ranks is not None:
            need(len(self.ranks) > 0, "ranks must not be empty")
            for n in self.ranks:
                need(isinstance(n, int) and 2 <= n <= 8, f"ranks must lie in 2..8, got {n!r}")

    @property
    def rank_list(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.ranks))) if self.ranks else (self.N,)

    def context(self) -> EllipticContext:
        return EllipticContext(self.tau, pole_threshold=self.pole_threshold)

    # -- serialisation ------------------------------------------------------------------
    def to_dict(self) -> dict:
        out: dict = {"schema": SCHEMA}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, complex):
                v = format_complex(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def hash(self) -> str:
        """sha256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SampleConfig":
        if not isinstance(data, Mapping):
            raise ConfigurationError("configuration must be a JSON object")
        data = dict(data)
        schema = data.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigurationError(f"unsupported schema {schema!r}; expected {SCHEMA}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
        kw: dict = {}
        try:
            for k, v in data.items():
                if k in ("tau", "hbar", "gamma"):
                    kw[k] = parse_complex(v)
                elif k in ("tol", "operator_tol", "pole_threshold"):
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ConfigurationError(f"{k} must be a number")
                    kw[k] = float(v)
                elif k in ("suites", "relations"):
                    if v is None and k == "relations":
                        kw[k] = None
                    elif isinstance(v, str):
                        kw[k] = _expand_suites(v) if k == "suites" else tuple(x for x in v.split(",") if x)
                    elif isinstance(v, (list, tuple)) and all(isinstance(x, str) for x in v):
                        kw[k] = _expand_suites(v) if k == "suites" else tuple(v)
                    else:
                        raise ConfigurationError(f"{k} must be a list of strings")
                elif k == "ranks":
                    kw[k] = None if v is None else tuple(v)
                else:
                    kw[k] = v
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "SampleConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read configuration {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"configuration {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def with_suites(self, suites: Sequence[str]) -> "SampleConfig":
        return replace(self, suites=_expand_suites(suites))


def _expand_suites(suites) -> Tuple[str, ...]:
    if isinstance(suites, str):
        suites = [s for s in suites.split(",") if s]
    out = []
    for s in suites:
        for t in (SUITES if s == "all" else (s,)):
            if t not in out:
                out.append(t)
    return tuple(out)


def default_config(**overrides) -> SampleConfig:
    return SampleConfig(**overrides)


__all__ = ["SampleConfig", "SCHEMA", "SUITES", "parse_complex", "parse_complex_list",
           "format_complex", "default_config"]
