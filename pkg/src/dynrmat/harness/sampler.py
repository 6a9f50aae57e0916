"""Deterministic sample points with pole avoidance.

Every draw has its own generator, seeded from the master seed together with
the check id, the rank, the sample index and the attempt number.  A draw is
therefore reproducible in isolation, whatever the order in which a worker
pool evaluates the tasks.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dynmat import Point
from ..elliptic import EllipticContext, SampleRejected, check_off_lattice

SPECTRAL_SCALE = 0.6
Q_SCALE = 0.7


def generator(seed: int, check_id: str, N: int, sample: int, attempt: int) -> np.random.Generator:
    key = (zlib.crc32(check_id.encode()), int(N), int(sample), int(attempt))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def cell(rng: np.random.Generator, n: int, tau: complex, scale: float) -> np.ndarray:
    """``n`` points ``scale (u + v tau)`` with ``u, v`` uniform on ``[0, 1)``."""
    u = rng.random(n)
    v = rng.random(n)
    return scale * (u + v * tau)


@dataclass
class Draw:
    """Random arguments for one evaluation of one check.

    ``spec`` and ``q`` are drawn up front and screened: every spectral
    argument, every pairwise spectral difference and every coordinate
    difference keeps at least the pole threshold from the lattice.  Further
    values (extra coordinate vectors, random matrices) come from :attr:`rng`.
    """

    N: int
    ctx: EllipticContext
    hbar: complex
    gamma: complex
    spec: tuple
    q: np.ndarray
    rng: np.random.Generator
    cache: dict = field(default_factory=dict)

    def point(self, spec: Optional[tuple] = None, q=None, hbar=None) -> Point:
        return Point(tuple(self.spec if spec is None else spec), self.q if q is None else np.asarray(q),
                     self.hbar if hbar is None else hbar, self.gamma, self.ctx)

    def extra_q(self) -> np.ndarray:
        q = cell(self.rng, self.N, self.ctx.tau, Q_SCALE)
        screen_coordinates(q, self.ctx)
        return q

    def extra_spec(self, n: int) -> np.ndarray:
        z = cell(self.rng, n, self.ctx.tau, SPECTRAL_SCALE)
        check_off_lattice(self.ctx, z)
        return z

    def random_matrix(self, n: Optional[int] = None) -> np.ndarray:
        n = self.N if n is None else n
        return self.rng.normal(size=(n, n)) + 1j * self.rng.normal(size=(n, n))


def screen_coordinates(q: np.ndarray, ctx: EllipticContext) -> None:
    N = len(q)
    diffs = np.subtract.outer(q, q)[~np.eye(N, dtype=bool)]
    check_off_lattice(ctx, diffs)


def screen_spectral(spec: np.ndarray, ctx: EllipticContext) -> None:
    n = len(spec)
    check_off_lattice(ctx, spec)
    if n > 1:
        check_off_lattice(ctx, np.subtract.outer(spec, spec)[~np.eye(n, dtype=bool)])


def make_draw(seed: int, check_id: str, N: int, sample: int, attempt: int, n_spec: int,
              ctx: EllipticContext, hbar: complex, gamma: complex) -> Draw:
    """Draw and screen one point; raises :class:`~dynrmat.elliptic.PoleError` when screening fails."""
    rng = generator(seed, check_id, N, sample, attempt)
    spec = cell(rng, n_spec, ctx.tau, SPECTRAL_SCALE)
    q = cell(rng, N, ctx.tau, Q_SCALE)
    screen_spectral(spec, ctx)
    screen_coordinates(q, ctx)
    return Draw(N, ctx, hbar, gamma, tuple(complex(x) for x in spec), q, rng)


@dataclass
class SampleStats:
    """Outcome of sampling one check at one rank."""

    values: list
    details: list
    attempts: int
    rejected: int
    exhausted: int


def sample_check(evaluate, check_id: str, N: int, n_spec: int, samples: int, seed: int,
                 ctx: EllipticContext, hbar: complex, gamma: complex, max_attempts: int) -> SampleStats:
    """Evaluate ``evaluate(draw)`` at ``samples`` accepted draws.

    A :class:`SampleRejected` raised while drawing or evaluating counts as a
    rejected attempt and triggers a redraw.  A sample that exhausts
    ``max_attempts`` contributes no value.
    """
    values, details = [], []
    attempts = rejected = exhausted = 0
    for s in range(samples):
        for a in range(max_attempts):
            attempts += 1
            try:
                d = make_draw(seed, check_id, N, s, a, n_spec, ctx, hbar, gamma)
                out = evaluate(d)
            except (SampleRejected, np.linalg.LinAlgError):
                rejected += 1
                continue
            val, det = out if isinstance(out, tuple) else (out, None)
            values.append(float(val))
            details.append(det)
            break
        else:
            exhausted += 1
    return SampleStats(values, details, attempts, rejected, exhausted)
