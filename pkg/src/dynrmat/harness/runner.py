"""Suite orchestration: plan (check, rank) tasks, fan them out, reduce."""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, List, Optional, Sequence

from ..elliptic import ConfigurationError
from .config import SampleConfig
from .report import RelationResult, VerificationReport, judge
from .sampler import sample_check
from .suites import CATALOGUE, CONTROL_THRESHOLD, Check

THREADS_ENV = "DYNRMAT_THREADS"


def worker_count(requested: Optional[int] = None) -> int:
    """Worker processes: ``requested`` or the CPU count, capped by ``DYNRMAT_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {cap!r}") from exc
    return max(1, n)


def select_checks(cfg: SampleConfig) -> List[Check]:
    if cfg.relations is not None:
        unknown = sorted(set(cfg.relations) - set(CATALOGUE))
        if unknown:
            raise ConfigurationError(f"unknown relation ids: {', '.join(unknown)}")
    chosen = [c for c in CATALOGUE.values()
              if c.suite in cfg.suites and (cfg.relations is None or c.id in cfg.relations)]
    if not chosen:
        raise ConfigurationError("the configuration selects no checks")
    return chosen


def tolerance(check: Check, cfg: SampleConfig) -> float:
    base = cfg.operator_tol if check.operator else cfg.tol
    return base if check.tol is None else min(base, check.tol)


def evaluate_check(check: Check, N: int, cfg: SampleConfig) -> RelationResult:
    """Sample one check at one rank (``N = 0`` for rank-independent checks)."""
    samples = min(cfg.samples, cfg.operator_samples) if check.operator else cfg.samples
    stats = sample_check(check.evaluate, check.id, N or 2, check.n_spec, samples, cfg.seed,
                         cfg.context(), cfg.hbar, cfg.gamma, cfg.max_attempts)
    tol = tolerance(check, cfg)
    if check.kind == "ratio":
        threshold = list(check.bounds)
    elif check.kind == "control":
        threshold = [CONTROL_THRESHOLD]
    else:
        threshold = [tol]
    vals = stats.values
    details = None
    if any(d is not None for d in stats.details):
        # details of the worst sample (largest value; smallest for controls)
        pick = min if check.kind == "control" else max
        idx = pick(range(len(vals)), key=vals.__getitem__)
        details = stats.details[idx]
    return RelationResult(
        id=check.id, suite=check.suite, anchor=check.anchor, N=N or None, kind=check.kind,
        threshold=threshold, samples=len(vals), attempts=stats.attempts, rejected=stats.rejected,
        max_value=max(vals) if vals else None, min_value=min(vals) if vals else None,
        passed=judge(check.kind, vals, tol, check.bounds, stats.attempts, stats.rejected),
        details=details,
    )


def _task(args) -> RelationResult:
    cfg, check_id, N = args
    return evaluate_check(CATALOGUE[check_id], N, cfg)


def _cost(check: Check, N: int) -> float:
    # rough relative cost, so that long tasks start first
    return (50.0 if check.operator else 1.0) * max(N, 1) ** 3


def _pool(n: int) -> ProcessPoolExecutor:
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    return ProcessPoolExecutor(max_workers=n, mp_context=ctx)


def run_tasks(cfg: SampleConfig, tasks: Sequence[tuple], workers: Optional[int] = None) -> List[RelationResult]:
    n = min(worker_count(workers), len(tasks))
    jobs = [(cfg, cid, N) for cid, N in tasks]
    if n <= 1:
        return [_task(j) for j in jobs]
    with _pool(n) as ex:
        return list(ex.map(_task, jobs, chunksize=1))


def run(cfg: SampleConfig, workers: Optional[int] = None) -> VerificationReport:
    """Run every selected check at every selected rank.

    The result does not depend on the worker count or on scheduling order:
    each sample has its own seed and the reduction is sorted.
    """
    cfg.validate()
    tasks = [(c.id, N) for c in select_checks(cfg) for N in c.select_ranks(cfg.rank_list)]
    tasks.sort(key=lambda t: -_cost(CATALOGUE[t[0]], t[1]))
    results = run_tasks(cfg, tasks, workers)
    return VerificationReport(cfg, sorted(results, key=RelationResult.sort_key))


def run_checks(checks: Iterable[Check], cfg: SampleConfig, ranks: Optional[Sequence[int]] = None) -> VerificationReport:
    """Run ad-hoc checks in-process (they need not be in the catalogue)."""
    cfg.validate()
    ranks = tuple(ranks) if ranks is not None else cfg.rank_list
    results = [evaluate_check(c, N, cfg) for c in checks for N in c.select_ranks(ranks)]
    return VerificationReport(cfg, sorted(results, key=RelationResult.sort_key))
