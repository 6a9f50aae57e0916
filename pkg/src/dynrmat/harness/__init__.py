"""Deterministic verification harness and command-line interface."""

from .config import SCHEMA, SUITES, SampleConfig, parse_complex
from .report import RelationResult, VerificationReport
from .runner import run, run_checks
from .suites import CATALOGUE, Check

__all__ = ["SCHEMA", "SUITES", "SampleConfig", "parse_complex", "RelationResult",
           "VerificationReport", "run", "run_checks", "CATALOGUE", "Check"]
