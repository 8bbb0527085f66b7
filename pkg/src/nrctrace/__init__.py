"""Traced evaluation of nested relational queries, with adaptation, provenance and slicing."""

from __future__ import annotations

from .adapt import adapt, run_fidelity_check
from .core import anormalize, compile_query, typecheck
from .evaluate import denote, eval_core
from .store import readback
from .trace import check_consistency, trace_alpha_eq, traced_eval

__all__ = [
    "adapt",
    "anormalize",
    "check_consistency",
    "compile_query",
    "denote",
    "eval_core",
    "readback",
    "run_fidelity_check",
    "trace_alpha_eq",
    "traced_eval",
    "typecheck",
]
