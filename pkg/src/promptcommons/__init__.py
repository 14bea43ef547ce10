"""Governed, versioned prompt commons with curation, moderation and evaluation tooling."""

__version__ = "0.1.0"

from .checklist import RuleId, ValidationReport, detect_pii, validate, word_count
from .clock import SimClock, WallClock
from .config import GovernanceConfig
from .engine import GovernanceEngine, Incident, quota_check, replay_audit
from .metrics import ci95, corpus_stats, gini, likert_summary, summarize_outcomes
from .sampler import Method, Outcome, Selector, compose, run_trial
from .simulator import SimConfig, run_engine_stress, run_synthetic, sample_exponential
from .store import AuditEntry, Prompt, PromptStore, compute_id
from .vocab import GovernanceState, Status

__all__ = [
    "AuditEntry",
    "GovernanceConfig",
    "GovernanceEngine",
    "GovernanceState",
    "Incident",
    "Method",
    "Outcome",
    "Prompt",
    "PromptStore",
    "RuleId",
    "Selector",
    "SimClock",
    "SimConfig",
    "Status",
    "ValidationReport",
    "WallClock",
    "ci95",
    "compose",
    "compute_id",
    "corpus_stats",
    "detect_pii",
    "gini",
    "likert_summary",
    "quota_check",
    "replay_audit",
    "run_engine_stress",
    "run_synthetic",
    "run_trial",
    "sample_exponential",
    "summarize_outcomes",
    "validate",
    "word_count",
]
