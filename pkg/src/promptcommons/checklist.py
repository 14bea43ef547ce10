"""The public curation checklist as a deterministic rule engine.

Every rule runs on every call and reports findings; nothing raises. A report
rejects iff at least one finding has error severity. "Jargon avoided" has no
operational definition and is not machine-checked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Protocol

from .config import GovernanceConfig
from .errors import NotFound
from .store import Prompt
from .vocab import LICENCES, Status

MAX_WORDS = 60


class RuleId(str, Enum):
    LOCALE_PRESENT = "LOCALE_PRESENT"
    MAX_WORDS = "MAX_WORDS"
    NO_PII = "NO_PII"
    VALUE_CLAIM_VOCAB = "VALUE_CLAIM_VOCAB"
    ACCESSIBILITY_TAGS = "ACCESSIBILITY_TAGS"
    SAFETY_INCLUSION = "SAFETY_INCLUSION"
    COUNTER_PROMPT_EXISTS = "COUNTER_PROMPT_EXISTS"
    LICENCE_ATTACHED = "LICENCE_ATTACHED"


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    rule: RuleId
    severity: Severity
    message: str
    span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.value,
            "severity": self.severity.value,
            "message": self.message,
            "span": list(self.span) if self.span else None,
        }

    def diagnostic(self) -> str:
        return f"{self.rule.value}:{self.severity.value}:{self.message}"


@dataclass(frozen=True)
class ValidationReport:
    prompt_id: str | None
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]

    @property
    def verdict(self) -> str:
        return "reject" if self.errors else "accept"

    @property
    def accepted(self) -> bool:
        return not self.errors

    def passes(self, *rules: RuleId) -> bool:
        return not any(f.rule in rules for f in self.errors)

    def rule_verdicts(self) -> dict[str, str]:
        """Worst severity per rule: ``pass``, ``warning`` or ``error``."""
        out = {r.value: "pass" for r in RuleId}
        for f in self.findings:
            if out[f.rule.value] != "error":
                out[f.rule.value] = f.severity.value
        return out

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "verdict": self.verdict,
            "findings": [f.to_dict() for f in self.findings],
        }


class StoreView(Protocol):
    def get(self, pid: str) -> Prompt: ...


def word_count(text: str) -> int:
    return len(text.split())


# -- PII heuristics -------------------------------------------------------

EMAIL_RE = re.compile(r"(?<![\w.+-])[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b")
# 10+ digits; up to two separator characters (space . - parentheses) between digits.
PHONE_RE = re.compile(r"(?<![\w+])\+?\(?\d(?:[ .\-()]{0,2}\d){9,}(?!\d)")


@lru_cache(maxsize=32)
def _address_re(street_types: tuple[str, ...]) -> re.Pattern:
    words = "|".join(re.escape(w) for w in sorted(street_types, key=len, reverse=True))
    # number, then the street word within the next three tokens
    return re.compile(rf"(?<!\w)\d+[A-Za-z]?(?:\s+\S+){{0,2}}?\s+(?:{words})(?!\w)", re.IGNORECASE)


def _byte_span(text: str, start: int, end: int) -> tuple[int, int]:
    b0 = len(text[:start].encode("utf-8"))
    return b0, b0 + len(text[start:end].encode("utf-8"))


def detect_pii(text: str, street_types=("rue", "street", "avenue", "boulevard")) -> list[tuple[str, tuple[int, int]]]:
    """Flag emails, phone numbers and civic addresses; spans are UTF-8 byte offsets."""
    hits = []
    for category, pattern in (("email", EMAIL_RE), ("phone", PHONE_RE), ("civic_address", _address_re(tuple(street_types)))):
        for m in pattern.finditer(text):
            hits.append((m.start(), category, _byte_span(text, m.start(), m.end())))
    hits.sort()
    return [(category, span) for _, category, span in hits]


@lru_cache(maxsize=32)
def _phrase_re(phrases: tuple[str, ...]) -> re.Pattern:
    # longest first, so "step-free" wins over a shorter overlapping entry
    alts = "|".join(re.escape(p) for p in sorted(phrases, key=len, reverse=True))
    return re.compile(rf"(?<!\w)(?:{alts})(?!\w)", re.IGNORECASE)


# -- rules ----------------------------------------------------------------


def validate(prompt: Prompt, store_view: StoreView | None = None, config: GovernanceConfig | None = None) -> ValidationReport:
    config = config or GovernanceConfig()
    findings: list[Finding] = []

    def add(rule, severity, message, span=None):
        findings.append(Finding(rule, severity, message, span))

    if not prompt.locale.strip():
        add(RuleId.LOCALE_PRESENT, Severity.ERROR, "locale is missing")

    n = word_count(prompt.text)
    if n > MAX_WORDS:
        add(RuleId.MAX_WORDS, Severity.ERROR, f"{n} words exceeds the {MAX_WORDS}-word limit")

    for category, span in detect_pii(prompt.text, config.street_types):
        add(RuleId.NO_PII, Severity.ERROR, f"possible {category} in prompt text", span)

    if prompt.value_claim not in config.value_claims:
        add(RuleId.VALUE_CLAIM_VOCAB, Severity.ERROR, f"value claim {prompt.value_claim!r} not in controlled vocabulary")
    if not prompt.justification.strip():
        add(RuleId.VALUE_CLAIM_VOCAB, Severity.ERROR, "value claim has no free-text justification")

    if not prompt.accessibility_tags and config.mobility_keywords:
        m = _phrase_re(tuple(config.mobility_keywords)).search(f"{prompt.text} {prompt.locale}")
        if m:
            kw = m.group(0).lower()
            add(RuleId.ACCESSIBILITY_TAGS, Severity.WARNING, f"mentions {kw!r} but has no accessibility tags")

    if config.safety_blocklist:
        for m in _phrase_re(tuple(config.safety_blocklist)).finditer(prompt.text):
            add(
                RuleId.SAFETY_INCLUSION,
                Severity.ERROR,
                f"blocklisted phrase {m.group(0).lower()!r}",
                _byte_span(prompt.text, m.start(), m.end()),
            )

    ref = prompt.counter_prompt_ref
    if ref is None:
        add(RuleId.COUNTER_PROMPT_EXISTS, Severity.ERROR, "no counter-prompt referenced")
    else:
        try:
            counter = store_view.get(ref) if store_view is not None else None
        except NotFound:
            counter = None
        if counter is None:
            add(RuleId.COUNTER_PROMPT_EXISTS, Severity.ERROR, f"counter-prompt {ref} not found")
        elif counter.status not in (Status.MERGED, Status.PROPOSED):
            add(RuleId.COUNTER_PROMPT_EXISTS, Severity.ERROR, f"counter-prompt {ref} is {counter.status.value}")
        elif counter.value_claim == prompt.value_claim:
            add(RuleId.COUNTER_PROMPT_EXISTS, Severity.ERROR, f"counter-prompt {ref} shares value claim {prompt.value_claim!r}")

    if prompt.licence not in LICENCES:
        add(RuleId.LICENCE_ATTACHED, Severity.ERROR, f"licence {prompt.licence!r} is not CC BY or CC BY-SA")

    return ValidationReport(prompt.id, tuple(findings))
