"""Closed vocabularies used across the commons."""

from __future__ import annotations

from enum import Enum

GROUP_TAGS = frozenset(
    {
        "seniors",
        "women",
        "ethnic_minority",
        "disability",
        "lgbtq",
        "religious_minority",
        "immigrant",
        "neighbourhood",
        "practitioner",
        "cultural_institution",
    }
)

# Groups surveyed for satisfaction, in reporting order.
SURVEY_GROUPS = ("seniors", "women", "ethnic_minority", "disability", "lgbtq", "religious_minority")

VALUE_CLAIMS = frozenset(
    {"safety", "accessibility", "biodiversity", "conviviality", "transit", "greenery", "housing", "heritage"}
)

ACCESSIBILITY_TAGS = frozenset({"mobility", "vision", "neurodiversity"})

LICENCES = frozenset({"CC-BY-4.0", "CC-BY-SA-4.0"})


class Status(str, Enum):
    DRAFT = "draft"
    PROPOSED = "proposed"
    MERGED = "merged"
    QUARANTINED = "quarantined"
    WITHDRAWN = "withdrawn"
    RETIRED = "retired"


class Action(str, Enum):
    PROPOSE = "propose"
    MERGE = "merge"
    REJECT = "reject"
    FLAG = "flag"
    QUARANTINE = "quarantine"
    REVIEW = "review"
    REMEDIATE = "remediate"
    APPEAL = "appeal"
    SANCTION = "sanction"
    STRIKE = "strike"
    UNSTRIKE = "unstrike"
    UPDATE = "update"


class GovernanceState(str, Enum):
    OPEN = "open"
    CURATED = "curated"
    VETO_ENABLED = "veto_enabled"

    @classmethod
    def parse(cls, value: str) -> "GovernanceState":
        value = value.strip().lower().replace("-", "_")
        if value == "veto":
            return cls.VETO_ENABLED
        return cls(value)


class IncidentState(str, Enum):
    OPEN = "open"
    QUARANTINED = "quarantined"
    UNDER_REVIEW = "under_review"
    REMEDIATED = "remediated"
    DISMISSED = "dismissed"
    APPEALED = "appealed"


RESOLVED_INCIDENT_STATES = frozenset({IncidentState.REMEDIATED, IncidentState.DISMISSED})

SANCTION_LADDER = ("soft_fix", "warning", "temporary_suspension")
