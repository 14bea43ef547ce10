"""Governance configuration and its ``config.commons`` file format.

The file is a flat list of ``key: value`` lines. List values are
comma-separated; mappings are comma-separated ``name=value`` pairs::

    state: curated
    appeal_sla_hours: 72
    quotas: women=0.3, seniors=0.2
    recognized_orgs: seniors-council, access-mtl
    org_groups: seniors-council=seniors, access-mtl=disability

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .vocab import GROUP_TAGS, SANCTION_LADDER, VALUE_CLAIMS, GovernanceState

DEFAULT_STREET_TYPES = ("rue", "street", "avenue", "boulevard")

# Phrases of targeted exclusion. Deliberately short; communities extend it.
DEFAULT_SAFETY_BLOCKLIST = (
    "go back to your country",
    "no immigrants",
    "not welcome here",
    "keep them out",
    "ban the homeless",
    "get rid of the homeless",
)

DEFAULT_MOBILITY_KEYWORDS = (
    "wheelchair",
    "ramp",
    "ramps",
    "stairs",
    "curb",
    "curbs",
    "kerb",
    "elevator",
    "elevators",
    "mobility",
    "walker",
    "stroller",
    "step-free",
    "blind",
    "braille",
    "tactile",
)


@dataclass
class GovernanceConfig:
    state: GovernanceState = GovernanceState.OPEN
    quotas: dict[str, float] = field(default_factory=dict)
    appeal_sla_hours: int = 72
    recognized_orgs: frozenset[str] = frozenset()
    org_groups: dict[str, str] = field(default_factory=dict)
    sanction_ladder: tuple[str, ...] = SANCTION_LADDER
    baseline_prompt: str | None = None
    group_weights: dict[str, float] = field(default_factory=dict)
    groups: frozenset[str] = GROUP_TAGS
    value_claims: frozenset[str] = VALUE_CLAIMS
    street_types: tuple[str, ...] = DEFAULT_STREET_TYPES
    safety_blocklist: tuple[str, ...] = DEFAULT_SAFETY_BLOCKLIST
    mobility_keywords: tuple[str, ...] = DEFAULT_MOBILITY_KEYWORDS

    def __post_init__(self):
        self.state = GovernanceState.parse(self.state) if isinstance(self.state, str) else self.state
        self.validate()

    def validate(self) -> None:
        if not self.groups:
            raise ConfigError("group vocabulary must not be empty")
        if not self.value_claims:
            raise ConfigError("value-claim vocabulary must not be empty")
        if not isinstance(self.appeal_sla_hours, int) or self.appeal_sla_hours <= 0:
            raise ConfigError("appeal_sla_hours must be a positive integer")
        if tuple(self.sanction_ladder) != SANCTION_LADDER:
            raise ConfigError(f"sanction ladder order is fixed: {', '.join(SANCTION_LADDER)}")
        for group, share in self.quotas.items():
            if group not in self.groups:
                raise ConfigError(f"quota for unknown group {group!r}")
            if not 0.0 <= share <= 1.0:
                raise ConfigError(f"quota for {group} must lie in [0, 1]")
        if sum(self.quotas.values()) > 1.0 + 1e-12:
            raise ConfigError("quota minimum shares sum to more than 1")
        for group, weight in self.group_weights.items():
            if weight <= 0:
                raise ConfigError(f"group weight for {group} must be positive")
        for org, group in self.org_groups.items():
            if group not in self.groups:
                raise ConfigError(f"org {org} mapped to unknown group {group!r}")

    # -- file format -----------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{f.name}: {_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "GovernanceConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise ConfigError(f"line {lineno}: expected 'key: value'")
            raw[key.strip()] = value.strip()

        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

        kwargs: dict = {}
        try:
            for key, value in raw.items():
                if key == "state":
                    kwargs[key] = GovernanceState.parse(value)
                elif key == "appeal_sla_hours":
                    kwargs[key] = int(value)
                elif key == "baseline_prompt":
                    kwargs[key] = value or None
                elif key in ("quotas", "group_weights"):
                    kwargs[key] = {k: float(v) for k, v in _pairs(value)}
                elif key == "org_groups":
                    kwargs[key] = dict(_pairs(value))
                elif key in ("recognized_orgs", "groups", "value_claims"):
                    kwargs[key] = frozenset(_items(value))
                else:
                    kwargs[key] = tuple(_items(value))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path: Path) -> "GovernanceConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def dump(self, path: Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")


def _items(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _pairs(value: str) -> list[tuple[str, str]]:
    out = []
    for item in _items(value):
        k, sep, v = item.partition("=")
        if not sep:
            raise ValueError(f"expected name=value, got {item!r}")
        out.append((k.strip(), v.strip()))
    return out


def _format_value(value) -> str:
    if isinstance(value, GovernanceState):
        return value.value
    if isinstance(value, dict):
        return ", ".join(f"{k}={_num(v)}" for k, v in sorted(value.items()))
    if isinstance(value, frozenset):
        return ", ".join(sorted(value))
    if isinstance(value, tuple):
        return ", ".join(value)
    return str(value)


def _num(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)
