"""Moderation and curation state machine.

Every status or incident-state change goes through ``GovernanceEngine`` and
appends exactly one audit entry describing it. ``replay_audit`` rebuilds the
final statuses from the log alone, which is how the tests check that nothing
changes state off the record.

Audit conventions (subject / issue_link):

=============  ===============  ============================================
action         subject          effect
=============  ===============  ============================================
update         prompt|config    new prompt -> draft; otherwise no status change
propose        prompt           -> proposed
reject         prompt           proposed -> draft
merge          prompt           -> merged
flag           incident         incident opened; issue_link = prompt id
quarantine     prompt           -> quarantined; issue_link = incident id
review         incident         -> under_review
remediate      incident         incident remediated, prompt retired
reject         incident         incident dismissed, prompt restored
appeal         incident         -> appealed
sanction       actor            ladder step or suspension lift
strike         prompt           merged -> withdrawn; issue_link = strike:<group>
unstrike       prompt           withdrawn -> merged; issue_link = strike:<group>
=============  ===============  ============================================
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .checklist import RuleId, validate
from .clock import SECONDS_PER_HOUR, Clock, Timestamp
from .config import GovernanceConfig
from .errors import (
    ChecklistFailed,
    IllegalTransition,
    LadderViolation,
    NotFound,
    QuotaBlocked,
    SuspendedActor,
)
from .store import AuditEntry, Prompt, PromptStore
from .vocab import (
    RESOLVED_INCIDENT_STATES,
    SANCTION_LADDER,
    Action,
    GovernanceState,
    IncidentState,
    Status,
)

INCIDENT_PREFIX = "inc-"
UNRESOLVED_INCIDENT_STATES = frozenset(
    {IncidentState.OPEN, IncidentState.QUARANTINED, IncidentState.UNDER_REVIEW, IncidentState.APPEALED}
)
SLA_TRACKED_STATES = frozenset({IncidentState.QUARANTINED, IncidentState.UNDER_REVIEW, IncidentState.APPEALED})


@dataclass(frozen=True)
class Capabilities:
    merge_rules: tuple[RuleId, ...]  # checklist rules that must pass to merge
    enforce_quotas: bool
    veto_quarantine: bool  # recognized-org flags quarantine immediately


CAPABILITIES: dict[GovernanceState, Capabilities] = {
    GovernanceState.OPEN: Capabilities((RuleId.NO_PII, RuleId.SAFETY_INCLUSION), False, False),
    GovernanceState.CURATED: Capabilities(tuple(RuleId), True, False),
    GovernanceState.VETO_ENABLED: Capabilities(tuple(RuleId), True, True),
}


@dataclass(frozen=True)
class Incident:
    id: str
    prompt_ref: str
    flagger: str
    flagged_at: Timestamp
    state: IncidentState = IncidentState.OPEN
    quarantined_at: Timestamp | None = None
    resolved_at: Timestamp | None = None
    resolution_rationale: str | None = None
    sla_deadline: Timestamp | None = None
    appeals: int = 0

    def __post_init__(self):
        object.__setattr__(self, "state", IncidentState(self.state))

    @property
    def time_to_remediation(self) -> float | None:
        """Hours from flag to resolution; only defined once resolved."""
        if self.state not in RESOLVED_INCIDENT_STATES or self.resolved_at is None:
            return None
        return (self.resolved_at - self.flagged_at) / SECONDS_PER_HOUR

    @property
    def holds_quarantine(self) -> bool:
        return self.quarantined_at is not None and self.state in (
            IncidentState.QUARANTINED,
            IncidentState.UNDER_REVIEW,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["state"] = self.state.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Incident":
        return cls(**d)


@dataclass(frozen=True)
class SanctionRecord:
    actor: str
    level: str  # a ladder rung, or "lifted"
    issued_by: str
    timestamp: Timestamp
    rationale: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class QuotaResult:
    feasible: bool
    violating: frozenset[str]
    below_quota: frozenset[str]  # groups already under their floor before the merge


def quota_check(store_view: PromptStore, candidate: Prompt, quotas: dict[str, float]) -> QuotaResult:
    """Minimum-share floors with a no-regression rule.

    A group blocks the merge only if it meets its floor now and would fall
    below it once ``candidate`` is merged. An empty store satisfies nothing,
    so it never blocks.
    """
    merged = [p for p in store_view.query(status=Status.MERGED) if p.id != candidate.id]
    total = len(merged)
    violating, below = set(), set()
    for group, floor in sorted(quotas.items()):
        count = sum(1 for p in merged if group in p.author_groups)
        satisfied_now = total > 0 and count / total >= floor
        if not satisfied_now:
            below.add(group)
            continue
        after = (count + (group in candidate.author_groups)) / (total + 1)
        if after < floor:
            violating.add(group)
    return QuotaResult(not violating, frozenset(violating), frozenset(below))


class GovernanceEngine:
    def __init__(self, store: PromptStore, clock: Clock | None = None):
        self.store = store
        self.clock = clock or store.clock
        self._incidents: dict[str, Incident] = {}
        for rec in store.read_records("incidents.log"):
            inc = Incident.from_dict(rec)
            self._incidents[inc.id] = inc
        self._levels: dict[str, int] = {}
        self._suspended: set[str] = set()
        for rec in store.read_records("sanctions.log"):
            self._apply_sanction(SanctionRecord(**rec))
        self._struck: dict[str, str] = {}
        for entry in store.read_audit():
            if entry.action is Action.STRIKE:
                self._struck[entry.subject] = entry.issue_link.removeprefix("strike:")
            elif entry.action is Action.UNSTRIKE:
                self._struck.pop(entry.subject, None)

    @classmethod
    def open(cls, root: Path, clock: Clock | None = None) -> "GovernanceEngine":
        return cls(PromptStore.open(root, clock=clock), clock)

    @property
    def config(self) -> GovernanceConfig:
        return self.store.config

    @property
    def capabilities(self) -> Capabilities:
        return CAPABILITIES[self.config.state]

    # -- helpers ---------------------------------------------------------

    def _now(self, clock: Clock | None) -> Timestamp:
        return (clock or self.clock).now()

    def _audit(self, actor, at, action, subject, rationale, issue_link=None) -> int:
        return self.store.append_audit(AuditEntry(actor, at, action, subject, rationale, issue_link))

    def _require_status(self, p: Prompt, *allowed: Status) -> None:
        if p.status not in allowed:
            want = "/".join(s.value for s in allowed)
            raise IllegalTransition(f"prompt {p.id} is {p.status.value}, expected {want}")

    def _require_active(self, actor: str) -> None:
        if actor in self._suspended:
            raise SuspendedActor(f"{actor} is under temporary suspension")

    def _save_incident(self, inc: Incident) -> Incident:
        self._incidents[inc.id] = inc
        self.store.append_record("incidents.log", inc.to_dict())
        return inc

    def incident(self, iid: str) -> Incident:
        try:
            return self._incidents[iid]
        except KeyError:
            raise NotFound(f"no incident {iid}") from None

    def incidents(self) -> list[Incident]:
        return [self._incidents[k] for k in sorted(self._incidents)]

    def unresolved_prompt_refs(self) -> set[str]:
        return {i.prompt_ref for i in self._incidents.values() if i.state in UNRESOLVED_INCIDENT_STATES}

    def struck_groups(self) -> set[str]:
        """Groups with an ongoing prompt strike."""
        return set(self._struck.values())

    def is_suspended(self, actor: str) -> bool:
        return actor in self._suspended

    def sanction_level(self, actor: str) -> str | None:
        level = self._levels.get(actor, 0)
        return SANCTION_LADDER[level - 1] if level else None

    # -- repository workflow ---------------------------------------------

    def propose(self, prompt_id: str, contributor: str, rationale: str | None = None, clock: Clock | None = None) -> Prompt:
        self._require_active(contributor)
        p = self.store.get(prompt_id)
        self._require_status(p, Status.DRAFT)
        p = self.store.set_status(prompt_id, Status.PROPOSED)
        self._audit(contributor, self._now(clock), Action.PROPOSE, prompt_id, rationale or f"proposed at {p.version}")
        return p

    def reject(self, prompt_id: str, maintainer: str, rationale: str, clock: Clock | None = None) -> Prompt:
        """Send a proposal back to draft."""
        self._require_active(maintainer)
        p = self.store.get(prompt_id)
        self._require_status(p, Status.PROPOSED)
        p = self.store.set_status(prompt_id, Status.DRAFT)
        self._audit(maintainer, self._now(clock), Action.REJECT, prompt_id, rationale)
        return p

    def merge(
        self,
        prompt_id: str,
        maintainer: str,
        rationale: str,
        issue_link: str | None = None,
        clock: Clock | None = None,
    ) -> Prompt:
        self._require_active(maintainer)
        p = self.store.get(prompt_id)
        self._require_status(p, Status.PROPOSED)
        caps = self.capabilities
        report = validate(p, self.store, self.config)
        if not report.passes(*caps.merge_rules):
            raise ChecklistFailed(report)
        if caps.enforce_quotas:
            quota = quota_check(self.store, p, self.config.quotas)
            if not quota.feasible:
                raise QuotaBlocked(quota.violating)
        at = self._now(clock)
        p = self.store.set_status(prompt_id, Status.MERGED)
        seq = self._audit(maintainer, at, Action.MERGE, prompt_id, rationale, issue_link)
        self.store.append_record(
            "reports.log",
            {
                "audit_seq": seq,
                "prompt_id": prompt_id,
                "version": str(p.version),
                "state": self.config.state.value,
                "required_rules": [r.value for r in caps.merge_rules],
                "report": report.to_dict(),
            },
        )
        return p

    def merge_reports(self) -> list[dict]:
        return self.store.read_records("reports.log")

    def update_config(self, config: GovernanceConfig, actor: str, rationale: str, clock: Clock | None = None) -> None:
        self.store.save_config(config)
        self._audit(actor, self._now(clock), Action.UPDATE, "config", rationale)

    # -- incidents ---------------------------------------------------------

    def flag(self, prompt_id: str, org: str, clock: Clock | None = None, rationale: str | None = None) -> Incident:
        p = self.store.get(prompt_id)
        self._require_status(p, Status.MERGED)
        now = self._now(clock)
        iid = f"{INCIDENT_PREFIX}{len(self._incidents) + 1:06d}"
        inc = Incident(
            id=iid,
            prompt_ref=prompt_id,
            flagger=org,
            flagged_at=now,
            sla_deadline=now + self.config.appeal_sla_hours * SECONDS_PER_HOUR,
        )
        self._audit(org, now, Action.FLAG, iid, rationale or f"flagged by {org}", prompt_id)
        if self.capabilities.veto_quarantine and org in self.config.recognized_orgs:
            self.store.set_status(prompt_id, Status.QUARANTINED)
            inc = replace(inc, state=IncidentState.QUARANTINED, quarantined_at=now)
            self._audit(org, now, Action.QUARANTINE, prompt_id, f"minority veto by {org}", iid)
        return self._save_incident(inc)

    def begin_review(self, incident_id: str, maintainer: str, clock: Clock | None = None) -> Incident:
        inc = self.incident(incident_id)
        if inc.state not in (IncidentState.OPEN, IncidentState.QUARANTINED):
            raise IllegalTransition(f"incident {incident_id} is {inc.state.value}; cannot start review")
        self._audit(maintainer, self._now(clock), Action.REVIEW, incident_id, "review started", inc.prompt_ref)
        return self._save_incident(replace(inc, state=IncidentState.UNDER_REVIEW))

    def review(
        self,
        incident_id: str,
        maintainer: str,
        decision: str,
        rationale: str,
        clock: Clock | None = None,
    ) -> Incident:
        inc = self.incident(incident_id)
        if inc.state not in UNRESOLVED_INCIDENT_STATES:
            raise IllegalTransition(f"incident {incident_id} is already {inc.state.value}")
        if decision not in ("remediate", "dismiss"):
            raise ValueError(f"decision must be remediate or dismiss, not {decision!r}")
        now = self._now(clock)
        if decision == "remediate":
            self.store.set_status(inc.prompt_ref, Status.RETIRED)
            self._audit(maintainer, now, Action.REMEDIATE, incident_id, rationale, inc.prompt_ref)
            state = IncidentState.REMEDIATED
        else:
            others = [i for i in self._incidents.values() if i.prompt_ref == inc.prompt_ref and i.id != inc.id]
            restored = restored_status(self.store.get(inc.prompt_ref).status, others)
            self.store.set_status(inc.prompt_ref, restored)
            self._audit(maintainer, now, Action.REJECT, incident_id, rationale, inc.prompt_ref)
            state = IncidentState.DISMISSED
        return self._save_incident(replace(inc, state=state, resolved_at=now, resolution_rationale=rationale))

    def appeal(self, incident_id: str, appellant: str, clock: Clock | None = None, rationale: str | None = None) -> Incident:
        inc = self.incident(incident_id)
        if inc.state not in RESOLVED_INCIDENT_STATES:
            raise IllegalTransition(f"incident {incident_id} is {inc.state.value}; only resolved incidents can be appealed")
        now = self._now(clock)
        self._audit(appellant, now, Action.APPEAL, incident_id, rationale or f"appeal by {appellant}", inc.prompt_ref)
        return self._save_incident(
            replace(
                inc,
                state=IncidentState.APPEALED,
                resolved_at=None,
                sla_deadline=now + self.config.appeal_sla_hours * SECONDS_PER_HOUR,
                appeals=inc.appeals + 1,
            )
        )

    def check_sla(self, clock: Clock | None = None) -> list[str]:
        """Ids of tracked incidents past their deadline. Reported, never resolved."""
        now = self._now(clock)
        return [
            i.id
            for i in self.incidents()
            if i.state in SLA_TRACKED_STATES and i.sla_deadline is not None and i.sla_deadline < now
        ]

    # -- sanctions -----------------------------------------------------------

    def _apply_sanction(self, rec: SanctionRecord) -> None:
        if rec.level == "lifted":
            self._suspended.discard(rec.actor)
            return
        rung = SANCTION_LADDER.index(rec.level) + 1
        self._levels[rec.actor] = max(self._levels.get(rec.actor, 0), rung)
        if rec.level == "temporary_suspension":
            self._suspended.add(rec.actor)

    def sanction(
        self,
        actor: str,
        level: str,
        issued_by: str = "maintainers",
        rationale: str | None = None,
        clock: Clock | None = None,
    ) -> SanctionRecord:
        if level not in SANCTION_LADDER:
            raise LadderViolation(f"unknown sanction level {level!r}")
        current = self._levels.get(actor, 0)
        rung = SANCTION_LADDER.index(level) + 1
        if rung > current + 1:
            held = SANCTION_LADDER[current - 1] if current else "none"
            raise LadderViolation(f"{actor} is at {held}; {level} skips a rung")
        rec = SanctionRecord(actor, level, issued_by, self._now(clock), rationale or level)
        self._audit(issued_by, rec.timestamp, Action.SANCTION, actor, f"{level}: {rec.rationale}")
        self.store.append_record("sanctions.log", rec.to_dict())
        self._apply_sanction(rec)
        return rec

    def lift_suspension(self, actor: str, issued_by: str, rationale: str, clock: Clock | None = None) -> SanctionRecord:
        if actor not in self._suspended:
            raise IllegalTransition(f"{actor} is not suspended")
        rec = SanctionRecord(actor, "lifted", issued_by, self._now(clock), rationale)
        self._audit(issued_by, rec.timestamp, Action.SANCTION, actor, f"suspension lifted: {rationale}")
        self.store.append_record("sanctions.log", rec.to_dict())
        self._apply_sanction(rec)
        return rec

    # -- prompt strikes --------------------------------------------------

    def strike(self, group: str, actor: str = "commons", rationale: str | None = None, clock: Clock | None = None) -> int:
        now = self._now(clock)
        count = 0
        for p in self.store.query(group=group, status=Status.MERGED):
            self.store.set_status(p.id, Status.WITHDRAWN)
            self._audit(actor, now, Action.STRIKE, p.id, rationale or f"prompt strike by {group}", f"strike:{group}")
            self._struck[p.id] = group
            count += 1
        return count

    def unstrike(self, group: str, actor: str = "commons", rationale: str | None = None, clock: Clock | None = None) -> int:
        now = self._now(clock)
        count = 0
        for pid in sorted(k for k, g in self._struck.items() if g == group):
            del self._struck[pid]
            if self.store.get(pid).status is not Status.WITHDRAWN:
                continue
            self.store.set_status(pid, Status.MERGED)
            self._audit(actor, now, Action.UNSTRIKE, pid, rationale or f"strike by {group} ended", f"strike:{group}")
            count += 1
        return count

    # -- state snapshot ----------------------------------------------------

    def snapshot(self) -> tuple[dict[str, Status], dict[str, IncidentState]]:
        prompts = {p.id: p.status for p in self.store.query()}
        incidents = {i.id: i.state for i in self.incidents()}
        return prompts, incidents


def restored_status(current: Status, other_incidents) -> Status:
    """Prompt status after one of its incidents is dismissed."""
    if current not in (Status.QUARANTINED, Status.RETIRED):
        return current
    if any(i.state is IncidentState.REMEDIATED for i in other_incidents):
        return Status.RETIRED
    if any(i.holds_quarantine for i in other_incidents):
        return Status.QUARANTINED
    return Status.MERGED


@dataclass
class _ReplayIncident:
    prompt_ref: str
    state: IncidentState
    quarantined_at: object = None

    @property
    def holds_quarantine(self) -> bool:
        return Incident.holds_quarantine.fget(self)


def replay_audit(entries: list[AuditEntry]) -> tuple[dict[str, Status], dict[str, IncidentState]]:
    """Rebuild prompt statuses and incident states from the audit log alone."""
    prompts: dict[str, Status] = {}
    incidents: dict[str, _ReplayIncident] = {}
    for e in entries:
        a, s = e.action, e.subject
        is_incident = s.startswith(INCIDENT_PREFIX)
        if a is Action.UPDATE:
            if s != "config" and s not in prompts:
                prompts[s] = Status.DRAFT
        elif a is Action.PROPOSE:
            prompts[s] = Status.PROPOSED
        elif a is Action.MERGE:
            prompts[s] = Status.MERGED
        elif a is Action.REJECT and not is_incident:
            prompts[s] = Status.DRAFT
        elif a is Action.FLAG:
            incidents[s] = _ReplayIncident(e.issue_link, IncidentState.OPEN)
        elif a is Action.QUARANTINE:
            prompts[s] = Status.QUARANTINED
            incidents[e.issue_link].state = IncidentState.QUARANTINED
            incidents[e.issue_link].quarantined_at = e.timestamp
        elif a is Action.REVIEW:
            incidents[s].state = IncidentState.UNDER_REVIEW
        elif a is Action.REMEDIATE:
            incidents[s].state = IncidentState.REMEDIATED
            prompts[incidents[s].prompt_ref] = Status.RETIRED
        elif a is Action.REJECT:
            inc = incidents[s]
            others = [i for k, i in incidents.items() if i.prompt_ref == inc.prompt_ref and k != s]
            prompts[inc.prompt_ref] = restored_status(prompts[inc.prompt_ref], others)
            inc.state = IncidentState.DISMISSED
        elif a is Action.APPEAL:
            incidents[s].state = IncidentState.APPEALED
        elif a is Action.STRIKE:
            prompts[s] = Status.WITHDRAWN
        elif a is Action.UNSTRIKE:
            prompts[s] = Status.MERGED
    return prompts, {k: v.state for k, v in sorted(incidents.items())}
