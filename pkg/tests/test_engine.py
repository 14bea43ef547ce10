import pytest

from promptcommons.clock import SimClock
from promptcommons.engine import GovernanceEngine, Incident, quota_check, replay_audit, restored_status
from promptcommons.errors import (
    ChecklistFailed,
    IllegalTransition,
    LadderViolation,
    NotFound,
    QuotaBlocked,
    SuspendedActor,
)
from promptcommons.sampler import Selector
from promptcommons.store import PromptStore, compute_id
from promptcommons.vocab import Action, IncidentState, Status

from conftest import add_pair, make_engine, merge_pair, prompt

H = 3600


def merged_store(groups_list):
    """Store whose merged prompts carry the given group tuples (checklist not consulted)."""
    store = PromptStore()
    for i, groups in enumerate(groups_list):
        p = store.put(prompt(f"Prompt number {i}.", groups=groups))
        store.set_status(p.id, Status.MERGED)
    return store


class TestProposeMerge:
    def test_propose_draft(self, engine):
        a, _ = add_pair(engine.store, "1")
        n = len(engine.store.read_audit())
        assert engine.propose(a, "alice").status is Status.PROPOSED
        new = engine.store.read_audit(n + 1)
        assert [(e.action, e.subject) for e in new] == [(Action.PROPOSE, a)]

    def test_propose_merged_is_illegal(self, engine):
        a, _ = merge_pair(engine, "1")
        with pytest.raises(IllegalTransition):
            engine.propose(a, "alice")

    def test_reject_back_to_draft(self, engine):
        a, _ = add_pair(engine.store, "1")
        engine.propose(a, "alice")
        assert engine.reject(a, "maintainer", "needs a locale").status is Status.DRAFT

    def test_open_state_merges_long_prompt(self):
        engine = make_engine("open")
        p = engine.store.put(prompt(" ".join(["tree"] * 61)))
        engine.propose(p.id, "alice")
        assert engine.merge(p.id, "maintainer", "light moderation").status is Status.MERGED

    def test_open_state_still_blocks_pii(self):
        engine = make_engine("open")
        p = engine.store.put(prompt("Email me at a@b.com about the park."))
        engine.propose(p.id, "alice")
        with pytest.raises(ChecklistFailed) as err:
            engine.merge(p.id, "maintainer", "x")
        assert err.value.exit_code == 3
        assert engine.store.get(p.id).status is Status.PROPOSED

    def test_curated_state_rejects_long_prompt(self):
        engine = make_engine("curated")
        p = engine.store.put(prompt(" ".join(["tree"] * 61)))
        engine.propose(p.id, "alice")
        with pytest.raises(ChecklistFailed):
            engine.merge(p.id, "maintainer", "x")

    def test_merge_records_report(self, engine):
        a, _ = merge_pair(engine, "1")
        rec = engine.merge_reports()[0]
        assert rec["prompt_id"] == a
        assert rec["report"]["verdict"] == "accept"
        merge_seq = [e.seq for e in engine.store.read_audit() if e.action is Action.MERGE][0]
        assert rec["audit_seq"] == merge_seq

    def test_curated_quota_blocks_dropping_seniors(self):
        # 10 merged prompts, 3 seniors: share 3/10 = 0.3 meets the floor.
        # Merging a women-only prompt gives 3/11 = 0.2727 < 0.3.
        engine = make_engine("curated", quotas={"seniors": 0.3})
        for i, groups in enumerate([("seniors",)] * 3 + [("women",)] * 7):
            p = engine.store.put(prompt(f"Prompt number {i}.", groups=groups))
            engine.store.set_status(p.id, Status.MERGED)
        a, b = add_pair(engine.store, "x", ("women",), ("seniors",))
        for pid in (a, b):
            engine.propose(pid, "alice")
        with pytest.raises(QuotaBlocked) as err:
            engine.merge(a, "maintainer", "ok")
        assert err.value.groups == ("seniors",)
        assert engine.store.get(a).status is Status.PROPOSED
        # the seniors-tagged counterpart raises the share to 4/11 and merges
        assert engine.merge(b, "maintainer", "ok").status is Status.MERGED


class TestQuotaCheck:
    def test_empty_store_feasible(self):
        assert quota_check(PromptStore(), prompt(groups=("women",)), {"seniors": 0.5}).feasible

    def test_share_stays_above_floor(self):
        store = merged_store([("women",)] * 4)
        res = quota_check(store, prompt("New.", groups=("seniors",)), {"women": 0.5})
        assert res.feasible and not res.violating  # 4/5 = 0.8

    def test_share_drops_below_floor(self):
        store = merged_store([("women",)] * 2 + [("seniors",)] * 2)
        res = quota_check(store, prompt("New.", groups=("seniors",)), {"women": 0.5})
        assert not res.feasible and res.violating == {"women"}  # 2/5 = 0.4

    def test_already_below_does_not_block(self):
        store = merged_store([("women",)] * 3)
        res = quota_check(store, prompt("New.", groups=("women",)), {"seniors": 0.2})
        assert res.feasible and res.below_quota == {"seniors"}


class TestIncidents:
    def veto_engine(self, state="veto_enabled"):
        engine = make_engine(state, recognized_orgs=frozenset({"access-mtl"}))
        a, b = merge_pair(engine, "1")
        return engine, a, b

    def test_veto_quarantines_immediately(self):
        engine, a, _ = self.veto_engine()
        inc = engine.flag(a, "access-mtl")
        assert engine.store.get(a).status is Status.QUARANTINED
        assert inc.state is IncidentState.QUARANTINED
        assert inc.quarantined_at == inc.flagged_at
        last = engine.store.read_audit()[-2:]
        assert [e.action for e in last] == [Action.FLAG, Action.QUARANTINE]

    def test_open_state_no_quarantine(self):
        engine, a, _ = self.veto_engine("open")
        inc = engine.flag(a, "access-mtl")
        assert inc.state is IncidentState.OPEN
        assert engine.store.get(a).status is Status.MERGED

    def test_unrecognized_org_no_quarantine(self):
        engine, a, _ = self.veto_engine()
        inc = engine.flag(a, "someone-else")
        assert inc.state is IncidentState.OPEN and inc.quarantined_at is None
        assert engine.store.get(a).status is Status.MERGED

    def test_flag_non_merged_is_illegal(self, engine):
        a, _ = add_pair(engine.store, "1")
        with pytest.raises(IllegalTransition):
            engine.flag(a, "org")

    def test_remediation_time(self):
        engine, a, _ = self.veto_engine()
        inc = engine.flag(a, "access-mtl")
        engine.clock.advance(hours=5)
        done = engine.review(inc.id, "maintainer", "remediate", "removed slur")
        assert done.time_to_remediation == 5.0
        assert engine.store.get(a).status is Status.RETIRED

    def test_dismiss_restores_merged(self):
        engine, a, _ = self.veto_engine()
        inc = engine.flag(a, "access-mtl")
        engine.review(inc.id, "maintainer", "dismiss", "no harm found")
        assert engine.store.get(a).status is Status.MERGED

    def test_review_remediated_is_illegal(self):
        engine, a, _ = self.veto_engine()
        inc = engine.flag(a, "access-mtl")
        engine.review(inc.id, "maintainer", "remediate", "x")
        with pytest.raises(IllegalTransition):
            engine.review(inc.id, "maintainer", "dismiss", "y")

    def test_begin_review_then_resolve(self):
        engine, a, _ = self.veto_engine()
        inc = engine.flag(a, "access-mtl")
        assert engine.begin_review(inc.id, "maintainer").state is IncidentState.UNDER_REVIEW
        assert engine.review(inc.id, "maintainer", "dismiss", "fine").state is IncidentState.DISMISSED

    def test_dismiss_keeps_quarantine_held_by_other_incident(self):
        engine, a, _ = self.veto_engine()
        engine.store.config.recognized_orgs = frozenset({"access-mtl", "seniors-council"})
        first = engine.flag(a, "access-mtl")
        engine.review(first.id, "maintainer", "dismiss", "fine")
        second = engine.flag(a, "seniors-council")
        third_inc = engine.incident(second.id)
        assert third_inc.holds_quarantine
        engine.appeal(first.id, "access-mtl")
        engine.review(first.id, "maintainer", "dismiss", "still fine")
        assert engine.store.get(a).status is Status.QUARANTINED

    def test_unknown_incident(self, engine):
        with pytest.raises(NotFound):
            engine.review("inc-999999", "m", "dismiss", "x")

    def test_unresolved_refs(self):
        engine, a, b = self.veto_engine("open")
        inc = engine.flag(a, "org")
        assert engine.unresolved_prompt_refs() == {a}
        engine.review(inc.id, "m", "dismiss", "x")
        assert engine.unresolved_prompt_refs() == set()


class TestSla:
    def test_appealed_and_unresolved_is_overdue(self):
        engine = make_engine("veto_enabled", recognized_orgs=frozenset({"org"}))
        a, _ = merge_pair(engine, "1")
        inc = engine.flag(a, "org")
        engine.review(inc.id, "m", "remediate", "x")
        t = engine.clock.now()
        engine.appeal(inc.id, "alice")
        engine.clock.set(t + 73 * H)
        assert engine.check_sla() == [inc.id]

    def test_resolved_before_deadline_not_listed(self):
        engine = make_engine("veto_enabled", recognized_orgs=frozenset({"org"}))
        a, _ = merge_pair(engine, "1")
        inc = engine.flag(a, "org")
        engine.review(inc.id, "m", "remediate", "x")
        t = engine.clock.now()
        engine.appeal(inc.id, "alice")
        engine.clock.set(t + 71 * H)
        engine.review(inc.id, "m", "dismiss", "appeal upheld")
        engine.clock.set(t + 500 * H)
        assert engine.check_sla() == []

    def test_boundary_is_strict(self):
        engine = make_engine("veto_enabled", recognized_orgs=frozenset({"org"}))
        a, _ = merge_pair(engine, "1")
        inc = engine.flag(a, "org")
        engine.clock.set(inc.flagged_at + 72 * H)
        assert engine.check_sla() == []
        engine.clock.advance(1)
        assert engine.check_sla() == [inc.id]

    def test_open_incidents_are_not_tracked(self):
        engine = make_engine("open")
        a, _ = merge_pair(engine, "1")
        engine.flag(a, "org")
        engine.clock.advance(hours=1000)
        assert engine.check_sla() == []

    def test_empty(self, engine):
        assert engine.check_sla() == []

    def test_check_sla_does_not_resolve(self):
        engine = make_engine("veto_enabled", recognized_orgs=frozenset({"org"}))
        a, _ = merge_pair(engine, "1")
        inc = engine.flag(a, "org")
        engine.clock.advance(hours=100)
        engine.check_sla()
        assert engine.incident(inc.id).state is IncidentState.QUARANTINED

    def test_repeated_appeals_rearm_deadline(self):
        engine = make_engine("open")
        a, _ = merge_pair(engine, "1")
        inc = engine.flag(a, "org")
        for n in (1, 2):
            engine.review(inc.id, "m", "dismiss", "x")
            engine.clock.advance(hours=10)
            inc = engine.appeal(inc.id, "alice")
            assert inc.appeals == n
            assert inc.sla_deadline == engine.clock.now() + 72 * H


class TestSanctions:
    def test_first_soft_fix(self, engine):
        rec = engine.sanction("bob", "soft_fix")
        assert rec.level == "soft_fix"
        assert engine.sanction_level("bob") == "soft_fix"
        assert engine.store.read_audit()[-1].action is Action.SANCTION

    def test_skip_rejected(self, engine):
        engine.sanction("bob", "soft_fix")
        with pytest.raises(LadderViolation):
            engine.sanction("bob", "temporary_suspension")

    def test_fresh_actor_cannot_start_at_warning(self, engine):
        with pytest.raises(LadderViolation):
            engine.sanction("bob", "warning")

    def test_repeat_and_lower_levels_allowed(self, engine):
        engine.sanction("bob", "soft_fix")
        engine.sanction("bob", "warning")
        engine.sanction("bob", "soft_fix")
        assert engine.sanction_level("bob") == "warning"

    def test_suspended_actor_cannot_propose(self, engine):
        a, _ = add_pair(engine.store, "1")
        for level in ("soft_fix", "warning", "temporary_suspension"):
            engine.sanction("bob", level)
        with pytest.raises(SuspendedActor):
            engine.propose(a, "bob")
        engine.lift_suspension("bob", "council", "served")
        assert engine.propose(a, "bob").status is Status.PROPOSED

    def test_unknown_level(self, engine):
        with pytest.raises(LadderViolation):
            engine.sanction("bob", "ban")


class TestStrikes:
    def test_strike_and_unstrike(self):
        engine = make_engine("open")
        seniors = set()
        for tag in "123":
            a, _ = merge_pair(engine, tag, ("seniors",), ("women",))
            seniors.add(a)
        selector = Selector(engine)
        before = len(selector.open_pool())
        assert engine.strike("seniors") == 3
        assert {p.id for p in engine.store.query(status="withdrawn")} == seniors
        assert len(selector.open_pool()) == before - 3
        assert engine.unstrike("seniors") == 3
        assert {p.id for p in engine.store.query(status="merged", group="seniors")} == seniors

    def test_unstrike_only_restores_own_group(self):
        engine = make_engine("open")
        a, b = merge_pair(engine, "1", ("seniors",), ("women",))
        engine.strike("seniors")
        engine.strike("women")
        engine.unstrike("seniors")
        assert engine.store.get(a).status is Status.MERGED
        assert engine.store.get(b).status is Status.WITHDRAWN
        assert engine.struck_groups() == {"women"}

    def test_strike_state_survives_reopen(self, tmp_path):
        clock = SimClock(0)
        store = PromptStore.init(tmp_path, clock=clock)
        engine = GovernanceEngine(store, clock)
        a, _ = merge_pair(engine, "1")
        engine.strike("seniors")
        again = GovernanceEngine.open(tmp_path, clock)
        assert again.unstrike("seniors") == 1
        assert again.store.get(a).status is Status.MERGED


class TestReplay:
    def test_replay_matches_snapshot(self):
        engine = make_engine("veto_enabled", recognized_orgs=frozenset({"org"}))
        a, b = merge_pair(engine, "1")
        c, d = merge_pair(engine, "2", ("lgbtq",), ("disability",))
        i1 = engine.flag(a, "org")
        engine.flag(b, "blog")
        engine.review(i1.id, "m", "remediate", "x")
        engine.appeal(i1.id, "alice")
        engine.strike("lgbtq")
        assert replay_audit(engine.store.read_audit()) == engine.snapshot()

    def test_replay_from_disk(self, tmp_path):
        clock = SimClock(0)
        from promptcommons.config import GovernanceConfig

        store = PromptStore.init(tmp_path, GovernanceConfig(state="veto", recognized_orgs=frozenset({"org"})), clock)
        engine = GovernanceEngine(store, clock)
        a, _ = merge_pair(engine, "1")
        inc = engine.flag(a, "org")
        engine.begin_review(inc.id, "m")
        again = GovernanceEngine.open(tmp_path, clock)
        assert again.snapshot() == engine.snapshot()
        assert replay_audit(again.store.read_audit()) == again.snapshot()

    def test_restored_status_rules(self):
        q = Incident("inc-1", "p", "o", 0, IncidentState.QUARANTINED, quarantined_at=0)
        r = Incident("inc-2", "p", "o", 0, IncidentState.REMEDIATED)
        assert restored_status(Status.QUARANTINED, []) is Status.MERGED
        assert restored_status(Status.QUARANTINED, [q]) is Status.QUARANTINED
        assert restored_status(Status.RETIRED, [q, r]) is Status.RETIRED
        assert restored_status(Status.WITHDRAWN, []) is Status.WITHDRAWN


def test_every_prompt_id_is_content_address(engine):
    a, b = add_pair(engine.store, "1")
    for pid in (a, b):
        p = engine.store.get(pid)
        assert pid == compute_id(p.text, p.author_groups, p.locale)
