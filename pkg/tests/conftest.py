from __future__ import annotations

from pathlib import Path

import pytest

from promptcommons.clock import SimClock
from promptcommons.config import GovernanceConfig
from promptcommons.engine import GovernanceEngine
from promptcommons.store import Prompt, PromptStore, compute_id

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def prompt(text="Shaded benches along the canal path.", groups=("seniors",), claim="safety", locale="Verdun", **kw):
    kw.setdefault("justification", "rest stops for older walkers")
    return Prompt(text=text, author_groups=frozenset(groups), locale=locale, value_claim=claim, **kw)


def add_pair(store, tag, groups_a=("seniors",), groups_b=("women",), actor="alice"):
    """Store two prompts that name each other as counter-prompts; return their ids."""
    a_text = f"Wide sidewalks with benches near stop {tag}."
    b_text = f"Street trees and planted verges near stop {tag}."
    a_id = compute_id(a_text, groups_a, "Verdun")
    b_id = compute_id(b_text, groups_b, "Verdun")
    store.put(prompt(a_text, groups_a, "safety", counter_prompt_ref=b_id), actor=actor)
    store.put(prompt(b_text, groups_b, "greenery", counter_prompt_ref=a_id), actor=actor)
    return a_id, b_id


def merge_pair(engine, tag, groups_a=("seniors",), groups_b=("women",)):
    ids = add_pair(engine.store, tag, groups_a, groups_b)
    for pid in ids:
        engine.propose(pid, "alice")
    for pid in ids:
        engine.merge(pid, "maintainer", "meets checklist")
    return ids


def make_engine(state="open", t0=1_000_000, **cfg) -> GovernanceEngine:
    clock = SimClock(t0)
    store = PromptStore(config=GovernanceConfig(state=state, **cfg), clock=clock)
    return GovernanceEngine(store, clock)


@pytest.fixture
def engine():
    return make_engine()


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def load_checklist_corpus():
    """Store seeded with the corpus's reference prompts, plus the labelled cases."""
    import json

    from promptcommons.vocab import Status

    store = PromptStore()
    refs, cases = {}, []
    for line in (FIXTURES / "checklist_corpus.jsonl").read_text(encoding="utf-8").splitlines():
        row = json.loads(line)
        if "store" in row:
            s = row["store"]
            p = store.put(prompt(s["text"], s["groups"], s["value_claim"], s["locale"], justification=s["justification"]))
            store.set_status(p.id, Status(s["status"]))
            refs[s["ref"]] = p.id
        else:
            cases.append(row)
    built = []
    for c in cases:
        d = c["prompt"]
        counter = d["counter"]
        built.append(
            (
                c["case"],
                Prompt(
                    text=d["text"],
                    author_groups=frozenset(d["groups"]),
                    locale=d["locale"],
                    value_claim=d["value_claim"],
                    justification=d["justification"],
                    accessibility_tags=frozenset(d["accessibility"]),
                    licence=d["licence"],
                    counter_prompt_ref=refs.get(counter, counter),
                ),
                c["expect"],
            )
        )
    return store, built


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
