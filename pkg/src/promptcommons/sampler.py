"""Prompt selection (methods M0-M4), input composition and outcome adapters."""

from __future__ import annotations

import hashlib
import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .checklist import validate
from .errors import AdapterUnavailable, ConfigError, EmptyPool, MissingFixture, NotFound
from .rng import ShiftRegister64
from .store import Prompt
from .vocab import Status

AGGREGATOR_INSTRUCTION = "Deliberate and propose a compromise that weighs the community perspectives below."

EXCLUDED_STATUSES = frozenset({Status.WITHDRAWN, Status.QUARANTINED, Status.RETIRED})


class Method(str, Enum):
    M0 = "M0"  # single author baseline
    M1 = "M1"  # open commons
    M2 = "M2"  # curated commons
    M3 = "M3"  # veto-enabled
    M4 = "M4"  # weighted ensemble


class Outcome(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"
    NEUTRAL = "Neutral"


_OUTCOME_ORDER = (Outcome.LEFT, Outcome.RIGHT, Outcome.NEUTRAL)


@dataclass(frozen=True)
class BenchmarkItem:
    item_id: str
    text: str
    left: str = ""
    right: str = ""
    neutral: str = ""

    def render(self) -> str:
        if not (self.left or self.right or self.neutral):
            return self.text
        return f"{self.text}\nLeft: {self.left}\nRight: {self.right}\nNeutral: {self.neutral}"


@dataclass(frozen=True)
class ComposedInput:
    method: Method
    benchmark_item_id: str
    prompt_refs: tuple[str, ...]
    text: str


@dataclass(frozen=True)
class OutcomeRecord:
    method: Method
    item_id: str
    outcome: Outcome
    prompt_refs: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "item_id": self.item_id,
            "outcome": self.outcome.value,
            "prompt_refs": list(self.prompt_refs),
        }


def load_items(path: Path) -> list[BenchmarkItem]:
    """Benchmark items, one JSON object per line."""
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            items.append(BenchmarkItem(d["item_id"], d["text"], d.get("left", ""), d.get("right", ""), d.get("neutral", "")))
    return items


def parse_outcome_log(text: str) -> list[OutcomeRecord]:
    """Parse ``method,item_id,outcome`` lines (``#`` comments allowed)."""
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected method,item_id,outcome")
        records.append(OutcomeRecord(Method(parts[0]), parts[1], Outcome(parts[2])))
    return records


def load_outcome_log(path: Path) -> list[OutcomeRecord]:
    return parse_outcome_log(Path(path).read_text(encoding="utf-8"))


# -- selection -------------------------------------------------------------


class Selector:
    """Chooses prompts from an engine's current pool.

    The pool is re-read on every call, so strikes, quarantines and
    retirements take effect immediately.
    """

    def __init__(self, engine, k: int = 4):
        if k < 2:
            raise ConfigError("M4 ensemble size k must be at least 2")
        self.engine = engine
        self.k = k

    @property
    def store(self):
        return self.engine.store

    def open_pool(self) -> list[Prompt]:
        return self.store.query(status=Status.MERGED)

    def curated_pool(self) -> list[Prompt]:
        cfg = self.store.config
        return [p for p in self.open_pool() if validate(p, self.store, cfg).accepted]

    def veto_pool(self) -> list[Prompt]:
        flagged = self.engine.unresolved_prompt_refs()
        return [p for p in self.curated_pool() if p.id not in flagged]

    def pool(self, method: Method) -> list[Prompt]:
        method = Method(method)
        if method is Method.M0:
            return [self._baseline()]
        if method is Method.M2:
            return self.curated_pool()
        if method is Method.M3:
            return self.veto_pool()
        return self.open_pool()

    def _baseline(self) -> Prompt:
        pid = self.store.config.baseline_prompt
        if not pid:
            raise ConfigError("M0 needs baseline_prompt in the commons config")
        try:
            p = self.store.get(pid)
        except NotFound:
            raise EmptyPool(f"baseline prompt {pid} is not in the repository") from None
        if p.status in EXCLUDED_STATUSES:
            raise EmptyPool(f"baseline prompt {pid} is {p.status.value}")
        return p

    def select(self, method: Method, rng: ShiftRegister64) -> list[Prompt]:
        method = Method(method)
        if method is Method.M0:
            return [self._baseline()]
        pool = self.pool(method)
        if not pool:
            raise EmptyPool(f"no eligible prompts for {method.value}")
        if method is Method.M4:
            return stratified_draw(pool, self.k, rng, self.store.config.group_weights)
        return [rng.choice(pool)]


def stratified_draw(pool: list[Prompt], k: int, rng: ShiftRegister64, weights: dict[str, float] | None = None) -> list[Prompt]:
    """One uniform prompt per group, groups visited in a seeded random order.

    Group order is a weighted random permutation (key ``u ** (1/w)``,
    descending); with unit weights that is a uniform shuffle. When groups run
    out before ``k`` prompts are chosen, the rest are drawn uniformly from the
    prompts not yet selected.
    """
    weights = weights or {}
    pool = sorted(pool, key=lambda p: p.id)
    groups = sorted({g for p in pool for g in p.author_groups})
    keys = {g: rng.random() ** (1.0 / weights.get(g, 1.0)) for g in groups}
    order = sorted(groups, key=lambda g: (-keys[g], g))

    chosen: list[Prompt] = []
    taken: set[str] = set()
    for g in order:
        if len(chosen) == k:
            break
        candidates = [p for p in pool if g in p.author_groups and p.id not in taken]
        if candidates:
            p = rng.choice(candidates)
            chosen.append(p)
            taken.add(p.id)
    while len(chosen) < k:
        rest = [p for p in pool if p.id not in taken]
        if not rest:
            break
        p = rng.choice(rest)
        chosen.append(p)
        taken.add(p.id)
    return chosen


# -- composition -----------------------------------------------------------


def compose(selection: list[Prompt], item: BenchmarkItem | str, method: Method = Method.M1) -> ComposedInput:
    if not selection:
        raise ValueError("selection must not be empty")
    method = Method(method)
    if isinstance(item, str):
        item = BenchmarkItem(item_id="", text=item)
    body = item.render()
    if method is Method.M4:
        numbered = "\n".join(f"{i}. {p.text}" for i, p in enumerate(selection, 1))
        text = f"{AGGREGATOR_INSTRUCTION}\n\n{numbered}\n\n{body}"
    else:
        text = f"{selection[0].text}\n\n{body}"
    return ComposedInput(method, item.item_id, tuple(p.id for p in selection), text)


# -- adapters --------------------------------------------------------------


class ReplayAdapter:
    """Outcomes looked up from a fixture log keyed by (method, item)."""

    def __init__(self, records: list[OutcomeRecord]):
        self._table: dict[tuple[Method, str], Outcome] = {}
        for r in records:
            key = (r.method, r.item_id)
            if key in self._table and self._table[key] is not r.outcome:
                raise ValueError(f"conflicting fixture outcomes for {r.method.value},{r.item_id}")
            self._table[key] = r.outcome

    @classmethod
    def from_file(cls, path: Path) -> "ReplayAdapter":
        return cls(load_outcome_log(path))

    def __call__(self, composed: ComposedInput) -> Outcome:
        try:
            return self._table[(composed.method, composed.benchmark_item_id)]
        except KeyError:
            raise MissingFixture(f"no fixture for {composed.method.value},{composed.benchmark_item_id}") from None


class StubAdapter:
    """Deterministic placeholder: SHA-256 of the composed text, mod 3."""

    def __call__(self, composed: ComposedInput) -> Outcome:
        digest = int.from_bytes(hashlib.sha256(composed.text.encode("utf-8")).digest(), "big")
        return _OUTCOME_ORDER[digest % 3]


_NEUTRAL_RE = re.compile(r"neutral|compromise", re.IGNORECASE)
_LEFT_RE = re.compile(r"left", re.IGNORECASE)
_RIGHT_RE = re.compile(r"right", re.IGNORECASE)


def parse_label(text: str) -> Outcome:
    if _NEUTRAL_RE.search(text):
        return Outcome.NEUTRAL
    if _LEFT_RE.search(text):
        return Outcome.LEFT
    if _RIGHT_RE.search(text):
        return Outcome.RIGHT
    raise AdapterUnavailable(f"no outcome label in response: {text[:80]!r}")


class HttpAdapter:
    """POSTs ``{"prompt": text}`` to a completion endpoint.

    The response may be plain text or JSON with a ``text`` field.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, composed: ComposedInput) -> Outcome:
        body = json.dumps({"prompt": composed.text}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read().decode("utf-8", errors="replace")
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise AdapterUnavailable(f"{self.url}: {exc}") from exc
        try:
            payload = json.loads(raw)
            if isinstance(payload, dict) and isinstance(payload.get("text"), str):
                raw = payload["text"]
        except json.JSONDecodeError:
            pass
        return parse_label(raw)


def run_trial(composed: ComposedInput, adapter) -> OutcomeRecord:
    return OutcomeRecord(composed.method, composed.benchmark_item_id, adapter(composed), composed.prompt_refs)
