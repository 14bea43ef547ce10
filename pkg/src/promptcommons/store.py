"""Content-addressed, semantically versioned prompt storage with an audit log.

Layout under a repository root::

    prompts/<id>.prompt   front matter + raw prompt text
    audit.log             one JSON AuditEntry per line, append-only
    incidents.log         one JSON Incident snapshot per line, append-only
    sanctions.log         one JSON SanctionRecord per line, append-only
    reports.log           validation reports recorded at merge time
    config.commons        GovernanceConfig

A store created without a root keeps everything in memory; the API is the
same, which is what the property tests and the simulator rely on.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import re
import unicodedata
from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

from .clock import Clock, Timestamp, WallClock
from .config import GovernanceConfig
from .errors import AuditError, InvalidPrompt, LicenceError, NotFound, RepositoryError, VocabularyError
from .vocab import ACCESSIBILITY_TAGS, LICENCES, Action, Status

ID_RE = re.compile(r"^[0-9a-f]{16}$")

PROMPTS_DIR = "prompts"
AUDIT_LOG = "audit.log"
CONFIG_FILE = "config.commons"
LOCK_FILE = ".lock"
RECORD_LOGS = ("incidents.log", "sanctions.log", "reports.log")


class Version(NamedTuple):
    major: int
    minor: int
    patch: int

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}.{self.patch}"

    @classmethod
    def parse(cls, text: str) -> "Version":
        parts = text.strip().split(".")
        if len(parts) != 3 or not all(p.isdigit() for p in parts):
            raise InvalidPrompt(f"bad version {text!r}")
        return cls(*(int(p) for p in parts))

    def bump(self, level: str) -> "Version":
        if level == "major":
            return Version(self.major + 1, 0, 0)
        if level == "minor":
            return Version(self.major, self.minor + 1, 0)
        if level == "patch":
            return Version(self.major, self.minor, self.patch + 1)
        raise ValueError(level)


INITIAL_VERSION = Version(1, 0, 0)


@dataclass(frozen=True)
class Prompt:
    text: str
    author_groups: frozenset[str]
    locale: str
    value_claim: str
    justification: str = ""
    accessibility_tags: frozenset[str] = frozenset()
    licence: str = "CC-BY-4.0"
    counter_prompt_ref: str | None = None
    id: str | None = None
    version: Version = INITIAL_VERSION
    status: Status = Status.DRAFT

    def __post_init__(self):
        # Accept plain iterables/strings from callers; store canonical types.
        object.__setattr__(self, "author_groups", frozenset(self.author_groups))
        object.__setattr__(self, "accessibility_tags", frozenset(self.accessibility_tags))
        if not isinstance(self.version, Version):
            v = self.version
            object.__setattr__(self, "version", Version.parse(v) if isinstance(v, str) else Version(*v))
        object.__setattr__(self, "status", Status(self.status))


@dataclass(frozen=True)
class AuditEntry:
    actor: str
    timestamp: Timestamp
    action: Action
    subject: str
    rationale: str
    issue_link: str | None = None
    seq: int = 0

    def __post_init__(self):
        object.__setattr__(self, "action", Action(self.action))

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "actor": self.actor,
            "timestamp": self.timestamp,
            "action": self.action.value,
            "subject": self.subject,
            "rationale": self.rationale,
            "issue_link": self.issue_link,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditEntry":
        return cls(
            seq=d["seq"],
            actor=d["actor"],
            timestamp=d["timestamp"],
            action=Action(d["action"]),
            subject=d["subject"],
            rationale=d["rationale"],
            issue_link=d.get("issue_link"),
        )


def canonical_text(text: str) -> str:
    return unicodedata.normalize("NFC", text).lower().strip()


def compute_id(text: str, author_groups: Iterable[str], locale: str) -> str:
    """First 64 bits (16 hex chars) of SHA-256 over the canonical form."""
    body = canonical_text(text)
    if not body:
        raise InvalidPrompt("prompt text is empty")
    canonical = f"{body}\n{','.join(sorted(author_groups))}\n{locale}"
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def bump_level(old: Prompt, new: Prompt) -> str | None:
    """Semantic-version level implied by the differences between two revisions."""
    if old.value_claim != new.value_claim or old.counter_prompt_ref != new.counter_prompt_ref:
        return "major"
    if old.text != new.text:
        return "minor"
    if (
        old.author_groups != new.author_groups
        or old.locale != new.locale
        or old.justification != new.justification
        or old.accessibility_tags != new.accessibility_tags
        or old.licence != new.licence
    ):
        return "patch"
    return None


# -- .prompt file format -------------------------------------------------

_FRONT = "---"


def dumps_prompt(p: Prompt) -> str:
    meta = [
        ("id", p.id or ""),
        ("version", str(p.version)),
        ("status", p.status.value),
        ("groups", ",".join(sorted(p.author_groups))),
        ("locale", p.locale),
        ("value_claim", p.value_claim),
        ("justification", p.justification),
        ("accessibility", ",".join(sorted(p.accessibility_tags))),
        ("licence", p.licence),
        ("counter_prompt", p.counter_prompt_ref or ""),
    ]
    head = "\n".join(f"{k}: {v}" if v else f"{k}:" for k, v in meta)
    return f"{_FRONT}\n{head}\n{_FRONT}\n{p.text}"


def loads_prompt(raw: str) -> Prompt:
    """Parse a ``.prompt`` document. Vocabulary is not checked here."""
    raw = raw.replace("\r\n", "\n")
    if not raw.startswith(_FRONT + "\n"):
        raise InvalidPrompt("missing front-matter block")
    end = raw.find(f"\n{_FRONT}\n", len(_FRONT))
    if end < 0:
        if raw.endswith(f"\n{_FRONT}"):
            end, text = len(raw) - len(_FRONT) - 1, ""
        else:
            raise InvalidPrompt("unterminated front-matter block")
    else:
        text = raw[end + len(_FRONT) + 2 :]
    meta: dict[str, str] = {}
    for line in raw[len(_FRONT) + 1 : end].split("\n"):
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise InvalidPrompt(f"bad front-matter line {line!r}")
        meta[key.strip()] = value.strip()

    def items(key: str) -> frozenset[str]:
        return frozenset(v.strip() for v in meta.get(key, "").split(",") if v.strip())

    return Prompt(
        id=meta.get("id") or None,
        version=Version.parse(meta.get("version") or "1.0.0"),
        status=Status(meta.get("status") or "draft"),
        author_groups=items("groups"),
        locale=meta.get("locale", ""),
        value_claim=meta.get("value_claim", ""),
        justification=meta.get("justification", ""),
        accessibility_tags=items("accessibility"),
        licence=meta.get("licence", ""),
        counter_prompt_ref=meta.get("counter_prompt") or None,
        text=text,
    )


# -- the store -------------------------------------------------------------


@dataclass
class PromptStore:
    root: Path | None = None
    config: GovernanceConfig = field(default_factory=GovernanceConfig)
    clock: Clock = field(default_factory=WallClock)
    _prompts: dict[str, Prompt] = field(default_factory=dict, repr=False)
    _audit: list[AuditEntry] = field(default_factory=list, repr=False)
    _records: dict[str, list[dict]] = field(default_factory=dict, repr=False)

    @classmethod
    def init(cls, root: Path, config: GovernanceConfig | None = None, clock: Clock | None = None) -> "PromptStore":
        root = Path(root)
        if (root / CONFIG_FILE).exists():
            raise RepositoryError(f"{root} is already a commons repository")
        config = config or GovernanceConfig()
        (root / PROMPTS_DIR).mkdir(parents=True, exist_ok=True)
        config.dump(root / CONFIG_FILE)
        for name in (AUDIT_LOG, LOCK_FILE, *RECORD_LOGS):
            (root / name).touch()
        return cls(root=root, config=config, clock=clock or WallClock())

    @classmethod
    def open(cls, root: Path, clock: Clock | None = None) -> "PromptStore":
        root = Path(root)
        if not (root / CONFIG_FILE).is_file():
            raise RepositoryError(f"no commons repository at {root}")
        store = cls(root=root, config=GovernanceConfig.load(root / CONFIG_FILE), clock=clock or WallClock())
        store._load()
        return store

    def _load(self) -> None:
        assert self.root is not None
        for path in sorted((self.root / PROMPTS_DIR).glob("*.prompt")):
            p = loads_prompt(path.read_text(encoding="utf-8"))
            if p.id != path.stem:
                raise RepositoryError(f"{path.name}: id field {p.id!r} does not match file name")
            self._prompts[p.id] = p
        for expected, line in enumerate(_read_lines(self.root / AUDIT_LOG), 1):
            entry = AuditEntry.from_dict(json.loads(line))
            if entry.seq != expected:
                raise RepositoryError(f"audit.log: expected seq {expected}, found {entry.seq}")
            self._audit.append(entry)
        for name in RECORD_LOGS:
            self._records[name] = [json.loads(line) for line in _read_lines(self.root / name)]

    @contextmanager
    def lock(self, exclusive: bool = True) -> Iterator[None]:
        """Repository lock: exclusive for writers, shared for readers."""
        path = self.root / LOCK_FILE if self.root is not None else None
        if path is None or not path.exists():
            yield
            return
        with open(path, "rb") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    # -- prompts -------------------------------------------------------------

    def _check_vocab(self, p: Prompt) -> None:
        if not p.author_groups:
            raise VocabularyError("author_groups must not be empty")
        if not p.locale:
            raise InvalidPrompt("locale must not be empty")
        unknown = p.author_groups - self.config.groups
        if unknown:
            raise VocabularyError(f"unknown group tag(s): {', '.join(sorted(unknown))}")
        if p.value_claim not in self.config.value_claims:
            raise VocabularyError(f"unknown value claim {p.value_claim!r}")
        unknown = p.accessibility_tags - ACCESSIBILITY_TAGS
        if unknown:
            raise VocabularyError(f"unknown accessibility tag(s): {', '.join(sorted(unknown))}")
        if p.licence not in LICENCES:
            raise LicenceError(f"licence {p.licence!r} not in {sorted(LICENCES)}")
        for name in ("locale", "value_claim", "justification", "licence"):
            if "\n" in getattr(p, name):
                raise InvalidPrompt(f"{name} must be a single line")
        if p.counter_prompt_ref is not None and not ID_RE.match(p.counter_prompt_ref):
            raise InvalidPrompt(f"counter_prompt_ref {p.counter_prompt_ref!r} is not a prompt id")

    def put(self, prompt: Prompt, actor: str = "system") -> Prompt:
        """Store a new prompt at 1.0.0/draft, or update an existing one.

        An update keeps the stored id and status and bumps the version by the
        most significant field that changed. Re-putting identical content is a
        no-op. Status is never taken from the caller.
        """
        prompt = replace(
            prompt,
            text=prompt.text.replace("\r\n", "\n"),
            locale=prompt.locale.strip(),
            value_claim=prompt.value_claim.strip(),
            justification=prompt.justification.strip(),
            licence=prompt.licence.strip(),
        )
        self._check_vocab(prompt)
        computed = compute_id(prompt.text, prompt.author_groups, prompt.locale)
        pid = prompt.id or computed
        if not ID_RE.match(pid):
            raise InvalidPrompt(f"bad prompt id {pid!r}")

        old = self._prompts.get(pid)
        if old is None:
            if pid != computed:
                raise NotFound(f"no prompt {pid} to update")
            stored = replace(prompt, id=pid, version=INITIAL_VERSION, status=Status.DRAFT)
            note = f"created at {INITIAL_VERSION}"
        else:
            level = bump_level(old, prompt)
            if level is None:
                return old
            stored = replace(prompt, id=pid, version=old.version.bump(level), status=old.status)
            note = f"{old.version} -> {stored.version} ({level})"

        self._write_prompt(stored)
        self.append_audit(AuditEntry(actor, self.clock.now(), Action.UPDATE, pid, note))
        return stored

    def _write_prompt(self, p: Prompt) -> None:
        self._prompts[p.id] = p
        if self.root is not None:
            path = self.root / PROMPTS_DIR / f"{p.id}.prompt"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(dumps_prompt(p), encoding="utf-8", newline="\n")
            os.replace(tmp, path)

    def set_status(self, pid: str, status: Status) -> Prompt:
        """Raw status write. Only the governance engine calls this."""
        p = replace(self.get(pid), status=Status(status))
        self._write_prompt(p)
        return p

    def get(self, pid: str) -> Prompt:
        try:
            return self._prompts[pid]
        except KeyError:
            raise NotFound(f"no prompt {pid}") from None

    def __contains__(self, pid: object) -> bool:
        return pid in self._prompts

    def __len__(self) -> int:
        return len(self._prompts)

    def query(
        self,
        group: str | None = None,
        locale: str | None = None,
        value_claim: str | None = None,
        status: Status | str | None = None,
    ) -> list[Prompt]:
        status = Status(status) if status is not None else None
        out = []
        for pid in sorted(self._prompts):
            p = self._prompts[pid]
            if group is not None and group not in p.author_groups:
                continue
            if locale is not None and p.locale != locale:
                continue
            if value_claim is not None and p.value_claim != value_claim:
                continue
            if status is not None and p.status is not status:
                continue
            out.append(p)
        return out

    # -- audit log -----------------------------------------------------------

    def append_audit(self, entry: AuditEntry) -> int:
        if not entry.rationale or not entry.rationale.strip():
            raise AuditError("audit rationale must be non-empty")
        if not entry.actor:
            raise AuditError("audit actor must be non-empty")
        entry = replace(entry, seq=len(self._audit) + 1)
        if self.root is not None:
            _append_line(self.root / AUDIT_LOG, entry.to_dict())
        self._audit.append(entry)
        return entry.seq

    def read_audit(self, start: int = 1, end: int | None = None) -> list[AuditEntry]:
        """Entries with ``start <= seq <= end`` in seq order."""
        end = len(self._audit) if end is None else end
        return self._audit[max(start, 1) - 1 : max(end, 0)]

    # -- other append-only logs ---------------------------------------------

    def append_record(self, log: str, record: dict) -> None:
        if log not in RECORD_LOGS:
            raise ValueError(f"unknown log {log}")
        if self.root is not None:
            _append_line(self.root / log, record)
        self._records.setdefault(log, []).append(record)

    def read_records(self, log: str) -> list[dict]:
        return list(self._records.get(log, ()))

    def save_config(self, config: GovernanceConfig) -> None:
        config.validate()
        self.config = config
        if self.root is not None:
            config.dump(self.root / CONFIG_FILE)


def _append_line(path: Path, record: dict) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record, ensure_ascii=False, sort_keys=False) + "\n")


def _read_lines(path: Path) -> list[str]:
    if not path.exists():
        return []
    return [line for line in path.read_text(encoding="utf-8").split("\n") if line.strip()]


def prompt_to_dict(p: Prompt) -> dict:
    d = asdict(p)
    d["author_groups"] = sorted(p.author_groups)
    d["accessibility_tags"] = sorted(p.accessibility_tags)
    d["version"] = str(p.version)
    d["status"] = p.status.value
    return d
