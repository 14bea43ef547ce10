import hashlib
import io
import json
import subprocess
import sys

import pytest

from promptcommons.cli import main
from promptcommons.store import PromptStore, compute_id

from conftest import FIXTURES

T0 = 1_700_000_000
H = 3600


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def tree_hash(root):
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(str(path.relative_to(root)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def audit_len(root):
    return len((root / "audit.log").read_text().splitlines())


@pytest.fixture(autouse=True)
def no_env_repo(monkeypatch):
    monkeypatch.delenv("COMMONS_REPO", raising=False)


def add_pair(repo, tag="1", groups=("seniors", "women"), at=T0):
    texts = (f"Benches and shade by the library {tag}.", f"Planted verges by the library {tag}.")
    ids = [compute_id(t, [g], "Verdun") for t, g in zip(texts, groups)]
    for text, group, claim, counter in zip(texts, groups, ("safety", "greenery"), reversed(ids)):
        code, _, err = run(
            "add", "--repo", repo, "--at", at, "--text", text, "--groups", group, "--locale", "Verdun",
            "--value-claim", claim, "--justification", "reason", "--counter", counter,
        )
        assert code == 0, err
    return ids


def merge_ids(repo, ids, at=T0):
    for pid in ids:
        assert run("propose", pid, "--repo", repo, "--at", at, "--actor", "alice")[0] == 0
    for pid in ids:
        code, _, err = run("merge", pid, "--repo", repo, "--at", at, "--actor", "maint", "--rationale", "ok")
        assert code == 0, err


@pytest.fixture
def repo(tmp_path):
    root = tmp_path / "repo"
    assert run("init", "--repo", root, "--state", "veto", "--recognized-org", "access-mtl", "--at", T0)[0] == 0
    return root


class TestBasics:
    def test_unknown_verb(self):
        code, _, _ = run("frobnicate")
        assert code == 1

    def test_no_verb(self):
        assert run()[0] == 1

    def test_missing_repo(self, tmp_path):
        code, _, err = run("list", "--repo", tmp_path / "nope")
        assert code == 1 and "no commons repository" in err

    def test_global_options_before_verb(self, repo):
        code, out, _ = run("--repo", repo, "--format", "jsonl", "list")
        assert code == 0 and out == ""

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "promptcommons", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("commons ")


class TestWorkflow:
    def test_add_propose_merge_list(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        code, out, _ = run("list", "--repo", repo, "--status", "merged", "--format", "jsonl")
        assert code == 0
        assert sorted(json.loads(line)["id"] for line in out.splitlines()) == sorted([a, b])

    def test_add_from_file(self, repo, tmp_path):
        f = tmp_path / "x.prompt"
        f.write_text("---\ngroups: lgbtq\nlocale: Village\nvalue_claim: conviviality\njustification: j\nlicence: CC-BY-4.0\n---\nRainbow crossing at Beaudry.\n")
        code, out, _ = run("add", f, "--repo", repo)
        assert code == 0 and "1.0.0 draft" in out

    def test_validate_rejected_prompt(self, tmp_path):
        code, out, err = run("validate", FIXTURES / "rejected.prompt", "--repo", tmp_path)
        assert code == 2
        assert "MAX_WORDS:error" in err
        assert out.strip().endswith("reject")

    def test_validate_stored_prompt(self, repo):
        a, b = add_pair(repo)
        run("propose", b, "--repo", repo, "--actor", "alice")
        code, _, err = run("validate", a, "--repo", repo)
        assert code == 0 and err == ""

    def test_validate_strict_warning(self, repo, tmp_path):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        f = tmp_path / "w.prompt"
        f.write_text(f"---\ngroups: disability\nlocale: Verdun\nvalue_claim: accessibility\njustification: j\nlicence: CC-BY-4.0\ncounter_prompt: {a}\n---\nA ramp at the pool.\n")
        assert run("validate", f, "--repo", repo)[0] == 0
        code, _, err = run("validate", f, "--repo", repo, "--strict")
        assert code == 2 and "ACCESSIBILITY_TAGS:warning" in err

    def test_refused_transition_exit_3(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        code, _, err = run("propose", a, "--repo", repo, "--actor", "alice")
        assert code == 3 and "expected draft" in err

    def test_checklist_failure_lists_diagnostics(self, repo):
        code, _, _ = run("add", "--repo", repo, "--text", "Solo prompt.", "--groups", "women", "--locale", "Verdun",
                         "--value-claim", "safety", "--justification", "j")
        pid = compute_id("Solo prompt.", ["women"], "Verdun")
        run("propose", pid, "--repo", repo, "--actor", "alice")
        code, _, err = run("merge", pid, "--repo", repo, "--actor", "m", "--rationale", "r")
        assert code == 3 and "COUNTER_PROMPT_EXISTS:error" in err

    def test_flag_review_appeal(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        code, out, _ = run("flag", a, "--repo", repo, "--org", "access-mtl", "--at", T0, "--format", "jsonl")
        inc = json.loads(out)
        assert code == 0 and inc["state"] == "quarantined"
        code, out, _ = run("review", inc["id"], "--repo", repo, "--actor", "m", "--decision", "remediate",
                           "--rationale", "fixed", "--at", T0 + 5 * H, "--format", "jsonl")
        assert json.loads(out)["time_to_remediation_hours"] == 5.0
        code, out, _ = run("appeal", inc["id"], "--repo", repo, "--actor", "alice", "--at", T0 + 6 * H)
        assert code == 0 and "appealed" in out

    def test_review_begin(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        run("flag", a, "--repo", repo, "--org", "access-mtl")
        code, out, _ = run("review", "inc-000001", "--repo", repo, "--actor", "m", "--begin")
        assert code == 0 and "under_review" in out

    def test_sanction_ladder(self, repo):
        assert run("sanction", "bob", "--repo", repo, "--level", "soft_fix")[0] == 0
        assert run("sanction", "bob", "--repo", repo, "--level", "temporary_suspension")[0] == 3

    def test_suspension_and_lift(self, repo):
        a, _ = add_pair(repo)
        for level in ("soft_fix", "warning", "temporary_suspension"):
            run("sanction", "bob", "--repo", repo, "--level", level)
        assert run("propose", a, "--repo", repo, "--actor", "bob")[0] == 3
        assert run("sanction", "bob", "--repo", repo, "--lift")[0] == 0
        assert run("propose", a, "--repo", repo, "--actor", "bob")[0] == 0

    def test_strike_and_lift(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        code, out, _ = run("strike", "seniors", "--repo", repo)
        assert code == 0 and "1 prompt(s) withdrawn" in out
        code, out, _ = run("strike", "seniors", "--repo", repo, "--lift")
        assert "1 prompt(s) restored" in out
        store = PromptStore.open(repo)
        assert store.get(a).status.value == "merged"


class TestSlaReport:
    def appealed(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        run("flag", a, "--repo", repo, "--org", "access-mtl", "--at", T0)
        run("review", "inc-000001", "--repo", repo, "--actor", "m", "--decision", "remediate", "--rationale", "x", "--at", T0 + H)
        run("appeal", "inc-000001", "--repo", repo, "--actor", "alice", "--at", T0 + 2 * H)
        return T0 + 2 * H

    def test_overdue_listed(self, repo):
        t = self.appealed(repo)
        code, out, _ = run("sla-report", "--repo", repo, "--at", t + 72 * H + 1, "--format", "jsonl")
        assert code == 0 and [json.loads(x)["id"] for x in out.splitlines()] == ["inc-000001"]

    def test_not_yet_overdue(self, repo):
        t = self.appealed(repo)
        code, out, _ = run("sla-report", "--repo", repo, "--at", t + 72 * H)
        assert out.strip() == "no overdue incidents"


class TestReadOnlyAndAudit:
    def test_read_verbs_do_not_mutate(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        run("flag", a, "--repo", repo, "--org", "blog")
        before = tree_hash(repo)
        for argv in (
            ("list",),
            ("stats",),
            ("sla-report",),
            ("bench", "--replay", FIXTURES / "figure3.log"),
            ("bench", "--items", FIXTURES / "benchmark.jsonl", "--adapter", "stub", "--methods", "M1", "M2", "M4"),
            ("sample", "--method", "M1", "--item-text", "Q"),
        ):
            code, _, err = run(*argv, "--repo", repo)
            assert code == 0, (argv, err)
        assert tree_hash(repo) == before

    def test_mutating_verbs_extend_audit(self, repo):
        a, b = add_pair(repo)
        steps = [
            ("propose", a, "--actor", "alice"),
            ("propose", b, "--actor", "alice"),
            ("merge", a, "--actor", "m", "--rationale", "ok"),
            ("merge", b, "--actor", "m", "--rationale", "ok"),
            ("flag", b, "--org", "blog"),
            ("review", "inc-000001", "--actor", "m", "--begin"),
            ("review", "inc-000001", "--actor", "m", "--decision", "dismiss", "--rationale", "fine"),
            ("appeal", "inc-000001", "--actor", "blog"),
            ("sanction", "bob", "--level", "soft_fix"),
            ("strike", "seniors"),
            ("strike", "seniors", "--lift"),
        ]
        for argv in steps:
            n = audit_len(repo)
            code, _, err = run(*argv, "--repo", repo)
            assert code == 0, (argv, err)
            assert audit_len(repo) > n, argv


class TestOutputFormats:
    def test_jsonl_round_trips(self, repo):
        a, b = add_pair(repo)
        merge_ids(repo, (a, b))
        for argv in (("list",), ("simulate", "--n", "5", "--raw"), ("bench", "--replay", FIXTURES / "figure3.log")):
            _, out, _ = run(*argv, "--repo", repo, "--format", "jsonl")
            for line in out.splitlines():
                assert json.dumps(json.loads(line), ensure_ascii=False, sort_keys=True) == line

    def test_bench_replay_table(self):
        code, out, _ = run("bench", "--replay", FIXTURES / "figure3.log")
        m0 = [line.split() for line in out.splitlines() if line.startswith("M0")][0]
        assert code == 0 and m0[1:] == ["100", "0.38", "0.38", "0.24", "0.76"]

    def test_simulate_byte_identical(self):
        first = run("simulate", "--state", "veto", "--n", "50", "--seed", "7")
        assert first == run("simulate", "--state", "veto", "--n", "50", "--seed", "7")
        assert first[1].splitlines()[1].startswith("veto_enabled,")

    def test_simulate_engine_matches_synthetic(self):
        _, synth, _ = run("simulate", "--seed", "3", "--n", "20", "--raw", "--format", "jsonl")
        _, eng, _ = run("simulate", "--seed", "3", "--n", "20", "--raw", "--engine", "--format", "jsonl")
        for s, e in zip(synth.splitlines(), eng.splitlines()):
            s, e = json.loads(s), json.loads(e)
            assert all(abs(x - y) <= 1e-9 for x, y in zip(s["samples"], e["samples"]))
            assert "sla_breach_fraction" in e

    def test_simulate_raw_count(self):
        _, out, _ = run("simulate", "--n", "2", "--mean", "open=6", "--mean", "curated=6", "--mean", "veto=6", "--raw", "--format", "jsonl")
        assert [len(json.loads(x)["samples"]) for x in out.splitlines()] == [2, 2, 2]

    def test_stats_corpus_dir(self, tmp_path):
        (tmp_path / "a.txt").write_text("a a b c")
        code, out, _ = run("stats", "--corpus", tmp_path, "--format", "jsonl")
        assert code == 0 and json.loads(out)["entropy_bits"] == 1.5

    def test_sample_m4_with_items(self, repo):
        for tag, groups in (("1", ("seniors", "women")), ("2", ("lgbtq", "disability"))):
            merge_ids(repo, add_pair(repo, tag, groups))
        code, out, _ = run("sample", "--repo", repo, "--method", "M4", "--items", FIXTURES / "benchmark.jsonl",
                           "--item", "item-003", "--adapter", "stub", "--format", "jsonl", "--seed", "4")
        rec = json.loads(out)
        assert code == 0 and len(rec["prompt_refs"]) == 4 and rec["outcome"] in ("Left", "Right", "Neutral")
        assert rec["text"].startswith("Deliberate and propose a compromise")


class TestRepoResolution:
    def test_env_overrides_flag(self, repo, tmp_path, monkeypatch):
        monkeypatch.setenv("COMMONS_REPO", str(repo))
        add_pair(repo)
        code, out, _ = run("list", "--repo", tmp_path / "elsewhere")
        assert code == 0 and len(out.splitlines()) == 2

    def test_cwd_default(self, repo, monkeypatch):
        monkeypatch.chdir(repo)
        assert run("list")[0] == 0
