"""``commons`` command-line entry point.

Exit codes: 0 success/accept, 1 operational error, 2 validation reject,
3 governance transition refused.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from functools import lru_cache
from pathlib import Path

from . import __version__
from .checklist import validate
from .clock import SimClock, WallClock
from .config import GovernanceConfig
from .engine import GovernanceEngine
from .errors import CommonsError
from .metrics import DEFAULT_TERMS, corpus_stats, summarize_outcomes
from .rng import ShiftRegister64
from .sampler import (
    BenchmarkItem,
    HttpAdapter,
    Method,
    ReplayAdapter,
    Selector,
    StubAdapter,
    compose,
    load_items,
    load_outcome_log,
    run_trial,
)
from .simulator import DEFAULT_MEANS, STATE_ORDER, SimConfig, run_engine_stress, run_synthetic
from .store import Prompt, PromptStore, loads_prompt, prompt_to_dict
from .vocab import SANCTION_LADDER, GovernanceState, Status

EXIT_OK, EXIT_ERROR, EXIT_REJECT, EXIT_REFUSED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


class Output:
    def __init__(self, fmt: str, out=None, err=None):
        self.jsonl = fmt == "jsonl"
        self.out = out or sys.stdout
        self.err = err or sys.stderr

    def record(self, obj: dict, text: str | None = None) -> None:
        if self.jsonl:
            self.out.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
        elif text is not None:
            self.out.write(text + "\n")

    def text(self, line: str) -> None:
        if not self.jsonl:
            self.out.write(line + "\n")

    def diag(self, line: str) -> None:
        self.err.write(line + "\n")


def _repo_path(args) -> Path:
    # the environment wins over --repo, so scripted runs can be pinned
    return Path(os.environ.get("COMMONS_REPO") or getattr(args, "repo", None) or ".")


def _clock(args):
    return SimClock(args.at) if args.at is not None else WallClock()


def _engine(args) -> GovernanceEngine:
    clock = _clock(args)
    return GovernanceEngine(PromptStore.open(_repo_path(args), clock=clock), clock)


def _prompt_line(p: Prompt) -> str:
    return f"{p.id}  {p.version}  {p.status.value:<11}  {p.value_claim:<13}  {','.join(sorted(p.author_groups))}  {p.locale}"


def _incident_dict(inc) -> dict:
    d = inc.to_dict()
    d["time_to_remediation_hours"] = inc.time_to_remediation
    return d


# -- verbs -------------------------------------------------------------------


def cmd_init(args, out: Output) -> int:
    quotas = dict(_pair(q) for q in args.quota)
    config = GovernanceConfig(
        state=GovernanceState.parse(args.state),
        quotas={g: float(v) for g, v in quotas.items()},
        appeal_sla_hours=args.sla,
        recognized_orgs=frozenset(args.recognized_org),
        org_groups=dict(_pair(x) for x in args.org_group),
        baseline_prompt=args.baseline,
    )
    root = _repo_path(args)
    PromptStore.init(root, config, clock=_clock(args))
    out.record({"repo": str(root), "state": config.state.value}, f"initialized {config.state.value} commons at {root}")
    return EXIT_OK


def _pair(text: str) -> tuple[str, str]:
    k, sep, v = text.partition("=")
    if not sep:
        raise CommonsError(f"expected name=value, got {text!r}")
    return k.strip(), v.strip()


def _split(text: str | None) -> frozenset[str]:
    return frozenset(x.strip() for x in (text or "").split(",") if x.strip())


def _prompt_from_args(args) -> Prompt:
    if args.file:
        p = loads_prompt(Path(args.file).read_text(encoding="utf-8"))
        return p
    if not args.text:
        raise CommonsError("add needs a .prompt file or --text")
    return Prompt(
        id=args.id,
        text=args.text,
        author_groups=_split(args.groups),
        locale=args.locale or "",
        value_claim=args.value_claim or "",
        justification=args.justification or "",
        accessibility_tags=_split(args.accessibility),
        licence=args.licence,
        counter_prompt_ref=args.counter,
    )


def cmd_add(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        p = engine.store.put(_prompt_from_args(args), actor=args.actor)
    out.record(prompt_to_dict(p), f"{p.id} {p.version} {p.status.value}")
    return EXIT_OK


def cmd_validate(args, out: Output) -> int:
    target = Path(args.target)
    store = None
    try:
        store = PromptStore.open(_repo_path(args))
    except CommonsError:
        if not target.is_file():
            raise
    config = store.config if store is not None else GovernanceConfig()
    if target.is_file():
        prompt = loads_prompt(target.read_text(encoding="utf-8"))
    else:
        prompt = store.get(args.target)
    report = validate(prompt, store, config)
    for f in report.findings:
        if out.jsonl:
            out.record({"prompt_id": report.prompt_id, **f.to_dict()})
        else:
            out.diag(f.diagnostic())
    rejected = not report.accepted or (args.strict and report.findings)
    verdict = "reject" if rejected else "accept"
    if not out.jsonl:
        out.text(f"{prompt.id or target}: {verdict}")
    return EXIT_REJECT if rejected else EXIT_OK


def cmd_propose(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        p = engine.propose(args.id, args.actor, args.rationale)
    out.record(prompt_to_dict(p), f"{p.id} proposed")
    return EXIT_OK


def cmd_merge(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        try:
            p = engine.merge(args.id, args.actor, args.rationale, issue_link=args.issue)
        except CommonsError as exc:
            report = getattr(exc, "report", None)
            if report is not None:
                for f in report.errors:
                    out.diag(f.diagnostic())
            raise
    out.record(prompt_to_dict(p), f"{p.id} merged at {p.version}")
    return EXIT_OK


def cmd_list(args, out: Output) -> int:
    store = PromptStore.open(_repo_path(args))
    with store.lock(exclusive=False):
        prompts = store.query(group=args.group, locale=args.locale, value_claim=args.value_claim, status=args.status)
    for p in prompts:
        out.record(prompt_to_dict(p), _prompt_line(p))
    return EXIT_OK


def cmd_flag(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        inc = engine.flag(args.id, args.org, rationale=args.rationale)
    out.record(_incident_dict(inc), f"{inc.id} {inc.state.value} (prompt {inc.prompt_ref})")
    return EXIT_OK


def cmd_review(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        if args.begin:
            inc = engine.begin_review(args.incident, args.actor)
        else:
            if not args.decision or not args.rationale:
                raise CommonsError("review needs --decision and --rationale (or --begin)")
            inc = engine.review(args.incident, args.actor, args.decision, args.rationale)
    out.record(_incident_dict(inc), f"{inc.id} {inc.state.value}")
    return EXIT_OK


def cmd_appeal(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        inc = engine.appeal(args.incident, args.actor, rationale=args.rationale)
    out.record(_incident_dict(inc), f"{inc.id} appealed; deadline {inc.sla_deadline}")
    return EXIT_OK


def cmd_sanction(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        if args.lift:
            rec = engine.lift_suspension(args.actor, args.by, args.rationale or "suspension lifted")
        else:
            if not args.level:
                raise CommonsError("sanction needs --level or --lift")
            rec = engine.sanction(args.actor, args.level, args.by, args.rationale)
    out.record(rec.to_dict(), f"{rec.actor}: {rec.level}")
    return EXIT_OK


def cmd_strike(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock():
        if args.lift:
            n = engine.unstrike(args.group, args.actor)
        else:
            n = engine.strike(args.group, args.actor)
    verb = "restored" if args.lift else "withdrawn"
    out.record({"group": args.group, verb: n}, f"{n} prompt(s) {verb} for {args.group}")
    return EXIT_OK


def cmd_sla_report(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock(exclusive=False):
        overdue = engine.check_sla()
        for iid in overdue:
            inc = engine.incident(iid)
            out.record(_incident_dict(inc), f"{iid} {inc.state.value} overdue since {inc.sla_deadline}")
    if not overdue:
        out.text("no overdue incidents")
    return EXIT_OK


def _item(args) -> BenchmarkItem:
    if args.items:
        items = {it.item_id: it for it in load_items(args.items)}
        if args.item not in items:
            raise CommonsError(f"item {args.item!r} not in {args.items}")
        return items[args.item]
    return BenchmarkItem(args.item or "adhoc", args.item_text or "")


def _adapter(args):
    if args.adapter == "replay":
        if not args.fixture:
            raise CommonsError("--adapter replay needs --fixture")
        return ReplayAdapter.from_file(args.fixture)
    if args.adapter == "http":
        if not args.url:
            raise CommonsError("--adapter http needs --url")
        return HttpAdapter(args.url)
    return StubAdapter()


def cmd_sample(args, out: Output) -> int:
    engine = _engine(args)
    with engine.store.lock(exclusive=False):
        selection = Selector(engine, k=args.k).select(args.method, ShiftRegister64(args.seed))
    composed = compose(selection, _item(args), args.method)
    record = {
        "method": composed.method.value,
        "item_id": composed.benchmark_item_id,
        "prompt_refs": list(composed.prompt_refs),
        "text": composed.text,
    }
    if args.adapter:
        record["outcome"] = run_trial(composed, _adapter(args)).outcome.value
    text = f"# {composed.method.value} {' '.join(composed.prompt_refs)}\n{composed.text}"
    if "outcome" in record:
        text += f"\n# outcome: {record['outcome']}"
    out.record(record, text)
    return EXIT_OK


def cmd_bench(args, out: Output) -> int:
    if args.replay:
        records = load_outcome_log(args.replay)
    else:
        if not args.items:
            raise CommonsError("bench needs --replay FIXTURE or --items FILE")
        engine = _engine(args)
        adapter = _adapter(args)
        selector = Selector(engine, k=args.k)
        records = []
        with engine.store.lock(exclusive=False):
            for m, method in enumerate(args.methods):
                rng = ShiftRegister64.substream(args.seed, m)
                for item in load_items(args.items):
                    composed = compose(selector.select(method, rng), item, method)
                    records.append(run_trial(composed, adapter))
    present = {r.method for r in records}
    methods = [m for m in Method if m in present]
    summaries = summarize_outcomes(records, methods)
    out.text(f"{'method':<6} {'n':>5} {'left':>6} {'right':>6} {'neutral':>8} {'D':>6}")
    for m in methods:
        s = summaries[m]
        out.record(
            s.to_dict(),
            f"{m.value:<6} {s.n:>5} {s.p_left:>6.2f} {s.p_right:>6.2f} {s.p_neutral:>8.2f} {s.decisiveness:>6.2f}",
        )
    return EXIT_OK


def cmd_simulate(args, out: Output) -> int:
    states = STATE_ORDER if args.state == "all" else (GovernanceState.parse(args.state),)
    means = dict(DEFAULT_MEANS)
    for entry in args.mean:
        k, v = _pair(entry)
        means[GovernanceState.parse(k)] = float(v)
    config = SimConfig(means=means, n_incidents=args.n, seed=args.seed)

    if args.engine:
        results = {}
        for state in states:
            engine = GovernanceEngine(
                PromptStore(config=GovernanceConfig(state=state, appeal_sla_hours=args.sla, recognized_orgs=frozenset({"sim-org"}))),
                SimClock(0),
            )
            stress = run_engine_stress(config, engine, engine.clock)
            results[state] = (stress.summary, stress.breach_fraction)
    else:
        results = {s: (r, None) for s, r in run_synthetic(config, states).items()}

    out.text("state,mean,ci95,n" + (",sla_breach_fraction" if args.engine else ""))
    for state, (res, breach) in results.items():
        rec = {"state": state.value, "mean": res.mean, "ci95": res.half_width, "n": len(res.samples)}
        line = f"{state.value},{res.mean:.6f},{res.half_width:.6f},{len(res.samples)}"
        if breach is not None:
            rec["sla_breach_fraction"] = breach
            line += f",{breach:.6f}"
        if args.raw:
            rec["samples"] = list(res.samples)
        out.record(rec, line)
    if args.raw and not out.jsonl:
        for state, (res, _) in results.items():
            out.text(f"{state.value}:raw," + ",".join(f"{x:.9f}" for x in res.samples))
    return EXIT_OK


def _corpus_texts(path: Path) -> list[str]:
    texts = []
    for f in sorted(path.rglob("*")):
        if f.suffix == ".prompt":
            texts.append(loads_prompt(f.read_text(encoding="utf-8")).text)
        elif f.suffix == ".txt":
            texts.append(f.read_text(encoding="utf-8"))
    return texts


def cmd_stats(args, out: Output) -> int:
    if args.corpus:
        texts = _corpus_texts(Path(args.corpus))
    else:
        store = PromptStore.open(_repo_path(args))
        with store.lock(exclusive=False):
            texts = [p.text for p in store.query()]
    stats = corpus_stats(texts, terms=args.term or DEFAULT_TERMS)
    if out.jsonl:
        out.record(stats.to_dict())
    else:
        out.text(f"prompts        {stats.n_prompts}")
        out.text(f"mean words     {stats.mean_words:.2f}")
        out.text(f"median words   {stats.median_words:g}")
        out.text(f"entropy bits   {stats.entropy_bits:.4f}")
        out.text("top tokens     " + ", ".join(f"{t} ({c})" for t, c in stats.top_tokens))
        for term, share in stats.term_proportions.items():
            out.text(f"term {term:<12} {share:.3%}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


@lru_cache(maxsize=1)
def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--repo", default=argparse.SUPPRESS, help="repository root (default .; COMMONS_REPO overrides)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--at", type=int, default=argparse.SUPPRESS, help="simulated time, epoch seconds")
    common.add_argument("--format", choices=("text", "jsonl"), default=argparse.SUPPRESS)

    parser = _Parser(prog="commons", description="Governed prompt commons.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--repo", default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--at", type=int, default=None)
    parser.add_argument("--format", choices=("text", "jsonl"), default="text")
    sub = parser.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)

    def verb(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = verb("init", cmd_init, "create a repository")
    p.add_argument("--state", default="open", choices=("open", "curated", "veto", "veto_enabled"))
    p.add_argument("--sla", type=int, default=72, help="appeal SLA in hours")
    p.add_argument("--quota", action="append", default=[], metavar="GROUP=SHARE")
    p.add_argument("--recognized-org", action="append", default=[])
    p.add_argument("--org-group", action="append", default=[], metavar="ORG=GROUP")
    p.add_argument("--baseline", help="prompt id used by M0")

    p = verb("add", cmd_add, "add or update a prompt")
    p.add_argument("file", nargs="?")
    p.add_argument("--id", help="update this prompt id")
    p.add_argument("--text")
    p.add_argument("--groups")
    p.add_argument("--locale")
    p.add_argument("--value-claim")
    p.add_argument("--justification")
    p.add_argument("--accessibility")
    p.add_argument("--licence", default="CC-BY-4.0")
    p.add_argument("--counter")
    p.add_argument("--actor", default="contributor")

    p = verb("validate", cmd_validate, "run the curation checklist")
    p.add_argument("target", help=".prompt file or prompt id")
    p.add_argument("--strict", action="store_true", help="warnings also reject")

    p = verb("propose", cmd_propose, "draft -> proposed")
    p.add_argument("id")
    p.add_argument("--actor", required=True)
    p.add_argument("--rationale")

    p = verb("merge", cmd_merge, "proposed -> merged")
    p.add_argument("id")
    p.add_argument("--actor", required=True)
    p.add_argument("--rationale", required=True)
    p.add_argument("--issue")

    p = verb("list", cmd_list, "list prompts")
    p.add_argument("--group")
    p.add_argument("--locale")
    p.add_argument("--value-claim")
    p.add_argument("--status", choices=[s.value for s in Status])

    p = verb("flag", cmd_flag, "flag a merged prompt")
    p.add_argument("id")
    p.add_argument("--org", required=True)
    p.add_argument("--rationale")

    p = verb("review", cmd_review, "resolve an incident")
    p.add_argument("incident")
    p.add_argument("--actor", required=True)
    p.add_argument("--decision", choices=("remediate", "dismiss"))
    p.add_argument("--rationale")
    p.add_argument("--begin", action="store_true", help="only mark the incident under review")

    p = verb("appeal", cmd_appeal, "appeal a resolved incident")
    p.add_argument("incident")
    p.add_argument("--actor", required=True)
    p.add_argument("--rationale")

    p = verb("sanction", cmd_sanction, "apply a graduated sanction")
    p.add_argument("actor")
    p.add_argument("--level", choices=SANCTION_LADDER)
    p.add_argument("--lift", action="store_true", help="lift a temporary suspension")
    p.add_argument("--by", default="maintainers")
    p.add_argument("--rationale")

    p = verb("strike", cmd_strike, "withdraw (or --lift to restore) a group's prompts")
    p.add_argument("group")
    p.add_argument("--lift", action="store_true")
    p.add_argument("--actor", default="commons")

    verb("sla-report", cmd_sla_report, "list incidents past their SLA deadline")

    def trial_args(p):
        p.add_argument("--k", type=int, default=4, help="M4 ensemble size")
        p.add_argument("--items", help="benchmark items (JSON lines)")
        p.add_argument("--adapter", choices=("stub", "replay", "http"))
        p.add_argument("--fixture", help="outcome log for the replay adapter")
        p.add_argument("--url", help="completion endpoint for the http adapter")

    p = verb("sample", cmd_sample, "select and compose one model input")
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--item", help="benchmark item id")
    p.add_argument("--item-text")
    trial_args(p)

    p = verb("bench", cmd_bench, "summarize outcomes per method")
    p.add_argument("--replay", help="outcome log (method,item_id,outcome)")
    p.add_argument("--methods", nargs="+", default=[m.value for m in Method], choices=[m.value for m in Method])
    trial_args(p)

    p = verb("simulate", cmd_simulate, "synthetic remediation-time experiment")
    p.add_argument("--state", default="all", choices=("open", "curated", "veto", "veto_enabled", "all"))
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--mean", action="append", default=[], metavar="STATE=HOURS")
    p.add_argument("--engine", action="store_true", help="route incidents through the governance engine")
    p.add_argument("--sla", type=int, default=72)
    p.add_argument("--raw", action="store_true")

    p = verb("stats", cmd_stats, "corpus statistics")
    p.add_argument("--corpus", help="directory of .prompt or .txt files (default: repository prompts)")
    p.add_argument("--term", action="append", help="term to report as a share of prompts")

    return parser


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    parser = build_parser()
    stderr = stderr or sys.stderr
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(stderr)
        return EXIT_ERROR
    out = Output(args.format, stdout, stderr)
    try:
        return args.func(args, out)
    except CommonsError as exc:
        out.diag(f"error: {exc}")
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        out.diag(f"error: {exc}")
        return EXIT_ERROR


def entry() -> None:
    sys.exit(main())
