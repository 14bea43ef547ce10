"""Outcome proportions, decisiveness, satisfaction, Gini, corpus statistics, CIs."""

from __future__ import annotations

import math
import statistics
import unicodedata
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .checklist import word_count
from .errors import DegenerateInput, EmptyInput, InsufficientData, LikertRangeError
from .sampler import Method, Outcome, OutcomeRecord

Z95 = 1.96
DEFAULT_TERMS = ("wheelchair", "metro", "biodiversity", "lgbtq+", "indigenous")


@dataclass(frozen=True)
class OutcomeSummary:
    method: Method
    n: int
    p_left: float
    p_right: float
    p_neutral: float
    decisiveness: float

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "n": self.n,
            "p_left": self.p_left,
            "p_right": self.p_right,
            "p_neutral": self.p_neutral,
            "decisiveness": self.decisiveness,
        }


def summarize_outcomes(records: Iterable[OutcomeRecord], methods: Sequence[Method] | None = None) -> dict[Method, OutcomeSummary]:
    """Exact per-method proportions; D = 1 - p_neutral.

    Arithmetic is done in rationals and rounded once, so a fixture of 24
    neutral outcomes in 100 gives exactly the float nearest 0.76.
    """
    counts: dict[Method, Counter] = {}
    for r in records:
        counts.setdefault(r.method, Counter())[r.outcome] += 1
    methods = list(methods) if methods is not None else sorted(counts, key=lambda m: m.value)
    out = {}
    for m in methods:
        c = counts.get(m)
        n = sum(c.values()) if c else 0
        if n == 0:
            raise EmptyInput(f"no outcome records for {m.value}")
        neutral = Fraction(c[Outcome.NEUTRAL], n)
        out[m] = OutcomeSummary(
            method=m,
            n=n,
            p_left=float(Fraction(c[Outcome.LEFT], n)),
            p_right=float(Fraction(c[Outcome.RIGHT], n)),
            p_neutral=float(neutral),
            decisiveness=float(1 - neutral),
        )
    return out


def gini(values: Sequence[float]) -> float:
    """Mean-absolute-difference Gini, via the sorted-rank identity.

    sum_i sum_j |x_i - x_j| / (2 n^2 mu) equals
    sum_k (2k - n - 1) x_(k) / (n^2 mu) for the ascending order statistics.
    """
    xs = sorted(float(v) for v in values)
    n = len(xs)
    if n == 0:
        raise DegenerateInput("gini of an empty vector")
    if xs[0] < 0:
        raise DegenerateInput("gini is defined for non-negative values only")
    total = math.fsum(xs)
    if total <= 0:
        raise DegenerateInput("gini undefined for zero mean")
    num = math.fsum((2 * k - n - 1) * x for k, x in enumerate(xs, 1))
    return max(num / (n * total), 0.0)


@dataclass(frozen=True)
class GroupStats:
    mean: float
    sd: float
    n: int


@dataclass(frozen=True)
class SatisfactionSummary:
    method: Method | None
    per_group: dict[str, GroupStats]
    overall_mean: float
    overall_sd: float
    gini_over_group_means: float

    def to_dict(self) -> dict:
        return {
            "method": self.method.value if self.method else None,
            "per_group": {g: vars(s) for g, s in sorted(self.per_group.items())},
            "overall_mean": self.overall_mean,
            "overall_sd": self.overall_sd,
            "gini_over_group_means": self.gini_over_group_means,
        }


def _sd(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def likert_summary(scores: Mapping[str, Sequence[int]], method: Method | None = None) -> SatisfactionSummary:
    """Per-group and pooled 7-point Likert statistics (n-1 denominators)."""
    if not scores:
        raise EmptyInput("no groups")
    per_group = {}
    pooled: list[int] = []
    for group in sorted(scores):
        xs = list(scores[group])
        if not xs:
            raise EmptyInput(f"group {group} has no scores")
        for x in xs:
            if isinstance(x, bool) or x != int(x) or not 1 <= x <= 7:
                raise LikertRangeError(f"score {x!r} for {group} outside 1..7")
        per_group[group] = GroupStats(statistics.fmean(xs), _sd(xs), len(xs))
        pooled.extend(xs)
    return SatisfactionSummary(
        method=method,
        per_group=per_group,
        overall_mean=statistics.fmean(pooled),
        overall_sd=_sd(pooled),
        gini_over_group_means=gini([s.mean for s in per_group.values()]),
    )


def parse_likert_log(text: str) -> dict[Method, dict[str, list[int]]]:
    """``method,group,score`` lines into nested score lists."""
    out: dict[Method, dict[str, list[int]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected method,group,score")
        out.setdefault(Method(parts[0]), {}).setdefault(parts[1], []).append(int(parts[2]))
    return out


# -- corpus ------------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase NFC tokens; punctuation dropped except internal hyphens and '+'."""
    tokens = []
    for raw in unicodedata.normalize("NFC", text).lower().split():
        kept = "".join(
            ch for ch in raw if ch in "-+" or not unicodedata.category(ch).startswith(("P", "S"))
        )
        kept = kept.strip("-")
        if kept and kept.strip("+"):
            tokens.append(kept)
    return tokens


def entropy_bits(counts: Iterable[int]) -> float:
    counts = [c for c in counts if c > 0]
    total = sum(counts)
    if total == 0:
        raise EmptyInput("entropy of an empty distribution")
    h = -math.fsum((c / total) * math.log2(c / total) for c in counts)
    return h if h > 0 else 0.0


@dataclass(frozen=True)
class CorpusStats:
    n_prompts: int
    mean_words: float
    median_words: float
    entropy_bits: float
    top_tokens: list[tuple[str, int]]
    term_proportions: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_prompts": self.n_prompts,
            "mean_words": self.mean_words,
            "median_words": self.median_words,
            "entropy_bits": self.entropy_bits,
            "top_tokens": [list(t) for t in self.top_tokens],
            "term_proportions": dict(self.term_proportions),
        }


def corpus_stats(prompts: Sequence[str], terms: Sequence[str] = DEFAULT_TERMS, top: int = 10) -> CorpusStats:
    if not prompts:
        raise EmptyInput("empty corpus")
    lengths = [word_count(p) for p in prompts]
    freq: Counter = Counter()
    present: Counter = Counter()
    normalized_terms = {t: tokenize(t)[0] if tokenize(t) else t.lower() for t in terms}
    for text in prompts:
        toks = tokenize(text)
        freq.update(toks)
        seen = set(toks)
        for term, norm in normalized_terms.items():
            if norm in seen:
                present[term] += 1
    n = len(prompts)
    top_tokens = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    return CorpusStats(
        n_prompts=n,
        mean_words=statistics.fmean(lengths),
        median_words=float(statistics.median(lengths)),
        entropy_bits=entropy_bits(freq.values()) if freq else 0.0,
        top_tokens=top_tokens,
        term_proportions={t: present[t] / n for t in terms},
    )


def ci95(samples: Sequence[float]) -> tuple[float, float]:
    """Normal-approximation 95% interval: (mean, 1.96 * s / sqrt(n))."""
    if len(samples) < 2:
        raise InsufficientData("ci95 needs at least two samples")
    return statistics.fmean(samples), Z95 * statistics.stdev(samples) / math.sqrt(len(samples))
