"""Regenerate the shipped fixtures under fixtures/.

    python scripts/make_fixtures.py

figure3.log      100 trials per method encoding the target outcome shares
benchmark.jsonl  100 contested-choice items referenced by figure3.log
satisfaction.csv 7-point Likert scores per group for M0, M2, M3, found by
                 local search so pooled mean/sd and the Gini over group
                 means land on the target values

Output is deterministic.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from pathlib import Path

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

# (left, right, neutral) counts out of 100
OUTCOME_COUNTS = {
    "M0": (38, 38, 24),
    "M1": (25, 25, 50),
    "M2": (26, 26, 48),
    "M3": (24, 24, 52),
    "M4": (25, 24, 51),
}

GROUPS = ("seniors", "women", "ethnic_minority", "disability", "lgbtq", "religious_minority")

# method -> (pooled mean, pooled sd, gini over group means or None)
LIKERT_TARGETS = {
    "M0": (4.35, 0.86, 0.096),
    "M2": (4.92, 0.44, 0.043),
    "M3": (5.48, 0.66, None),
}
PER_GROUP = 20
MIN_N, MAX_N = 8, 40

TOPICS = [
    ("Rue Saint-Denis", "convert a parking lane to a protected bike lane", "keep all parking and widen car lanes", "a bike lane on one side with delivery bays kept"),
    ("Parc Jarry", "add floodlit sports courts", "leave the lawn untouched", "add courts with lights off after 21h"),
    ("Avenue du Mont-Royal", "pedestrianize the avenue year-round", "reopen it fully to traffic", "pedestrianize summer weekends only"),
    ("Marché Jean-Talon", "remove the surface parking for a plaza", "expand the parking structure", "keep half the parking and green the rest"),
    ("Boulevard Saint-Laurent", "replace a bus lane with a tram", "restore the general traffic lane", "keep the bus lane and add signal priority"),
    ("Verdun waterfront", "open a supervised swimming beach", "keep the shore as protected habitat", "a small beach with a restored wetland beside it"),
    ("Côte-des-Neiges", "build a mid-rise social housing block on a lot", "keep the lot as a community garden", "housing with a rooftop garden"),
    ("Hochelaga alleys", "green every alley and close them to cars", "keep alleys open for cars and garbage trucks", "green alleys with timed vehicle access"),
    ("Griffintown", "ban cars from the central streets", "add a multi-storey car park", "car-light streets with shared loading zones"),
    ("Old Port", "remove cruise-ship berths for a park", "expand the cruise terminal", "keep the berths and add a public promenade"),
]


def write_figure3() -> None:
    lines = ["# method,item_id,outcome  (100 trials per method)"]
    for method, (left, right, neutral) in OUTCOME_COUNTS.items():
        labels = ["Left"] * left + ["Right"] * right + ["Neutral"] * neutral
        random.Random(f"figure3-{method}").shuffle(labels)
        lines += [f"{method},item-{i:03d},{label}" for i, label in enumerate(labels, 1)]
    (FIXTURES / "figure3.log").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_benchmark() -> None:
    rows = []
    for i in range(1, 101):
        place, left, right, neutral = TOPICS[(i - 1) % len(TOPICS)]
        year = 2026 + (i - 1) // len(TOPICS)
        rows.append(
            {
                "item_id": f"item-{i:03d}",
                "text": f"Scenario {i} ({place}, {year} budget cycle): which option should the borough recommend?",
                "left": left,
                "right": right,
                "neutral": neutral,
            }
        )
    with open(FIXTURES / "benchmark.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _gini(xs):
    n, total = len(xs), sum(xs)
    return sum(abs(a - b) for a in xs for b in xs) / (2 * n * total)


class _Scores:
    """Integer score lists with running sums for cheap loss updates."""

    def __init__(self, groups):
        self.groups = groups
        self.sums = [sum(g) for g in groups]
        self.sq = sum(x * x for g in groups for x in g)

    def stats(self):
        n = sum(len(g) for g in self.groups)
        total = sum(self.sums)
        mean = total / n
        sd = ((self.sq - total * total / n) / (n - 1)) ** 0.5
        means = [s / len(g) for s, g in zip(self.sums, self.groups)]
        return mean, sd, _gini(means)

    def set(self, g, i, new):
        old = self.groups[g][i]
        self.groups[g][i] = new
        self.sums[g] += new - old
        self.sq += new * new - old * old
        return old

    def append(self, g, x):
        self.groups[g].append(x)
        self.sums[g] += x
        self.sq += x * x

    def pop(self, g):
        x = self.groups[g].pop()
        self.sums[g] -= x
        self.sq -= x * x
        return x


def _loss(stats, target):
    mean, sd, gini = stats
    mean_t, sd_t, gini_t = target
    # with no dispersion target, keep group means plausibly close
    gini_t = 0.03 if gini_t is None else gini_t
    return (mean - mean_t) ** 2 + (sd - sd_t) ** 2 + (gini - gini_t) ** 2


def search_likert(target, seed) -> list[list[int]]:
    """Simulated annealing over score tweaks and group-size changes.

    Group sizes vary (MIN_N..MAX_N reviewers): pooled sd weights groups by
    size while the Gini weights group means equally, and with integer scores
    some target pairs are unreachable with equal sizes.
    """
    rng = random.Random(seed)
    mean_t = target[0]
    groups = [[min(7, max(1, round(mean_t + rng.gauss(0, 0.7)))) for _ in range(PER_GROUP)] for _ in GROUPS]
    state = _Scores(groups)
    loss = _loss(state.stats(), target)
    best, best_groups = loss, [list(g) for g in groups]
    temp = 1e-3
    for _ in range(400_000):
        g = rng.randrange(len(groups))
        kind = rng.random()
        if kind < 0.8:
            i = rng.randrange(len(groups[g]))
            new = groups[g][i] + rng.choice((-1, 1))
            if not 1 <= new <= 7:
                continue
            old = state.set(g, i, new)
            undo = lambda: state.set(g, i, old)  # noqa: E731
        elif kind < 0.9:
            if len(groups[g]) >= MAX_N:
                continue
            state.append(g, groups[g][rng.randrange(len(groups[g]))])
            undo = lambda: state.pop(g)  # noqa: E731
        else:
            if len(groups[g]) <= MIN_N:
                continue
            x = state.pop(g)
            undo = lambda: state.append(g, x)  # noqa: E731
        cand = _loss(state.stats(), target)
        if cand <= loss or rng.random() < math.exp((loss - cand) / temp):
            loss = cand
            if loss < best:
                best, best_groups = loss, [list(x) for x in groups]
        else:
            undo()
        temp = max(temp * 0.99997, 1e-10)
    for g in best_groups:
        g.sort()
    return best_groups


def write_satisfaction() -> None:
    lines = ["# method,group,score  (7-point Likert)"]
    for m, (method, target) in enumerate(LIKERT_TARGETS.items()):
        groups = search_likert(target, seed=1000 + m)
        pooled = [x for g in groups for x in g]
        means = [statistics.fmean(g) for g in groups]
        sizes = [len(g) for g in groups]
        print(
            f"{method}: n={sizes} mean={statistics.fmean(pooled):.4f} sd={statistics.stdev(pooled):.4f} "
            f"gini={_gini(means):.4f} group means={[round(x, 2) for x in means]}"
        )
        for name, scores in zip(GROUPS, groups):
            lines += [f"{method},{name},{s}" for s in scores]
    (FIXTURES / "satisfaction.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    FIXTURES.mkdir(exist_ok=True)
    write_figure3()
    write_benchmark()
    write_satisfaction()
