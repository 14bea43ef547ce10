"""Synthetic moderation experiment and engine stress runs.

``run_synthetic`` draws remediation times directly from per-state
exponential distributions. ``run_engine_stress`` pushes the same draws
through a live ``GovernanceEngine`` on a simulated clock; the engine must
add no latency, so both report identical times for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .clock import SECONDS_PER_HOUR, SimClock
from .engine import GovernanceEngine, Incident
from .errors import CommonsError, ConfigError, SimulationFault
from .metrics import ci95
from .rng import ShiftRegister64
from .store import Prompt, compute_id
from .vocab import SURVEY_GROUPS, GovernanceState

STATE_ORDER = (GovernanceState.OPEN, GovernanceState.CURATED, GovernanceState.VETO_ENABLED)
DEFAULT_MEANS = {GovernanceState.OPEN: 36.0, GovernanceState.CURATED: 12.0, GovernanceState.VETO_ENABLED: 6.0}


@dataclass(frozen=True)
class SimConfig:
    means: dict[GovernanceState, float] = field(default_factory=lambda: dict(DEFAULT_MEANS))
    n_incidents: int = 50
    seed: int = 0

    def __post_init__(self):
        means = {GovernanceState.parse(k) if isinstance(k, str) else k: float(v) for k, v in self.means.items()}
        object.__setattr__(self, "means", means)
        for state in STATE_ORDER:
            if state not in means:
                raise ConfigError(f"no mean remediation time for {state.value}")
            if not means[state] > 0:
                raise ConfigError(f"mean for {state.value} must be positive")
        if not isinstance(self.n_incidents, int) or self.n_incidents < 2:
            raise ConfigError("n_incidents must be an integer >= 2")


@dataclass(frozen=True)
class StateResult:
    mean: float
    half_width: float
    samples: tuple[float, ...]


def sample_exponential(mean: float, rng: ShiftRegister64) -> float:
    """Inverse-CDF draw: -mean * ln(1 - u), u uniform on [0, 1)."""
    if not mean > 0:
        raise ConfigError("exponential mean must be positive")
    u = rng.random()
    return -mean * math.log1p(-u) + 0.0


def state_rng(seed: int, state: GovernanceState) -> ShiftRegister64:
    """Per-state substream, so each state's draws are independent of the others."""
    return ShiftRegister64.substream(seed, STATE_ORDER.index(state))


def remediation_times(config: SimConfig, state: GovernanceState) -> list[float]:
    rng = state_rng(config.seed, state)
    mean = config.means[state]
    return [sample_exponential(mean, rng) for _ in range(config.n_incidents)]


def run_synthetic(config: SimConfig, states=STATE_ORDER) -> dict[GovernanceState, StateResult]:
    out = {}
    for state in states:
        state = GovernanceState.parse(state) if isinstance(state, str) else state
        samples = remediation_times(config, state)
        mean, hw = ci95(samples)
        out[state] = StateResult(mean, hw, tuple(samples))
    return out


@dataclass
class StressResult:
    state: GovernanceState
    incidents: list[Incident]
    sampled_hours: list[float]
    measured_hours: list[float]
    sla_hours: int
    sla_breaches: list[str]

    @property
    def breach_fraction(self) -> float:
        return len(self.sla_breaches) / len(self.incidents)

    @property
    def summary(self) -> StateResult:
        mean, hw = ci95(self.measured_hours)
        return StateResult(mean, hw, tuple(self.measured_hours))


def seed_pool(engine: GovernanceEngine, n: int, clock: SimClock, actor: str = "sim") -> list[str]:
    """Merge ``n`` checklist-compliant prompts, built in counter-prompt pairs."""
    locale = "simulation"
    pids: list[str] = []
    i = 0
    try:
        while len(pids) < n:
            drafts = []
            for j, claim in enumerate(("safety", "greenery")):
                group = SURVEY_GROUPS[(i + j) % len(SURVEY_GROUPS)]
                text = f"Synthetic street scene {i + j}: shaded benches and {claim} near the market."
                drafts.append((text, frozenset({group}), claim))
            ids = [compute_id(t, g, locale) for t, g, _ in drafts]
            for (text, groups, claim), counter in zip(drafts, reversed(ids)):
                engine.store.put(
                    Prompt(
                        text=text,
                        author_groups=groups,
                        locale=locale,
                        value_claim=claim,
                        justification="synthetic fixture",
                        counter_prompt_ref=counter,
                    ),
                    actor=actor,
                )
            for pid in ids:
                engine.propose(pid, actor, clock=clock)
            for pid in ids:
                engine.merge(pid, actor, "synthetic fixture", clock=clock)
            pids.extend(ids)
            i += 2
    except CommonsError as exc:
        raise SimulationFault(f"engine refused fixture setup: {exc}") from exc
    return pids[:n]


def run_engine_stress(config: SimConfig, engine: GovernanceEngine, clock: SimClock) -> StressResult:
    """Flag ``n_incidents`` prompts at the current time, then review each at its sampled delay."""
    state = engine.config.state
    sampled = remediation_times(config, state)
    pids = seed_pool(engine, config.n_incidents, clock)
    orgs = sorted(engine.config.recognized_orgs)
    flagger = orgs[0] if orgs else "sim-flagger"

    t0 = clock.now()
    try:
        iids = [engine.flag(pid, flagger, clock=clock).id for pid in pids]
        for idx in sorted(range(len(iids)), key=lambda k: (sampled[k], k)):
            clock.set(t0 + sampled[idx] * SECONDS_PER_HOUR)
            engine.review(iids[idx], "sim-maintainer", "remediate", "synthetic remediation", clock=clock)
    except CommonsError as exc:
        raise SimulationFault(f"engine refused scheduled event: {exc}") from exc

    incidents = [engine.incident(iid) for iid in iids]
    measured = [inc.time_to_remediation for inc in incidents]
    sla = engine.config.appeal_sla_hours
    breaches = [inc.id for inc, hours in zip(incidents, measured) if hours > sla]
    return StressResult(state, incidents, sampled, measured, sla, breaches)
