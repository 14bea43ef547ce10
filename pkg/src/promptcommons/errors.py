"""Exception hierarchy shared by every module.

The CLI maps each class to exactly one exit code via ``exit_code``.
"""

from __future__ import annotations


class CommonsError(Exception):
    """Base class for all library errors."""

    exit_code = 1


# prompt_store
class InvalidPrompt(CommonsError):
    pass


class VocabularyError(CommonsError):
    pass


class LicenceError(CommonsError):
    pass


class NotFound(CommonsError):
    pass


class AuditError(CommonsError):
    pass


class RepositoryError(CommonsError):
    """Missing or malformed repository on disk."""


# governance_engine
class GovernanceRefused(CommonsError):
    """A governance transition was refused."""

    exit_code = 3


class IllegalTransition(GovernanceRefused):
    pass


class ChecklistFailed(GovernanceRefused):
    def __init__(self, report):
        self.report = report
        rules = ", ".join(sorted({f.rule.value for f in report.errors}))
        super().__init__(f"checklist rejected {report.prompt_id}: {rules}")


class QuotaBlocked(GovernanceRefused):
    def __init__(self, groups):
        self.groups = tuple(sorted(groups))
        super().__init__(f"merge would drop quota-satisfied groups: {', '.join(self.groups)}")


class LadderViolation(GovernanceRefused):
    pass


class SuspendedActor(GovernanceRefused):
    pass


class ConfigError(CommonsError):
    pass


# sampler_composer
class EmptyPool(CommonsError):
    pass


class MissingFixture(CommonsError):
    pass


class AdapterUnavailable(CommonsError):
    pass


# metrics
class EmptyInput(CommonsError, ValueError):
    pass


class DegenerateInput(CommonsError, ValueError):
    pass


class LikertRangeError(CommonsError, ValueError):
    pass


class InsufficientData(CommonsError, ValueError):
    pass


# incident_simulator
class SimulationFault(CommonsError):
    """The engine refused an event the simulator scheduled."""
