"""Exception types shared across the package."""


class DissensusError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DissensusError):
    """Invalid run or experiment configuration."""


class DegenerateTopologyError(DissensusError):
    """Query that is undefined on the given (typically empty) graph."""


class InvalidPatchError(DissensusError):
    """A patch subgraph is malformed (e.g. edge endpoint outside its node set)."""


class RuleViolationError(DissensusError):
    """A death/duplication patch failed validation; fatal for the run."""


class SchedulingError(DissensusError):
    """The scheduler produced an edge that is not in the live graph."""


class TraceParseError(DissensusError):
    """A trace file could not be parsed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class StateSpaceBudgetError(DissensusError):
    """The exhaustive search exceeded its configuration budget."""

    def __init__(self, explored: int):
        super().__init__(f"state-space budget exceeded after {explored} configurations")
        self.explored = explored
