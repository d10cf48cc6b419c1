"""Exception hierarchy shared by every araproto module."""


class AraError(Exception):
    """Base class for all errors raised by araproto."""


class SpecParseError(AraError):
    """The specification file is not well-formed XML."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SpecSchemaError(AraError):
    """A mandatory section of the specification file is missing."""

    def __init__(self, section, message=None):
        self.section = section
        super().__init__(message or f"missing mandatory section <{section}>")


class SpecValueError(AraError, ValueError):
    """An attribute value could not be interpreted."""


class ContractError(AraError, ValueError):
    """A precondition of an operation was violated by the caller."""


class CapacityError(AraError):
    """Not enough buffer banks to satisfy a demand."""

    def __init__(self, message, demand=None, available=None):
        self.demand = demand
        self.available = available
        super().__init__(message)


class ProtocolError(AraError):
    """An accelerator API call arrived in an illegal state."""


class TraceError(AraError):
    """A workload trace is malformed or violates the API protocol."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(AraError):
    """The simulation inputs are inconsistent with each other."""


class SimulationError(AraError):
    """The simulation could not make progress."""

    def __init__(self, message, blocked=()):
        self.blocked = tuple(blocked)
        super().__init__(message)


class PlanError(AraError):
    """A sweep plan is invalid or too large."""


class ReportError(AraError):
    """A sweep table cannot be summarized."""
