"""Exception types shared across the package."""


class EntwaveError(Exception):
    pass


class DomainError(EntwaveError, ValueError):
    """An input lies outside the domain of an operation."""


class StabilityError(EntwaveError, ValueError):
    """A time step violates the explicit-scheme stability bound."""


class StateError(EntwaveError, RuntimeError):
    """A state left its admissible set (e.g. a field outside [0, 1])."""


class CapacityError(EntwaveError, ValueError):
    pass


class NoFrontError(EntwaveError, RuntimeError):
    pass


class NonTerminationError(EntwaveError, ValueError):
    pass


class ValidationError(EntwaveError, ValueError):
    """Invalid run configuration. ``problems`` lists every offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
