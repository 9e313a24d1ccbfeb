"""Exception hierarchy shared by the library and the CLI."""


class WalrasianError(Exception):
    """Base class for all errors raised by this package."""


class InputError(WalrasianError, ValueError):
    """Malformed or inconsistent model input (maps to CLI exit code 1)."""


class UnsupportedFamilyError(InputError):
    """Operation is not defined for the given utility family."""


class DegenerateUtilityError(InputError):
    """A utility specification cannot produce a nonzero (super)gradient."""


class NumericalFailure(WalrasianError):
    """A solver did not reach its tolerance (maps to CLI exit code 2).

    ``incumbent`` carries the best point found, when there is one.
    """

    def __init__(self, message, incumbent=None, value=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.value = value


class InfeasibleError(NumericalFailure):
    """The region handed to a solver appears to be empty."""


class ConsistencyError(NumericalFailure):
    """Two routes that must agree produced contradicting answers."""
