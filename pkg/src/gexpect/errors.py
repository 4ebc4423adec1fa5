"""Exception hierarchy shared by every gexpect module."""


class GExpectError(Exception):
    pass


class InputError(GExpectError, ValueError):
    """Malformed or dimension-incompatible input."""


class ConfigurationError(GExpectError, ValueError):
    """Solver or simulation settings that cannot be honoured (CFL, grid size, ...)."""


class PreconditionError(GExpectError):
    """An operation's mathematical precondition does not hold for the input."""


class NumericalFailure(GExpectError, ArithmeticError):
    """Non-finite values appeared while time stepping."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class PayoffSyntaxError(InputError):
    """Parse failure in a payoff expression; `offset` is a byte offset into the UTF-8 source."""

    def __init__(self, message, offset=0, source=""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} (at byte {offset})")
