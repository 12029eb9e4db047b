"""Exception hierarchy shared by all modules."""


class OcclpError(Exception):
    """Base class for every error raised by this package."""


class ModelError(OcclpError, ValueError):
    pass


class EmptyInput(ModelError):
    pass


class DuplicatePair(ModelError):
    def __init__(self, state, action):
        super().__init__(f"duplicate (state, action) pair ({state!r}, {action!r})")
        self.state = state
        self.action = action


class DanglingTarget(ModelError):
    def __init__(self, state, action, target):
        super().__init__(
            f"DanglingTarget: ({state!r}, {action!r}) -> {target!r} is not a listed state"
        )
        self.state = state
        self.action = action
        self.target = target


class NoAdmissibleAction(ModelError):
    """Raised when some states have an empty admissible action set."""

    def __init__(self, states):
        self.states = list(states)
        shown = ", ".join(map(str, self.states[:10]))
        more = "" if len(self.states) <= 10 else f" (+{len(self.states) - 10} more)"
        super().__init__(f"NoAdmissibleAction at {len(self.states)} state(s): {shown}{more}")


class ParseError(ModelError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MaxIterExceeded(OcclpError, RuntimeError):
    pass


class InadmissibleControl(OcclpError, ValueError):
    pass


class BasisMismatch(OcclpError, ValueError):
    pass


class EmptySet(OcclpError, ValueError):
    pass


class NumericalFailure(OcclpError, ArithmeticError):
    pass


class Infeasible(OcclpError, RuntimeError):
    pass


class SigmaMismatch(OcclpError, ValueError):
    pass


class InternalError(OcclpError, AssertionError):
    pass


class BadConfig(OcclpError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
