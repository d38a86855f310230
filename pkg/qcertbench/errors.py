"""Exception hierarchy shared by the library and the runner."""


class QCertError(Exception):
    """Base class for every error raised by qcertbench."""


class InvalidInputError(QCertError, ValueError):
    """Malformed numerical input: non-finite entries, bad shapes, invalid states."""


class DimensionMismatchError(InvalidInputError):
    pass


class BudgetExceededError(QCertError):
    """A dense object would exceed one of the configured size budgets."""


class NotCPTError(InvalidInputError):
    pass


class InvalidGroupError(InvalidInputError):
    pass


class StrategyMismatchError(InvalidInputError):
    pass


class DesignCheckError(QCertError):
    """An ensemble failed the numerical unitary-design verification."""


class ProtocolFailure(QCertError):
    """A protocol could not produce a result (e.g. fit non-convergence)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(QCertError):
    """Experiment config failed validation; `field` is the JSON path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
