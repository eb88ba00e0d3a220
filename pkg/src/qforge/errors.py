"""Error taxonomy shared by all modules.

BudgetError is special: the command-line front end maps it to the
"budget-inconclusive" exit code (2) instead of a plain failure (1).
"""


class QforgeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QforgeError):
    """A value violates a structural invariant (arity, domain range, shape)."""


class ParseError(ValidationError):
    """Syntax error in a text format; carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", col {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class BudgetError(QforgeError):
    """A bounded search or materialization exceeded its configured budget."""
