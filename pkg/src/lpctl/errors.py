"""Exception hierarchy shared by all modules.

The CLI maps each class onto a distinct exit code.
"""


class LpctlError(Exception):
    """Base class for all errors raised by the package."""


class InputError(LpctlError):
    """Malformed user input: model files, formulas, programs, strategies."""


class ModelError(InputError):
    """A model violates an invariant (distribution sum, undeclared state, ...)."""


class FormulaSyntaxError(InputError):
    """A formula does not match the grammar."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)
        self.position = position


class FormulaClassError(InputError):
    """A formula is outside the fragment an operation accepts."""


class NotFlatError(FormulaClassError):
    """The refutation loop needs a flat formula (no nested P operators)."""


class StrictComparisonError(FormulaClassError):
    """The refutation loop needs a non-strict formula."""


class ResourceError(LpctlError):
    """A configured cap (enumeration size, rounds, states, actions) was exceeded."""


class SolverError(LpctlError):
    """The external solver is missing or produced output we cannot read."""
