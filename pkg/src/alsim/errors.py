"""Exception hierarchy shared by every module.

Each class carries a stable ``code`` slug; the CLI prints it as the
machine-readable error class on failure, so renaming a slug is a
breaking change for downstream tooling.
"""


class AlsimError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidInputError(AlsimError):
    code = "invalid-input"


class InvalidLedgerError(AlsimError):
    code = "invalid-ledger"


class InvalidLabelError(AlsimError):
    code = "invalid-label"


class DegenerateFeatureError(AlsimError):
    code = "degenerate-feature"


class DataInconsistencyError(AlsimError):
    code = "data-inconsistency"


class ShapeError(AlsimError):
    code = "shape-error"


class DivergenceError(AlsimError):
    code = "divergence"


class BudgetError(AlsimError):
    code = "budget-error"


class InfeasibleInitError(AlsimError):
    code = "infeasible-init"


class InfeasibleSpecError(AlsimError):
    code = "infeasible-spec"


class ParseError(AlsimError):
    code = "parse-error"


class ConfigError(AlsimError):
    code = "config-error"


class FileFormatError(AlsimError):
    code = "file-format-error"


class IOFailure(AlsimError):
    code = "io-error"
