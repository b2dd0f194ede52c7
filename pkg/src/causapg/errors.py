"""Error types shared across the package.

Every error carries a stable machine-readable ``code`` ("module/condition")
so the command line interface can render diagnostics uniformly and callers
can dispatch without string matching.
"""

from __future__ import annotations


class CausapgError(Exception):
    """Base class for all user-facing errors."""

    code = "causapg/error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


# --- graph store ---------------------------------------------------------

class GraphFormatError(CausapgError):
    code = "graph/format"


class DanglingEndpointError(CausapgError):
    code = "graph/dangling-endpoint"


class UnknownIdError(CausapgError):
    code = "graph/unknown-id"


class DuplicateIdError(CausapgError):
    code = "graph/duplicate-id"


class ValueDomainError(CausapgError):
    code = "graph/value-domain"


# --- causal model --------------------------------------------------------

class UnknownVariableError(CausapgError):
    code = "cdah/unknown-variable"


class DuplicateVariableError(CausapgError):
    code = "cdah/duplicate-variable"


class ValueRuleConflictError(CausapgError):
    code = "cdah/value-rule-conflict"


class CycleError(CausapgError):
    """Raised when an operation would make the causal graph cyclic.

    ``details["witness"]`` holds one offending cycle as a list of variable
    names, first repeated at the end.
    """

    code = "cdah/cycle"


class CdahFormatError(CausapgError):
    code = "cdah/format"


# --- query language ------------------------------------------------------

class QuerySyntaxError(CausapgError):
    """Syntax error with position and the token set that was expected."""

    code = "query/syntax"

    def __init__(self, message: str, line: int, col: int, expected=(), found: str | None = None):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(set(expected)))
        self.found = found
        exp = ""
        if self.expected:
            exp = " (expected " + " | ".join(self.expected) + ")"
        super().__init__(f"line {line}:{col}: {message}{exp}", line=line, col=col)


class UnboundVariableError(CausapgError):
    code = "query/unbound-variable"


class MisplacedOperatorError(CausapgError):
    code = "query/misplaced-operator"


class MisplacedClauseError(CausapgError):
    code = "query/misplaced-clause"


class EvaluationError(CausapgError):
    code = "query/evaluation"


class PathExplosionError(CausapgError):
    code = "query/path-explosion"


class UnsupportedConditionError(CausapgError):
    code = "query/unsupported-condition"


# --- structural equations ------------------------------------------------

class EquationSyntaxError(CausapgError):
    code = "scm/equation-syntax"


class NoiseFormError(CausapgError):
    code = "scm/noise-form"


class MissingEvidenceError(CausapgError):
    code = "scm/missing-evidence"


class UncoveredSymbolError(CausapgError):
    code = "scm/uncovered-symbol"


class NonFiniteResultError(CausapgError):
    code = "scm/non-finite"


class InsufficientDataError(CausapgError):
    code = "scm/insufficient-data"


class RankDeficiencyError(CausapgError):
    code = "scm/rank-deficient"


class NonNumericVariableError(CausapgError):
    code = "scm/non-numeric-variable"


class InvalidAdjustmentSetError(CausapgError):
    code = "scm/invalid-adjustment-set"


# --- transport -----------------------------------------------------------

class AlignmentConflictError(CausapgError):
    code = "transport/alignment-conflict"


class MergeCycleError(CycleError):
    code = "transport/merge-cycle"


# --- maintenance ---------------------------------------------------------

class MissingOriginError(CausapgError):
    code = "maintenance/missing-origin"


class ReceiptLineageError(CausapgError):
    code = "maintenance/receipt-lineage"


# --- fixtures ------------------------------------------------------------

class CohortSpecError(CausapgError):
    code = "fixtures/spec"
