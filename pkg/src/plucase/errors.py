"""Exception hierarchy shared by all plucase modules."""


class PlucaseError(Exception):
    """Base class for every error raised by plucase."""


class RucmSyntaxError(PlucaseError):
    """Malformed `.rucm` text. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DanglingReference(PlucaseError):
    """An RFS or include names something that does not exist."""


class SchemaError(PlucaseError):
    """A JSON/CSV artifact does not follow its documented schema."""


class UnknownReference(PlucaseError):
    """A diagram include or dependency points at a missing element."""


class ModelMismatch(PlucaseError):
    """Two decision models were made against different product line models."""


class InvalidDecisions(PlucaseError):
    """Decisions violate the product line constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class MalformedFlow(PlucaseError):
    """A flow cannot be turned into a scenario graph."""


class IncludeCycle(PlucaseError):
    """A use case transitively includes itself."""


class AmbiguousTrace(PlucaseError):
    """Trace links cannot pick a single scenario for a test case."""

    def __init__(self, test_id, candidates):
        self.test_id = test_id
        self.candidates = list(candidates)
        super().__init__(
            f"test {test_id!r} matches {len(self.candidates)} scenarios "
            f"({', '.join(self.candidates)}); add an overrides.csv entry"
        )


class EmptyInput(PlucaseError):
    """An aggregation received nothing to aggregate."""


class HistorySchemaError(SchemaError):
    """history.csv is malformed or out of chronological order."""


class UnknownTest(PlucaseError):
    """An execution record names a test with no feature/trace data."""


class ConstantOutcome(PlucaseError):
    """All training outcomes are identical; logistic fit is undefined."""


class NoFailures(PlucaseError):
    """Ranking metrics are undefined when nothing failed."""


class MissingPrecondition(UserWarning):
    """A variant in a multi-variant selection has no precondition text."""


class SeparationWarning(UserWarning):
    """Logistic fit did not converge or produced extreme coefficients."""
