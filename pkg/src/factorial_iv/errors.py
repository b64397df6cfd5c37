"""Exception hierarchy.

CLI exit codes key off these classes: ``ValidationError`` maps to 2,
``IdentificationError`` to 3 and ``VerificationFailure`` to 4.
"""

from __future__ import annotations


class FactorialIVError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(FactorialIVError, ValueError):
    """Input data or configuration does not satisfy its schema."""


class SchemaError(ValidationError):
    """A raw row has a missing or non-binary field."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SpecError(ValidationError):
    """A population spec violates its compliance mode or is malformed."""


class IdentificationError(FactorialIVError):
    """A quantity is not identified from the supplied moments."""


class MissingCellError(IdentificationError):
    """An instrument cell required by an estimand has zero mass."""

    def __init__(self, cell: tuple[int, int]):
        self.cell = cell
        super().__init__(f"instrument cell (z_a={cell[0]}, z_b={cell[1]}) is empty")


class WeakFirstStageError(IdentificationError):
    """A first-stage contrast is zero within tolerance."""

    def __init__(self, message: str, denominator: float):
        self.denominator = denominator
        super().__init__(f"{message} (first-stage contrast = {denominator:.3g})")


class AssumptionViolation(IdentificationError):
    """Data contradict a maintained assumption (e.g. one-sided noncompliance)."""


class InconsistencyError(AssumptionViolation):
    """An auxiliary restriction is refuted by the data."""


class PreconditionError(FactorialIVError):
    """A verification was requested on a population outside its assumptions."""


class VerificationFailure(FactorialIVError):
    """At least one theorem check failed."""
