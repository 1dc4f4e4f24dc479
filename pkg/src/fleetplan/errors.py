"""Exception hierarchy shared across the package.

Every error carries a ``context`` string naming the module and operation that
raised it (e.g. ``"domain.validate_instance"``) so CLI output can point at the
failing stage without a traceback.
"""

from __future__ import annotations


class FleetError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, *, context: str = ""):
        self.context = context
        super().__init__(message)

    def __str__(self) -> str:
        base = super().__str__()
        return f"[{self.context}] {base}" if self.context else base


# ---------------------------------------------------------------- domain ----

class DomainError(FleetError):
    """Invalid domain data (parameters, schedules, instance files)."""


class NegativeParameter(DomainError):
    """A physical or economic parameter that must be nonnegative is not."""


class InvalidMatrix(DomainError):
    """A matrix field has wrong shape or out-of-range entries."""


class InvalidInterval(DomainError):
    """A block's interval indices are out of range or inverted."""


class AssumptionViolation(DomainError):
    """No purchasable vehicle/charger combination can serve some block."""


class SchemaError(DomainError):
    """An instance file does not match the canonical schema."""


# ---------------------------------------------------------------- ingest ----

class IngestError(FleetError):
    """Errors raised while reading external schedule data."""


class MissingFile(IngestError):
    """A required feed table is absent."""


class MalformedRow(IngestError):
    """A feed row cannot be parsed; message names file, line and reason."""


class DanglingReference(IngestError):
    """A foreign key in one feed table has no match in its target table."""


class EmptySelection(IngestError):
    """A service-day selection matched no trips/blocks."""


class BlockSpansDayBoundary(IngestError):
    """A vehicle block extends past the end of the service day."""


class ConfigInfeasible(IngestError):
    """Synthetic-generator settings cannot produce a serviceable instance."""


# ----------------------------------------------------------------- model ----

class ModelError(FleetError):
    """Errors raised while building or serializing optimization models."""


class ModelTooLarge(ModelError):
    """Variable count exceeds the configured guard."""


class PreconditionViolated(ModelError):
    """An input solution does not satisfy the constraints it must satisfy."""


class FormatError(ModelError):
    """A model or solution file cannot be parsed."""


# ---------------------------------------------------------------- solver ----

class SolverError(FleetError):
    """Errors raised around the solve layer."""


class SolverNotFound(SolverError):
    """The requested solver backend is not available in this environment."""


class SolverCrashed(SolverError):
    """The solver process died or returned an unusable result."""


# -------------------------------------------------------------- pipeline ----

class PipelineError(FleetError):
    """Errors raised by the cluster/disaggregate workflow."""


class P1Infeasible(PipelineError):
    """The fleet-level sizing problem has no solution at all.

    Validation is meant to reject such instances before any solve; reaching
    this error usually means a grid cap or tariff value rules out service.
    """


class InconclusiveDueToTimeLimit(PipelineError):
    """A bound-chain inequality cannot be certified.

    Raised in strict verification mode when some stage returned only an
    incumbent plus bound instead of a proven optimum.
    """


class GuardExceeded(PipelineError):
    """An instance is too large for the exhaustive oracle."""


# ----------------------------------------------------------------- bench ----

class BenchError(FleetError):
    """Errors raised by the benchmark harness."""


class EmptyInput(BenchError):
    """A sweep or summary was asked to run over nothing."""
