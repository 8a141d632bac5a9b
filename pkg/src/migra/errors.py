"""Exception hierarchy shared across the package.

Every error raised on a documented failure path derives from
:class:`MigraError`, so callers can catch one type at pipeline level
while tests assert the precise subclass.
"""

from __future__ import annotations


class MigraError(Exception):
    """Base class for all package-specific errors."""


class ParseError(MigraError):
    """A CSV file could not be parsed; carries the 1-based line number."""

    def __init__(self, path: str, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class UnknownZone(MigraError):
    """A zone id does not exist in the zone table."""


class UnknownFeature(MigraError):
    """A feature column name does not exist in the zone table or pair set."""


class NegativeCount(MigraError):
    """A flow entry carries a negative migrant count."""


class DiagonalEntry(MigraError):
    """A flow entry maps a zone onto itself; within-zone moves are rejected."""


class ZoneUniverseMismatch(MigraError):
    """Two matrices (or a matrix and a pair set) disagree on the zone universe."""


class MissingDistance(MigraError):
    """A pair needed by a distance-binned metric is absent from the pair set."""


class DegenerateTruth(MigraError):
    """The ground-truth values are constant, so r-squared is undefined."""


class AllZeroPopulations(MigraError):
    """Every zone population is zero; the per-capita slope is undefined."""


class ZeroRow(MigraError):
    """All destination kernels for an origin are zero; the row cannot be normalized."""


class ZeroDistance(MigraError):
    """A zero inter-zone distance under a power-law kernel (pole at d = 0)."""


class CalibrationFailed(MigraError):
    """No finite objective value anywhere in the parameter search range."""


class InvalidConfig(MigraError):
    """A configuration value is out of its documented range."""


class NoPositives(MigraError):
    """Downsampling requires at least one observed (non-zero) flow row."""


class SampledSetError(MigraError):
    """A downsampled observation set was passed where a full one is required."""


class EmptyBatch(MigraError):
    """A loss was evaluated on an empty batch."""


class DegenerateBatch(MigraError):
    """Targets and predictions in a batch all sum to zero; the overlap
    gradient has no defined value there."""


class NonFiniteLoss(MigraError):
    """Training produced a NaN or infinite loss; aborts with diagnostics."""


class SchemaMismatch(MigraError):
    """A model was applied to observations with a different feature layout."""


class AllTrialsFailed(MigraError):
    """Every hyperparameter trial raised; no model could be selected."""


class InsufficientYears(MigraError):
    """Fewer than three years of flow data; no train/validation/test split exists."""
