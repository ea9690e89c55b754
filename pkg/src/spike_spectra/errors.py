"""Exception types shared across the package."""


class SpikeSpectraError(Exception):
    """Base class for all package errors."""


class OrderingError(SpikeSpectraError):
    """Eigenvalue input violates the required descending order."""


class OrthogonalityError(SpikeSpectraError):
    """A matrix or vector fails an orthogonality / normalization check."""


class DomainError(SpikeSpectraError):
    """An argument lies outside the mathematical domain of the operation."""


class RankError(SpikeSpectraError):
    """A matrix does not have the required rank."""


class ShapeError(SpikeSpectraError):
    """Array dimensions are inconsistent with the operation."""


class NumericalError(SpikeSpectraError):
    """A numerical routine failed (non-convergence, singular factorization)."""


class FixedPointError(NumericalError):
    """The Stieltjes-transform fixed-point iteration did not converge."""


class EdgeError(NumericalError):
    """The bulk-edge stationarity equation has no root in the bracket."""


class IterationCapError(SpikeSpectraError):
    """The threshold iteration exceeded its iteration cap."""


class DegenerateSpectrumError(SpikeSpectraError):
    """The sample spectrum is numerically zero; estimation is meaningless."""


class ConfigError(SpikeSpectraError):
    """An experiment or model configuration is invalid."""
