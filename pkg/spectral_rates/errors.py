"""Exceptions raised by the laboratory."""

from __future__ import annotations


class SpectralRatesError(Exception):
    """Base class of every error raised by this package."""


class ConfigurationError(SpectralRatesError, ValueError):
    """Unsupported or inconsistent parameters."""


class CapabilityError(SpectralRatesError, NotImplementedError):
    """The request is well formed but outside what is implemented."""


class DomainError(SpectralRatesError, ValueError):
    """Input outside the mathematical domain of the operation."""


class ConvergenceError(SpectralRatesError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DisconnectedGraphError(SpectralRatesError):
    """Spectral operations need a connected proximity graph."""

    def __init__(self, n_components: int):
        super().__init__(
            f"graph has {n_components} connected components; spectral operations "
            "require a connected graph"
        )
        self.n_components = n_components


class DegenerateAlignmentError(SpectralRatesError):
    """An eigenvector has no component along the target eigenspace."""


class DegenerateBasisError(SpectralRatesError):
    """A restricted basis is numerically linearly dependent."""


class CoverageError(SpectralRatesError):
    """No sample lies within the extension bandwidth of a query point."""


class StudyAbortedError(SpectralRatesError):
    """Too many failed trials for the study to be meaningful."""
