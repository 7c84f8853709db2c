"""Control laboratory for the KP-II equation on the two-torus."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ContractionError, DomainError, InstabilityError,  # noqa: E402
                     KplabError, NumericalRegimeError, UnobservableError)

__all__ = [
    "__version__", "KplabError", "ConfigurationError", "DomainError", "NumericalRegimeError",
    "UnobservableError", "InstabilityError", "ContractionError",
]
