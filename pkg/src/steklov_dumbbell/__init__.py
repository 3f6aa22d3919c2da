"""Steklov eigenvalues of thin dumbbells: FEM solvers, 1-D limit problems and asymptotic checks."""

__version__ = "0.1.0"

from .errors import NumericalError, SteklovError, ValidationError  # noqa: E402

__all__ = ["SteklovError", "ValidationError", "NumericalError", "__version__"]
