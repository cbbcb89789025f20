"""Exception hierarchy shared by the solver, the localizer and the file layer."""

from __future__ import annotations


class LeakTreeError(Exception):
    """Base class for every error raised by this package."""


class InvalidGeometryError(LeakTreeError, ValueError):
    pass


class BoundaryDerivativeError(LeakTreeError, ValueError):
    """Derivative requested exactly on a friction-regime seam (Re = 2000 or 4000)."""


class InvalidNetworkError(LeakTreeError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PreconditionError(LeakTreeError, ValueError):
    pass


class InfeasiblePressureError(LeakTreeError):
    """A solved or inferred pressure head is non-positive."""


class BracketError(LeakTreeError):
    pass


class CoverageError(LeakTreeError, ValueError):
    """Measurements do not cover every leaf of the network."""


class DegenerateDenominatorError(LeakTreeError):
    """Head-loss gradients on both sides of the leak are indistinguishable."""


class InsufficientExcitationError(LeakTreeError, ValueError):
    """Two snapshots are too similar to separate the leak exponent and constant."""


class AmbiguousSubtreeError(LeakTreeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ScenarioError(LeakTreeError, ValueError):
    """Parse or validation failure in a scenario or measurement file.

    ``problems`` holds one ``"location: message"`` string per defect.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


class NoLeakDetectedError(LeakTreeError):
    """Leaf inflows balance within the detection threshold."""


class OutOfRangeError(LeakTreeError):
    """Noiseless estimate falls outside the identified pipe."""
