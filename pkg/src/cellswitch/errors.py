"""Exception types shared across the package."""


class CellSwitchError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CellSwitchError, ValueError):
    """Invalid scenario or algorithm configuration."""


class FileFormatError(CellSwitchError, ValueError):
    """Malformed input file (G matrix, demand grid, front CSV)."""


class InfeasibleScenarioError(CellSwitchError):
    """No topology satisfies the coverage constraint."""


class NonConvergenceError(CellSwitchError):
    """Fixed-point iteration exceeded its sweep cap.

    The last iterate is kept on ``last`` so callers can inspect it.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class VolumeSearchError(CellSwitchError):
    """Requested demand volume (capacity or saturation) is unreachable."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell
