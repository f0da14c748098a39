"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific errors."""


class OutOfWindow(ToolkitError):
    """A computation needed steps or cells outside the realized window."""


class WindowMismatch(ToolkitError):
    """Two outputs were compared over different time windows."""


class ContradictoryScenery(ToolkitError):
    """A revisited offset was read with two different symbols.

    The offending offset, in the same coordinates the output's position
    trace uses, is stored in ``offset``.
    """

    def __init__(self, offset: int, message: str | None = None):
        self.offset = offset
        super().__init__(message or f"conflicting reads at offset {offset}")


class StraddlingMarker(ToolkitError):
    """A marker occurrence straddles a rewrite boundary."""


class NotFoundInWindow(ToolkitError):
    """An outward search exhausted the window without an admissible time."""


class StitchConflict(ToolkitError):
    """Overlapping block placements disagree during record stitching."""


class NoMarkerInHorizon(ToolkitError):
    """No marker occurrence was found inside the simulated horizon."""
