"""Exception types raised across the package."""


class ViewPlanError(Exception):
    """Base class for all package errors."""


class ZeroRange(ViewPlanError):
    """Observed point coincides with the camera position."""


class DegenerateVertical(ViewPlanError):
    """Landing point lies (almost) straight above or below the camera; yaw is undefined."""


class NonFiniteInput(ViewPlanError, ValueError):
    pass


class RangeTooSmall(ViewPlanError):
    pass


class EmptyGrid(ViewPlanError):
    pass


class RankDeficient(ViewPlanError):
    pass


class EmptyModel(ViewPlanError):
    pass


class WindowTooShort(ViewPlanError):
    pass


class IndexOutOfWindow(ViewPlanError, IndexError):
    pass


class NotInitialized(ViewPlanError):
    pass


class NoInformation(ViewPlanError):
    """Every candidate carries zero information; planners fall back to the forward view."""


class ScenarioError(ViewPlanError, ValueError):
    """Scenario document failed validation."""


class PlannerAbort(ViewPlanError):
    """A planner raised mid-run; carries the partial record list."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records or []
