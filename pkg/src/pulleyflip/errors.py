"""Error types raised by the planners and the simulator.

Each error carries a short machine-readable ``name`` so the CLI can report
the failure cause without parsing messages.
"""


class PlannerError(Exception):
    """Base class for every recoverable planning or simulation failure."""

    name = "PlannerError"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.name)
        self.details = details


class NoInitialPose(PlannerError):
    name = "NoInitialPose"


class NoInitialGrasp(PlannerError):
    name = "NoInitialGrasp"


class NoFeasiblePair(PlannerError):
    name = "NoFeasiblePair"


class MotionPlanFailed(PlannerError):
    name = "MotionPlanFailed"


class DegenerateBatch(PlannerError):
    name = "DegenerateBatch"


class InsufficientHistory(PlannerError):
    name = "InsufficientHistory"


class StalledLift(PlannerError):
    name = "StalledLift"


class LiftFailed(PlannerError):
    name = "LiftFailed"


class OverLift(PlannerError):
    name = "OverLift"


class InfeasibleInstant(PlannerError):
    name = "InfeasibleInstant"

    def __init__(self, message: str = "", rotation: float = float("nan"), **details):
        super().__init__(message, rotation=rotation, **details)
        self.rotation = rotation


class TumbleKinematicsFailed(PlannerError):
    name = "TumbleKinematicsFailed"


class ScenarioError(Exception):
    """Raised when a scenario file cannot be parsed into a Scenario."""
