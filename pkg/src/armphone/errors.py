"""Exception hierarchy shared across the package."""


class ArmPhoneError(Exception):
    """Base class for all package errors."""


class PackError(ArmPhoneError):
    """A screen pack, task pack or profile file failed validation."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvalidTraceError(ArmPhoneError):
    """A touch trace violates its invariants or leaves the screen."""


class CalibrationError(ArmPhoneError):
    pass


class OutOfReachError(ArmPhoneError):
    """A target maps outside the declared arm workspace."""


class ActionError(ArmPhoneError):
    """An action could not be carried out; the agent may reflect and retry.

    ``report`` holds the partial execution report (hardware already executed).
    """

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class KeyboardError(ActionError):
    pass


class GroundingServiceError(ArmPhoneError):
    """Remote perception service unreachable, timed out or returned garbage."""


class PolicyServiceError(ArmPhoneError):
    pass


class DecisionError(ArmPhoneError):
    """A policy response could not be turned into a step record."""


class UnknownActionError(DecisionError):
    pass
