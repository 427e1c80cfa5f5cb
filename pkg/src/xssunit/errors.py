"""Exception hierarchy shared by every xssunit module."""


class XssUnitError(Exception):
    """Base class for all errors raised by xssunit."""


class MachineError(XssUnitError):
    """A state machine (built-in or loaded from config) is malformed."""


class PathWithoutPayloadSlot(MachineError):
    pass


class MultiplePayloadSlots(MachineError):
    pass


class UnknownEncoder(XssUnitError, KeyError):
    def __str__(self) -> str:
        return f"unknown encoder: {self.args[0]!r}"


class PlaceholderMissing(XssUnitError):
    pass


class PlaceholderDuplicated(XssUnitError):
    pass


class TemplateError(XssUnitError):
    """A sink template or its sidecar config is invalid."""
