"""Exception hierarchy shared by the numerical library and the runner."""


class XlMimoError(ValueError):
    """Base class for every error raised by the library."""


class GeometryError(XlMimoError):
    pass


class BoundaryError(XlMimoError):
    """A boundary-distance search could not bracket its root."""


class ChannelError(XlMimoError):
    pass


class CodebookError(XlMimoError):
    pass


class TrainingError(XlMimoError):
    pass


class DamError(XlMimoError):
    pass


class ConfigError(XlMimoError):
    """Scenario file is unreadable or fails validation."""

    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = errors or []
