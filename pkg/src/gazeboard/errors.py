"""Exception hierarchy shared across the package."""


class GazeboardError(Exception):
    """Base class for all package errors."""


class NotFound(GazeboardError):
    pass


class DegenerateGeometry(GazeboardError):
    pass


class DegenerateConfiguration(GazeboardError):
    pass


class PointAtInfinity(GazeboardError):
    pass


class InsufficientData(GazeboardError):
    pass


class InvalidIntrinsics(GazeboardError):
    pass


class ParseError(GazeboardError):
    def __init__(self, message, line_no=None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no


class DictionaryExhausted(GazeboardError):
    pass


class ConfigError(GazeboardError):
    pass


class ProtocolViolation(GazeboardError):
    """Illegal (phase, input) pair; non-fatal, session state is unchanged."""

    def __init__(self, actor, phase, kind):
        super().__init__(f"input '{kind}' from '{actor}' is illegal in phase {phase}")
        self.actor = actor
        self.phase = phase
        self.kind = kind


class ReplayError(GazeboardError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"event {index}: {message}")
        self.index = index


class DriverTimeout(GazeboardError):
    pass


class StorageError(GazeboardError):
    pass


class ValidationError(GazeboardError):
    pass


class EmptyExport(GazeboardError):
    pass


class InsufficientParticipants(GazeboardError):
    pass


class DegenerateInput(GazeboardError):
    pass
