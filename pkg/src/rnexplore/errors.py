class ConfigError(ValueError):
    """Invalid parameter combination in a scenario or component config."""


class ParseError(ValueError):
    """Malformed environment or scenario text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProtocolError(RuntimeError):
    """A planner event arrived in a state where it is not allowed."""
