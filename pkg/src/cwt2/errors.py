class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the config file when known."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        self.bare = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class BlowUpError(NumericalError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite field at step {step}")


class DomainError(ValueError):
    pass
