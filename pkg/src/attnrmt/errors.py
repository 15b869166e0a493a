class AttnRMTError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AttnRMTError, ValueError):
    pass


class ShapeError(AttnRMTError, ValueError):
    pass


class PreconditionError(AttnRMTError, ValueError):
    pass


class UnsupportedConfigError(AttnRMTError, ValueError):
    pass


class DivergenceError(AttnRMTError, ArithmeticError):
    """Raised when a forward pass leaves the representable range."""


class ConfigParseError(AttnRMTError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
